//! Closed-form neural tangent kernels of infinitely wide, bias-free ReLU
//! networks on the unit sphere.
//!
//! The crate covers the whole path from raw data to predictions:
//!
//! - [`geometry`]: sphere projections, Gram matrices, CSV ingestion.
//! - [`kernel`]: the arc-cosine recursion, `Theta_inf`, its normalized form
//!   `Theta_bar`, the correlation sequence `rho` and the `eta` sequence.
//! - [`regression`]: the infinite-width predictors `f_inf` and `f_tau`.
//! - [`network`]: finite-width networks, their empirical NTK and gradient descent.
//! - [`analysis`] and [`render`]: depth sweeps and their CSV/SVG output.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.
//!
//! ```
//! use relu_ntk::{gram, project_canonical, theta_bar, RawDataset};
//! use ndarray::array;
//!
//! let raw = RawDataset::new(array![[3.0, 4.0], [1.0, 0.0]], array![1.0, -1.0])?;
//! let ds = project_canonical(&raw)?;
//! let k = theta_bar(gram(&ds).view(), 3)?;
//! assert!((k.entries()[[0, 0]] - 1.0_f64).abs() < 1e-12);
//! # Ok::<(), relu_ntk::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod network;
pub mod regression;
pub mod render;
pub mod scalar;

pub use analysis::{depth_sweep, psi, rde_bound_check, BoundReport, DepthTrace};
pub use error::{Error, Result};
pub use geometry::{
    cross_gram, gram, parse_csv, project_canonical, project_stereographic, read_csv, Projection, RawDataset,
    SphereDataset,
};
pub use kernel::{
    eta_sequence, h_arc, h_arc_prime, kernel_criteria_check, kernel_matrix, rho_matrix, sigma_dot, theta_bar,
    theta_bar_step, theta_infty, CriteriaReport, KernelKind, KernelMatrix, KernelSequence, ScalarKernelState,
};
pub use network::{seed_averaged_ntk, EmpiricalNtk, Mlp};
pub use regression::{fit, RegressionSolution};
pub use render::criteria_report_render;
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type RawDatasetF64 = RawDataset<f64>;
pub type SphereDatasetF64 = SphereDataset<f64>;
pub type KernelMatrixF64 = KernelMatrix<f64>;
pub type RegressionSolutionF64 = RegressionSolution<f64>;
pub type MlpF64 = Mlp<f64>;
pub type EmpiricalNtkF64 = EmpiricalNtk<f64>;
pub type DepthTraceF64 = DepthTrace<f64>;
pub type CriteriaReportF64 = CriteriaReport<f64>;
pub type BoundReportF64 = BoundReport<f64>;
