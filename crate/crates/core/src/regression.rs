//! Kernel regression predictors for infinitely wide networks.
//!
//! Training an infinitely wide network with gradient flow on the squared
//! loss is kernel gradient flow on the training outputs,
//! `dy/dt = -K (y - y*)`. Its limit is the ridge-less interpolant
//! `f_inf(x) = f_0(x) + k_x^T K^-1 (y* - y_0)`, and the state at time `tau`
//! is a spectral filter of the initial residual: every eigen-direction of
//! `K` decays as `exp(-lambda tau)`.
//!
//! Both predictors share one symmetric eigendecomposition of `K`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, SymmetricEigen};
use crate::scalar::Scalar;

/// A fitted kernel regression problem.
#[derive(Debug, Clone)]
pub struct RegressionSolution<T> {
    alpha: Array1<T>,
    eigen: SymmetricEigen<T>,
    residual0: Array1<T>,
    f0_train: Array1<T>,
    /// `V^T (y_0 - y*)`, the initial residual in the eigenbasis.
    spectral_residual: Array1<T>,
}

/// Solves `K alpha = y* - y0` through the eigendecomposition of `K`.
///
/// Fails with [`Error::SingularKernel`] when the smallest eigenvalue is not
/// above `n * eps * lambda_max`.
pub fn fit<T: Scalar>(
    kernel: ArrayView2<'_, T>,
    y_star: ArrayView1<'_, T>,
    y0: ArrayView1<'_, T>,
) -> Result<RegressionSolution<T>> {
    let n = kernel.nrows();
    for len in [y_star.len(), y0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let eigen = symmetric_eigen(kernel)?;
    let lambda_max = eigen.max_eigenvalue();
    let lambda_min = eigen.min_eigenvalue();
    let floor = T::from_usize_lossy(n) * T::epsilon() * lambda_max.abs();
    if !(lambda_min > floor) {
        return Err(Error::SingularKernel {
            smallest_eigenvalue: lambda_min.as_f64(),
        });
    }
    let residual0 = &y0 - &y_star;
    let spectral_residual = eigen.eigenvectors.t().dot(&residual0);
    let weighted = Array1::from_shape_fn(n, |k| -spectral_residual[k] / eigen.eigenvalues[k]);
    let alpha = eigen.eigenvectors.dot(&weighted);
    Ok(RegressionSolution {
        alpha,
        eigen,
        residual0,
        f0_train: y0.to_owned(),
        spectral_residual,
    })
}

impl<T: Scalar> RegressionSolution<T> {
    /// `K^-1 (y* - y0)`.
    pub fn alpha(&self) -> ArrayView1<'_, T> {
        self.alpha.view()
    }

    /// Kernel eigenvalues, descending.
    pub fn eigenvalues(&self) -> ArrayView1<'_, T> {
        self.eigen.eigenvalues.view()
    }

    pub fn eigenvectors(&self) -> ArrayView2<'_, T> {
        self.eigen.eigenvectors.view()
    }

    /// `y0 - y*`.
    pub fn residual0(&self) -> ArrayView1<'_, T> {
        self.residual0.view()
    }

    pub fn f0_train(&self) -> ArrayView1<'_, T> {
        self.f0_train.view()
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn condition_number(&self) -> T {
        self.eigen.max_eigenvalue() / self.eigen.min_eigenvalue()
    }

    fn check_kx(&self, kx: &ArrayView1<'_, T>) -> Result<()> {
        if kx.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: kx.len(),
            });
        }
        Ok(())
    }

    /// `f_0(x) + k_x^T alpha`.
    pub fn predict_infinity(&self, kx: ArrayView1<'_, T>, f0_x: T) -> Result<T> {
        self.check_kx(&kx)?;
        Ok(f0_x + kx.dot(&self.alpha))
    }

    /// Prediction after kernel gradient flow for time `tau` (unit learning rate):
    /// `f_0(x) + k_x^T V diag((exp(-lambda tau) - 1) / lambda) V^T (y0 - y*)`.
    pub fn predict_tau(&self, kx: ArrayView1<'_, T>, f0_x: T, tau: T) -> Result<T> {
        self.check_kx(&kx)?;
        let weights = self.tau_weights(tau)?;
        Ok(f0_x + kx.dot(&self.eigen.eigenvectors.dot(&weights)))
    }

    fn tau_weights(&self, tau: T) -> Result<Array1<T>> {
        if !(tau >= T::zero()) {
            return Err(Error::InvalidArgument(format!("stopping time must be >= 0, got {tau}")));
        }
        Ok(Array1::from_shape_fn(self.len(), |k| {
            let lambda = self.eigen.eigenvalues[k];
            (-lambda * tau).exp_m1() / lambda * self.spectral_residual[k]
        }))
    }

    /// Predictions for several probes, one kernel row per probe.
    pub fn predict_infinity_batch(&self, kx: ArrayView2<'_, T>, f0: ArrayView1<'_, T>) -> Result<Array1<T>> {
        self.check_batch(&kx, &f0)?;
        Ok(&f0 + &kx.dot(&self.alpha))
    }

    pub fn predict_tau_batch(&self, kx: ArrayView2<'_, T>, f0: ArrayView1<'_, T>, tau: T) -> Result<Array1<T>> {
        self.check_batch(&kx, &f0)?;
        let w = self.eigen.eigenvectors.dot(&self.tau_weights(tau)?);
        Ok(&f0 + &kx.dot(&w))
    }

    fn check_batch(&self, kx: &ArrayView2<'_, T>, f0: &ArrayView1<'_, T>) -> Result<()> {
        if kx.ncols() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: kx.ncols(),
            });
        }
        if f0.len() != kx.nrows() {
            return Err(Error::DimensionMismatch {
                expected: kx.nrows(),
                found: f0.len(),
            });
        }
        Ok(())
    }

    /// Training outputs at flow time `tau`; equals `predict_tau` on each
    /// training row of the kernel.
    pub fn train_outputs_tau(&self, tau: T) -> Result<Array1<T>> {
        if !(tau >= T::zero()) {
            return Err(Error::InvalidArgument(format!("stopping time must be >= 0, got {tau}")));
        }
        let filtered = Array1::from_shape_fn(self.len(), |k| {
            (-self.eigen.eigenvalues[k] * tau).exp_m1() * self.spectral_residual[k]
        });
        Ok(&self.f0_train + &self.eigen.eigenvectors.dot(&filtered))
    }

    /// Half squared training residual at flow time `tau`, evaluated in the
    /// eigenbasis where each component decays as `exp(-lambda tau)`.
    pub fn train_loss_tau(&self, tau: T) -> Result<T> {
        if !(tau >= T::zero()) {
            return Err(Error::InvalidArgument(format!("stopping time must be >= 0, got {tau}")));
        }
        let sum = self
            .eigen
            .eigenvalues
            .iter()
            .zip(&self.spectral_residual)
            .map(|(&lambda, &c)| {
                let r = (-lambda * tau).exp() * c;
                r * r
            })
            .sum::<T>();
        Ok(sum / T::lit(2.0))
    }
}

pub fn identity_kernel<T: Scalar>(n: usize) -> Array2<T> {
    Array2::eye(n)
}
