//! Depth sweeps, the `psi_d` switch function, and the bounded-coefficient check.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{cross_gram, gram, project_canonical, uniform_cube, uniform_sphere, SphereDataset};
use crate::kernel::{clamp_correlation, normalize_diagonal, sequence_trajectories, theta_bar_entries, KernelSequence};
use crate::linalg::{cholesky, cholesky_solve, euclidean_norm, log_determinant, symmetric_eigen, LogDet};
use crate::scalar::Scalar;

/// Unit-norm tolerance for probe points.
pub const PROBE_NORM_TOLERANCE: f64 = 1e-10;

/// `psi_d(z) = 1 / (1 + exp(-2z / (d (1 - z^2))))`, with `psi_d(-1) = 0` and `psi_d(1) = 1`.
pub fn psi<T: Scalar>(d: T, z: T) -> Result<T> {
    if !(d > T::zero()) {
        return Err(Error::Domain {
            what: "psi scale d",
            value: d.as_f64(),
        });
    }
    let z = clamp_correlation(z, "psi argument")?;
    if z == T::one() {
        return Ok(T::one());
    }
    if z == -T::one() {
        return Ok(T::zero());
    }
    let exponent = -T::lit(2.0) * z / (d * (T::one() - z * z));
    Ok((T::one() + exponent.exp()).recip())
}

/// Everything a depth sweep measures, indexed like `depths`.
#[derive(Debug, Clone)]
pub struct DepthTrace<T> {
    pub kernel: String,
    pub depths: Vec<usize>,
    /// Training pairs `(i, j)` with `i < j`.
    pub pairs: Vec<(usize, usize)>,
    /// `pair_values[p][k]` is the kernel value of `pairs[p]` at `depths[k]`.
    pub pair_values: Vec<Vec<T>>,
    /// `probe_values[j][k]`: kernel value between the probe and training point `j`.
    pub probe_values: Vec<Vec<T>>,
    /// Log-determinant of the diagonal-normalized kernel matrix.
    pub logdet: Vec<LogDet<T>>,
    /// `v^(L) = K^-1 k_x`; `None` where the kernel matrix was numerically singular.
    pub coeff_vectors: Vec<Option<Array1<T>>>,
    pub coeff_norms: Vec<Option<T>>,
    /// `coeff_diffs[k] = ||v^(depths[k+1]) - v^(depths[k])||`, one shorter than `depths`.
    pub coeff_diffs: Vec<Option<T>>,
}

impl<T: Scalar> DepthTrace<T> {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    /// Depths where the coefficient solve failed.
    pub fn singular_depths(&self) -> Vec<usize> {
        self.depths
            .iter()
            .zip(&self.coeff_vectors)
            .filter(|(_, v)| v.is_none())
            .map(|(&d, _)| d)
            .collect()
    }

    /// Values of every training pair at one position in `depths`.
    pub fn pair_column(&self, k: usize) -> Vec<T> {
        self.pair_values.iter().map(|v| v[k]).collect()
    }

    /// `max - min` over training pairs at position `k`.
    pub fn pair_spread(&self, k: usize) -> T {
        let col = self.pair_column(k);
        let max = col.iter().copied().fold(T::neg_infinity(), T::max);
        let min = col.iter().copied().fold(T::infinity(), T::min);
        max - min
    }
}

fn check_probe<T: Scalar>(ds: &SphereDataset<T>, x: ArrayView1<'_, T>) -> Result<()> {
    if x.len() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: x.len(),
        });
    }
    let norm = euclidean_norm(x);
    if !((norm - T::one()).abs() <= T::lit(PROBE_NORM_TOLERANCE)) {
        return Err(Error::Domain {
            what: "probe norm",
            value: norm.as_f64(),
        });
    }
    Ok(())
}

/// Solves `K v = b` by a fresh Cholesky factorization, or reports the
/// smallest eigenvalue when `K` is not numerically positive definite.
fn spd_solve<T: Scalar>(k: ArrayView2<'_, T>, b: ArrayView1<'_, T>) -> Result<Array1<T>> {
    let singular = || -> Result<Error> {
        Ok(Error::SingularKernel {
            smallest_eigenvalue: symmetric_eigen(k)?.min_eigenvalue().as_f64(),
        })
    };
    let eig_floor = T::from_usize_lossy(k.nrows()) * T::epsilon();
    let Some(l) = cholesky(k) else {
        return Err(singular()?);
    };
    let diag_min = (0..l.nrows()).map(|i| l[[i, i]]).fold(T::infinity(), T::min);
    let diag_max = (0..l.nrows()).map(|i| l[[i, i]]).fold(T::zero(), T::max);
    if !(diag_min * diag_min > eig_floor * diag_max * diag_max) {
        return Err(singular()?);
    }
    Ok(cholesky_solve(l.view(), b))
}

/// Runs `seq` on the training set and on one probe for depths `1..=l_max`.
///
/// A singular depth is recorded as `None` in the coefficient lists and the
/// sweep carries on.
pub fn depth_sweep<T: Scalar>(
    seq: &dyn KernelSequence<T>,
    ds: &SphereDataset<T>,
    x: ArrayView1<'_, T>,
    l_max: usize,
) -> Result<DepthTrace<T>> {
    if l_max < 2 {
        return Err(Error::InvalidArgument("a depth sweep needs at least depth 2".into()));
    }
    check_probe(ds, x)?;
    let n = ds.len();
    let kernels = sequence_trajectories(seq, gram(ds).view(), l_max)?;
    let cross = cross_gram(ds, x.insert_axis(ndarray::Axis(0)))?;
    let probe_kernels = sequence_trajectories(seq, cross.view(), l_max)?;

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let pair_values = pairs
        .iter()
        .map(|&(i, j)| kernels.iter().map(|k| k[[i, j]]).collect())
        .collect();
    let probe_values = (0..n)
        .map(|j| probe_kernels.iter().map(|k| k[[0, j]]).collect())
        .collect();

    let mut logdet = Vec::with_capacity(l_max);
    let mut coeff_vectors = Vec::with_capacity(l_max);
    for (k, kx) in kernels.iter().zip(&probe_kernels) {
        logdet.push(log_determinant(normalize_diagonal(k.view()).view())?);
        coeff_vectors.push(match spd_solve(k.view(), kx.row(0)) {
            Ok(v) => Some(v),
            Err(Error::SingularKernel { .. }) => None,
            Err(e) => return Err(e),
        });
    }
    let coeff_norms = coeff_vectors
        .iter()
        .map(|v| v.as_ref().map(|v| euclidean_norm(v.view())))
        .collect();
    let coeff_diffs = coeff_vectors
        .windows(2)
        .map(|w| match (&w[0], &w[1]) {
            (Some(a), Some(b)) => Some(euclidean_norm((b - a).view())),
            _ => None,
        })
        .collect();
    Ok(DepthTrace {
        kernel: seq.name().to_string(),
        depths: (1..=l_max).collect(),
        pairs,
        pair_values,
        probe_values,
        logdet,
        coeff_vectors,
        coeff_norms,
        coeff_diffs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBound<T> {
    pub max_component: T,
    pub norm: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport<T> {
    pub depth: usize,
    pub probes: Vec<ProbeBound<T>>,
    /// Largest coefficient over all probes: the empirical `C`.
    pub max_component: T,
    pub max_norm: T,
    /// `(n, max_norm / n)` over nested prefixes of the dataset.
    pub scaling: Vec<(usize, T)>,
}

/// Coefficient vectors `v^(L) = Theta_bar(X, X)^-1 Theta_bar(X, x)`, one row per probe.
pub fn coefficient_vectors<T: Scalar>(
    ds: &SphereDataset<T>,
    probes: ArrayView2<'_, T>,
    depth: usize,
) -> Result<Array2<T>> {
    for x in probes.outer_iter() {
        check_probe(ds, x)?;
    }
    let k = theta_bar_entries(gram(ds).view(), depth)?;
    let kx = theta_bar_entries(cross_gram(ds, probes)?.view(), depth)?;
    let mut out = Array2::zeros((probes.nrows(), ds.len()));
    for (p, row) in kx.outer_iter().enumerate() {
        out.row_mut(p).assign(&spd_solve(k.view(), row)?);
    }
    Ok(out)
}

/// Measures the coefficient vectors of the normalized kernel predictor at depth
/// `depth` for every probe, and the norm-per-point ratio on nested prefixes of `ds`.
pub fn rde_bound_check<T: Scalar>(
    ds: &SphereDataset<T>,
    probes: ArrayView2<'_, T>,
    depth: usize,
    nested_sizes: &[usize],
) -> Result<BoundReport<T>> {
    if depth < 2 {
        return Err(Error::InvalidArgument("bound check needs depth >= 2".into()));
    }
    let summarize = |v: Array2<T>| -> Vec<ProbeBound<T>> {
        v.outer_iter()
            .map(|row| ProbeBound {
                max_component: row.iter().copied().fold(T::neg_infinity(), T::max),
                norm: euclidean_norm(row),
            })
            .collect()
    };
    let probe_bounds = summarize(coefficient_vectors(ds, probes, depth)?);
    let mut scaling = Vec::with_capacity(nested_sizes.len());
    for &n in nested_sizes {
        let sub = ds.truncate(n)?;
        let max_norm = summarize(coefficient_vectors(&sub, probes, depth)?)
            .iter()
            .map(|b| b.norm)
            .fold(T::zero(), T::max);
        scaling.push((n, max_norm / T::from_usize_lossy(n)));
    }
    Ok(BoundReport {
        depth,
        max_component: probe_bounds
            .iter()
            .map(|b| b.max_component)
            .fold(T::neg_infinity(), T::max),
        max_norm: probe_bounds.iter().map(|b| b.norm).fold(T::zero(), T::max),
        probes: probe_bounds,
        scaling,
    })
}

/// The synthetic setup of the depth experiments: `n` training points and
/// `probes` extra points drawn uniformly from `[-1, 1]^n0` and canonically
/// projected, all from one seeded stream.
pub fn synthetic_inputs(n: usize, n0: usize, probes: usize, seed: u64) -> Result<(SphereDataset<f64>, Array2<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = project_canonical(&uniform_cube(n, n0, &mut rng)?)?;
    let mut x = Array2::zeros((probes, n0));
    if probes > 0 {
        x = project_canonical(&uniform_cube(probes, n0, &mut rng)?)?
            .points()
            .to_owned();
    }
    Ok((ds, x))
}

/// `m` probes uniform on the sphere `S^(n0-1)`.
pub fn sphere_probes(m: usize, n0: usize, seed: u64) -> Array2<f64> {
    uniform_sphere(m, n0, &mut ChaCha8Rng::seed_from_u64(seed))
}
