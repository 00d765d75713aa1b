//! Closed-form ReLU kernel recursions and their lifting to matrices.
//!
//! On the unit sphere every depth-`L` kernel entry is a function of the
//! inner product `z = <x, x'>` alone, so all recursions here are scalar maps
//! applied entrywise. Depth 1 is the raw inner-product kernel; reaching depth
//! `L` takes `L - 1` applications of the layer map.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::geometry::{gram, SphereDataset};
use crate::linalg::{cholesky, log_determinant, symmetric_eigen, LogDet};
use crate::scalar::Scalar;

/// Correlations this far outside `[-1, 1]` are treated as rounding and clamped;
/// anything further out is a domain error.
pub const DOMAIN_TOLERANCE: f64 = 1e-9;

pub(crate) fn clamp_correlation<T: Scalar>(z: T, what: &'static str) -> Result<T> {
    let one = T::one();
    let tol = T::lit(DOMAIN_TOLERANCE);
    if !(z.abs() <= one + tol) {
        return Err(Error::Domain {
            what,
            value: z.as_f64(),
        });
    }
    Ok(z.max(-one).min(one))
}

fn check_depth(depth: usize) -> Result<()> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    Ok(())
}

/// Dual map of a ReLU layer, `h(z) = (z asin z + sqrt(1 - z^2)) / pi + z / 2`.
///
/// Advances the neuron correlation by one layer: `rho^(L+1) = h(rho^(L))`.
pub fn h_arc<T: Scalar>(z: T) -> Result<T> {
    let z = clamp_correlation(z, "h")?;
    let pi = T::PI();
    let root = (T::one() - z * z).max(T::zero()).sqrt();
    Ok((z * z.asin() + root) / pi + z / T::lit(2.0))
}

/// `h'(z) = asin(z) / pi + 1/2`.
pub fn h_arc_prime<T: Scalar>(z: T) -> Result<T> {
    let z = clamp_correlation(z, "h'")?;
    Ok(z.asin() / T::PI() + T::lit(0.5))
}

/// Derivative covariance of a ReLU layer, `asin(rho) / (2 pi) + 1/4`.
pub fn sigma_dot<T: Scalar>(rho_prev: T) -> Result<T> {
    let z = clamp_correlation(rho_prev, "sigma_dot")?;
    Ok(z.asin() / (T::lit(2.0) * T::PI()) + T::lit(0.25))
}

/// Correlation at depth `depth` for unit inputs with inner product `z0`.
pub fn rho_at_depth<T: Scalar>(z0: T, depth: usize) -> Result<T> {
    check_depth(depth)?;
    let mut rho = clamp_correlation(z0, "rho")?;
    for _ in 1..depth {
        rho = h_arc(rho)?;
    }
    Ok(rho)
}

/// `s(z) = (1 + e^-z)^-2`, the layer map of the eta kernel sequence.
pub fn sigmoid_squared<T: Scalar>(z: T) -> T {
    let s = T::one() / (T::one() + (-z).exp());
    s * s
}

/// Positive fixed point of [`sigmoid_squared`], found by plain iteration.
///
/// `s` is a contraction on `[0, 1]` (its slope stays below 0.3 there), so
/// the iteration converges from any start.
pub fn eta_fixed_point<T: Scalar>() -> T {
    let mut z = T::lit(0.5);
    for _ in 0..200 {
        let next = sigmoid_squared(z);
        if next == z {
            break;
        }
        z = next;
    }
    z
}

/// Per-pair state of the normalized-kernel recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarKernelState<T> {
    pub rho: T,
    pub theta_bar: T,
    pub depth: usize,
}

impl<T: Scalar> ScalarKernelState<T> {
    /// Depth-1 state: both the correlation and the normalized kernel equal `z`.
    pub fn new(z: T) -> Result<Self> {
        let z = clamp_correlation(z, "initial correlation")?;
        Ok(Self {
            rho: z,
            theta_bar: z,
            depth: 1,
        })
    }

    pub fn step(self) -> Result<Self> {
        theta_bar_step(self)
    }
}

/// One layer of the normalized NTK recursion:
/// `tb' = L/(L+1) h'(rho) tb + h(rho)/(L+1)`, `rho' = h(rho)`.
pub fn theta_bar_step<T: Scalar>(state: ScalarKernelState<T>) -> Result<ScalarKernelState<T>> {
    check_depth(state.depth)?;
    let l = T::from_usize_lossy(state.depth);
    let next = l + T::one();
    let theta_bar = l / next * h_arc_prime(state.rho)? * state.theta_bar + h_arc(state.rho)? / next;
    Ok(ScalarKernelState {
        rho: h_arc(state.rho)?,
        theta_bar,
        depth: state.depth + 1,
    })
}

/// Normalized NTK of a single pair through [`theta_bar_step`].
pub fn theta_bar_scalar<T: Scalar>(z: T, depth: usize) -> Result<T> {
    check_depth(depth)?;
    let mut state = ScalarKernelState::new(z)?;
    while state.depth < depth {
        state = state.step()?;
    }
    Ok(state.theta_bar)
}

/// Which closed-form family a kernel matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// Limiting NTK `Theta_inf^(L)`.
    ThetaInfty,
    /// `Theta_inf^(L)` rescaled to a unit diagonal.
    ThetaBar,
    /// Neuron correlation `rho^(L)`.
    Rho,
    /// The sigmoid-squared sequence `eta^(L)`.
    Eta,
    Custom,
}

impl KernelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelKind::ThetaInfty => "theta_infty",
            KernelKind::ThetaBar => "theta_bar",
            KernelKind::Rho => "rho",
            KernelKind::Eta => "eta",
            KernelKind::Custom => "custom",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta_infty" => Ok(KernelKind::ThetaInfty),
            "theta_bar" => Ok(KernelKind::ThetaBar),
            "rho" => Ok(KernelKind::Rho),
            "eta" => Ok(KernelKind::Eta),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

/// A symmetric kernel evaluated on all pairs of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<T> {
    entries: Array2<T>,
    depth: usize,
    kind: KernelKind,
}

impl<T: Scalar> KernelMatrix<T> {
    /// Wraps an arbitrary symmetric matrix (for identity or constant kernels, say).
    pub fn custom(entries: Array2<T>, depth: usize) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        Ok(Self {
            entries,
            depth,
            kind: KernelKind::Custom,
        })
    }

    pub fn entries(&self) -> &Array2<T> {
        &self.entries
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.entries.view()
    }

    pub fn into_entries(self) -> Array2<T> {
        self.entries
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn clamp_all<T: Scalar>(a: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let mut out = Array2::zeros(a.dim());
    for (dst, &src) in out.iter_mut().zip(a.iter()) {
        *dst = clamp_correlation(src, "inner product")?;
    }
    Ok(out)
}

fn map_fallible<T: Scalar>(a: &Array2<T>, f: impl Fn(T) -> Result<T>) -> Result<Array2<T>> {
    let mut out = Array2::zeros(a.dim());
    for (dst, &src) in out.iter_mut().zip(a.iter()) {
        *dst = f(src)?;
    }
    Ok(out)
}

/// Entrywise `Theta_inf^(L)` of a matrix of unit-vector inner products.
///
/// This follows the layer recursion `Theta <- Sigma_dot * Theta + Sigma`
/// with the covariance diagonal halving at every ReLU layer. Works for any
/// shape, so it also produces cross kernels between probes and data.
pub fn theta_infty_entries<T: Scalar>(inner: ArrayView2<'_, T>, depth: usize, n0: usize) -> Result<Array2<T>> {
    check_depth(depth)?;
    if n0 == 0 {
        return Err(Error::InvalidArgument("input dimension must be positive".into()));
    }
    let mut rho = clamp_all(inner)?;
    let mut sigma_diag = T::one() / T::from_usize_lossy(n0);
    let mut theta = rho.mapv(|z| z * sigma_diag);
    let half = T::lit(0.5);
    for _ in 1..depth {
        let sdot = map_fallible(&rho, sigma_dot)?;
        let next_rho = map_fallible(&rho, h_arc)?;
        sigma_diag *= half;
        Zip::from(&mut theta)
            .and(&sdot)
            .and(&next_rho)
            .for_each(|t, &sd, &r| *t = sd * *t + r * sigma_diag);
        rho = next_rho;
    }
    Ok(theta)
}

/// Entrywise normalized NTK `Theta_bar^(L)`.
///
/// Runs the depth-scaled recursion `A <- h'(rho) A + h(rho)` with `A = L Theta_bar`,
/// which keeps magnitudes O(L) at any depth.
pub fn theta_bar_entries<T: Scalar>(inner: ArrayView2<'_, T>, depth: usize) -> Result<Array2<T>> {
    check_depth(depth)?;
    let mut rho = clamp_all(inner)?;
    let mut acc = rho.clone();
    for _ in 1..depth {
        let hp = map_fallible(&rho, h_arc_prime)?;
        let next_rho = map_fallible(&rho, h_arc)?;
        Zip::from(&mut acc)
            .and(&hp)
            .and(&next_rho)
            .for_each(|a, &d, &r| *a = d * *a + r);
        rho = next_rho;
    }
    let l = T::from_usize_lossy(depth);
    Ok(acc.mapv(|a| a / l))
}

pub fn rho_entries<T: Scalar>(inner: ArrayView2<'_, T>, depth: usize) -> Result<Array2<T>> {
    check_depth(depth)?;
    let rho = clamp_all(inner)?;
    map_fallible(&rho, |z| rho_at_depth(z, depth))
}

/// Entrywise `eta^(L)`: `L - 1` applications of [`sigmoid_squared`] to the inner products.
pub fn eta_entries<T: Scalar>(inner: ArrayView2<'_, T>, depth: usize) -> Result<Array2<T>> {
    check_depth(depth)?;
    let mut eta = clamp_all(inner)?;
    for _ in 1..depth {
        eta.mapv_inplace(sigmoid_squared);
    }
    Ok(eta)
}

/// Entries of `kind` at `depth` for any matrix of sphere inner products.
pub fn kernel_entries<T: Scalar>(
    kind: KernelKind,
    inner: ArrayView2<'_, T>,
    depth: usize,
    n0: usize,
) -> Result<Array2<T>> {
    match kind {
        KernelKind::ThetaInfty => theta_infty_entries(inner, depth, n0),
        KernelKind::ThetaBar => theta_bar_entries(inner, depth),
        KernelKind::Rho => rho_entries(inner, depth),
        KernelKind::Eta => eta_entries(inner, depth),
        KernelKind::Custom => Err(Error::InvalidArgument("custom kernels have no closed form".into())),
    }
}

fn square<T: Scalar>(gram: &ArrayView2<'_, T>) -> Result<()> {
    let (r, c) = gram.dim();
    if r != c {
        return Err(Error::DimensionMismatch { expected: r, found: c });
    }
    Ok(())
}

/// `Theta_inf^(L)` on a Gram matrix of unit vectors.
///
/// With `norms`, the result is the kernel of the original (unprojected)
/// points via positive homogeneity: entry `(i, j)` is scaled by `norms[i] * norms[j]`.
pub fn theta_infty<T: Scalar>(
    gram: ArrayView2<'_, T>,
    depth: usize,
    n0: usize,
    norms: Option<ArrayView1<'_, T>>,
) -> Result<KernelMatrix<T>> {
    square(&gram)?;
    let mut entries = theta_infty_entries(gram, depth, n0)?;
    if let Some(norms) = norms {
        if norms.len() != entries.nrows() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: norms.len(),
            });
        }
        for ((i, j), v) in entries.indexed_iter_mut() {
            *v = *v * norms[i] * norms[j];
        }
    }
    Ok(KernelMatrix {
        entries,
        depth,
        kind: KernelKind::ThetaInfty,
    })
}

pub fn theta_bar<T: Scalar>(gram: ArrayView2<'_, T>, depth: usize) -> Result<KernelMatrix<T>> {
    square(&gram)?;
    Ok(KernelMatrix {
        entries: theta_bar_entries(gram, depth)?,
        depth,
        kind: KernelKind::ThetaBar,
    })
}

pub fn rho_matrix<T: Scalar>(gram: ArrayView2<'_, T>, depth: usize) -> Result<KernelMatrix<T>> {
    square(&gram)?;
    Ok(KernelMatrix {
        entries: rho_entries(gram, depth)?,
        depth,
        kind: KernelKind::Rho,
    })
}

pub fn eta_sequence<T: Scalar>(gram: ArrayView2<'_, T>, depth: usize) -> Result<KernelMatrix<T>> {
    square(&gram)?;
    Ok(KernelMatrix {
        entries: eta_entries(gram, depth)?,
        depth,
        kind: KernelKind::Eta,
    })
}

pub fn kernel_matrix<T: Scalar>(
    kind: KernelKind,
    gram: ArrayView2<'_, T>,
    depth: usize,
    n0: usize,
) -> Result<KernelMatrix<T>> {
    square(&gram)?;
    Ok(KernelMatrix {
        entries: kernel_entries(kind, gram, depth, n0)?,
        depth,
        kind,
    })
}

/// Value of a depth-indexed kernel sequence plus the correlation that drives it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceState<T> {
    pub value: T,
    pub carrier: T,
}

/// A depth-indexed family of dot-product kernels on the sphere.
///
/// `init` maps an inner product to the depth-1 state and `step` advances a
/// state from depth `L` to `L + 1`.
pub trait KernelSequence<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn init(&self, z: T) -> Result<SequenceState<T>>;

    fn step(&self, state: SequenceState<T>, depth: usize) -> Result<SequenceState<T>>;

    /// Factor turning the sequence value at `depth` back into an unnormalized kernel.
    fn normalizer(&self, _depth: usize) -> Option<T> {
        None
    }

    /// Values at depths `1..=max_depth`.
    fn trajectory(&self, z: T, max_depth: usize) -> Result<Vec<T>> {
        check_depth(max_depth)?;
        let mut state = self.init(z)?;
        let mut out = Vec::with_capacity(max_depth);
        out.push(state.value);
        for depth in 1..max_depth {
            state = self.step(state, depth)?;
            out.push(state.value);
        }
        Ok(out)
    }

    fn evaluate(&self, z: T, depth: usize) -> Result<T> {
        Ok(*self.trajectory(z, depth)?.last().expect("depth >= 1"))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ThetaBarSequence {
    pub n0: usize,
}

impl<T: Scalar> KernelSequence<T> for ThetaBarSequence {
    fn name(&self) -> &str {
        "theta_bar"
    }

    fn init(&self, z: T) -> Result<SequenceState<T>> {
        let z = clamp_correlation(z, "initial correlation")?;
        Ok(SequenceState { value: z, carrier: z })
    }

    fn step(&self, state: SequenceState<T>, depth: usize) -> Result<SequenceState<T>> {
        let next = theta_bar_step(ScalarKernelState {
            rho: state.carrier,
            theta_bar: state.value,
            depth,
        })?;
        Ok(SequenceState {
            value: next.theta_bar,
            carrier: next.rho,
        })
    }

    fn normalizer(&self, depth: usize) -> Option<T> {
        let l = T::from_usize_lossy(depth);
        let scale = T::from_usize_lossy(self.n0) * T::lit(2.0).powi(depth as i32 - 1);
        Some(l / scale)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RhoSequence;

impl<T: Scalar> KernelSequence<T> for RhoSequence {
    fn name(&self) -> &str {
        "rho"
    }

    fn init(&self, z: T) -> Result<SequenceState<T>> {
        let z = clamp_correlation(z, "initial correlation")?;
        Ok(SequenceState { value: z, carrier: z })
    }

    fn step(&self, state: SequenceState<T>, _depth: usize) -> Result<SequenceState<T>> {
        let r = h_arc(state.carrier)?;
        Ok(SequenceState { value: r, carrier: r })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EtaSequence;

impl<T: Scalar> KernelSequence<T> for EtaSequence {
    fn name(&self) -> &str {
        "eta"
    }

    fn init(&self, z: T) -> Result<SequenceState<T>> {
        let z = clamp_correlation(z, "initial correlation")?;
        Ok(SequenceState { value: z, carrier: z })
    }

    fn step(&self, state: SequenceState<T>, _depth: usize) -> Result<SequenceState<T>> {
        let e = sigmoid_squared(state.value);
        Ok(SequenceState { value: e, carrier: e })
    }
}

type InitFn<T> = Box<dyn Fn(T) -> T + Send + Sync>;
type StepFn<T> = Box<dyn Fn(T, usize) -> T + Send + Sync>;

/// A sequence given by plain closures over the kernel value.
pub struct FnSequence<T> {
    name: String,
    init: InitFn<T>,
    step: StepFn<T>,
}

impl<T: Scalar> FnSequence<T> {
    pub fn new(
        name: impl Into<String>,
        init: impl Fn(T) -> T + Send + Sync + 'static,
        step: impl Fn(T, usize) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            init: Box::new(init),
            step: Box::new(step),
        }
    }
}

impl<T: Scalar> fmt::Debug for FnSequence<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSequence").field("name", &self.name).finish()
    }
}

impl<T: Scalar> KernelSequence<T> for FnSequence<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn init(&self, z: T) -> Result<SequenceState<T>> {
        let v = (self.init)(z);
        Ok(SequenceState { value: v, carrier: v })
    }

    fn step(&self, state: SequenceState<T>, depth: usize) -> Result<SequenceState<T>> {
        let v = (self.step)(state.value, depth);
        Ok(SequenceState { value: v, carrier: v })
    }
}

/// Builds the named closed-form sequence. `n0` only matters for `theta_bar`.
pub fn sequence_for<T: Scalar>(kind: KernelKind, n0: usize) -> Result<Box<dyn KernelSequence<T>>> {
    match kind {
        KernelKind::ThetaBar => Ok(Box::new(ThetaBarSequence { n0 })),
        KernelKind::Rho => Ok(Box::new(RhoSequence)),
        KernelKind::Eta => Ok(Box::new(EtaSequence)),
        other => Err(Error::InvalidArgument(format!(
            "`{other}` is not available as a normalized sequence"
        ))),
    }
}

/// Matrices of sequence values at depths `1..=max_depth`, entry by entry.
///
/// Element `d - 1` of the result holds depth `d`.
pub fn sequence_trajectories<T: Scalar>(
    seq: &dyn KernelSequence<T>,
    inner: ArrayView2<'_, T>,
    max_depth: usize,
) -> Result<Vec<Array2<T>>> {
    check_depth(max_depth)?;
    let mut out = vec![Array2::zeros(inner.dim()); max_depth];
    for ((i, j), &z) in inner.indexed_iter() {
        for (d, v) in seq.trajectory(z, max_depth)?.into_iter().enumerate() {
            out[d][[i, j]] = v;
        }
    }
    Ok(out)
}

/// Rescales a kernel matrix to unit diagonal when every diagonal entry is positive.
pub fn normalize_diagonal<T: Scalar>(k: ArrayView2<'_, T>) -> Array2<T> {
    let n = k.nrows();
    if (0..n).any(|i| !(k[[i, i]] > T::zero())) {
        return k.to_owned();
    }
    Array2::from_shape_fn(k.dim(), |(i, j)| {
        if i == j {
            T::one()
        } else {
            k[[i, j]] / (k[[i, i]] * k[[j, j]]).sqrt()
        }
    })
}

/// Per-depth outcome of [`kernel_criteria_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaRow<T> {
    pub depth: usize,
    /// `max_{i != j} k_ij - min_k k_kk`; non-positive when diagonal dominance holds.
    pub dominance_violation: T,
    /// Smallest eigenvalue of the diagonal-normalized matrix.
    pub min_eigenvalue: T,
    /// Log-determinant of the diagonal-normalized matrix.
    pub logdet: LogDet<T>,
    /// Whether a Cholesky factorization of the normalized matrix succeeded.
    pub positive_definite: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaReport<T> {
    pub kernel: String,
    pub rows: Vec<CriteriaRow<T>>,
    /// Smallest depth from which every computed depth is positive definite.
    pub pd_from: Option<usize>,
}

impl<T: Scalar> CriteriaReport<T> {
    pub fn max_dominance_violation(&self) -> T {
        self.rows
            .iter()
            .map(|r| r.dominance_violation)
            .fold(T::neg_infinity(), T::max)
    }
}

/// Checks the three depth-limit kernel criteria on a dataset for depths `1..=max_depth`:
/// diagonal dominance, eventual positive definiteness, and the normalized determinant.
pub fn kernel_criteria_check<T: Scalar>(
    seq: &dyn KernelSequence<T>,
    ds: &SphereDataset<T>,
    max_depth: usize,
) -> Result<CriteriaReport<T>> {
    if max_depth < 2 {
        return Err(Error::InvalidArgument("criteria need at least depth 2".into()));
    }
    let g = gram(ds);
    let n = g.nrows();
    let mut rows = Vec::with_capacity(max_depth);
    for (idx, k) in sequence_trajectories(seq, g.view(), max_depth)?.into_iter().enumerate() {
        let min_diag = (0..n).map(|i| k[[i, i]]).fold(T::infinity(), T::min);
        let max_off = k
            .indexed_iter()
            .filter(|((i, j), _)| i != j)
            .map(|(_, &v)| v)
            .fold(T::neg_infinity(), T::max);
        let normalized = normalize_diagonal(k.view());
        let eig = symmetric_eigen(normalized.view())?;
        rows.push(CriteriaRow {
            depth: idx + 1,
            dominance_violation: max_off - min_diag,
            min_eigenvalue: eig.min_eigenvalue(),
            logdet: log_determinant(normalized.view())?,
            positive_definite: cholesky(normalized.view()).is_some(),
        });
    }
    let pd_from = rows
        .iter()
        .rposition(|r| !r.positive_definite)
        .map_or(Some(1), |last_bad| {
            (last_bad + 1 < rows.len()).then(|| rows[last_bad + 1].depth)
        });
    Ok(CriteriaReport {
        kernel: seq.name().to_string(),
        rows,
        pd_from,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project_canonical, uniform_cube};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const INV_PI: f64 = std::f64::consts::FRAC_1_PI;

    fn sphere_data(n: usize, n0: usize, seed: u64) -> SphereDataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        project_canonical(&uniform_cube(n, n0, &mut rng).unwrap()).unwrap()
    }

    #[test]
    fn h_endpoint_values() {
        assert_eq!(h_arc(1.0).unwrap(), 1.0);
        assert_eq!(h_arc(-1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(h_arc(0.0).unwrap(), INV_PI, epsilon = 1e-16);
        assert_eq!(h_arc_prime(1.0).unwrap(), 1.0);
        assert_eq!(h_arc_prime(0.0).unwrap(), 0.5);
    }

    #[test]
    fn h_domain() {
        assert_eq!(h_arc(1.0 + 5e-10).unwrap(), 1.0);
        assert!(matches!(h_arc(1.0 + 1e-8), Err(Error::Domain { .. })));
        assert!(h_arc(f64::NAN).is_err());
        assert!(h_arc_prime(-1.1).is_err());
    }

    #[test]
    fn h_prime_matches_finite_difference() {
        let step = 1e-6;
        let fd = (h_arc(0.5 + step).unwrap() - h_arc(0.5 - step).unwrap()) / (2.0 * step);
        assert_abs_diff_eq!(h_arc_prime(0.5).unwrap(), fd, epsilon = 1e-8);
        for k in 1..1000 {
            let z = -1.0 + 2.0 * k as f64 / 1000.0;
            let z = z.clamp(-0.999, 0.999);
            let fd = (h_arc(z + step).unwrap() - h_arc(z - step).unwrap()) / (2.0 * step);
            assert_abs_diff_eq!(h_arc_prime(z).unwrap(), fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn sigma_dot_values() {
        assert_eq!(sigma_dot(1.0).unwrap(), 0.5);
        assert_eq!(sigma_dot(0.0).unwrap(), 0.25);
        assert_eq!(sigma_dot(-1.0).unwrap(), 0.0);
        for k in 0..=20 {
            let z = -1.0 + k as f64 / 10.0;
            assert_eq!(sigma_dot(z).unwrap(), h_arc_prime(z).unwrap() / 2.0);
        }
    }

    #[test]
    fn rho_depth_values() {
        assert_eq!(rho_at_depth(1.0, 37).unwrap(), 1.0);
        assert_abs_diff_eq!(rho_at_depth(0.0, 2).unwrap(), INV_PI, epsilon = 1e-16);
        // 50-digit iteration of h, frozen.
        assert_abs_diff_eq!(rho_at_depth(0.0, 10).unwrap(), 0.854_809_237_548_906, epsilon = 1e-12);
        assert_eq!(rho_at_depth(-1.0, 2).unwrap(), 0.0);
        assert!(rho_at_depth(0.3, 0).is_err());
    }

    #[test]
    fn rho_reaches_095_by_depth_23_from_worst_start() {
        // Frozen from a 50-digit iteration: starting at -1, depth 23 is the first >= 0.95.
        assert!(rho_at_depth(-1.0, 22).unwrap() < 0.95);
        assert!(rho_at_depth(-1.0, 23).unwrap() >= 0.95);
    }

    #[test]
    fn theta_bar_step_examples() {
        let fixed = theta_bar_step(ScalarKernelState {
            rho: 1.0,
            theta_bar: 1.0,
            depth: 4,
        })
        .unwrap();
        assert_eq!(
            fixed,
            ScalarKernelState {
                rho: 1.0,
                theta_bar: 1.0,
                depth: 5
            }
        );

        let s = theta_bar_step(ScalarKernelState::new(0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(s.rho, INV_PI, epsilon = 1e-16);
        assert_abs_diff_eq!(s.theta_bar, 0.159_154_943_091_895_34, epsilon = 1e-15);
        assert_eq!(s.depth, 2);
    }

    #[test]
    fn theta_bar_rises_then_turns_down_for_orthogonal_pair() {
        // 50-digit reference values of the recursion started at z = 0.
        let traj = ThetaBarSequence { n0: 8 }.trajectory(0.0, 200).unwrap();
        assert_abs_diff_eq!(traj[9], 0.315_595, epsilon = 1e-6);
        assert_abs_diff_eq!(traj[199], 0.263_068, epsilon = 1e-6);
        for w in traj[1..12].windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in traj[11..].windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(traj.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn theta_infty_depth_one_and_diagonal() {
        let ds = sphere_data(5, 8, 7);
        let g = gram(&ds);
        let k1 = theta_infty(g.view(), 1, 8, None).unwrap();
        for (a, b) in k1.entries().iter().zip(g.iter()) {
            assert_eq!(*a, b / 8.0);
        }
        let k5 = theta_infty(g.view(), 5, 8, None).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(k5.entries()[[i, i]], 0.0390625, epsilon = 1e-14);
        }
    }

    #[test]
    fn theta_infty_orthonormal_points_equal_off_diagonals() {
        let g = Array2::<f64>::eye(3);
        let k = theta_infty(g.view(), 3, 3, None).unwrap();
        // Scalar route: Theta_bar at depth 3 for z = 0, rescaled by L / (n0 2^(L-1)).
        let expected = theta_bar_scalar(0.0, 3).unwrap() * 3.0 / (3.0 * 4.0);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_abs_diff_eq!(k.entries()[[i, j]], expected, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn theta_infty_homogeneity_with_norms() {
        let g = array![[1.0, 0.3], [0.3, 1.0]];
        let norms = array![2.0, 0.5];
        let plain = theta_infty(g.view(), 3, 4, None).unwrap();
        let scaled = theta_infty(g.view(), 3, 4, Some(norms.view())).unwrap();
        assert_abs_diff_eq!(scaled.entries()[[0, 0]], 4.0 * plain.entries()[[0, 0]], epsilon = 1e-16);
        assert_abs_diff_eq!(scaled.entries()[[0, 1]], plain.entries()[[0, 1]], epsilon = 1e-16);
        assert!(theta_infty(g.view(), 3, 4, Some(Array1::ones(3).view())).is_err());
    }

    #[test]
    fn theta_bar_examples() {
        let ds = sphere_data(6, 8, 9);
        let g = gram(&ds);
        assert_eq!(theta_bar(g.view(), 1).unwrap().entries(), &g);
        for depth in [2, 7, 40] {
            let k = theta_bar(g.view(), depth).unwrap();
            for i in 0..6 {
                assert_abs_diff_eq!(k.entries()[[i, i]], 1.0, epsilon = 1e-12);
            }
            let lower = if depth == 2 { -0.069 } else { 0.0 };
            assert!(k.entries().iter().all(|&v| (lower..=1.0 + 1e-12).contains(&v)));
        }
        let orth = Array2::<f64>::eye(2);
        let k = theta_bar(orth.view(), 2).unwrap();
        assert_abs_diff_eq!(k.entries()[[0, 1]], 0.159_154_943_091_895_34, epsilon = 1e-15);
    }

    #[test]
    fn theta_infty_vs_theta_bar_routes() {
        let ds = sphere_data(8, 6, 21);
        let g = gram(&ds);
        for depth in 1..30 {
            let ti = theta_infty(g.view(), depth, 6, None).unwrap();
            let tb = theta_bar(g.view(), depth).unwrap();
            let scale = depth as f64 / (6.0 * 2f64.powi(depth as i32 - 1));
            for (a, b) in ti.entries().iter().zip(tb.entries().iter()) {
                assert_abs_diff_eq!(*a, b * scale, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn eta_examples() {
        let g = array![[1.0, 0.0], [0.0, 1.0]];
        let k = eta_sequence(g.view(), 2).unwrap();
        assert_eq!(k.entries()[[0, 1]], 0.25);
        assert_abs_diff_eq!(k.entries()[[0, 0]], 0.534_446_645_388_523, epsilon = 1e-12);
        let beta = eta_fixed_point::<f64>();
        assert_abs_diff_eq!(beta, 0.341_785_399_799_845, epsilon = 1e-14);
        let deep = eta_sequence(g.view(), 200).unwrap();
        assert!(deep.entries().iter().all(|v| (v - beta).abs() < 1e-10));
    }

    #[test]
    fn kernel_kind_parsing() {
        for kind in [
            KernelKind::ThetaInfty,
            KernelKind::ThetaBar,
            KernelKind::Rho,
            KernelKind::Eta,
        ] {
            assert_eq!(kind.as_str().parse::<KernelKind>().unwrap(), kind);
        }
        assert!("relu".parse::<KernelKind>().is_err());
    }

    #[test]
    fn sequences_agree_with_matrix_paths() {
        let ds = sphere_data(5, 4, 2);
        let g = gram(&ds);
        let depth = 6;
        let seqs: [(&dyn KernelSequence<f64>, KernelKind); 3] = [
            (&ThetaBarSequence { n0: 4 }, KernelKind::ThetaBar),
            (&RhoSequence, KernelKind::Rho),
            (&EtaSequence, KernelKind::Eta),
        ];
        for (seq, kind) in seqs {
            let traj = sequence_trajectories(seq, g.view(), depth).unwrap();
            let direct = kernel_entries(kind, g.view(), depth, 4).unwrap();
            for (a, b) in traj[depth - 1].iter().zip(direct.iter()) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
        let tb = ThetaBarSequence { n0: 4 };
        let norm: f64 = tb.normalizer(5).unwrap();
        assert_abs_diff_eq!(norm, 5.0 / 64.0);
    }

    #[test]
    fn criteria_on_theta_bar_and_rho() {
        let ds = sphere_data(4, 8, 13);
        for seq in [&ThetaBarSequence { n0: 8 } as &dyn KernelSequence<f64>, &RhoSequence] {
            let report = kernel_criteria_check(seq, &ds, 10).unwrap();
            assert_eq!(report.rows.len(), 10);
            assert!(report.max_dominance_violation() <= 1e-12);
            assert!(report.rows[1..].iter().all(|r| r.positive_definite));
            assert!(report.pd_from.unwrap() <= 2);
        }
    }

    #[test]
    fn criteria_on_constant_kernel() {
        let ds = sphere_data(4, 8, 13);
        let ones = FnSequence::new("ones", |_z: f64| 1.0, |_v, _d| 1.0);
        let report = kernel_criteria_check(&ones, &ds, 5).unwrap();
        assert_eq!(report.pd_from, None);
        assert!(report.rows.iter().all(|r| !r.positive_definite));
        assert!(report.rows.iter().all(|r| r.min_eigenvalue.abs() < 1e-12));
    }

    #[test]
    fn f32_instantiation() {
        assert!((h_arc(0.0f32).unwrap() - std::f32::consts::FRAC_1_PI).abs() < 1e-7);
        let g = Array2::<f32>::eye(3);
        let k = theta_bar(g.view(), 4).unwrap();
        assert!((k.entries()[[0, 0]] - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn h_dominates_identity(z in -1.0f64..1.0) {
            let h = h_arc(z).unwrap();
            prop_assert!(h > z);
            prop_assert!((0.0..=1.0).contains(&h));
            let hp = h_arc_prime(z).unwrap();
            prop_assert!((0.0..1.0).contains(&hp));
        }

        #[test]
        fn rho_is_nondecreasing_in_depth(z in -1.0f64..=1.0) {
            let traj = RhoSequence.trajectory(z, 60).unwrap();
            for w in traj.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }

        #[test]
        fn scalar_and_matrix_theta_bar_agree(seed in 0u64..1000, n in 2usize..9) {
            let ds = sphere_data(n, 5, seed);
            let g = gram(&ds);
            let depth = 1 + (seed as usize % 40);
            let k = theta_bar(g.view(), depth).unwrap();
            for ((i, j), &v) in k.entries().indexed_iter() {
                let s = theta_bar_scalar(g[[i, j]], depth).unwrap();
                prop_assert!((v - s).abs() < 1e-12);
            }
        }
    }
}
