//! Datasets, projections onto the unit sphere, and Gram matrices.
//!
//! Every kernel in this crate is evaluated on points of the unit sphere
//! `S^(d-1)`. Raw data is brought there either by the canonical projection
//! `x / |x|` (fine for pairwise non-colinear data) or by the inverse
//! stereographic projection into one extra dimension (injective, so colinear
//! points stay distinct).

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_traits::Num;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rows closer than this (Euclidean distance) are treated as the same point.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Norms below this cannot be projected canonically.
pub const ZERO_ROW_TOLERANCE: f64 = 1e-300;

/// Inner products within this many machine epsilons of `±1` are set to `±1`.
pub const UNIT_SNAP_EPSILONS: f64 = 64.0;

/// Arbitrary-scale data with one target value per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset<T> {
    points: Array2<T>,
    labels: Array1<T>,
}

impl<T: Scalar> RawDataset<T> {
    pub fn new(points: Array2<T>, labels: Array1<T>) -> Result<Self> {
        let (n, n0) = points.dim();
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if n0 < 2 {
            return Err(Error::InvalidDataset(format!(
                "input dimension must be at least 2, got {n0}"
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        if points.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite value".into()));
        }
        Ok(Self { points, labels })
    }

    pub fn points(&self) -> ArrayView2<'_, T> {
        self.points.view()
    }

    pub fn labels(&self) -> ArrayView1<'_, T> {
        self.labels.view()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.len()) {
            return Err(Error::InvalidArgument(format!("row index {bad} out of range")));
        }
        Self::new(self.points.select(Axis(0), rows), self.labels.select(Axis(0), rows))
    }

    pub fn project(&self, projection: Projection) -> Result<SphereDataset<T>> {
        match projection {
            Projection::Canonical => project_canonical(self),
            Projection::Stereographic => Ok(project_stereographic(self)),
            Projection::Identity => SphereDataset::from_unit_rows(self.points.clone(), self.labels.clone()),
        }
    }
}

/// How a [`SphereDataset`] was obtained from raw data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Projection {
    Canonical,
    Stereographic,
    /// The raw rows were already unit vectors.
    Identity,
}

impl Projection {
    pub fn as_str(&self) -> &'static str {
        match self {
            Projection::Canonical => "canonical",
            Projection::Stereographic => "stereographic",
            Projection::Identity => "identity",
        }
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Projection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Projection::Canonical),
            "stereographic" => Ok(Projection::Stereographic),
            "identity" => Ok(Projection::Identity),
            other => Err(Error::InvalidArgument(format!("unknown projection `{other}`"))),
        }
    }
}

/// Unit-norm rows with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereDataset<T> {
    points: Array2<T>,
    labels: Array1<T>,
    projection: Projection,
}

fn unit_tolerance<T: Scalar>(dim: usize) -> T {
    let floor = T::epsilon() * T::lit(4.0) * T::from_usize_lossy(dim).sqrt();
    T::lit(DUPLICATE_TOLERANCE).max(floor)
}

impl<T: Scalar> SphereDataset<T> {
    /// Wraps rows that are already on the sphere, checking norms and duplicates.
    pub fn from_unit_rows(points: Array2<T>, labels: Array1<T>) -> Result<Self> {
        let raw = RawDataset::new(points, labels)?;
        let tol = unit_tolerance::<T>(raw.dim());
        for (i, row) in raw.points.outer_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if (norm - T::one()).abs() > tol {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has norm {norm}, expected a unit vector"
                )));
            }
        }
        check_duplicates(raw.points.view())?;
        Ok(Self {
            points: raw.points,
            labels: raw.labels,
            projection: Projection::Identity,
        })
    }

    pub fn points(&self) -> ArrayView2<'_, T> {
        self.points.view()
    }

    pub fn labels(&self) -> ArrayView1<'_, T> {
        self.labels.view()
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Ambient dimension of the sphere the rows live on.
    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn with_labels(mut self, labels: Array1<T>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    /// Keeps the first `n` rows.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {n} of {} rows",
                self.len()
            )));
        }
        Ok(Self {
            points: self.points.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels.slice(ndarray::s![..n]).to_owned(),
            projection: self.projection,
        })
    }
}

fn check_duplicates<T: Scalar>(points: ArrayView2<'_, T>) -> Result<()> {
    let tol = T::lit(DUPLICATE_TOLERANCE);
    let n = points.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let dist2 = points
                .row(i)
                .iter()
                .zip(points.row(j).iter())
                .map(|(&a, &b)| (a - b) * (a - b))
                .fold(T::zero(), |acc, v| acc + v);
            if dist2.sqrt() < tol {
                return Err(Error::DuplicateAfterProjection { i, j });
            }
        }
    }
    Ok(())
}

/// Divides every row by its Euclidean norm.
pub fn project_canonical<T: Scalar>(raw: &RawDataset<T>) -> Result<SphereDataset<T>> {
    let mut points = raw.points.clone();
    for (index, mut row) in points.outer_iter_mut().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm.as_f64() < ZERO_ROW_TOLERANCE {
            return Err(Error::ZeroRow { index });
        }
        row.mapv_inplace(|v| v / norm);
    }
    check_duplicates(points.view())?;
    Ok(SphereDataset {
        points,
        labels: raw.labels.clone(),
        projection: Projection::Canonical,
    })
}

/// Lifts every row to `S^(n0)` with the inverse stereographic projection.
pub fn project_stereographic<T: Scalar>(raw: &RawDataset<T>) -> SphereDataset<T> {
    let (n, n0) = raw.points.dim();
    let mut points = Array2::zeros((n, n0 + 1));
    for (src, mut dst) in raw.points.outer_iter().zip(points.outer_iter_mut()) {
        let lifted = inverse_stereographic(&src.to_vec());
        dst.assign(&Array1::from(lifted));
    }
    SphereDataset {
        points,
        labels: raw.labels.clone(),
        projection: Projection::Stereographic,
    }
}

/// Inverse stereographic projection from the north pole:
/// `x -> (2x, |x|^2 - 1) / (|x|^2 + 1)`.
///
/// Only field operations are used, so exact rationals work as well as floats.
pub fn inverse_stereographic<T: Num + Clone>(x: &[T]) -> Vec<T> {
    let two = T::one() + T::one();
    let sq = x.iter().fold(T::zero(), |acc, v| acc + v.clone() * v.clone());
    let denom = sq.clone() + T::one();
    let mut out: Vec<T> = x.iter().map(|v| two.clone() * v.clone() / denom.clone()).collect();
    out.push((sq - T::one()) / denom);
    out
}

/// Forward stereographic projection from the north pole, `y -> y[..d] / (1 - y[d])`.
///
/// Undefined at the pole itself (division by zero).
pub fn stereographic<T: Num + Clone>(y: &[T]) -> Vec<T> {
    let (last, head) = y.split_last().expect("non-empty point");
    let denom = T::one() - last.clone();
    head.iter().map(|v| v.clone() / denom.clone()).collect()
}

/// Clamps to `[-1, 1]` and snaps values within rounding of `±1` onto it.
///
/// The depth recursions have a square-root singularity at `±1`, so one ulp
/// there moves a deep kernel entry by ~1e-8; unit rows must give exactly 1.
#[inline]
fn clamp_unit<T: Scalar>(v: T) -> T {
    let snap = T::one() - T::epsilon() * T::lit(UNIT_SNAP_EPSILONS);
    if v >= snap {
        T::one()
    } else if v <= -snap {
        -T::one()
    } else {
        v
    }
}

/// Pairwise inner products of the dataset rows, clamped to `[-1, 1]`.
/// The diagonal is exactly 1.
///
/// The upper triangle is computed and mirrored, so the result is exactly
/// symmetric.
pub fn gram<T: Scalar>(ds: &SphereDataset<T>) -> Array2<T> {
    let x = ds.points.view();
    let n = x.nrows();
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = clamp_unit(x.row(i).dot(&x.row(j)));
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    g
}

/// Inner products between probe rows and dataset rows (`m x n`), clamped.
///
/// Each entry is the same row dot product [`gram`] uses, so a probe equal to
/// a training row reproduces that row of the Gram matrix bit for bit.
pub fn cross_gram<T: Scalar>(ds: &SphereDataset<T>, probes: ArrayView2<'_, T>) -> Result<Array2<T>> {
    if probes.ncols() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: probes.ncols(),
        });
    }
    Ok(Array2::from_shape_fn((probes.nrows(), ds.len()), |(p, j)| {
        clamp_unit(probes.row(p).dot(&ds.points.row(j)))
    }))
}

/// Parses comma-separated rows: coordinates first, label last.
///
/// A first row that does not parse as numbers is taken as a header.
pub fn parse_csv<R: Read>(reader: R) -> Result<RawDataset<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if k == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: format!("not a number: {e}"),
                })
            }
        };
        if values.len() < 3 {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected at least 2 coordinates and a label, got {} fields",
                    values.len()
                ),
            });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, got {}", values.len()),
                })
            }
            _ => {}
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: format!("non-finite value {v}"),
            });
        }
        rows.push(values);
    }
    let width = width.ok_or_else(|| Error::InvalidDataset("no data rows".into()))?;
    let n = rows.len();
    let mut points = Array2::zeros((n, width - 1));
    let mut labels = Array1::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row[..width - 1].iter().enumerate() {
            points[[i, j]] = v;
        }
        labels[i] = row[width - 1];
    }
    RawDataset::new(points, labels)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<RawDataset<f64>> {
    let file = std::fs::File::open(path)?;
    parse_csv(std::io::BufReader::new(file))
}

/// `n` rows drawn uniformly from the cube `[-1, 1]^n0`.
///
/// Labels are a fixed smooth function of the raw coordinates, so synthetic
/// regression problems have a non-trivial target.
pub fn uniform_cube<R: Rng + ?Sized>(n: usize, n0: usize, rng: &mut R) -> Result<RawDataset<f64>> {
    let dist = Uniform::new_inclusive(-1.0f64, 1.0).expect("valid range");
    let points: Array2<f64> = Array2::from_shape_fn((n, n0), |_| dist.sample(rng));
    let labels = points
        .outer_iter()
        .map(|r| (2.0 * r[0]).sin() + r[1] * r[n0 - 1])
        .collect();
    RawDataset::new(points, labels)
}

/// `m` points distributed uniformly on `S^(d-1)` (normalized Gaussians).
pub fn uniform_sphere<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> Array2<f64> {
    let mut pts: Array2<f64> = Array2::from_shape_fn((m, d), |_| StandardNormal.sample(rng));
    for mut row in pts.outer_iter_mut() {
        let norm = row.dot(&row).sqrt();
        row.mapv_inplace(|v: f64| v / norm);
    }
    pts
}
