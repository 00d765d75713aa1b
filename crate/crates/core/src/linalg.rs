//! Dense symmetric linear algebra: eigendecomposition, Cholesky, log-determinants.
//!
//! The eigensolver is Householder tridiagonalization followed by the implicit
//! QL iteration (the EISPACK `tred2`/`tql2` pair as popularized by JAMA).

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenpairs of a symmetric matrix, eigenvalues sorted in descending order.
///
/// Column `k` of `eigenvectors` belongs to `eigenvalues[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub eigenvalues: Array1<T>,
    pub eigenvectors: Array2<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues[0]
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn spectral_map(&self, f: impl Fn(T) -> T) -> Array2<T> {
        let scaled = Array2::from_shape_fn(self.eigenvectors.dim(), |(i, k)| {
            self.eigenvectors[[i, k]] * f(self.eigenvalues[k])
        });
        scaled.dot(&self.eigenvectors.t())
    }
}

fn check_square<T: Scalar>(a: &ArrayView2<'_, T>) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::DimensionMismatch { expected: r, found: c });
    }
    if r == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(r)
}

/// Full eigendecomposition of a symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen<T: Scalar>(a: ArrayView2<'_, T>) -> Result<SymmetricEigen<T>> {
    let n = check_square(&a)?;
    let mut v = Array2::from_shape_fn((n, n), |(i, j)| if i >= j { a[[i, j]] } else { a[[j, i]] });
    let mut d = Array1::zeros(n);
    let mut e = Array1::zeros(n);
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| d[q].partial_cmp(&d[p]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = order.iter().map(|&k| d[k]).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(i, k)| v[[i, order[k]]]);
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

fn tridiagonalize<T: Scalar>(v: &mut Array2<T>, d: &mut Array1<T>, e: &mut Array1<T>) {
    let n = d.len();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = zero;
                v[[j, i]] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = zero;
            }
            for j in 0..i {
                f = d[j];
                v[[j, i]] = f;
                g = e[j] + v[[j, j]] * f;
                for k in (j + 1)..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[[k, j]] -= upd;
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = zero;
            }
        }
        d[i] = h;
    }

    // Accumulate the Householder reflections.
    for i in 0..n.saturating_sub(1) {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[[k, j]] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = zero;
    }
    v[[n - 1, n - 1]] = T::one();
    e[0] = zero;
}

fn ql_implicit<T: Scalar>(v: &mut Array2<T>, d: &mut Array1<T>, e: &mut Array1<T>) -> Result<()> {
    const MAX_SWEEPS: usize = 64;
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    let eps = T::epsilon();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::InvalidArgument("eigenvalue iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in (l + 2)..n {
                    d[i] -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[[k, i + 1]];
                        v[[k, i + 1]] = s * v[[k, i]] + c * h;
                        v[[k, i]] = c * v[[k, i]] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

/// Lower Cholesky factor, or `None` if the matrix is not numerically positive definite.
pub fn cholesky<T: Scalar>(a: ArrayView2<'_, T>) -> Option<Array2<T>> {
    let n = check_square(&a).ok()?;
    let mut l = Array2::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > T::zero()) {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given the lower factor `L`.
pub fn cholesky_solve<T: Scalar>(l: ArrayView2<'_, T>, b: ArrayView1<'_, T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Determinant as sign and log-magnitude; avoids under/overflow for
/// nearly singular kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet<T> {
    /// `-1`, `0` (exactly singular) or `1`.
    pub sign: i8,
    pub ln_abs: T,
}

impl<T: Scalar> LogDet<T> {
    pub fn is_positive(&self) -> bool {
        self.sign > 0
    }

    /// Signed determinant, possibly underflowing to zero.
    pub fn value(&self) -> T {
        T::from(self.sign).unwrap_or_else(T::zero) * self.ln_abs.exp()
    }
}

impl<T: Scalar> fmt::Display for LogDet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sign {} log|det| {}", self.sign, self.ln_abs)
    }
}

/// Log-determinant through LU factorization with partial pivoting.
pub fn log_determinant<T: Scalar>(a: ArrayView2<'_, T>) -> Result<LogDet<T>> {
    let n = check_square(&a)?;
    let mut m = a.to_owned();
    let mut sign: i8 = 1;
    let mut ln_abs = T::zero();
    for col in 0..n {
        let (pivot, pmax) = (col..n)
            .map(|r| (r, m[[r, col]].abs()))
            .fold((col, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == T::zero() {
            return Ok(LogDet {
                sign: 0,
                ln_abs: T::neg_infinity(),
            });
        }
        if pivot != col {
            for k in 0..n {
                m.swap([pivot, k], [col, k]);
            }
            sign = -sign;
        }
        let p = m[[col, col]];
        if p < T::zero() {
            sign = -sign;
        }
        ln_abs += p.abs().ln();
        for r in (col + 1)..n {
            let factor = m[[r, col]] / p;
            if factor != T::zero() {
                for k in col..n {
                    let upd = factor * m[[col, k]];
                    m[[r, k]] -= upd;
                }
            }
        }
    }
    Ok(LogDet { sign, ln_abs })
}

pub fn frobenius_norm<T: Scalar>(a: ArrayView2<'_, T>) -> T {
    a.iter().map(|&v| v * v).sum::<T>().sqrt()
}

pub fn euclidean_norm<T: Scalar>(v: ArrayView1<'_, T>) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}
