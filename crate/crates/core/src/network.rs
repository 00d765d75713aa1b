//! Finite-width bias-free ReLU networks in NTK parameterization.
//!
//! Layer `l` computes `z_l = W_l a_{l-1} / sqrt(n_{l-1})` with standard
//! normal weights; hidden layers apply ReLU and the output layer is linear.
//! A network of depth `L` has `L` weight matrices, so its empirical NTK is
//! compared against `Theta_inf^(L)`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, symmetric_eigen};
use crate::scalar::Scalar;

pub const DEFAULT_SEED_COUNT: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    weights: Vec<Array2<T>>,
    seed: u64,
}

/// Activations and backpropagated output sensitivities for a batch.
/// Column `i` of every matrix belongs to sample `i`.
struct Pass<T> {
    /// `a_0 = x, a_1, ..., a_{L-1}`.
    inputs: Vec<Array2<T>>,
    /// `df/dz_l` for `l = 1..=L`.
    deltas: Vec<Array2<T>>,
    outputs: Array1<T>,
}

fn relu<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z
    } else {
        T::zero()
    }
}

fn relu_prime<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

impl<T: Scalar> Mlp<T>
where
    StandardNormal: Distribution<T>,
{
    /// `widths = [n0, n1, ..., n_{L-1}, 1]`.
    pub fn new(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer widths {widths:?}")));
        }
        if widths[widths.len() - 1] != 1 {
            return Err(Error::InvalidArgument("output layer must have width 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = widths
            .windows(2)
            .map(|w| Array2::from_shape_simple_fn((w[1], w[0]), || StandardNormal.sample(&mut rng)))
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            weights,
            seed,
        })
    }

    /// `depth` weight matrices with every hidden layer of width `width`.
    pub fn uniform(n0: usize, width: usize, depth: usize, seed: u64) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        let mut widths = vec![n0];
        widths.extend(std::iter::repeat_n(width, depth - 1));
        widths.push(1);
        Self::new(&widths, seed)
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn from_weights(weights: Vec<Array2<T>>, seed: u64) -> Result<Self> {
        let Some(first) = weights.first() else {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        };
        let mut widths = vec![first.ncols()];
        for w in &weights {
            let prev = widths[widths.len() - 1];
            if w.ncols() != prev {
                return Err(Error::DimensionMismatch {
                    expected: prev,
                    found: w.ncols(),
                });
            }
            widths.push(w.nrows());
        }
        if widths[widths.len() - 1] != 1 {
            return Err(Error::InvalidArgument("output layer must have width 1".into()));
        }
        Ok(Self { widths, weights, seed })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn weights(&self) -> &[Array2<T>] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<Array2<T>> {
        self.weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// Smallest hidden width; 1 for a network without hidden layers.
    pub fn min_width(&self) -> usize {
        self.widths[1..self.widths.len() - 1].iter().copied().min().unwrap_or(1)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    fn scale(fan_in: usize) -> T {
        T::from_usize_lossy(fan_in).sqrt().recip()
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: cols,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView1<'_, T>) -> Result<T> {
        let batch = x.insert_axis(Axis(0));
        Ok(self.forward_batch(batch)?[0])
    }

    /// One output per row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, T>) -> Result<Array1<T>> {
        self.check_input(x.ncols())?;
        let mut a = x.t().to_owned();
        let last = self.depth() - 1;
        for (l, w) in self.weights.iter().enumerate() {
            let z = w.dot(&a) * Self::scale(w.ncols());
            a = if l == last { z } else { z.mapv(relu) };
        }
        Ok(a.row(0).to_owned())
    }

    fn pass(&self, x: ArrayView2<'_, T>) -> Result<Pass<T>> {
        self.check_input(x.ncols())?;
        let depth = self.depth();
        let mut inputs = Vec::with_capacity(depth);
        let mut preacts = Vec::with_capacity(depth);
        let mut a = x.t().to_owned();
        for w in &self.weights {
            let z = w.dot(&a) * Self::scale(w.ncols());
            inputs.push(a);
            a = z.mapv(relu);
            preacts.push(z);
        }
        let outputs = preacts[depth - 1].row(0).to_owned();
        let mut deltas = vec![Array2::zeros((0, 0)); depth];
        deltas[depth - 1] = Array2::ones((1, x.nrows()));
        for l in (0..depth - 1).rev() {
            let w_next = &self.weights[l + 1];
            let back = w_next.t().dot(&deltas[l + 1]) * Self::scale(w_next.ncols());
            deltas[l] = back * preacts[l].mapv(relu_prime);
        }
        Ok(Pass {
            inputs,
            deltas,
            outputs,
        })
    }

    /// `df(x)/dW_l` for every layer, flattened row-major in layer order.
    pub fn parameter_gradient(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let pass = self.pass(x.insert_axis(Axis(0)))?;
        let mut out = Vec::with_capacity(self.parameter_count());
        for (delta, input) in pass.deltas.iter().zip(&pass.inputs) {
            let scale = Self::scale(input.nrows());
            for &d in delta.column(0) {
                out.extend(input.column(0).iter().map(|&a| d * a * scale));
            }
        }
        Ok(Array1::from(out))
    }

    /// Gradient inner products `<grad f(x_i), grad f(x_j)>` over all weights.
    pub fn empirical_ntk(&self, x: ArrayView2<'_, T>) -> Result<EmpiricalNtk<T>> {
        let pass = self.pass(x)?;
        let n = x.nrows();
        let mut k = Array2::<T>::zeros((n, n));
        for (delta, input) in pass.deltas.iter().zip(&pass.inputs) {
            let dd = delta.t().dot(delta);
            let aa = input.t().dot(input);
            let fan_in = T::from_usize_lossy(input.nrows());
            for i in 0..n {
                for j in i..n {
                    k[[i, j]] += dd[[i, j]] * aa[[i, j]] / fan_in;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                k[[i, j]] = k[[j, i]];
            }
        }
        Ok(EmpiricalNtk {
            entries: k,
            width: self.min_width(),
            seed_count: 1,
        })
    }

    /// Full-batch gradient descent on `sum_i (f(x_i) - y_i)^2 / 2`.
    ///
    /// With learning rate `lr`, `steps` updates approximate kernel gradient
    /// flow up to time `steps * lr`.
    pub fn train_gd(&self, x: ArrayView2<'_, T>, y: ArrayView1<'_, T>, steps: usize, lr: T) -> Result<Training<T>> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if !(lr > T::zero()) || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        let lambda_max = symmetric_eigen(self.empirical_ntk(x)?.entries.view())?.max_eigenvalue();
        let mut net = self.clone();
        let mut losses = Vec::with_capacity(steps + 1);
        for step in 0..=steps {
            let pass = net.pass(x)?;
            let residual = &pass.outputs - &y;
            let loss = residual.iter().map(|&r| r * r).sum::<T>() / T::lit(2.0);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            losses.push(loss);
            if step == steps {
                break;
            }
            for ((w, delta), input) in net.weights.iter_mut().zip(&pass.deltas).zip(&pass.inputs) {
                let weighted = delta * &residual.view().insert_axis(Axis(0));
                let grad = weighted.dot(&input.t());
                let step_size = lr * Self::scale(input.nrows());
                w.scaled_add(-step_size, &grad);
            }
        }
        Ok(Training {
            network: net,
            losses,
            lr_lambda_max: lr * lambda_max,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EmpiricalNtk<T> {
    pub entries: Array2<T>,
    /// Smallest hidden width of the networks measured.
    pub width: usize,
    pub seed_count: usize,
}

#[derive(Debug, Clone)]
pub struct Training<T> {
    pub network: Mlp<T>,
    /// Loss before the first step and after every step.
    pub losses: Vec<T>,
    /// `lr * lambda_max` of the initial empirical NTK; above 2 gradient
    /// descent is expected to diverge.
    pub lr_lambda_max: T,
}

impl<T: Scalar> Training<T> {
    pub fn is_stable(&self) -> bool {
        self.lr_lambda_max < T::lit(2.0)
    }
}

/// Empirical NTK averaged over networks seeded `base_seed, base_seed + 1, ...`.
pub fn seed_averaged_ntk<T: Scalar>(
    n0: usize,
    width: usize,
    depth: usize,
    x: ArrayView2<'_, T>,
    base_seed: u64,
    seed_count: usize,
) -> Result<EmpiricalNtk<T>>
where
    StandardNormal: Distribution<T>,
{
    if seed_count == 0 {
        return Err(Error::InvalidArgument("seed count must be positive".into()));
    }
    let n = x.nrows();
    let mut sum = Array2::<T>::zeros((n, n));
    for k in 0..seed_count {
        let net = Mlp::uniform(n0, width, depth, base_seed.wrapping_add(k as u64))?;
        sum += &net.empirical_ntk(x)?.entries;
    }
    sum /= T::from_usize_lossy(seed_count);
    Ok(EmpiricalNtk {
        entries: sum,
        width: if depth > 1 { width } else { 1 },
        seed_count,
    })
}

/// `||a - b||_F / ||b||_F`.
pub fn relative_frobenius_error<T: Scalar>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> T {
    frobenius_norm((&a - &b).view()) / frobenius_norm(b)
}

/// Splits a flattened parameter vector back into layer matrices shaped like `net`.
pub fn unflatten<T: Scalar>(net: &Mlp<T>, flat: ArrayView1<'_, T>) -> Result<Vec<Array2<T>>> {
    if flat.len() != net.parameter_count() {
        return Err(Error::DimensionMismatch {
            expected: net.parameter_count(),
            found: flat.len(),
        });
    }
    let mut offset = 0;
    let mut out = Vec::with_capacity(net.depth());
    for w in net.weights() {
        let len = w.len();
        let block = flat.slice(s![offset..offset + len]).to_owned();
        out.push(
            block
                .into_shape_with_order(w.raw_dim())
                .expect("block length matches layer"),
        );
        offset += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gram, uniform_sphere};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn data(n: usize, d: usize, seed: u64) -> Array2<f64> {
        uniform_sphere(n, d, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn forward_is_homogeneous_and_deterministic() {
        let net = Mlp::<f64>::uniform(5, 16, 3, 7).unwrap();
        let x = array![0.3, -0.2, 0.9, 0.1, -0.5];
        assert_eq!(net.forward(Array1::zeros(5).view()).unwrap(), 0.0);
        let f = net.forward(x.view()).unwrap();
        assert_abs_diff_eq!(net.forward((&x * 2.0).view()).unwrap(), 2.0 * f, epsilon = 1e-10);
        let again = Mlp::<f64>::uniform(5, 16, 3, 7).unwrap();
        assert_eq!(again.forward(x.view()).unwrap().to_bits(), f.to_bits());
        assert!(net.forward(array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn linear_network_ntk_is_scaled_gram() {
        let x = data(6, 4, 1);
        let net = Mlp::<f64>::uniform(4, 1, 1, 3).unwrap();
        let k = net.empirical_ntk(x.view()).unwrap();
        let g = gram_rows(&x) / 4.0;
        for (a, b) in k.entries.iter().zip(g.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert_eq!(k.width, 1);
    }

    fn gram_rows(x: &Array2<f64>) -> Array2<f64> {
        x.dot(&x.t())
    }

    #[test]
    fn duplicate_rows_give_duplicate_ntk_rows() {
        let mut x = data(4, 6, 2);
        let row = x.row(1).to_owned();
        x.row_mut(3).assign(&row);
        let k = Mlp::<f64>::uniform(6, 32, 3, 5)
            .unwrap()
            .empirical_ntk(x.view())
            .unwrap()
            .entries;
        assert_eq!(k.row(1), k.row(3));
        assert_eq!(k, k.t());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let net = Mlp::<f64>::uniform(5, 8, 3, 11).unwrap();
        let x = array![0.4, -0.3, 0.2, 0.7, -0.1];
        let grad = net.parameter_gradient(x.view()).unwrap();
        let flat: Array1<f64> = net.weights().iter().flat_map(|w| w.iter().copied()).collect();
        let h = 1e-6;
        for p in (0..flat.len()).step_by(flat.len() / 20).take(20) {
            let eval = |delta: f64| {
                let mut v = flat.clone();
                v[p] += delta;
                Mlp::from_weights(unflatten(&net, v.view()).unwrap(), 0)
                    .unwrap()
                    .forward(x.view())
                    .unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!(
                (fd - grad[p]).abs() <= 1e-5 * grad[p].abs().max(1e-3),
                "param {p}: {fd} vs {}",
                grad[p]
            );
        }
    }

    #[test]
    fn factorized_ntk_matches_flattened_gradients() {
        let x = data(5, 4, 3);
        let net = Mlp::<f64>::uniform(4, 10, 4, 9).unwrap();
        let k = net.empirical_ntk(x.view()).unwrap().entries;
        let grads: Vec<_> = x.outer_iter().map(|r| net.parameter_gradient(r).unwrap()).collect();
        for i in 0..5 {
            for j in 0..5 {
                assert_abs_diff_eq!(k[[i, j]], grads[i].dot(&grads[j]), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_steps_leave_network_unchanged() {
        let x = data(3, 4, 4);
        let net = Mlp::<f64>::uniform(4, 8, 2, 1).unwrap();
        let out = net.train_gd(x.view(), array![1.0, 0.0, -1.0].view(), 0, 0.1).unwrap();
        assert_eq!(out.network, net);
        assert_eq!(out.losses.len(), 1);
    }

    #[test]
    fn linear_network_loss_follows_linear_flow() {
        // f(x) = w.x / sqrt(n0) is linear in w, so gradient flow on the outputs is
        // exactly dy/dt = -K (y - y*) with K = X X^T / n0.
        let x = data(4, 6, 5);
        let y = array![0.5, -1.0, 0.25, 0.8];
        let net = Mlp::<f64>::uniform(6, 1, 1, 2).unwrap();
        let lr = 1e-3;
        let steps = 2000;
        let out = net.train_gd(x.view(), y.view(), steps, lr).unwrap();
        let k = gram_rows(&x) / 6.0;
        let y0 = net.forward_batch(x.view()).unwrap();
        let sol = crate::regression::fit(k.view(), y.view(), y0.view()).unwrap();
        let flow = sol.train_loss_tau(steps as f64 * lr).unwrap();
        let gd = out.losses[steps];
        assert!((gd - flow).abs() <= 0.02 * flow, "{gd} vs {flow}");
        assert!(out.is_stable());
    }

    #[test]
    fn divergence_is_reported() {
        let x = data(4, 3, 6);
        let net = Mlp::<f64>::uniform(3, 1, 1, 3).unwrap();
        let out = net.train_gd(x.view(), array![1.0, 2.0, 3.0, 4.0].view(), 5000, 1e3);
        assert!(!out.as_ref().is_ok_and(|t| t.is_stable()));
        let err = out.unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }));
    }

    #[test]
    fn seed_average_is_deterministic_and_psd() {
        let x = data(4, 5, 8);
        let a = seed_averaged_ntk::<f64>(5, 64, 3, x.view(), 10, 4).unwrap();
        let b = seed_averaged_ntk::<f64>(5, 64, 3, x.view(), 10, 4).unwrap();
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.seed_count, 4);
        assert!(symmetric_eigen(a.entries.view()).unwrap().min_eigenvalue() > -1e-8);
        let g = gram(&crate::geometry::SphereDataset::from_unit_rows(x.clone(), Array1::zeros(4)).unwrap());
        let limit = crate::kernel::theta_infty(g.view(), 3, 5, None).unwrap();
        assert!(relative_frobenius_error(a.entries.view(), limit.view()) < 0.5);
    }
}
