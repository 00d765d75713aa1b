use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relu_ntk::analysis::synthetic_inputs;
use relu_ntk::kernel::theta_bar_entries;
use relu_ntk::{cross_gram, fit, gram};

mod common;
use common::{dopri5, gauss_solve};

#[test]
fn alpha_matches_gaussian_elimination() {
    for seed in 0..5 {
        let (ds, _) = synthetic_inputs(4, 6, 0, seed).unwrap();
        let k = theta_bar_entries(gram(&ds).view(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Array1<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y0: Array1<f64> = (0..4).map(|_| rng.random_range(-0.2..0.2)).collect();
        let sol = fit(k.view(), y.view(), y0.view()).unwrap();
        let direct = gauss_solve(&k, &(&y - &y0));
        let rel = (&sol.alpha() - &direct).mapv(f64::abs).sum() / direct.mapv(f64::abs).sum();
        assert!(rel < 1e-8, "seed {seed}: relative error {rel}");
        let reconstructed = k.dot(&sol.alpha());
        for (a, b) in reconstructed.iter().zip((&y - &y0).iter()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
        let v = sol.eigenvectors();
        let vtv = v.t().dot(&v);
        for ((i, j), &x) in vtv.indexed_iter() {
            assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }
}

#[test]
fn predict_tau_matches_integrated_gradient_flow() {
    let taus = [0.1, 0.5, 1.0, 4.0, 20.0];
    let mut worst: f64 = 0.0;
    for instance in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + instance);
        let n = rng.random_range(2..=6);
        let depth = rng.random_range(2..=5);
        let (ds, probes) = synthetic_inputs(n, 5, 3, 200 + instance).unwrap();
        let k = theta_bar_entries(gram(&ds).view(), depth).unwrap();
        let kx = theta_bar_entries(cross_gram(&ds, probes.view()).unwrap().view(), depth).unwrap();
        let y: Array1<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y0: Array1<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
        let f0x: Array1<f64> = (0..3).map(|_| rng.random_range(-0.3..0.3)).collect();
        let sol = fit(k.view(), y.view(), y0.view()).unwrap();
        // f_t(x) = f_0(x) + k_x^T u(t), where du/dt = -(y_0 + K u - y*), u(0) = 0.
        let rhs = |u: &Array1<f64>| -(&y0 + &k.dot(u) - &y);
        for &tau in &taus {
            let u = dopri5(rhs, Array1::zeros(n), tau, 1e-12, 1e-14);
            for p in 0..3 {
                let ode = f0x[p] + kx.row(p).dot(&u);
                let closed = sol.predict_tau(kx.row(p), f0x[p], tau).unwrap();
                worst = worst.max((ode - closed).abs());
            }
            let ode_train = &y0 + &k.dot(&u);
            let closed_train = sol.train_outputs_tau(tau).unwrap();
            for (a, b) in ode_train.iter().zip(&closed_train) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst <= 1e-6, "max deviation {worst:e}");
}

#[test]
fn interpolation_on_well_conditioned_kernels() {
    for seed in 0..10 {
        let (ds, _) = synthetic_inputs(8, 12, 0, 50 + seed).unwrap();
        let k = theta_bar_entries(gram(&ds).view(), 4).unwrap();
        let y = ds.labels().to_owned();
        let sol = fit(k.view(), y.view(), Array1::zeros(8).view()).unwrap();
        assert!(sol.condition_number() < 1e10);
        for i in 0..8 {
            let p = sol.predict_infinity(k.row(i), 0.0).unwrap();
            assert!((p - y[i]).abs() <= 1e-8 * (1.0 + y[i].abs()));
        }
    }
}
