#![allow(dead_code)]

use ndarray::{Array1, Array2};

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        for k in 0..n {
            m.swap([col, k], [pivot, k]);
        }
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[[row, col]] / m[[col, col]];
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[[row, k]] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[[row, row]];
    }
    x
}

/// Adaptive Dormand-Prince 5(4) integration of the autonomous system `du/dt = f(u)` from 0 to `t_end`.
pub fn dopri5(
    f: impl Fn(&Array1<f64>) -> Array1<f64>,
    u0: Array1<f64>,
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Array1<f64> {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut t = 0.0;
    let mut u = u0;
    let mut h = (t_end / 100.0).max(1e-6);
    while t < t_end {
        h = h.min(t_end - t);
        let mut k: Vec<Array1<f64>> = Vec::with_capacity(7);
        for row in &A {
            let mut arg = u.clone();
            for (a, kj) in row.iter().zip(&k) {
                arg.scaled_add(h * a, kj);
            }
            k.push(f(&arg));
        }
        let mut u5 = u.clone();
        let mut u4 = u.clone();
        for j in 0..7 {
            u5.scaled_add(h * B5[j], &k[j]);
            u4.scaled_add(h * B4[j], &k[j]);
        }
        let err = u5
            .iter()
            .zip(&u4)
            .zip(&u)
            .map(|((a, b), c)| ((a - b) / (atol + rtol * a.abs().max(c.abs()))).powi(2))
            .sum::<f64>()
            .sqrt()
            / (u.len() as f64).sqrt();
        if err <= 1.0 {
            t += h;
            u = u5;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    u
}
