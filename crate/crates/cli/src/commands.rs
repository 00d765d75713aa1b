use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relu_ntk::geometry::uniform_cube;
use relu_ntk::kernel::{kernel_entries, sequence_for};
use relu_ntk::linalg::symmetric_eigen;
use relu_ntk::network::relative_frobenius_error;
use relu_ntk::render::{trace_csv, trace_summary, trace_svg};
use relu_ntk::{
    criteria_report_render, cross_gram, depth_sweep, fit, gram, kernel_criteria_check, read_csv, seed_averaged_ntk,
    theta_infty, KernelKind, Mlp, Projection, SphereDataset,
};

use crate::config::ExperimentConfig;
use crate::output::Artifacts;
use crate::CliError;

/// Train RMSE of a trained network against its closed-form prediction, relative to label RMS.
pub const TRAIN_TOLERANCE: f64 = 0.05;
/// Largest test-point deviation, relative to label RMS.
pub const TEST_TOLERANCE: f64 = 0.10;
/// Relative Frobenius error of the seed-averaged empirical NTK at the largest width.
pub const NTK_TOLERANCE: f64 = 0.10;
pub const LINEAR_NTK_TOLERANCE: f64 = 1e-10;
/// Test points drawn alongside the training set by `verify`.
const VERIFY_PROBES: usize = 4;

/// `n` uniform points of `[-1, 1]^n0` and `probes` more from the same stream, projected.
pub fn synthetic(cfg: &ExperimentConfig, probes: usize) -> Result<(SphereDataset<f64>, Array2<f64>), CliError> {
    let projection = Projection::from(cfg.projection);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ds = uniform_cube(cfg.n, cfg.n0, &mut rng)?.project(projection)?;
    let x = if probes > 0 {
        uniform_cube(probes, cfg.n0, &mut rng)?
            .project(projection)?
            .points()
            .to_owned()
    } else {
        Array2::zeros((0, ds.dim()))
    };
    Ok((ds, x))
}

fn load(path: &Path, cfg: &ExperimentConfig) -> Result<SphereDataset<f64>, CliError> {
    let raw = read_csv(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    raw.project(cfg.projection.into())
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn matrix_csv(m: ArrayView2<'_, f64>) -> String {
    let mut out = String::new();
    for row in m.outer_iter() {
        let fields: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub struct KernelArgs<'a> {
    pub dataset: Option<&'a Path>,
    pub synthetic: bool,
    pub check_invertible: bool,
}

pub fn cmd_kernel(cfg: &ExperimentConfig, args: KernelArgs<'_>) -> Result<(Artifacts, String), CliError> {
    let ds = match (args.dataset, args.synthetic) {
        (Some(path), false) => load(path, cfg)?,
        (None, true) => synthetic(cfg, 0)?.0,
        (Some(_), true) => return Err(CliError::Input("give either a dataset or --synthetic, not both".into())),
        (None, false) => return Err(CliError::Input("a dataset path or --synthetic is required".into())),
    };
    let kind = cfg.kernel_or_theta_bar().kind();
    let g = gram(&ds);
    let mut artifacts = Artifacts::default();
    let mut summary = String::new();
    for depth in cfg.kernel_depths() {
        let k = kernel_entries(kind, g.view(), depth, ds.dim())?;
        if args.check_invertible {
            let n = k.nrows();
            fit(k.view(), Array1::zeros(n).view(), Array1::zeros(n).view())?;
        }
        let name = format!("kernel_{kind}_L{depth}.csv");
        writeln!(summary, "{name}: {n}x{n} {kind} kernel at depth {depth}", n = k.nrows()).unwrap();
        artifacts.add(name, matrix_csv(k.view()));
    }
    Ok((artifacts, summary))
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(Artifacts, String), CliError> {
    if cfg.l_max < 2 {
        return Err(CliError::Input("config: a sweep needs l_max of at least 2".into()));
    }
    let (ds, x) = synthetic(cfg, 1)?;
    let mut artifacts = Artifacts::default();
    let mut summary = String::new();
    for choice in cfg.kernels() {
        let seq = sequence_for::<f64>(choice.kind(), ds.dim())?;
        let trace = depth_sweep(seq.as_ref(), &ds, x.row(0), cfg.l_max)?;
        summary.push_str(&trace_summary(&trace));
        artifacts.add(format!("{}.csv", trace.kernel), trace_csv(&trace));
        artifacts.add(format!("{}.svg", trace.kernel), trace_svg(&trace));
    }
    Ok((artifacts, summary))
}

pub fn cmd_criteria(cfg: &ExperimentConfig) -> Result<(Artifacts, String), CliError> {
    if cfg.l_max < 2 {
        return Err(CliError::Input("config: criteria need l_max of at least 2".into()));
    }
    let (ds, x) = synthetic(cfg, 1)?;
    let mut artifacts = Artifacts::default();
    let mut summary = String::new();
    for choice in cfg.kernels() {
        let seq = sequence_for::<f64>(choice.kind(), ds.dim())?;
        let report = kernel_criteria_check(seq.as_ref(), &ds, cfg.l_max)?;
        let trace = depth_sweep(seq.as_ref(), &ds, x.row(0), cfg.l_max)?;
        let rendered = criteria_report_render(&report, &trace);
        summary.push_str(&rendered.summary);
        artifacts.add(format!("criteria_{}.txt", report.kernel), rendered.summary);
        artifacts.add(format!("criteria_{}.csv", report.kernel), rendered.csv);
    }
    Ok((artifacts, summary))
}

pub fn cmd_predict(cfg: &ExperimentConfig, train: &Path, test: &Path) -> Result<(Artifacts, String), CliError> {
    let ds = load(train, cfg)?;
    let test_ds = load(test, cfg)?;
    let kind = cfg.kernel_or_theta_bar().kind();
    let n0 = ds.dim();
    let k = kernel_entries(kind, gram(&ds).view(), cfg.depth, n0)?;
    let kx = kernel_entries(kind, cross_gram(&ds, test_ds.points())?.view(), cfg.depth, n0)?;
    let sol = fit(k.view(), ds.labels(), Array1::zeros(ds.len()).view())?;
    let f0 = Array1::zeros(test_ds.len());
    let f_inf = sol.predict_infinity_batch(kx.view(), f0.view())?;
    let f_tau = cfg
        .tau
        .iter()
        .map(|&t| sol.predict_tau_batch(kx.view(), f0.view(), t))
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::from("index,label,f_inf");
    for t in &cfg.tau {
        write!(csv, ",f_tau_{t}").unwrap();
    }
    csv.push('\n');
    for i in 0..test_ds.len() {
        write!(csv, "{i},{},{}", test_ds.labels()[i], f_inf[i]).unwrap();
        for f in &f_tau {
            write!(csv, ",{}", f[i]).unwrap();
        }
        csv.push('\n');
    }
    let mut loss = String::from("tau,train_loss\n");
    for &t in &cfg.tau {
        writeln!(loss, "{t},{}", sol.train_loss_tau(t)?).unwrap();
    }
    let mut artifacts = Artifacts::default();
    artifacts.add("predictions.csv", csv);
    artifacts.add("train_loss.csv", loss);
    let summary = format!(
        "{} training points, {} test points, {kind} kernel at depth {}, condition number {:e}\n",
        ds.len(),
        test_ds.len(),
        cfg.depth,
        sol.condition_number()
    );
    Ok((artifacts, summary))
}

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn rms(v: &Array1<f64>) -> f64 {
    (v.mapv(|x| x * x).sum() / v.len() as f64).sqrt()
}

fn max_abs(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |m, d| m.max(d.abs()))
}

/// Runs the finite-width checks and returns them with the rendered report.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<(Artifacts, Vec<Check>), CliError> {
    let (ds, test) = synthetic(cfg, VERIFY_PROBES)?;
    let n0 = ds.dim();
    let x = ds.points();
    let y = ds.labels().to_owned();
    let widest = *cfg.widths.iter().max().unwrap();
    let mut checks = Vec::new();

    let linear = Mlp::<f64>::uniform(n0, 1, 1, cfg.seed)?.empirical_ntk(x)?;
    let expected = gram(&ds) / n0 as f64;
    let err = (&linear.entries - &expected).iter().fold(0.0f64, |m, d| m.max(d.abs()));
    checks.push(Check {
        name: "linear_ntk",
        passed: err <= LINEAR_NTK_TOLERANCE,
        detail: format!("depth-1 empirical NTK vs XX^T/n0: max error {err:.1e} (tol {LINEAR_NTK_TOLERANCE:e})"),
    });

    let limit = theta_infty(gram(&ds).view(), cfg.depth, n0, None)?;
    let mut errors = Vec::new();
    for &w in &cfg.widths {
        let ntk = seed_averaged_ntk(n0, w, cfg.depth, x, cfg.seed, cfg.seeds)?;
        errors.push(relative_frobenius_error(ntk.entries.view(), limit.view()));
    }
    let final_err = *errors.last().unwrap();
    let listed: Vec<String> = cfg
        .widths
        .iter()
        .zip(&errors)
        .map(|(w, e)| format!("{w}: {e:.4}"))
        .collect();
    checks.push(Check {
        name: "ntk_convergence",
        passed: errors.windows(2).all(|w| w[1] <= w[0]) && final_err <= NTK_TOLERANCE,
        detail: format!(
            "relative Frobenius error over {} seeds by width {} (nonincreasing, last <= {NTK_TOLERANCE})",
            cfg.seeds,
            listed.join(", ")
        ),
    });

    let label_rms = rms(&y);
    let net = Mlp::<f64>::uniform(n0, widest, cfg.depth, cfg.seed)?;
    let y0 = net.forward_batch(x)?;
    let f0x = net.forward_batch(test.view())?;
    let kx = kernel_entries(
        KernelKind::ThetaInfty,
        cross_gram(&ds, test.view())?.view(),
        cfg.depth,
        n0,
    )?;
    let sol = fit(limit.view(), y.view(), y0.view())?;
    let compare = |trained: &Mlp<f64>, train_ref: Array1<f64>, test_ref: Array1<f64>| -> Result<(f64, f64), CliError> {
        let train = rms(&(trained.forward_batch(x)? - train_ref)) / label_rms;
        let test = max_abs(&(trained.forward_batch(test.view())? - test_ref)) / label_rms;
        Ok((train, test))
    };

    let t = cfg.steps as f64 * cfg.lr;
    let early = net.train_gd(x, y.view(), cfg.steps, cfg.lr)?;
    let (train, test_dev) = compare(
        &early.network,
        sol.train_outputs_tau(t)?,
        sol.predict_tau_batch(kx.view(), f0x.view(), t)?,
    )?;
    checks.push(Check {
        name: "early_stopped",
        passed: train <= TRAIN_TOLERANCE && test_dev <= TEST_TOLERANCE,
        detail: format!(
            "width {widest} after {} steps at lr {} (t = {t}) vs f_tau: train RMSE {train:.4}, test deviation {test_dev:.4} \
             of label RMS (tols {TRAIN_TOLERANCE}/{TEST_TOLERANCE})",
            cfg.steps, cfg.lr
        ),
    });

    let eig = symmetric_eigen(limit.view())?;
    let lr = 1.0 / eig.max_eigenvalue();
    let steps = (40.0 / (lr * eig.min_eigenvalue())).ceil() as usize;
    let converged = net.train_gd(x, y.view(), steps, lr)?;
    let (train, test_dev) = compare(
        &converged.network,
        y.clone(),
        sol.predict_infinity_batch(kx.view(), f0x.view())?,
    )?;
    checks.push(Check {
        name: "converged",
        passed: train <= TRAIN_TOLERANCE && test_dev <= TEST_TOLERANCE,
        detail: format!(
            "width {widest} after {steps} steps at lr {lr:.4} vs f_inf: train RMSE {train:.4}, test deviation {test_dev:.4} \
             of label RMS (tols {TRAIN_TOLERANCE}/{TEST_TOLERANCE})"
        ),
    });

    let mut report = String::new();
    for c in &checks {
        writeln!(
            report,
            "check {}: {} {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        )
        .unwrap();
    }
    let mut artifacts = Artifacts::default();
    artifacts.add("verify.txt", report);
    Ok((artifacts, checks))
}
