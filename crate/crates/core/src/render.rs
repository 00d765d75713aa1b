//! Text, CSV and SVG output for sweeps and criteria reports.
//!
//! Trace CSV columns are `kind,i,j,L,value`:
//!
//! | kind        | i     | j     | value                                    |
//! |-------------|-------|-------|------------------------------------------|
//! | `pair`      | i     | j     | kernel value of training pair, `i < j`   |
//! | `probe`     | -1    | j     | kernel value of probe and point `j`      |
//! | `logdet`    | -1    | -1    | `ln det` of the normalized kernel matrix |
//! | `coeffnorm` | -1    | -1    | `‖v^(L)‖₂`                               |
//! | `coeffdiff` | -1    | -1    | `‖v^(L+1) - v^(L)‖₂`                     |
//!
//! Values that could not be computed because the kernel matrix was singular
//! (including a non-positive determinant) are written as `singular`. Numbers use the shortest round-trip decimal
//! form, so equal inputs give byte-identical files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::analysis::DepthTrace;
use crate::error::Result;
use crate::kernel::CriteriaReport;
use crate::linalg::LogDet;
use crate::scalar::Scalar;

pub const CSV_HEADER: &str = "kind,i,j,L,value";

fn field<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "singular".to_string(), |v| v.to_string())
}

fn logdet_field<T: Scalar>(ld: &LogDet<T>) -> String {
    if ld.is_positive() {
        ld.ln_abs.to_string()
    } else {
        "singular".to_string()
    }
}

pub fn trace_csv<T: Scalar>(trace: &DepthTrace<T>) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut row = |kind: &str, i: i64, j: i64, l: usize, value: String| {
        writeln!(out, "{kind},{i},{j},{l},{value}").expect("writing to a String");
    };
    for (k, &l) in trace.depths.iter().enumerate() {
        for (&(i, j), values) in trace.pairs.iter().zip(&trace.pair_values) {
            row("pair", i as i64, j as i64, l, values[k].to_string());
        }
        for (j, values) in trace.probe_values.iter().enumerate() {
            row("probe", -1, j as i64, l, values[k].to_string());
        }
        row("logdet", -1, -1, l, logdet_field(&trace.logdet[k]));
        row("coeffnorm", -1, -1, l, field(trace.coeff_norms[k]));
        if let Some(diff) = trace.coeff_diffs.get(k) {
            row("coeffdiff", -1, -1, l, field(*diff));
        }
    }
    out
}

pub fn criteria_summary<T: Scalar>(report: &CriteriaReport<T>) -> String {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "kernel: {}", report.kernel).unwrap();
    writeln!(
        w,
        "{:>5}  {:>14}  {:>14}  {:>16}  pd",
        "L", "dominance", "min eig", "log det"
    )
    .unwrap();
    for r in &report.rows {
        writeln!(
            w,
            "{:>5}  {:>14.6e}  {:>14.6e}  {:>16}  {}",
            r.depth,
            r.dominance_violation,
            r.min_eigenvalue,
            logdet_field(&r.logdet),
            if r.positive_definite { "yes" } else { "no" }
        )
        .unwrap();
    }
    let holds = report.max_dominance_violation() <= T::zero();
    writeln!(w, "diagonal dominance: {}", if holds { "holds" } else { "violated" }).unwrap();
    match report.pd_from {
        Some(l) => writeln!(w, "positive definite from L = {l}").unwrap(),
        None => writeln!(w, "positive definite: not reached").unwrap(),
    }
    out
}

pub fn trace_summary<T: Scalar>(trace: &DepthTrace<T>) -> String {
    let mut out = String::new();
    let w = &mut out;
    let last = trace.len() - 1;
    writeln!(w, "kernel: {}", trace.kernel).unwrap();
    writeln!(w, "depths: 1..={}", trace.depths[last]).unwrap();
    writeln!(
        w,
        "pair spread: {:.6e} at L = 1, {:.6e} at L = {}",
        trace.pair_spread(0),
        trace.pair_spread(last),
        trace.depths[last]
    )
    .unwrap();
    writeln!(
        w,
        "log det at L = {}: {}",
        trace.depths[last],
        logdet_field(&trace.logdet[last])
    )
    .unwrap();
    let singular = trace.singular_depths();
    if singular.is_empty() {
        writeln!(w, "singular depths: none").unwrap();
    } else {
        let list: Vec<String> = singular.iter().map(usize::to_string).collect();
        writeln!(w, "singular depths: {}", list.join(" ")).unwrap();
    }
    out
}

/// Human-readable summary and machine-readable CSV of a criteria report and a sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub summary: String,
    pub csv: String,
}

pub fn criteria_report_render<T: Scalar>(report: &CriteriaReport<T>, trace: &DepthTrace<T>) -> Rendered {
    Rendered {
        summary: format!("{}\n{}", criteria_summary(report), trace_summary(trace)),
        csv: trace_csv(trace),
    }
}

pub fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(contents.as_bytes())?;
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// A line plot with one polyline per series. Coordinates are printed with
/// three decimals so output is stable across platforms.
pub fn svg_line_plot(title: &str, x_label: &str, series: &[Vec<(f64, f64)>]) -> String {
    let points = series.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let w = &mut out;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        w,
        r#"<text x="{:.3}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        w,
        r#"<path d="M{m:.3} {t:.3} V{b:.3} H{r:.3}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )
    .unwrap();
    for (value, anchor, x, y) in [
        (x0, "start", MARGIN, HEIGHT - MARGIN + 16.0),
        (x1, "end", WIDTH - MARGIN, HEIGHT - MARGIN + 16.0),
    ] {
        writeln!(w, r#"<text x="{x:.3}" y="{y:.3}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{value}</text>"#).unwrap();
    }
    for (value, y) in [(y0, HEIGHT - MARGIN), (y1, MARGIN)] {
        writeln!(
            w,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end" font-family="sans-serif" font-size="11">{:.4}</text>"#,
            MARGIN - 4.0,
            y + 4.0,
            value
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    )
    .unwrap();
    for s in series {
        let coords: Vec<String> = s.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
        writeln!(
            w,
            r##"<polyline points="{}" fill="none" stroke="#1f4e9c" stroke-width="1"/>"##,
            coords.join(" ")
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Kernel value against depth, one polyline per training pair and per probe pair.
pub fn trace_svg<T: Scalar>(trace: &DepthTrace<T>) -> String {
    let curve = |values: &Vec<T>| -> Vec<(f64, f64)> {
        trace
            .depths
            .iter()
            .zip(values)
            .map(|(&l, v)| (l as f64, v.as_f64()))
            .collect()
    };
    let series: Vec<_> = trace.pair_values.iter().chain(&trace.probe_values).map(curve).collect();
    svg_line_plot(&trace.kernel, "L", &series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{depth_sweep, synthetic_inputs};
    use crate::kernel::{kernel_criteria_check, FnSequence, RhoSequence};
    use ndarray::{array, Array1};

    #[test]
    fn two_depth_trace_csv() {
        let (ds, x) = synthetic_inputs(3, 4, 1, 2).unwrap();
        let trace = depth_sweep(&RhoSequence, &ds, x.row(0), 2).unwrap();
        let csv = trace_csv(&trace);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        // 3 pairs, 3 probe values, logdet and coeffnorm per depth, one coeffdiff
        assert_eq!(lines.len(), 1 + 2 * 8 + 1);
        assert!(lines[1].starts_with("pair,0,1,1,"));
        assert!(lines.iter().all(|l| l.split(',').count() == 5));
        assert!(lines.iter().any(|l| l.starts_with("coeffdiff,-1,-1,1,")));
        assert!(!lines.iter().any(|l| l.starts_with("coeffdiff,-1,-1,2,")));
    }

    #[test]
    fn singular_fields_are_marked() {
        let pts = array![[1.0, 0.0], [0.0, 1.0]];
        let ds = crate::geometry::SphereDataset::from_unit_rows(pts, Array1::zeros(2)).unwrap();
        let collapse = FnSequence::new("collapse", |z: f64| z, |_, _| 1.0);
        let trace = depth_sweep(&collapse, &ds, array![0.6, 0.8].view(), 2).unwrap();
        let csv = trace_csv(&trace);
        assert!(csv.contains("logdet,-1,-1,2,singular"));
        assert!(csv.contains("coeffnorm,-1,-1,2,singular"));
        assert!(csv.contains("coeffdiff,-1,-1,1,singular"));
        assert!(csv.contains("coeffnorm,-1,-1,1,1"));
    }

    #[test]
    fn render_is_deterministic() {
        let (ds, x) = synthetic_inputs(4, 6, 1, 9).unwrap();
        let report = kernel_criteria_check(&RhoSequence, &ds, 4).unwrap();
        let trace = depth_sweep(&RhoSequence, &ds, x.row(0), 4).unwrap();
        let a = criteria_report_render(&report, &trace);
        let b = criteria_report_render(&report, &trace);
        assert_eq!(a, b);
        assert!(a.summary.contains("kernel: rho"));
        let svg = trace_svg(&trace);
        assert_eq!(svg.matches("<polyline").count(), 6 + 4);
        assert!(svg.ends_with("</svg>\n"));
    }
}
