//! `results.csv`, `summary.json` and `rateplot.svg`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use scale_bayes_core::rates::LinearFit;
use serde_json::{json, Map, Value};

use crate::error::{HarnessError, Result};
use crate::experiment::{quantile_label, ExperimentResult, GalerkinReport, PriorMassReport};

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Radius columns: `radius_q50`, `radius_q90`, then any other levels in
/// config order, each paired with its index into the radii vectors.
fn radius_columns(quantiles: &[f64]) -> Vec<(usize, String)> {
    let mut cols: Vec<(usize, String)> = quantiles
        .iter()
        .enumerate()
        .map(|(k, &q)| (k, quantile_label(q)))
        .collect();
    cols.sort_by_key(|(_, name)| match name.as_str() {
        "radius_q50" => 0,
        "radius_q90" => 1,
        _ => 2,
    });
    cols
}

pub fn results_csv(res: &ExperimentResult) -> String {
    let cols = radius_columns(&res.config.quantiles);
    let mut s = String::from("n,replicate,seed");
    for (_, name) in &cols {
        s.push(',');
        s.push_str(name);
    }
    s.push_str(",rmse\n");
    for row in &res.rows {
        write!(s, "{},{},{}", row.n, row.replicate, row.seed).expect("writing to a String");
        for (k, _) in &cols {
            write!(s, ",{}", row.radii[*k]).expect("writing to a String");
        }
        writeln!(s, ",{}", row.rmse).expect("writing to a String");
    }
    s
}

fn fit_json(fit: Option<&LinearFit>) -> Value {
    fit.map_or(Value::Null, |f| serde_json::to_value(f).expect("fit serializes"))
}

pub fn summary_json(res: &ExperimentResult) -> Value {
    let cols = radius_columns(&res.config.quantiles);
    let medians: Vec<Value> = res
        .medians
        .iter()
        .map(|m| {
            let mut obj = Map::new();
            obj.insert("n".into(), json!(m.n));
            for (k, name) in &cols {
                obj.insert(name.clone(), json!(m.radii[*k]));
            }
            obj.insert("rmse".into(), json!(m.rmse));
            Value::Object(obj)
        })
        .collect();
    let slopes: Map<String, Value> = res
        .slopes
        .iter()
        .map(|s| (s.statistic.clone(), fit_json(Some(&s.fit))))
        .collect();
    json!({
        "name": res.config.name,
        "prior": res.config.prior.kind_name(),
        "rows": res.rows.len(),
        "medians": medians,
        "slope": fit_json(res.primary_slope()),
        "slopes": slopes,
        "theoretical_exponent": res.exponent,
        "tolerance": res.config.tolerance,
        "pass": res.pass,
        "notes": res.notes,
        "provenance": res.provenance,
    })
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;

/// Log-log scatter of the median `q = 0.5` radius, the fitted line and a
/// reference line of slope `−exponent` through the centroid of the points.
pub fn rate_plot_svg(res: &ExperimentResult) -> String {
    let q50 = res
        .config
        .quantiles
        .iter()
        .position(|&q| q == 0.5)
        .expect("validated config has q = 0.5");
    let pts: Vec<(f64, f64)> = res
        .medians
        .iter()
        .filter(|m| m.radii[q50] > 0.0)
        .map(|m| (m.n.log10(), m.radii[q50].log10()))
        .collect();
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .expect("writing to a String");
    s.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    s.push('\n');
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 2.0);
    writeln!(
        s,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    )
    .expect("writing to a String");
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">log10 n</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 16.0
    )
    .expect("writing to a String");
    writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {})">log10 median radius</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
    .expect("writing to a String");
    if !pts.is_empty() {
        let (xa, xb) = (pts[0].0, pts[pts.len() - 1].0);
        // The fit is in natural logs; the slope is base independent.
        let fit_line = res.primary_slope().map(|fit| {
            let c = fit.intercept / std::f64::consts::LN_10;
            [(xa, c + fit.slope * xa), (xb, c + fit.slope * xb)]
        });
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let reference = [xa, xb].map(|x| (x, my - res.exponent * (x - mx)));
        let (xmin, xmax) = bounds(pts.iter().map(|p| p.0));
        let (ymin, ymax) = bounds(
            pts.iter()
                .chain(reference.iter())
                .chain(fit_line.iter().flatten())
                .map(|p| p.1),
        );
        let sx = |x: f64| x0 + (x - xmin) / (xmax - xmin) * (x1 - x0);
        let sy = |y: f64| y0 - (y - ymin) / (ymax - ymin) * (y0 - y1);
        for label in [xmin, xmax] {
            writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{label:.2}</text>"#,
                sx(label),
                y0 + 18.0
            )
            .expect("writing to a String");
        }
        for label in [ymin, ymax] {
            writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{label:.2}</text>"#,
                x0 - 6.0,
                sy(label) + 4.0
            )
            .expect("writing to a String");
        }
        if let Some([(ax, ay), (bx, by)]) = fit_line {
            writeln!(
                s,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#1f77b4" stroke-width="2"/>"##,
                sx(ax),
                sy(ay),
                sx(bx),
                sy(by)
            )
            .expect("writing to a String");
        }
        let [(ax, ay), (bx, by)] = reference;
        writeln!(
            s,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#d62728" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
            sx(ax),
            sy(ay),
            sx(bx),
            sy(by)
        )
        .expect("writing to a String");
        for &(x, y) in &pts {
            writeln!(s, r#"<circle cx="{}" cy="{}" r="4" fill="black"/>"#, sx(x), sy(y)).expect("writing to a String");
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Range padded by a quarter of its width, or by 0.5 for a single value.
fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let pad = if hi > lo { 0.25 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

/// Writes the three artifacts of a study into `dir` and returns their paths.
pub fn emit_outputs(res: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let files = [
        ("results.csv", results_csv(res)),
        (
            "summary.json",
            serde_json::to_string_pretty(&summary_json(res)).expect("summary serializes") + "\n",
        ),
        ("rateplot.svg", rate_plot_svg(res)),
    ];
    let mut paths = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn galerkin_csv(report: &GalerkinReport) -> String {
    let mut s = String::from("j,error\n");
    for (j, e) in report.levels.iter().zip(&report.errors) {
        writeln!(s, "{j},{e}").expect("writing to a String");
    }
    s
}

pub fn prior_mass_csv(report: &PriorMassReport) -> String {
    let mut s = String::from("eps,hits,draws,neg_log_p,stderr,reliable\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for p in &report.points {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            p.eps,
            p.hits,
            p.draws,
            opt(p.neg_log_p),
            opt(p.stderr),
            p.reliable
        )
        .expect("writing to a String");
    }
    s
}

pub fn prior_mass_json(report: &PriorMassReport) -> Value {
    json!({
        "exponent": report.exponent,
        "fit": fit_json(report.fit.as_ref()),
        "points": report.points.len(),
        "reliable_points": report.points.iter().filter(|p| p.reliable).count(),
    })
}
