//! Sweep reports as CSV, JSON and SVG.

use std::io::Write;
use std::path::Path;

use relhartree::ground_state::ProblemKind;
use relhartree::harness::{Quantity, SweepReport, Target, Verdict};
use serde::Serialize;

use crate::error::CliError;

/// Column names and descriptions of the per-`c` table.
pub fn sweep_columns(report: &SweepReport) -> Vec<(String, String)> {
    let mut cols = vec![
        ("c".into(), "speed of light".into()),
        ("iterations".into(), "solver iterations at this c".into()),
        ("level".into(), "action or energy of the computed ground state".into()),
        ("multiplier".into(), "lambda (action) or extracted omega (energy)".into()),
        ("residual_l2".into(), "L2 equation residual of the solve".into()),
    ];
    for k in 0..=report.order {
        for &s in &report.sobolev {
            let q = Quantity::FieldResidual { k, s };
            cols.push((q.column(), format!("H^{s} norm of the profile minus the series through order {k}")));
        }
    }
    match report.kind {
        ProblemKind::Energy => {
            for k in 0..=report.order {
                cols.push((Quantity::EnergyError { k }.column(), format!("|e_c - e_inf - sum_(j<={k}) a_j c^-2j|")));
            }
            for k in 0..=report.order {
                cols.push((
                    Quantity::MultiplierError { k }.column(),
                    format!("|w_c - w_inf - sum_(j<={k}) b_j c^-2j|"),
                ));
            }
            cols.push(("pohozaev".into(), "Pohozaev residual of the solve".into()));
        }
        ProblemKind::Action => cols.push(("nehari_scale".into(), "t_c putting the limit state on the Nehari manifold".into())),
    }
    cols
}

fn sweep_rows(report: &SweepReport) -> Vec<Vec<String>> {
    report
        .records
        .iter()
        .map(|r| {
            let mut row = vec![
                format!("{}", r.c),
                r.iterations.to_string(),
                format!("{:e}", r.level),
                format!("{:e}", r.multiplier),
                format!("{:e}", r.residual_l2),
            ];
            row.extend(r.residuals.iter().flatten().map(|v| format!("{v:e}")));
            row.extend(r.energy_errors.iter().map(|v| format!("{v:e}")));
            row.extend(r.multiplier_errors.iter().map(|v| format!("{v:e}")));
            row.extend(r.pohozaev.iter().map(|v| format!("{v:e}")));
            row.extend(r.nehari_scale.iter().map(|v| format!("{v}")));
            row
        })
        .collect()
}

pub const FIT_COLUMNS: &[(&str, &str)] = &[
    ("quantity", "series the expectation is about"),
    ("target", "slope or limit"),
    ("expected", "expected slope or limit value"),
    ("tolerance", "absolute slope tolerance or relative limit tolerance"),
    ("observed", "fitted slope or value at the probe c"),
    ("slope", "least-squares log-log slope (empty for limits)"),
    ("intercept", "log-log intercept"),
    ("r_squared", "coefficient of determination of the fit"),
    ("pass", "verdict"),
    ("excluded_c", "c values below the noise floor, separated by ';'"),
];

fn fit_rows(verdicts: &[Verdict]) -> Vec<Vec<String>> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    verdicts
        .iter()
        .map(|v| {
            let (target, expected, tol) = match v.expectation.target {
                Target::Slope { value, tol } => ("slope", value, tol),
                Target::Limit { value, rel_tol, .. } => ("limit", value, rel_tol),
                Target::Decreasing => ("decreasing", f64::NAN, f64::NAN),
            };
            vec![
                v.expectation.quantity.column(),
                target.into(),
                format!("{expected}"),
                format!("{tol}"),
                opt(v.observed),
                opt(v.fit.map(|f| f.slope)),
                opt(v.fit.map(|f| f.intercept)),
                opt(v.fit.map(|f| f.r_squared)),
                v.pass.to_string(),
                v.excluded.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(";"),
            ]
        })
        .collect()
}

/// Writes `#`-prefixed column descriptions, then a header row and the rows.
fn write_csv(path: &Path, columns: &[(String, String)], rows: &[Vec<String>]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::io(path, e);
    let mut file = std::fs::File::create(path).map_err(io)?;
    for (name, desc) in columns {
        writeln!(file, "# {name}: {desc}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(file);
    let fail = |e: csv::Error| CliError::data(path, e.to_string());
    w.write_record(columns.iter().map(|c| c.0.as_str())).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.flush().map_err(io)
}

pub fn write_sweep_csv(report: &SweepReport, path: &Path) -> Result<(), CliError> {
    write_csv(path, &sweep_columns(report), &sweep_rows(report))
}

pub fn write_fits_csv(verdicts: &[Verdict], path: &Path) -> Result<(), CliError> {
    let cols: Vec<(String, String)> = FIT_COLUMNS.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    write_csv(path, &cols, &fit_rows(verdicts))
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    c: f64,
    iterations: usize,
    level: f64,
    multiplier: f64,
    residual_l2: f64,
    residuals: &'a [Vec<f64>],
    noise: &'a [Vec<f64>],
    energy_errors: &'a [f64],
    multiplier_errors: &'a [f64],
    nehari_scale: Option<f64>,
    pohozaev: Option<f64>,
}

#[derive(Serialize)]
struct JsonVerdict {
    quantity: String,
    description: String,
    target: &'static str,
    expected: Option<f64>,
    tolerance: Option<f64>,
    observed: Option<f64>,
    slope: Option<f64>,
    intercept: Option<f64>,
    r_squared: Option<f64>,
    pass: bool,
    excluded_c: Vec<f64>,
    note: String,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    kind: String,
    mass: f64,
    lambda: f64,
    order: usize,
    sobolev: &'a [f64],
    base_level: f64,
    base_multiplier: f64,
    laplacian_norm_sq: f64,
    a: &'a [f64],
    b: &'a [f64],
    field_noise_floor: f64,
    scalar_noise_floor: f64,
    zeroed_correction: Option<usize>,
    records: Vec<JsonRecord<'a>>,
    verdicts: Vec<JsonVerdict>,
}

/// Non-finite numbers become `null`.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn report_json(report: &SweepReport, verdicts: &[Verdict]) -> serde_json::Value {
    let records = report
        .records
        .iter()
        .map(|r| JsonRecord {
            c: r.c,
            iterations: r.iterations,
            level: r.level,
            multiplier: r.multiplier,
            residual_l2: r.residual_l2,
            residuals: &r.residuals,
            noise: &r.noise,
            energy_errors: &r.energy_errors,
            multiplier_errors: &r.multiplier_errors,
            nehari_scale: r.nehari_scale,
            pohozaev: r.pohozaev,
        })
        .collect();
    let verdicts = verdicts
        .iter()
        .map(|v| {
            let (target, expected, tol) = match v.expectation.target {
                Target::Slope { value, tol } => ("slope", Some(value), Some(tol)),
                Target::Limit { value, rel_tol, .. } => ("limit", Some(value), Some(rel_tol)),
                Target::Decreasing => ("decreasing", None, None),
            };
            JsonVerdict {
                quantity: v.expectation.quantity.column(),
                description: v.expectation.quantity.to_string(),
                target,
                expected,
                tolerance: tol,
                observed: v.observed.and_then(finite),
                slope: v.fit.map(|f| f.slope),
                intercept: v.fit.map(|f| f.intercept),
                r_squared: v.fit.map(|f| f.r_squared),
                pass: v.pass,
                excluded_c: v.excluded.clone(),
                note: v.note.clone(),
            }
        })
        .collect();
    let json = JsonReport {
        kind: report.kind.to_string(),
        mass: report.params.mass,
        lambda: report.params.lambda,
        order: report.order,
        sobolev: &report.sobolev,
        base_level: report.base_level,
        base_multiplier: report.base_multiplier,
        laplacian_norm_sq: report.laplacian_norm_sq,
        a: &report.a,
        b: &report.b,
        field_noise_floor: report.field_noise_floor,
        scalar_noise_floor: report.scalar_noise_floor,
        zeroed_correction: report.zeroed_correction,
        records,
        verdicts,
    };
    serde_json::to_value(json).expect("plain data serializes")
}

pub fn write_json(report: &SweepReport, verdicts: &[Verdict], path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&report_json(report, verdicts)).expect("plain data serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f", "#bcbd22"];

/// Log-log plot of every field residual series with its fitted line.
pub fn render_svg(report: &SweepReport, verdicts: &[Verdict]) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (80.0, 190.0, 30.0, 60.0);
    let mut series = Vec::new();
    for k in 0..=report.order {
        for &s in &report.sobolev {
            let q = Quantity::FieldResidual { k, s };
            if let Ok(ys) = report.series(q) {
                series.push((q, ys));
            }
        }
    }
    let xs: Vec<f64> = report.c_values.iter().map(|c| c.log10()).collect();
    let ys_all: Vec<f64> = series.iter().flat_map(|(_, ys)| ys.iter()).filter(|y| **y > 0.0).map(|y| y.log10()).collect();
    let (xmin, xmax) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let ymin = ys_all.iter().cloned().fold(f64::INFINITY, f64::min).floor();
    let ymax = ys_all.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
    let xspan = (xmax - xmin).max(1e-9);
    let yspan = (ymax - ymin).max(1.0);
    let px = |lx: f64| left + (lx - xmin) / xspan * (w - left - right);
    let py = |ly: f64| top + (ymax - ly) / yspan * (h - top - bottom);

    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <rect x=\"{left}\" y=\"{top}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - left - right,
        h - top - bottom
    );
    if ymin.is_finite() && ymax.is_finite() {
        let mut d = ymin as i32;
        let step = ((yspan / 8.0).ceil() as i32).max(1);
        while d <= ymax as i32 {
            let y = py(d as f64);
            out += &format!(
                "<line x1=\"{left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{d}</text>\n",
                w - right,
                left - 6.0,
                y + 4.0
            );
            d += step;
        }
    }
    for (c, lx) in report.c_values.iter().zip(&xs) {
        out += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            px(*lx),
            h - bottom + 16.0,
            (c * 10.0).round() / 10.0
        );
    }
    out += &format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">c</text>\n<text x=\"16\" y=\"{:.1}\" transform=\"rotate(-90 16 {:.1})\" text-anchor=\"middle\">residual</text>\n",
        (left + w - right) / 2.0,
        h - 18.0,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );
    for (i, (q, ys)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for (lx, y) in xs.iter().zip(ys) {
            if *y > 0.0 {
                out += &format!("<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n", px(*lx), py(y.log10()));
            }
        }
        let fit = verdicts.iter().find(|v| v.expectation.quantity == *q).and_then(|v| v.fit);
        let mut label = q.to_string();
        if let Some(f) = fit {
            // ln y = intercept + slope ln c, drawn over the whole range
            let at = |lx: f64| (f.intercept + f.slope * lx * std::f64::consts::LN_10) / std::f64::consts::LN_10;
            out += &format!(
                "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" stroke-dasharray=\"4 3\"/>\n",
                px(xmin),
                py(at(xmin)),
                px(xmax),
                py(at(xmax))
            );
            label = format!("{label}: {:.2}", f.slope);
        }
        let ly = top + 14.0 * i as f64 + 8.0;
        out += &format!(
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/><text x=\"{:.1}\" y=\"{:.1}\">{label}</text>\n",
            w - right + 12.0,
            ly,
            w - right + 20.0,
            ly + 4.0
        );
    }
    out += "</svg>\n";
    out
}

pub fn write_svg(report: &SweepReport, verdicts: &[Verdict], path: &Path) -> Result<(), CliError> {
    std::fs::write(path, render_svg(report, verdicts)).map_err(|e| CliError::io(path, e))
}
