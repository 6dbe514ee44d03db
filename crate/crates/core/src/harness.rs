//! Sweeps over `c`, residuals of the truncated series, log-log slope fits and
//! rate verdicts.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::expansion::{build_action_expansion, build_energy_expansion, eval_series, ExpansionSeries};
use crate::ground_state::{nehari_scale, pohozaev_residual, solve, GroundStateResult, ProblemKind, SolverOptions};
use crate::params::{PhysicalParams, SpeedOfLight};
use crate::radial::{h_s_norm, h_s_tail_norm};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(invalid("fit data", format!("{} x values but {} y values", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!("slope fit needs at least 3 points, got {}", xs.len())));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(invalid("fit data", format!("log-log fit needs positive finite values, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all x values coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit { slope, intercept, r_squared })
}

/// `count` points from `lo` with ratio `ratio`.
pub fn geometric_c_values(lo: f64, hi: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && ratio > 1.0 && hi.is_finite()) {
        return Err(invalid("c range", format!("need 0 < lo <= hi and ratio > 1, got [{lo}, {hi}] x{ratio}")));
    }
    let mut out = Vec::new();
    let mut c = lo;
    // tolerate round-off at the upper end
    while c <= hi * (1.0 + 1e-9) {
        out.push(c);
        c *= ratio;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub kind: ProblemKind,
    /// Mass and `λ`; the speed of light is taken from `c_values`.
    pub params: PhysicalParams,
    pub c_values: Vec<f64>,
    /// Series order `n`; residuals `R_0..R_n` are recorded.
    pub order: usize,
    pub sobolev: Vec<f64>,
    pub solver: SolverOptions,
    /// Start each solve from the series evaluated at that `c`.
    pub warm_start: bool,
    /// Field residuals below this absolute value are excluded from fits.
    pub field_noise_floor: f64,
    /// Scalar errors below this multiple of the limit value are excluded.
    pub scalar_noise_floor: f64,
    /// Negative control: replace this correction by zero before evaluating.
    pub zero_correction: Option<usize>,
    /// Worker threads for the per-`c` solves; `None` uses the global pool.
    pub threads: Option<usize>,
}

/// Profile accuracy of a converged Newton-polished solve on the default grid,
/// measured as the plateau of the highest-order residual.
pub const PROFILE_ACCURACY: f64 = 1e-13;

/// A field residual must exceed its measured round-off tail by this factor to
/// enter a fit. In `H^s` with `s ≥ 1` the tail, not the profile accuracy,
/// sets the floor.
pub const NOISE_MARGIN: f64 = 10.0;

impl SweepConfig {
    /// Default study: `c ∈ [10, 160]` with ratio `√2`, `s ∈ {0, 1, 2}`.
    pub fn new(kind: ProblemKind, order: usize) -> Self {
        SweepConfig {
            kind,
            params: PhysicalParams::unit(),
            c_values: geometric_c_values(10.0, 160.0, std::f64::consts::SQRT_2).expect("static range"),
            order,
            sobolev: vec![0.0, 1.0, 2.0],
            solver: SolverOptions::default(),
            warm_start: true,
            field_noise_floor: 100.0 * PROFILE_ACCURACY,
            scalar_noise_floor: 1e-14,
            zero_correction: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.kind == ProblemKind::Action {
            self.params.validate_action()?;
        }
        self.solver.validate()?;
        if self.c_values.is_empty() {
            return Err(invalid("c_values", "empty"));
        }
        if let Some(c) = self.c_values.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(invalid("c_values", format!("must be finite and positive, got {c}")));
        }
        if self.c_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("c_values", "must be strictly increasing"));
        }
        if self.order == 0 {
            return Err(invalid("order", "must be at least 1"));
        }
        if self.sobolev.is_empty() || self.sobolev.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("sobolev", "need at least one index, all >= 0"));
        }
        if !(self.field_noise_floor >= 0.0 && self.scalar_noise_floor >= 0.0) {
            return Err(invalid("noise floor", "must be >= 0"));
        }
        if let Some(j) = self.zero_correction {
            if j == 0 || j > self.order {
                return Err(invalid("zero_correction", format!("must lie in 1..={}, got {j}", self.order)));
            }
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CRecord {
    pub c: f64,
    pub iterations: usize,
    pub level: f64,
    pub multiplier: f64,
    pub residual_l2: f64,
    /// `residuals[k][i]`: `‖u_c − Σ_{j≤k} f_j c^{-2j}‖_{H^{s_i}}`.
    pub residuals: Vec<Vec<f64>>,
    /// Same layout as `residuals`, restricted to the sine modes the series
    /// discards as round-off: a measured noise level for each residual.
    pub noise: Vec<Vec<f64>>,
    /// `|e_c − e_∞ − Σ_{j≤k} a_j c^{-2j}|`, energy kind only.
    pub energy_errors: Vec<f64>,
    /// `|ω_c − ω_∞ − Σ_{j≤k} b_j c^{-2j}|`, energy kind only.
    pub multiplier_errors: Vec<f64>,
    /// `t_c`, action kind only.
    pub nehari_scale: Option<f64>,
    /// Pohozaev residual, energy kind only.
    pub pohozaev: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub kind: ProblemKind,
    pub params: PhysicalParams,
    pub order: usize,
    pub sobolev: Vec<f64>,
    pub c_values: Vec<f64>,
    pub records: Vec<CRecord>,
    pub base_level: f64,
    pub base_multiplier: f64,
    /// `‖Δ f_0‖²_{L²}` of the limit profile.
    pub laplacian_norm_sq: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub field_noise_floor: f64,
    pub scalar_noise_floor: f64,
    pub zeroed_correction: Option<usize>,
}

/// Limit ground state and its series for a sweep configuration.
pub fn build_series(config: &SweepConfig) -> Result<ExpansionSeries> {
    config.validate()?;
    let limit = config.params.with_c(SpeedOfLight::Infinite);
    let base = solve(config.kind, &limit, &config.solver)?;
    match config.kind {
        ProblemKind::Action => build_action_expansion(&base, config.order),
        ProblemKind::Energy => build_energy_expansion(&base, config.order),
    }
}

pub fn sweep(config: &SweepConfig) -> Result<SweepReport> {
    let series = build_series(config)?;
    sweep_with_series(config, &series)
}

/// Runs the sweep against a precomputed series, e.g. one loaded from a cache.
pub fn sweep_with_series(config: &SweepConfig, series: &ExpansionSeries) -> Result<SweepReport> {
    sweep_impl(config, series, |cs, f| crate::par::map(cs, config.threads, f))
}

/// Same as [`sweep_with_series`] but never spawns workers.
pub fn sweep_sequential(config: &SweepConfig, series: &ExpansionSeries) -> Result<SweepReport> {
    sweep_impl(config, series, |cs, f| crate::par::map_sequential(cs, f))
}

type Mapper<'a> = dyn Fn(&f64) -> Result<CRecord> + Sync + Send + 'a;

fn sweep_impl<M>(config: &SweepConfig, series: &ExpansionSeries, mapper: M) -> Result<SweepReport>
where
    M: Fn(&[f64], &Mapper<'_>) -> Vec<Result<CRecord>>,
{
    config.validate()?;
    if series.kind != config.kind {
        return Err(Error::WrongKind(format!("sweep is {}, series is {}", config.kind, series.kind)));
    }
    if series.order < config.order {
        return Err(invalid("order", format!("series has order {}, sweep needs {}", series.order, config.order)));
    }
    let series = match config.zero_correction {
        Some(j) => series.with_zeroed(j)?,
        None => series.clone(),
    };
    let base = &series.base;
    let one = |c: &f64| -> Result<CRecord> {
        let c = *c;
        solve_one(config, &series, c).map_err(|e| Error::AtSpeed { c, source: Box::new(e) })
    };
    let records = mapper(&config.c_values, &one).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        kind: config.kind,
        params: config.params,
        order: config.order,
        sobolev: config.sobolev.clone(),
        c_values: config.c_values.clone(),
        records,
        base_level: base.level,
        base_multiplier: base.multiplier,
        laplacian_norm_sq: crate::expansion::laplacian_norm_squared(&base.profile),
        a: series.a.clone(),
        b: series.b.clone(),
        field_noise_floor: config.field_noise_floor,
        scalar_noise_floor: config.scalar_noise_floor,
        zeroed_correction: config.zero_correction,
    })
}

fn solve_one(config: &SweepConfig, series: &ExpansionSeries, c: f64) -> Result<CRecord> {
    let params = config.params.with_c(SpeedOfLight::Finite(c));
    let mut opts = config.solver.clone();
    if config.warm_start {
        opts.initial = Some(eval_series(series, c, config.order)?);
    }
    let gs: GroundStateResult = solve(config.kind, &params, &opts)?;
    if !gs.converged {
        return Err(Error::NotConverged {
            what: "sweep solve",
            iterations: gs.iterations,
            residual: gs.residual_l2,
        });
    }
    let mut residuals = Vec::with_capacity(config.order + 1);
    let mut noise = Vec::with_capacity(config.order + 1);
    for k in 0..=config.order {
        let diff = gs.profile.sub(&eval_series(series, c, k)?)?;
        residuals.push(config.sobolev.iter().map(|&s| h_s_norm(&diff, s)).collect::<Result<Vec<_>>>()?);
        noise.push(
            config
                .sobolev
                .iter()
                .map(|&s| h_s_tail_norm(&diff, s, series.retained_modes))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let (mut energy_errors, mut multiplier_errors) = (Vec::new(), Vec::new());
    let (mut nehari, mut pohozaev) = (None, None);
    match config.kind {
        ProblemKind::Energy => {
            for k in 0..=config.order {
                energy_errors.push((gs.level - series.energy_at(c, k)?).abs());
                multiplier_errors.push((gs.multiplier - series.multiplier_at(c, k)?).abs());
            }
            pohozaev = Some(pohozaev_residual(&gs)?);
        }
        ProblemKind::Action => {
            nehari = Some(nehari_scale(&series.base.profile, &params)?);
        }
    }
    Ok(CRecord {
        c,
        iterations: gs.iterations,
        level: gs.level,
        multiplier: gs.multiplier,
        residual_l2: gs.residual_l2,
        residuals,
        noise,
        energy_errors,
        multiplier_errors,
        nehari_scale: nehari,
        pohozaev,
    })
}

/// A per-`c` series extracted from a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    /// `R_k` in `H^s`; `s` must be one of the report's indices.
    FieldResidual { k: usize, s: f64 },
    EnergyError { k: usize },
    MultiplierError { k: usize },
    /// `|1 − t_c|`.
    NehariGap,
    /// `c²(e_∞ − e_c)`.
    ScaledEnergyGap,
    /// `c²(ω_∞ − ω_c)`.
    ScaledMultiplierGap,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::FieldResidual { k, s } => write!(f, "R_{k} in H^{s}"),
            Quantity::EnergyError { k } => write!(f, "energy error after {k} terms"),
            Quantity::MultiplierError { k } => write!(f, "multiplier error after {k} terms"),
            Quantity::NehariGap => f.write_str("|1 - t_c|"),
            Quantity::ScaledEnergyGap => f.write_str("c^2 (e_inf - e_c)"),
            Quantity::ScaledMultiplierGap => f.write_str("c^2 (w_inf - w_c)"),
        }
    }
}

impl Quantity {
    /// Column name used in tabular output.
    pub fn column(&self) -> String {
        match self {
            Quantity::FieldResidual { k, s } => format!("R{k}_H{s}"),
            Quantity::EnergyError { k } => format!("energy_err{k}"),
            Quantity::MultiplierError { k } => format!("multiplier_err{k}"),
            Quantity::NehariGap => "nehari_gap".into(),
            Quantity::ScaledEnergyGap => "scaled_energy_gap".into(),
            Quantity::ScaledMultiplierGap => "scaled_multiplier_gap".into(),
        }
    }

    /// Exclusion threshold for the value at record `i`.
    fn noise_floor(&self, report: &SweepReport, i: usize) -> f64 {
        match *self {
            Quantity::FieldResidual { k, s } => {
                let r = &report.records[i];
                let measured = report
                    .sobolev
                    .iter()
                    .position(|&x| x == s)
                    .and_then(|j| r.noise.get(k).map(|n| n[j]))
                    .unwrap_or(0.0);
                report.field_noise_floor.max(NOISE_MARGIN * measured)
            }
            Quantity::EnergyError { .. } => report.scalar_noise_floor * report.base_level.abs(),
            Quantity::MultiplierError { .. } => report.scalar_noise_floor * report.base_multiplier.abs(),
            _ => 0.0,
        }
    }
}

impl SweepReport {
    /// Values of `q` at every `c`, in sweep order.
    pub fn series(&self, q: Quantity) -> Result<Vec<f64>> {
        let missing = |what: &str| Error::InsufficientData(format!("{q} needs {what}"));
        let mut out = Vec::with_capacity(self.records.len());
        for r in &self.records {
            let v = match q {
                Quantity::FieldResidual { k, s } => {
                    let i = self
                        .sobolev
                        .iter()
                        .position(|&x| x == s)
                        .ok_or_else(|| missing("a recorded Sobolev index"))?;
                    *r.residuals.get(k).ok_or_else(|| missing("a recorded order"))?.get(i).expect("one per index")
                }
                Quantity::EnergyError { k } => *r.energy_errors.get(k).ok_or_else(|| missing("an energy sweep"))?,
                Quantity::MultiplierError { k } => {
                    *r.multiplier_errors.get(k).ok_or_else(|| missing("an energy sweep"))?
                }
                Quantity::NehariGap => (1.0 - r.nehari_scale.ok_or_else(|| missing("an action sweep"))?).abs(),
                Quantity::ScaledEnergyGap => {
                    if self.kind != ProblemKind::Energy {
                        return Err(missing("an energy sweep"));
                    }
                    r.c * r.c * (self.base_level - r.level)
                }
                Quantity::ScaledMultiplierGap => {
                    if self.kind != ProblemKind::Energy {
                        return Err(missing("an energy sweep"));
                    }
                    r.c * r.c * (self.base_multiplier - r.multiplier)
                }
            };
            out.push(v);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Log-log slope within `tol` of `value`.
    Slope { value: f64, tol: f64 },
    /// Value at the `c` nearest `at_c` within `rel_tol` of `value`, and the
    /// deviation from `value` shrinking from the first to the last point.
    Limit { value: f64, rel_tol: f64, at_c: f64 },
    /// Strictly decreasing in `c` above the noise floor.
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub quantity: Quantity,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub expectation: Expectation,
    pub pass: bool,
    /// Fitted slope, or the value at the probe point for limits.
    pub observed: Option<f64>,
    pub fit: Option<SlopeFit>,
    /// `c` values dropped for sitting below the noise floor.
    pub excluded: Vec<f64>,
    pub note: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let q = self.expectation.quantity;
        match self.expectation.target {
            Target::Slope { value, tol } => write!(
                f,
                "{status} slope of {q}: {} (expected {value} +/- {tol:.2})",
                self.observed.map_or("n/a".into(), |v| format!("{v:.4}"))
            )?,
            Target::Limit { value, rel_tol, at_c } => write!(
                f,
                "{status} {q} near c = {at_c:.2}: {} (expected {value:.6e} within {:.1}%)",
                self.observed.map_or("n/a".into(), |v| format!("{v:.6e}")),
                100.0 * rel_tol
            )?,
            Target::Decreasing => write!(f, "{status} {q} decreasing in c")?,
        }
        if !self.excluded.is_empty() {
            let cs: Vec<String> = self.excluded.iter().map(|c| format!("{c:.2}")).collect();
            write!(f, "; excluded below noise floor at c = [{}]", cs.join(", "))?;
        }
        if !self.note.is_empty() {
            write!(f, "; {}", self.note)?;
        }
        Ok(())
    }
}

fn above_floor(report: &SweepReport, q: Quantity) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let values = report.series(q)?;
    let (mut xs, mut ys, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    for (i, (c, v)) in report.c_values.iter().zip(values).enumerate() {
        if v > q.noise_floor(report, i) && v.is_finite() {
            xs.push(*c);
            ys.push(v);
        } else {
            excluded.push(*c);
        }
    }
    Ok((xs, ys, excluded))
}

fn judge(report: &SweepReport, e: Expectation) -> Verdict {
    let mut v = Verdict {
        expectation: e,
        pass: false,
        observed: None,
        fit: None,
        excluded: Vec::new(),
        note: String::new(),
    };
    let outcome: Result<()> = (|| {
        match e.target {
            Target::Slope { value, tol } => {
                let (xs, ys, excluded) = above_floor(report, e.quantity)?;
                v.excluded = excluded;
                let fit = fit_slope(&xs, &ys)?;
                v.observed = Some(fit.slope);
                v.fit = Some(fit);
                v.pass = (fit.slope - value).abs() <= tol;
                v.note = format!("r^2 = {:.6}", fit.r_squared);
            }
            Target::Limit { value, rel_tol, at_c } => {
                let values = report.series(e.quantity)?;
                let i = report
                    .c_values
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - at_c).abs().total_cmp(&(b.1 - at_c).abs()))
                    .map(|(i, _)| i)
                    .expect("non-empty sweep");
                v.observed = Some(values[i]);
                let close = (values[i] - value).abs() <= rel_tol * value.abs();
                let first = (values[0] - value).abs();
                let last = (values[values.len() - 1] - value).abs();
                let trending = values.len() < 2 || last <= first;
                v.pass = close && trending;
                v.note = format!(
                    "deviation {:.2e} at c = {:.2} and {:.2e} at c = {:.2}",
                    first / value.abs(),
                    report.c_values[0],
                    last / value.abs(),
                    report.c_values[values.len() - 1]
                );
            }
            Target::Decreasing => {
                let (xs, ys, excluded) = above_floor(report, e.quantity)?;
                v.excluded = excluded;
                let bad: Vec<f64> = xs.windows(2).zip(ys.windows(2)).filter(|(_, y)| y[1] >= y[0]).map(|(x, _)| x[1]).collect();
                v.pass = bad.is_empty() && ys.len() >= 2;
                if !bad.is_empty() {
                    v.note = format!("increases at c = {bad:?}");
                }
            }
        }
        Ok(())
    })();
    if let Err(err) = outcome {
        v.pass = false;
        v.note = err.to_string();
    }
    v
}

/// Marks each expectation pass or fail; problems evaluating one become failed
/// verdicts rather than errors.
pub fn verify_rates(report: &SweepReport, expectations: &[Expectation]) -> Vec<Verdict> {
    expectations.iter().map(|&e| judge(report, e)).collect()
}

/// Rates predicted for a report: `R_k` falls like `c^{-2(k+1)}` in every
/// recorded `H^s`, scalar errors after `k` terms like `c^{-2(k+1)}`, and
/// the scaled energy and multiplier gaps approach their closed forms.
pub fn default_expectations(report: &SweepReport) -> Vec<Expectation> {
    let mut out = Vec::new();
    let slope = |k: usize| Target::Slope {
        value: -2.0 * (k as f64 + 1.0),
        tol: 0.1 * (k as f64 + 1.0),
    };
    for k in 0..=report.order {
        for &s in &report.sobolev {
            out.push(Expectation {
                quantity: Quantity::FieldResidual { k, s },
                target: slope(k),
            });
        }
    }
    match report.kind {
        ProblemKind::Action => out.push(Expectation {
            quantity: Quantity::NehariGap,
            target: Target::Slope { value: -2.0, tol: 0.1 },
        }),
        ProblemKind::Energy => {
            for k in 1..=report.order {
                out.push(Expectation {
                    quantity: Quantity::EnergyError { k },
                    target: slope(k),
                });
                out.push(Expectation {
                    quantity: Quantity::MultiplierError { k },
                    target: slope(k),
                });
            }
            let m3 = report.params.mass.powi(3);
            let k = report.laplacian_norm_sq / m3;
            out.push(Expectation {
                quantity: Quantity::ScaledEnergyGap,
                target: Target::Limit { value: k / 8.0, rel_tol: 0.05, at_c: 80.0 },
            });
            out.push(Expectation {
                quantity: Quantity::ScaledMultiplierGap,
                target: Target::Limit { value: -5.0 * k / 8.0, rel_tol: 0.05, at_c: 80.0 },
            });
        }
    }
    out
}
