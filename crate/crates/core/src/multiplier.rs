//! Radial Fourier multipliers: the pseudo-relativistic kinetic symbol, its
//! non-relativistic limit, the Taylor terms and remainders in `1/c²`, the
//! Pohozaev symbol, Laplacian powers and shifted resolvents.
//!
//! With `x = ρ²/(m²c²)` the kinetic symbol is `P_c(ρ) = mc²(√(1+x) − 1)`.
//! Its Taylor coefficients are `(−1)^{k−1} α_k x^k` with
//! `α_k = (2k−2)! / (k!(k−1)! 2^{2k−1})`.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::harness::fit_slope;
use crate::params::{PhysicalParams, SpeedOfLight};
use crate::radial::{forward, h_s_norm, inverse, RadialField, RadialGrid};

/// `α_k` by the product recurrence `α_{k+1} = α_k (2k−1)/(2k+2)`, `α_1 = 1/2`.
pub fn alpha(k: u32) -> Result<f64> {
    if k == 0 {
        return Err(invalid("alpha index", "k must be >= 1"));
    }
    let mut a = 0.5;
    for j in 1..k {
        let j = j as f64;
        a *= (2.0 * j - 1.0) / (2.0 * j + 2.0);
    }
    Ok(a)
}

pub(crate) fn alpha_unchecked(k: u32) -> f64 {
    alpha(k).expect("k >= 1")
}

/// Which symbol a multiplier represents.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierKind {
    /// `√(c²ρ² + m²c⁴) − mc²`.
    Pc,
    /// `ρ²/2m`.
    Pinf,
    /// `(−1)^n α_{n+1} ρ^{2n+2} / m^{2n+1}`; `PinfN(0)` is `Pinf`.
    PinfN(u32),
    /// `P_c` minus the first `n` Taylor terms in `1/c²`.
    PcN(u32),
    /// `P_c / √(ρ²/(m²c²) + 1)`.
    Tc,
    /// `(−Δ)^p`, symbol `ρ^{2p}`.
    FracLap(f64),
    /// `1/(base + shift)`.
    Resolvent { base: Box<MultiplierKind>, shift: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSpec {
    pub kind: MultiplierKind,
    pub params: PhysicalParams,
}

impl MultiplierSpec {
    pub fn new(kind: MultiplierKind, params: PhysicalParams) -> Result<Self> {
        let spec = MultiplierSpec { kind, params };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pc(params: PhysicalParams) -> Self {
        MultiplierSpec { kind: MultiplierKind::Pc, params }
    }

    pub fn pinf(params: PhysicalParams) -> Self {
        MultiplierSpec { kind: MultiplierKind::Pinf, params }
    }

    pub fn pinf_n(n: u32, params: PhysicalParams) -> Self {
        MultiplierSpec { kind: MultiplierKind::PinfN(n), params }
    }

    pub fn frac_lap(p: f64, params: PhysicalParams) -> Self {
        MultiplierSpec { kind: MultiplierKind::FracLap(p), params }
    }

    /// `(P + shift)^{-1}` where `P` is `P_c` or `P_∞` according to `params.c`.
    pub fn kinetic_resolvent(params: PhysicalParams, shift: f64) -> Result<Self> {
        Self::new(
            MultiplierKind::Resolvent {
                base: Box::new(MultiplierKind::Pc),
                shift,
            },
            params,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        validate_kind(&self.kind, &self.params)
    }

    /// Symbol values at every grid frequency.
    pub fn table(&self, grid: &Arc<RadialGrid>) -> Result<SymbolTable> {
        self.validate()?;
        let values = grid
            .frequencies()
            .map(|rho| symbol(&self.kind, &self.params, rho))
            .collect();
        Ok(SymbolTable {
            grid: grid.clone(),
            values,
        })
    }
}

fn validate_kind(kind: &MultiplierKind, params: &PhysicalParams) -> Result<()> {
    match kind {
        MultiplierKind::PcN(_) if params.c.is_infinite() => Err(Error::InvalidSpec(
            "PcN requires a finite speed of light".into(),
        )),
        MultiplierKind::FracLap(p) if !(p.is_finite() && *p >= 0.0) => {
            Err(Error::InvalidSpec(format!("fractional power must be >= 0, got {p}")))
        }
        MultiplierKind::Resolvent { base, shift } => {
            if !(shift.is_finite() && *shift > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "resolvent shift must be > 0, got {shift}"
                )));
            }
            match **base {
                MultiplierKind::Pc
                | MultiplierKind::Pinf
                | MultiplierKind::Tc
                | MultiplierKind::FracLap(_) => validate_kind(base, params),
                _ => Err(Error::InvalidSpec(
                    "resolvent base must be a nonnegative symbol (Pc, Pinf, Tc, FracLap)".into(),
                )),
            }
        }
        _ => Ok(()),
    }
}

/// `√(1+x) − 1 − Σ_{k=1}^{n} (−1)^{k−1} α_k x^k`.
///
/// For small `x` the remainder is summed from its own (alternating) tail
/// series, which keeps full relative accuracy and the sign of the first
/// omitted term. For larger `x` the direct difference is taken with
/// compensated summation.
fn taylor_remainder(n: u32, x: f64) -> f64 {
    if n == 0 {
        return x / ((1.0 + x).sqrt() + 1.0);
    }
    if x < 0.5 {
        // α_{k+1} x^{k+1} (−1)^k, starting from k = n + 1
        let mut term = alpha_unchecked(n + 1) * x.powi(n as i32 + 1);
        if n % 2 == 1 {
            term = -term;
        }
        let mut sum = 0.0;
        let mut k = n + 1;
        loop {
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() || k > n + 200 {
                break;
            }
            let kf = k as f64;
            term *= -x * (2.0 * kf - 1.0) / (2.0 * kf + 2.0);
            k += 1;
        }
        sum
    } else {
        let mut acc = NeumaierSum::new(x / ((1.0 + x).sqrt() + 1.0));
        let mut a = 0.5;
        let mut xp = x;
        for k in 1..=n {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            acc.add(-sign * a * xp);
            a *= (2.0 * kf - 1.0) / (2.0 * kf + 2.0);
            xp *= x;
        }
        acc.value()
    }
}

struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn new(x: f64) -> Self {
        NeumaierSum { sum: x, comp: 0.0 }
    }

    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn pinf_n(n: u32, m: f64, rho: f64) -> f64 {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * alpha_unchecked(n + 1) * rho.powi(2 * n as i32 + 2) / m.powi(2 * n as i32 + 1)
}

fn symbol(kind: &MultiplierKind, p: &PhysicalParams, rho: f64) -> f64 {
    let m = p.mass;
    match kind {
        MultiplierKind::Pinf => rho * rho / (2.0 * m),
        MultiplierKind::PinfN(n) => pinf_n(*n, m, rho),
        MultiplierKind::Pc => match p.c {
            SpeedOfLight::Infinite => rho * rho / (2.0 * m),
            SpeedOfLight::Finite(c) => {
                let cr = c * rho;
                let mc2 = m * c * c;
                cr * cr / ((cr * cr + mc2 * mc2).sqrt() + mc2)
            }
        },
        MultiplierKind::PcN(n) => {
            let c = p.c.finite().expect("validated: finite c");
            let x = rho * rho / (m * m * c * c);
            m * c * c * taylor_remainder(*n, x)
        }
        MultiplierKind::Tc => match p.c {
            SpeedOfLight::Infinite => rho * rho / (2.0 * m),
            SpeedOfLight::Finite(c) => {
                let x = rho * rho / (m * m * c * c);
                symbol(&MultiplierKind::Pc, p, rho) / (x + 1.0).sqrt()
            }
        },
        MultiplierKind::FracLap(q) => {
            if *q == 0.0 {
                1.0
            } else {
                rho.powf(2.0 * q)
            }
        }
        MultiplierKind::Resolvent { base, shift } => 1.0 / (symbol(base, p, rho) + shift),
    }
}

/// Value of the symbol at radial frequency `rho`.
pub fn eval_symbol(spec: &MultiplierSpec, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(invalid("rho", format!("must be >= 0, got {rho}")));
    }
    spec.validate()?;
    Ok(symbol(&spec.kind, &spec.params, rho))
}

/// A symbol sampled on a grid's spectral nodes, ready to apply repeatedly.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl SymbolTable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn apply(&self, u: &RadialField) -> Result<RadialField> {
        crate::radial::ensure_same_grid(&self.grid, u.grid())?;
        Ok(self.apply_unchecked(u))
    }

    pub(crate) fn apply_unchecked(&self, u: &RadialField) -> RadialField {
        let mut s = forward(u);
        for (c, w) in s.coeffs_mut().iter_mut().zip(&self.values) {
            *c *= w;
        }
        inverse(&s)
    }

    /// `⟨S u, v⟩` evaluated spectrally.
    pub(crate) fn pairing(&self, u: &RadialField, v: &RadialField) -> f64 {
        let su = forward(u);
        let sv = forward(v);
        let dr = self.grid.spacing();
        let s: f64 = su
            .coeffs()
            .iter()
            .zip(sv.coeffs())
            .zip(&self.values)
            .map(|((a, b), w)| a * b * w)
            .sum();
        4.0 * std::f64::consts::PI * dr * s
    }
}

pub fn apply_multiplier(spec: &MultiplierSpec, u: &RadialField) -> Result<RadialField> {
    spec.table(u.grid())?.apply(u)
}

/// Least-squares slope of `log ‖P_{c,n} f‖_{L²}` against `log c`.
pub fn remainder_rate(n: u32, f: &RadialField, params: PhysicalParams, c_values: &[f64]) -> Result<f64> {
    if c_values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 values of c, got {}",
            c_values.len()
        )));
    }
    let mut norms = Vec::with_capacity(c_values.len());
    for &c in c_values {
        let spec = MultiplierSpec::new(
            MultiplierKind::PcN(n),
            params.with_c(SpeedOfLight::Finite(c)),
        )?;
        let v = apply_multiplier(&spec, f)?;
        norms.push(h_s_norm(&v, 0.0)?);
    }
    if norms.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InsufficientData(
            "remainder vanishes identically; slope undefined".into(),
        ));
    }
    if c_values.len() == 2 {
        return Ok((norms[1].ln() - norms[0].ln()) / (c_values[1].ln() - c_values[0].ln()));
    }
    Ok(fit_slope(c_values, &norms)?.slope)
}
