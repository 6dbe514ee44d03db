//! Asymptotic series of the ground states in powers of `1/c²`.
//!
//! Action: `u_c ≈ Σ_j f_j c^{-2j}` with `f_0 = u_∞`.
//! Energy: `w_c ≈ Σ_j g_j c^{-2j}`, `e_c ≈ e_∞ + Σ a_j c^{-2j}`,
//! `ω_c ≈ ω_∞ + Σ b_j c^{-2j}` with `g_0 = w_∞`.

use crate::error::{invalid, Error, Result};
use crate::ground_state::{GroundStateResult, ProblemKind};
use crate::hartree::{compositions, d_e_inf, t_k};
use crate::linearized::{apply_L, solve_L, LinearizedOp, DEFAULT_TOL};
use crate::multiplier::{alpha_unchecked, apply_multiplier, MultiplierSpec};
use crate::params::{PhysicalParams, SpeedOfLight};
use crate::radial::{forward, inner_product, RadialField};

/// Largest order built without an explicit opt-in; higher orders multiply
/// grid noise by large powers of the frequency.
pub const DEFAULT_MAX_ORDER: usize = 3;

#[derive(Debug, Clone)]
pub struct ExpansionSeries {
    pub kind: ProblemKind,
    pub base: GroundStateResult,
    /// `corrections[j-1]` is `f_j` (or `g_j`).
    pub corrections: Vec<RadialField>,
    /// `a[j-1] = a_j`; empty for the action kind.
    pub a: Vec<f64>,
    /// `b[j-1] = b_j`; empty for the action kind.
    pub b: Vec<f64>,
    pub order: usize,
    /// Number of sine modes kept in every right-hand side; see [`noise_cutoff`].
    pub retained_modes: usize,
    rhs: Vec<RadialField>,
}

impl ExpansionSeries {
    /// `f_j` / `g_j`, with `j = 0` the base profile.
    pub fn term(&self, j: usize) -> Option<&RadialField> {
        match j {
            0 => Some(&self.base.profile),
            _ => self.corrections.get(j - 1),
        }
    }

    /// Right-hand sides of the defining linear equations, `rhs[j-1]` for the
    /// `j`-th correction.
    pub fn rhs(&self) -> &[RadialField] {
        &self.rhs
    }

    fn operator(&self) -> Result<LinearizedOp> {
        LinearizedOp::new(self.base.profile.clone(), self.base.multiplier, self.base.params)
    }

    /// `‖L·correction_j − rhs_j‖ / ‖rhs_j‖` recomputed from scratch.
    pub fn relative_residuals(&self) -> Result<Vec<f64>> {
        let op = self.operator()?;
        self.corrections
            .iter()
            .zip(&self.rhs)
            .map(|(f, rhs)| {
                let r = apply_L(&op, f)?.sub(rhs)?.l2_norm();
                let n = rhs.l2_norm();
                Ok(if n > 0.0 { r / n } else { r })
            })
            .collect()
    }

    /// A copy with correction `j` replaced by zero; used as a negative control.
    pub fn with_zeroed(&self, j: usize) -> Result<Self> {
        if j == 0 || j > self.order {
            return Err(invalid("j", format!("no correction {j} in a series of order {}", self.order)));
        }
        let mut out = self.clone();
        out.corrections[j - 1] = RadialField::zeros(self.base.profile.grid().clone());
        Ok(out)
    }

    /// `e_∞ + Σ_{j≤up_to} a_j c^{-2j}`.
    pub fn energy_at(&self, c: f64, up_to: usize) -> Result<f64> {
        self.require_energy()?;
        eval_scalar_series(self.base.level, &self.a, c, up_to)
    }

    /// `ω_∞ + Σ_{j≤up_to} b_j c^{-2j}`.
    pub fn multiplier_at(&self, c: f64, up_to: usize) -> Result<f64> {
        self.require_energy()?;
        eval_scalar_series(self.base.multiplier, &self.b, c, up_to)
    }

    fn require_energy(&self) -> Result<()> {
        if self.kind != ProblemKind::Energy {
            return Err(Error::WrongKind("scalar coefficients exist only for the energy series".into()));
        }
        Ok(())
    }
}

fn check_base(base: &GroundStateResult, kind: ProblemKind, n: usize) -> Result<()> {
    if base.kind != kind {
        return Err(Error::WrongKind(format!("expected a {kind} ground state, got {}", base.kind)));
    }
    if !base.params.c.is_infinite() {
        return Err(invalid("c", "the series is built around the c = inf ground state"));
    }
    if n == 0 {
        return Err(invalid("order", "must be at least 1"));
    }
    Ok(())
}

/// Relative level below which the base spectrum is round-off.
const ROUNDOFF_PLATEAU: f64 = 1e-16;

/// Number of sine modes worth keeping in the correction equations: 1.5 times
/// the band in which the base profile's coefficients stand above the
/// round-off plateau, capped by the grid.
///
/// The right-hand sides apply symbols growing like `ρ^{2k+2}` to the base,
/// which lifts its round-off floor (about `1e-17` relative) by many orders
/// at the top of the spectrum. The true corrections decay exponentially in
/// `ρ`, so everything beyond this band is amplified noise.
pub fn noise_cutoff(base: &RadialField) -> usize {
    let s = forward(base);
    let c = s.coeffs();
    let max = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let band = c.iter().rposition(|x| x.abs() > ROUNDOFF_PLATEAU * max).map_or(1, |i| i + 1);
    (3 * band / 2).min(c.len())
}

fn band_limited(f: &RadialField, keep: usize) -> RadialField {
    let mut s = forward(f);
    s.coeffs_mut()[keep..].iter_mut().for_each(|c| *c = 0.0);
    crate::radial::inverse(&s)
}

/// `−Σ_{j<k} P_{∞,k−j}(D) f_j`.
fn kinetic_tail(fields: &[RadialField], k: usize, params: &PhysicalParams) -> Result<RadialField> {
    let mut out = RadialField::zeros(fields[0].grid().clone());
    for (j, f) in fields.iter().enumerate().take(k) {
        let p = apply_multiplier(&MultiplierSpec::pinf_n((k - j) as u32, *params), f)?;
        out.axpy(-1.0, &p)?;
    }
    Ok(out)
}

/// Builds `f_1..f_n` from `L_λ f_k = −Σ_{j<k} P_{∞,k−j}(D) f_j + T_k`.
pub fn build_action_expansion(base: &GroundStateResult, n: usize) -> Result<ExpansionSeries> {
    check_base(base, ProblemKind::Action, n)?;
    let op = LinearizedOp::new(base.profile.clone(), base.multiplier, base.params)?;
    let keep = noise_cutoff(&base.profile);
    let mut fields = vec![base.profile.clone()];
    let mut rhs_list = Vec::with_capacity(n);
    for k in 1..=n {
        let mut rhs = kinetic_tail(&fields, k, &base.params)?;
        rhs.axpy(1.0, &t_k(&fields, k)?)?;
        let rhs = band_limited(&rhs, keep);
        let f = solve_L(&op, &rhs, DEFAULT_TOL)?;
        fields.push(f);
        rhs_list.push(rhs);
    }
    fields.remove(0);
    Ok(ExpansionSeries {
        kind: ProblemKind::Action,
        base: base.clone(),
        corrections: fields,
        a: Vec::new(),
        b: Vec::new(),
        order: n,
        retained_modes: keep,
        rhs: rhs_list,
    })
}

/// Builds `g_1..g_n`, `a_1..a_n`, `b_1..b_n`. At each order the coefficients
/// come first (they only involve `g_0..g_{k−1}`), then
/// `L_{ω_∞} g_k = −Σ_{j<k} P_{∞,k−j}(D) g_j − Σ_{j<k} b_{k−j} g_j + T_k`.
pub fn build_energy_expansion(base: &GroundStateResult, n: usize) -> Result<ExpansionSeries> {
    check_base(base, ProblemKind::Energy, n)?;
    let op = LinearizedOp::new(base.profile.clone(), base.multiplier, base.params)?;
    let params = base.params;
    let omega = base.multiplier;
    let keep = noise_cutoff(&base.profile);
    let mut fields = vec![base.profile.clone()];
    let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut rhs_list = Vec::with_capacity(n);
    for k in 1..=n {
        a.push(coeff_a(&fields, omega, &params, k)?);
        b.push(coeff_b(&fields, omega, &params, k)?);
        let mut rhs = kinetic_tail(&fields, k, &params)?;
        for (j, g) in fields.iter().enumerate() {
            rhs.axpy(-b[k - j - 1], g)?;
        }
        rhs.axpy(1.0, &t_k(&fields, k)?)?;
        let rhs = band_limited(&rhs, keep);
        let g = solve_L(&op, &rhs, DEFAULT_TOL)?;
        fields.push(g);
        rhs_list.push(rhs);
    }
    fields.remove(0);
    Ok(ExpansionSeries {
        kind: ProblemKind::Energy,
        base: base.clone(),
        corrections: fields,
        a,
        b,
        order: n,
        retained_modes: keep,
        rhs: rhs_list,
    })
}

/// How `⟨(−Δ)^{p/2} f, (−Δ)^{p/2} g⟩` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingRoute {
    /// Weighted sum `4π dr Σ ρ^{2p} f̂ ĝ` over sine coefficients.
    Spectral,
    /// Apply the fractional Laplacian to both fields, then pair in L².
    FracLap,
}

fn laplacian_pairing(f: &RadialField, g: &RadialField, p: u32, params: &PhysicalParams, route: PairingRoute) -> Result<f64> {
    match route {
        PairingRoute::Spectral => {
            f.check_grid(g)?;
            let grid = f.grid();
            let (sf, sg) = (forward(f), forward(g));
            let s: f64 = sf
                .coeffs()
                .iter()
                .zip(sg.coeffs())
                .enumerate()
                .map(|(j, (a, b))| grid.frequency(j).powi(2 * p as i32) * a * b)
                .sum();
            Ok(4.0 * std::f64::consts::PI * grid.spacing() * s)
        }
        PairingRoute::FracLap => {
            let spec = MultiplierSpec::frac_lap(p as f64 / 2.0, *params);
            inner_product(&apply_multiplier(&spec, f)?, &apply_multiplier(&spec, g)?)
        }
    }
}

/// `‖Δ w‖²_{L²}`, computed on the sine coefficients.
pub fn laplacian_norm_squared(w: &RadialField) -> f64 {
    laplacian_pairing(w, w, 2, &PhysicalParams::unit(), PairingRoute::Spectral).expect("same grid")
}

/// Pieces of the energy and multiplier coefficients at one order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientParts {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
}

impl CoefficientParts {
    pub fn a(&self) -> f64 {
        self.a1 + self.a2
    }

    pub fn b(&self) -> f64 {
        -3.0 * self.a() + self.a1 - self.b1
    }
}

fn require_terms(g: &[RadialField], j: usize) -> Result<()> {
    if j == 0 {
        return Err(invalid("j", "coefficients start at j = 1"));
    }
    if g.len() < j {
        return Err(Error::InsufficientData(format!(
            "coefficient {j} needs g_0..g_{}, only {} available",
            j - 1,
            g.len()
        )));
    }
    Ok(())
}

fn binom_central_over_4t(t: u32) -> f64 {
    // C(2t, t)/4^t = Π_{i=1}^t (2i−1)/(2i)
    (1..=t).map(|i| (2 * i - 1) as f64 / (2 * i) as f64).product()
}

/// `a_{1,j}`, `a_{2,j}` and `b_{1,j}` from `g = [g_0, .., g_{j−1}, ..]`.
pub fn coefficient_parts(
    g: &[RadialField],
    omega_inf: f64,
    params: &PhysicalParams,
    j: usize,
    route: PairingRoute,
) -> Result<CoefficientParts> {
    require_terms(g, j)?;
    let m = params.mass;
    let limit = PhysicalParams {
        c: SpeedOfLight::Infinite,
        ..*params
    };
    // S_z(ℓ) = Σ_{p+q=ℓ} ⟨ρ^{z+1} g_q, ρ^{z+1} g_p⟩
    let s_sum = |z: usize, l: usize| -> Result<f64> {
        let mut acc = 0.0;
        for q in 0..=l {
            acc += laplacian_pairing(&g[q], &g[l - q], z as u32 + 1, params, route)?;
        }
        Ok(acc)
    };

    let mut a1 = 0.0;
    let mut b1 = 0.0;
    for z in 1..=j {
        let l = j - z;
        let s = s_sum(z, l)?;
        let sign = if z % 2 == 0 { 1.0 } else { -1.0 };
        let mz = m.powi(2 * z as i32 + 1);
        a1 += sign * alpha_unchecked(z as u32 + 1) / mz * s;
        let weight: f64 = (0..=z)
            .map(|t| alpha_unchecked((z - t) as u32 + 1) * binom_central_over_4t(t as u32))
            .sum();
        b1 += sign / mz * weight * s;
    }

    let mut a2 = 0.0;
    for parts in 2..=4usize {
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0][parts];
        for comp in compositions(j, parts, j) {
            let hs: Vec<&RadialField> = comp.iter().map(|&i| &g[i]).collect();
            let mut term = d_e_inf(&g[0], &hs, &limit)?;
            if parts == 2 {
                term += 2.0 * omega_inf * inner_product(hs[0], hs[1])?;
            }
            a2 += term / fact;
        }
    }
    Ok(CoefficientParts { a1, a2, b1 })
}

/// `a_j = a_{1,j} + a_{2,j}`.
pub fn coeff_a(g: &[RadialField], omega_inf: f64, params: &PhysicalParams, j: usize) -> Result<f64> {
    Ok(coefficient_parts(g, omega_inf, params, j, PairingRoute::Spectral)?.a())
}

/// `b_j = −3a_j + a_{1,j} − b_{1,j}`.
pub fn coeff_b(g: &[RadialField], omega_inf: f64, params: &PhysicalParams, j: usize) -> Result<f64> {
    Ok(coefficient_parts(g, omega_inf, params, j, PairingRoute::Spectral)?.b())
}

fn check_eval(c: f64, up_to: usize, available: usize) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid("c", format!("series are evaluated at finite positive c, got {c}")));
    }
    if up_to > available {
        return Err(invalid("up_to", format!("{up_to} exceeds the series order {available}")));
    }
    Ok(())
}

/// `f_0 + Σ_{j=1}^{up_to} f_j c^{-2j}`.
pub fn eval_series(series: &ExpansionSeries, c: f64, up_to: usize) -> Result<RadialField> {
    check_eval(c, up_to, series.order)?;
    let mut out = series.base.profile.clone();
    let inv = c.powi(-2);
    let mut w = 1.0;
    for f in &series.corrections[..up_to] {
        w *= inv;
        out.axpy(w, f)?;
    }
    Ok(out)
}

/// `base + Σ_{j=1}^{up_to} coeffs[j-1] c^{-2j}`.
pub fn eval_scalar_series(base_value: f64, coeffs: &[f64], c: f64, up_to: usize) -> Result<f64> {
    check_eval(c, up_to, coeffs.len())?;
    let inv = c.powi(-2);
    let mut w = 1.0;
    let mut out = base_value;
    for a in &coeffs[..up_to] {
        w *= inv;
        out += a * w;
    }
    Ok(out)
}

/// Smallest frequency beyond which every sine coefficient of `f` stays below
/// `threshold` times the largest one.
pub fn spectral_decay_frequency(f: &RadialField, threshold: f64) -> f64 {
    let s = forward(f);
    let c = s.coeffs();
    let max = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let last = c.iter().rposition(|x| x.abs() > threshold * max).map_or(0, |i| i + 1);
    f.grid().frequency(last.min(c.len() - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{solve_action, solve_energy, SolverOptions};
    use crate::radial::{resample, RadialGrid};
    use std::sync::{Arc, OnceLock};

    fn grid() -> Arc<RadialGrid> {
        RadialGrid::new(1024, 40.0).unwrap()
    }

    fn energy_series() -> &'static ExpansionSeries {
        static S: OnceLock<ExpansionSeries> = OnceLock::new();
        S.get_or_init(|| {
            let gs = solve_energy(&PhysicalParams::unit(), &SolverOptions::on_grid(grid())).unwrap();
            build_energy_expansion(&gs, 2).unwrap()
        })
    }

    fn action_series() -> &'static ExpansionSeries {
        static S: OnceLock<ExpansionSeries> = OnceLock::new();
        S.get_or_init(|| {
            let gs = solve_action(&PhysicalParams::unit(), &SolverOptions::on_grid(grid())).unwrap();
            build_action_expansion(&gs, 2).unwrap()
        })
    }

    #[test]
    fn first_coefficients_match_closed_forms() {
        let s = energy_series();
        let k = laplacian_norm_squared(&s.base.profile);
        let parts = coefficient_parts(&[s.base.profile.clone()], s.base.multiplier, &s.base.params, 1, PairingRoute::Spectral).unwrap();
        assert_eq!(parts.a2, 0.0);
        assert!((parts.a1 + k / 8.0).abs() < 1e-12 * k);
        assert!((parts.b1 + 3.0 * k / 8.0).abs() < 1e-12 * k);
        assert!((s.a[0] + k / 8.0).abs() < 1e-10 * k);
        assert!((s.b[0] - 5.0 * k / 8.0).abs() < 1e-10 * k);
    }

    #[test]
    fn pairing_routes_agree() {
        let s = energy_series();
        let g: Vec<RadialField> = (0..=2).map(|j| s.term(j).unwrap().clone()).collect();
        let p = s.base.params;
        for j in 1..=2 {
            let a = coefficient_parts(&g, s.base.multiplier, &p, j, PairingRoute::Spectral).unwrap();
            let b = coefficient_parts(&g, s.base.multiplier, &p, j, PairingRoute::FracLap).unwrap();
            for (x, y) in [(a.a1, b.a1), (a.b1, b.b1)] {
                assert!((x - y).abs() < 1e-12 * x.abs().max(1e-300), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn stored_corrections_solve_their_equations() {
        for s in [energy_series(), action_series()] {
            for r in s.relative_residuals().unwrap() {
                assert!(r < 1e-8, "{r}");
            }
        }
    }

    #[test]
    fn energy_corrections_preserve_normalization() {
        // ‖w_c‖ = 1 to every order: Σ_{i+k=j} ⟨g_i, g_k⟩ = 0
        let s = energy_series();
        for j in 1..=2 {
            let sum: f64 = (0..=j)
                .map(|i| inner_product(s.term(i).unwrap(), s.term(j - i).unwrap()).unwrap())
                .sum();
            let scale = s.term(j).unwrap().l2_norm();
            assert!(sum.abs() < 1e-7 * scale, "order {j}: {sum}");
        }
    }

    #[test]
    fn first_action_correction_equation() {
        let s = action_series();
        let p = s.base.params;
        let u = &s.base.profile;
        let expect = apply_multiplier(&MultiplierSpec::frac_lap(2.0, p), u).unwrap().scaled(1.0 / 8.0);
        let expect = band_limited(&expect, s.retained_modes);
        assert!(s.rhs()[0].sub(&expect).unwrap().l2_norm() < 1e-10 * expect.l2_norm());
    }

    #[test]
    fn corrections_are_smooth() {
        for s in [energy_series(), action_series()] {
            let g = s.base.profile.grid();
            assert!(s.retained_modes < g.len() / 2);
            let cut = g.frequency(s.retained_modes);
            for (j, f) in s.corrections.iter().enumerate() {
                // the decay happens inside the retained band, not at its edge;
                // the second correction carries round-off lifted by ρ⁶
                let level = if j == 0 { 1e-12 } else { 1e-10 };
                let d = spectral_decay_frequency(f, level);
                assert!(d < 0.8 * cut, "{d} vs {cut}");
            }
        }
    }

    #[test]
    fn evaluation() {
        let s = action_series();
        assert_eq!(eval_series(s, 10.0, 0).unwrap(), s.base.profile);
        let far = eval_series(s, 1e8, 2).unwrap();
        assert!(far.sub(&s.base.profile).unwrap().max_abs() < 1e-12 * s.base.profile.max_abs());
        assert!(eval_series(s, 10.0, 3).is_err());
        assert!(eval_series(s, f64::INFINITY, 1).is_err());
        assert_eq!(eval_scalar_series(1.0, &[4.0, 16.0], 2.0, 2).unwrap(), 3.0);
        assert!(eval_scalar_series(1.0, &[4.0], 2.0, 2).is_err());
        assert!(s.energy_at(10.0, 1).is_err());
    }

    #[test]
    fn negative_control_zeroes_one_correction() {
        let s = action_series();
        let z = s.with_zeroed(1).unwrap();
        assert_eq!(z.corrections[0].max_abs(), 0.0);
        assert_eq!(z.corrections[1], s.corrections[1]);
        assert!(s.with_zeroed(0).is_err());
        assert!(s.with_zeroed(3).is_err());
    }

    #[test]
    fn rejects_wrong_bases() {
        let s = action_series();
        assert!(matches!(build_energy_expansion(&s.base, 1), Err(Error::WrongKind(_))));
        assert!(build_action_expansion(&s.base, 0).is_err());
        let mut finite = s.base.clone();
        finite.params = finite.params.with_c(SpeedOfLight::Finite(50.0));
        assert!(build_action_expansion(&finite, 1).is_err());
        assert!(coeff_a(&[s.base.profile.clone()], 1.0, &s.base.params, 2).is_err());
    }

    #[test]
    fn first_correction_is_grid_stable() {
        let s = action_series();
        let fine_grid = RadialGrid::new(2048, 40.0).unwrap();
        let gs = solve_action(&PhysicalParams::unit(), &SolverOptions::on_grid(fine_grid.clone())).unwrap();
        let fine = build_action_expansion(&gs, 1).unwrap();
        let d = resample(&s.corrections[0], &fine_grid).sub(&fine.corrections[0]).unwrap();
        assert!(d.l2_norm() < 1e-6, "{}", d.l2_norm());
    }

    #[test]
    fn central_binomial_weights() {
        assert_eq!(binom_central_over_4t(0), 1.0);
        assert_eq!(binom_central_over_4t(1), 0.5);
        assert_eq!(binom_central_over_4t(2), 6.0 / 16.0);
        assert_eq!(binom_central_over_4t(3), 20.0 / 64.0);
    }
}
