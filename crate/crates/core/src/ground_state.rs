//! Action ground states (Nehari-constrained) and energy ground states (unit
//! L² norm), for finite `c` and for the limit problem.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::hartree::{energy, hartree_energy, nonlinearity};
use crate::linearized::{solve_L_detailed, LinearizedOp};
use crate::multiplier::{MultiplierKind, MultiplierSpec, SymbolTable};
use crate::params::{PhysicalParams, SpeedOfLight};
use crate::radial::{h_s_norm, inner_product, RadialField, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Action,
    Energy,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Action => "action",
            ProblemKind::Energy => "energy",
        })
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "action" => Ok(ProblemKind::Action),
            "energy" => Ok(ProblemKind::Energy),
            other => Err(invalid("kind", format!("expected 'action' or 'energy', got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub grid: Arc<RadialGrid>,
    /// Target for the L² equation residual.
    pub tol: f64,
    pub max_iterations: usize,
    /// Picard damping θ for the action problem.
    pub damping: f64,
    /// Stabilization σ = `sigma_factor`·(current multiplier) for the energy flow.
    pub sigma_factor: f64,
    /// Smallest finite `c` accepted by the energy solver.
    pub c_min: f64,
    /// Finish with Newton steps once the fixed-point iteration has settled.
    pub newton: bool,
    /// Fixed-point step size below which Newton takes over.
    pub newton_switch: f64,
    /// Warm start; the solver rescales it onto the constraint.
    pub initial: Option<RadialField>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self::on_grid(RadialGrid::default_grid())
    }
}

impl SolverOptions {
    pub fn on_grid(grid: Arc<RadialGrid>) -> Self {
        SolverOptions {
            grid,
            tol: 1e-10,
            max_iterations: 100_000,
            damping: 0.5,
            sigma_factor: 2.0,
            c_min: 5.0,
            newton: true,
            newton_switch: 1e-5,
            initial: None,
        }
    }

    pub fn with_initial(mut self, initial: RadialField) -> Self {
        self.initial = Some(initial);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid("tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping", format!("must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.sigma_factor.is_finite() && self.sigma_factor >= 1.0) {
            return Err(invalid("sigma_factor", format!("must be >= 1, got {}", self.sigma_factor)));
        }
        if !(self.c_min.is_finite() && self.c_min > 0.0) {
            return Err(invalid("c_min", format!("must be positive, got {}", self.c_min)));
        }
        if !(self.newton_switch > 0.0) {
            return Err(invalid("newton_switch", "must be positive"));
        }
        if let Some(init) = &self.initial {
            crate::radial::ensure_same_grid(&self.grid, init.grid())?;
            if init.l2_norm() == 0.0 {
                return Err(invalid("initial", "warm start is identically zero"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub profile: RadialField,
    pub kind: ProblemKind,
    pub params: PhysicalParams,
    /// `J(u)` for the action kind, `E(w)` for the energy kind.
    pub level: f64,
    /// `λ` for the action kind, the extracted `ω` for the energy kind.
    pub multiplier: f64,
    pub residual_l2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Level after each fixed-point iteration (Newton steps excluded).
    pub trace: Vec<f64>,
}

/// Kinetic symbol `P_c` (or `P_∞`), its resolvent machinery and `H^{1/2}`
/// weights for one solve.
struct Kinetic {
    table: SymbolTable,
    params: PhysicalParams,
}

impl Kinetic {
    fn new(params: &PhysicalParams, grid: &Arc<RadialGrid>) -> Result<Self> {
        Ok(Kinetic {
            table: MultiplierSpec::pc(*params).table(grid)?,
            params: *params,
        })
    }

    fn resolvent(&self, shift: f64) -> Result<SymbolTable> {
        let grid = self.table.grid();
        MultiplierSpec::kinetic_resolvent(self.params, shift)?.table(grid)
    }

    fn pairing(&self, u: &RadialField) -> f64 {
        self.table.pairing(u, u)
    }

    /// `‖P u + shift·u − N(u)‖`.
    fn residual(&self, u: &RadialField, shift: f64) -> f64 {
        let mut r = self.table.apply_unchecked(u);
        let n = nonlinearity(u);
        for ((r, u), n) in r.values_mut().iter_mut().zip(u.values()).zip(n.values()) {
            *r += shift * u - n;
        }
        r.l2_norm()
    }

    fn residual_field(&self, u: &RadialField, shift: f64) -> RadialField {
        let mut r = self.table.apply_unchecked(u);
        let n = nonlinearity(u);
        for ((r, u), n) in r.values_mut().iter_mut().zip(u.values()).zip(n.values()) {
            *r += shift * u - n;
        }
        r
    }
}

fn gaussian(grid: &Arc<RadialGrid>, width: f64) -> RadialField {
    RadialField::from_fn(grid.clone(), |r| (-0.5 * (r / width).powi(2)).exp()).expect("finite Gaussian")
}

fn positive_orientation(mut u: RadialField) -> RadialField {
    let s: f64 = u.values().iter().sum();
    if s < 0.0 {
        u.values_mut().iter_mut().for_each(|v| *v = -*v);
    }
    u
}

fn normalized(u: &RadialField) -> Result<RadialField> {
    let n = u.l2_norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Degenerate(format!("cannot normalize a field of norm {n}")));
    }
    Ok(u.scaled(1.0 / n))
}

/// Share of the L² mass carried by the upper half of the spectrum. A ground
/// state resolved by the grid has essentially none; a collapsing iterate
/// piles up at the grid scale.
fn unresolved_fraction(u: &RadialField) -> f64 {
    let s = crate::radial::forward(u);
    let c = s.coeffs();
    let total: f64 = c.iter().map(|x| x * x).sum();
    let upper: f64 = c[c.len() / 2..].iter().map(|x| x * x).sum();
    if total > 0.0 {
        upper / total
    } else {
        0.0
    }
}

const UNRESOLVED_LIMIT: f64 = 1e-8;

fn check_finite(u: &RadialField, what: &'static str, iteration: usize) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::Diverged {
            what,
            iteration,
            norm: f64::NAN,
        });
    }
    Ok(())
}

fn check_resolved(w: &RadialField, params: &PhysicalParams, iterations: usize) -> Result<()> {
    let frac = unresolved_fraction(w);
    if frac > UNRESOLVED_LIMIT {
        return Err(Error::Subcritical {
            c: params.c.finite().unwrap_or(f64::INFINITY),
            detail: format!(
                "iterate concentrates at the grid scale ({frac:.2e} of its mass in the upper half of the spectrum) after {iterations} iterations"
            ),
        });
    }
    Ok(())
}

/// Relative Krylov tolerance per Newton step. The final step also sets the
/// round-off level of the high sine modes, which the series builder reads.
const NEWTON_KRYLOV_TOL: f64 = 1e-10;
/// Fallback when MINRES stalls above `NEWTON_KRYLOV_TOL`, as on fine grids
/// where the operator round-off grows with `ρ_max²`.
const NEWTON_KRYLOV_FALLBACK: f64 = 1e-8;
const MAX_NEWTON: usize = 25;
/// A residual of `tol` still leaves a profile error of order `tol`, which is
/// visible in the rate study; one step past it lands on the round-off floor.
const MIN_NEWTON: usize = 1;

fn newton_solve(op: &LinearizedOp, rhs: &RadialField) -> Result<RadialField> {
    match solve_L_detailed(op, rhs, NEWTON_KRYLOV_TOL) {
        Err(Error::Stagnation { .. }) => Ok(solve_L_detailed(op, rhs, NEWTON_KRYLOV_FALLBACK)?.solution),
        other => Ok(other?.solution),
    }
}

/// Action ground state of `(P + λ)u = N(u)`.
///
/// Damped Picard iteration with Nehari rescaling, then Newton steps on the
/// equation when `opts.newton` is set.
pub fn solve_action(params: &PhysicalParams, opts: &SolverOptions) -> Result<GroundStateResult> {
    params.validate_action()?;
    opts.validate()?;
    let grid = &opts.grid;
    let lambda = params.lambda;
    let kin = Kinetic::new(params, grid)?;
    let resolvent = kin.resolvent(lambda)?;
    let shifted = |u: &RadialField| kin.pairing(u) + lambda * u.l2_norm().powi(2);
    let onto_nehari = |v: &RadialField| -> Result<RadialField> {
        let h = hartree_energy(v);
        if !(h > 0.0) {
            return Err(Error::Degenerate("Hartree energy of the iterate vanished".into()));
        }
        Ok(v.scaled((shifted(v) / h).sqrt()))
    };
    let mut u = match &opts.initial {
        Some(init) => onto_nehari(&positive_orientation(init.clone()))?,
        None => onto_nehari(&gaussian(grid, 1.0))?,
    };
    let start_norm = u.l2_norm();
    let action_of = |u: &RadialField| shifted(u) - 0.5 * hartree_energy(u);
    let mut trace = vec![action_of(&u)];
    let theta = opts.damping;
    let switch = if opts.newton { opts.newton_switch } else { opts.tol };
    let mut iterations = 0;
    let mut settled = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let v = resolvent.apply_unchecked(&nonlinearity(&u));
        let v = onto_nehari(&v)?;
        let mut next = u.scaled(1.0 - theta);
        next.axpy(theta, &v)?;
        check_finite(&next, "action Picard iteration", iterations)?;
        let step = next.sub(&u)?.l2_norm();
        u = next;
        trace.push(action_of(&u));
        let norm = u.l2_norm();
        if norm > 1e6 * start_norm {
            return Err(Error::Diverged {
                what: "action Picard iteration",
                iteration: iterations,
                norm,
            });
        }
        if step < switch && (opts.newton || kin.residual(&u, lambda) < opts.tol) {
            settled = true;
            break;
        }
    }
    if !settled {
        return Err(Error::NotConverged {
            what: "action Picard iteration",
            iterations,
            residual: kin.residual(&u, lambda),
        });
    }
    if opts.newton {
        let mut newton = 0;
        loop {
            let res = kin.residual_field(&u, lambda);
            let r = res.l2_norm();
            if r < opts.tol && newton >= MIN_NEWTON {
                break;
            }
            if newton == MAX_NEWTON {
                return Err(Error::NotConverged {
                    what: "action Newton iteration",
                    iterations: iterations + newton,
                    residual: r,
                });
            }
            newton += 1;
            let op = LinearizedOp::around(u.clone(), lambda, *params)?;
            let delta = newton_solve(&op, &res)?;
            u.axpy(-1.0, &delta)?;
            check_finite(&u, "action Newton iteration", newton)?;
            // stop once the step itself is at round-off
            if delta.l2_norm() < 1e-3 * opts.tol && kin.residual(&u, lambda) >= r {
                if r < opts.tol {
                    break;
                }
                return Err(Error::NotConverged {
                    what: "action Newton iteration",
                    iterations: iterations + newton,
                    residual: r,
                });
            }
        }
        iterations += newton;
    }
    let u = positive_orientation(u);
    let residual_l2 = kin.residual(&u, lambda);
    Ok(GroundStateResult {
        level: action_of(&u),
        profile: u,
        kind: ProblemKind::Action,
        params: *params,
        multiplier: lambda,
        residual_l2,
        iterations,
        converged: residual_l2 < opts.tol,
        trace,
    })
}

/// Width `a` of the unit-norm Gaussian minimising `T a⁻² − ½H a⁻¹`, the
/// limit energy along the Gaussian scaling family.
fn energy_initial(grid: &Arc<RadialGrid>, mass: f64) -> Result<RadialField> {
    let g = normalized(&gaussian(grid, 1.0))?;
    let pinf = MultiplierSpec::pinf(PhysicalParams {
        mass,
        lambda: 0.0,
        c: SpeedOfLight::Infinite,
    })
    .table(grid)?;
    let t = pinf.pairing(&g, &g);
    let h = hartree_energy(&g);
    // E(a) = t/a² − h/(2a) is minimal at a = 4t/h
    let width = (4.0 * t / h).clamp(0.05 * grid.radius() / 40.0, 0.25 * grid.radius());
    normalized(&gaussian(grid, width))
}

/// `ω = H(w) − ⟨P w, w⟩` for `‖w‖ = 1`.
fn multiplier_of(kin: &Kinetic, w: &RadialField) -> f64 {
    hartree_energy(w) - kin.pairing(w)
}

/// Energy ground state: minimiser of `E` on the unit L² sphere with its
/// multiplier `ω` in `P w + ω w = N(w)`.
///
/// Semi-implicit normalized gradient flow, then Newton steps on the bordered
/// system when `opts.newton` is set.
pub fn solve_energy(params: &PhysicalParams, opts: &SolverOptions) -> Result<GroundStateResult> {
    params.validate()?;
    opts.validate()?;
    if let SpeedOfLight::Finite(c) = params.c {
        if c < opts.c_min {
            return Err(Error::Subcritical {
                c,
                detail: format!("below the configured c_min = {}; the energy may be unbounded below", opts.c_min),
            });
        }
    }
    let grid = &opts.grid;
    let kin = Kinetic::new(params, grid)?;
    let mut w = match &opts.initial {
        Some(init) => normalized(&positive_orientation(init.clone()))?,
        None => energy_initial(grid, params.mass)?,
    };
    let half_norm = |w: &RadialField| h_s_norm(w, 0.5).unwrap_or(f64::INFINITY);
    let start_half = half_norm(&w);
    let level_of = |w: &RadialField| kin.pairing(w) - 0.5 * hartree_energy(w);
    let mut trace = vec![level_of(&w)];
    let switch = if opts.newton { opts.newton_switch } else { opts.tol };
    let mut mu = multiplier_of(&kin, &w);
    let mut iterations = 0;
    let mut settled = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        if !(mu > 0.0) {
            // a non-positive multiplier means the iterate is far from the ground state
            mu = mu.abs().max(1e-3);
        }
        let sigma = opts.sigma_factor * mu;
        let resolvent = kin.resolvent(sigma)?;
        let mut rhs = nonlinearity(&w);
        rhs.axpy(sigma - mu, &w)?;
        let next = normalized(&resolvent.apply_unchecked(&rhs))?;
        check_finite(&next, "energy flow", iterations)?;
        let step = next.sub(&w)?.l2_norm();
        w = next;
        mu = multiplier_of(&kin, &w);
        trace.push(level_of(&w));
        let hn = half_norm(&w);
        if !(hn < 1e3 * start_half) {
            let c = params.c.finite().unwrap_or(f64::INFINITY);
            return Err(Error::Subcritical {
                c,
                detail: format!("H^1/2 norm grew from {start_half:.3e} to {hn:.3e} at iteration {iterations}; the flow is collapsing"),
            });
        }
        if step < switch && (opts.newton || kin.residual(&w, mu) < opts.tol) {
            settled = true;
            break;
        }
        if iterations % 50 == 0 {
            check_resolved(&w, params, iterations)?;
        }
    }
    if !settled {
        return Err(Error::NotConverged {
            what: "energy flow",
            iterations,
            residual: kin.residual(&w, mu),
        });
    }
    if opts.newton {
        let mut newton = 0;
        loop {
            let res = kin.residual_field(&w, mu);
            let r = res.l2_norm();
            if r < opts.tol && newton >= MIN_NEWTON {
                break;
            }
            if newton == MAX_NEWTON {
                return Err(Error::NotConverged {
                    what: "energy Newton iteration",
                    iterations: iterations + newton,
                    residual: r,
                });
            }
            newton += 1;
            // L δw + δω w = −F with ⟨w, δw⟩ = 0 to first order
            let op = LinearizedOp::around(w.clone(), mu, *params)?;
            let y1 = newton_solve(&op, &res.scaled(-1.0))?;
            let y2 = newton_solve(&op, &w)?;
            let denom = inner_product(&w, &y2)?;
            if denom == 0.0 {
                return Err(Error::Degenerate("bordered Newton system is singular".into()));
            }
            let d_omega = inner_product(&w, &y1)? / denom;
            let mut step = y1;
            step.axpy(-d_omega, &y2)?;
            w.axpy(1.0, &step)?;
            w = normalized(&w)?;
            check_finite(&w, "energy Newton iteration", newton)?;
            let new_mu = multiplier_of(&kin, &w);
            if step.l2_norm() < 1e-3 * opts.tol && kin.residual(&w, new_mu) >= r {
                if r < opts.tol {
                    mu = new_mu;
                    break;
                }
                return Err(Error::NotConverged {
                    what: "energy Newton iteration",
                    iterations: iterations + newton,
                    residual: r,
                });
            }
            mu = new_mu;
        }
        iterations += newton;
    }
    check_resolved(&w, params, iterations)?;
    let w = positive_orientation(w);
    let residual_l2 = kin.residual(&w, mu);
    Ok(GroundStateResult {
        level: energy(&w, params)?,
        profile: w,
        kind: ProblemKind::Energy,
        params: *params,
        multiplier: mu,
        residual_l2,
        iterations,
        converged: residual_l2 < opts.tol,
        trace,
    })
}

pub fn solve(kind: ProblemKind, params: &PhysicalParams, opts: &SolverOptions) -> Result<GroundStateResult> {
    match kind {
        ProblemKind::Action => solve_action(params, opts),
        ProblemKind::Energy => solve_energy(params, opts),
    }
}

/// `⟨T_c w, w⟩ + e_c` (finite `c`) or `⟨P_∞ w, w⟩ + e_∞` (limit); zero for
/// energy ground states.
pub fn pohozaev_residual(res: &GroundStateResult) -> Result<f64> {
    if res.kind != ProblemKind::Energy {
        return Err(Error::WrongKind("the Pohozaev residual is defined for energy ground states".into()));
    }
    let grid = res.profile.grid();
    let t = MultiplierSpec::new(MultiplierKind::Tc, res.params)?.table(grid)?;
    Ok(t.pairing(&res.profile, &res.profile) + energy(&res.profile, &res.params)?)
}

/// `‖(P + multiplier)u − N(u)‖_{L²}`, the residual a solve reports; used to
/// recheck stored profiles.
pub fn equation_residual(u: &RadialField, multiplier: f64, params: &PhysicalParams) -> Result<f64> {
    params.validate()?;
    if !multiplier.is_finite() {
        return Err(invalid("multiplier", format!("must be finite, got {multiplier}")));
    }
    Ok(Kinetic::new(params, u.grid())?.residual(u, multiplier))
}

/// `t_c` with `t_c² = ⟨(P_c+λ)u_∞, u_∞⟩ / H(u_∞)`: the scale putting `t_c u_∞`
/// on the Nehari manifold at speed `c`.
pub fn nehari_scale(u_inf: &RadialField, params: &PhysicalParams) -> Result<f64> {
    params.validate_action()?;
    if params.c.is_infinite() {
        return Err(invalid("c", "the Nehari scale needs a finite c"));
    }
    let h = hartree_energy(u_inf);
    if !(h > 0.0) {
        return Err(Error::Degenerate("H(u_inf) = 0".into()));
    }
    let p = MultiplierSpec::pc(*params).table(u_inf.grid())?;
    Ok(((p.pairing(u_inf, u_inf) + params.lambda * u_inf.l2_norm().powi(2)) / h).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::inner_product;

    fn small() -> SolverOptions {
        SolverOptions::on_grid(RadialGrid::new(1024, 30.0).unwrap())
    }

    fn energy_small() -> SolverOptions {
        SolverOptions::on_grid(RadialGrid::new(1024, 40.0).unwrap())
    }

    fn c(v: f64) -> SpeedOfLight {
        SpeedOfLight::Finite(v)
    }

    #[test]
    fn action_limit_state_is_on_nehari_and_positive() {
        let p = PhysicalParams::unit();
        let gs = solve_action(&p, &small()).unwrap();
        assert!(gs.converged);
        assert!(gs.residual_l2 < 1e-10);
        let nr = crate::hartree::nehari_residual(&gs.profile, &p).unwrap();
        assert!(nr.abs() < 1e-9 * hartree_energy(&gs.profile));
        let max = gs.profile.max_abs();
        assert!(gs.profile.values().iter().filter(|v| v.abs() > 1e-12 * max).all(|&v| v > 0.0));
        // on the Nehari manifold J = H/2
        assert!((gs.level - 0.5 * hartree_energy(&gs.profile)).abs() < 1e-9);
    }

    #[test]
    fn recheck_matches_reported_residual() {
        let p = PhysicalParams::unit().with_c(SpeedOfLight::Finite(30.0));
        let gs = solve_energy(&p, &small()).unwrap();
        let r = equation_residual(&gs.profile, gs.multiplier, &p).unwrap();
        assert!((r - gs.residual_l2).abs() <= 1e-3 * gs.residual_l2);
        assert!(equation_residual(&gs.profile, gs.multiplier * 1.01, &p).unwrap() > 1e-4);
    }

    #[test]
    fn action_without_newton_agrees() {
        let p = PhysicalParams::unit();
        let a = solve_action(&p, &small()).unwrap();
        let mut opts = small();
        opts.newton = false;
        opts.tol = 1e-9;
        let b = solve_action(&p, &opts).unwrap();
        assert!(a.profile.sub(&b.profile).unwrap().l2_norm() < 1e-7);
    }

    #[test]
    fn relativistic_action_state_is_close_to_limit() {
        let p = PhysicalParams::unit();
        let inf = solve_action(&p, &small()).unwrap();
        let rel = solve_action(&p.with_c(c(100.0)), &small()).unwrap();
        let d = h_s_norm(&rel.profile.sub(&inf.profile).unwrap(), 1.0).unwrap();
        assert!(d > 1e-6 && d < 1e-3, "{d}");
    }

    #[test]
    fn energy_limit_state() {
        let p = PhysicalParams::unit();
        let gs = solve_energy(&p, &energy_small()).unwrap();
        assert!(gs.converged);
        assert!((gs.profile.l2_norm() - 1.0).abs() < 1e-10);
        assert!(gs.multiplier > 0.0);
        assert!(gs.level < 0.0);
        // limit identities ω = −3e and H = 4T
        assert!((gs.multiplier + 3.0 * gs.level).abs() < 1e-8 * gs.level.abs());
        let po = pohozaev_residual(&gs).unwrap();
        assert!(po.abs() < 1e-5 * gs.level.abs());
        let max = gs.profile.max_abs();
        assert!(gs.profile.values().iter().filter(|v| v.abs() > 1e-12 * max).all(|&v| v > 0.0));
    }

    #[test]
    fn energy_flow_descends_monotonically() {
        let mut opts = energy_small();
        opts.newton = false;
        opts.tol = 1e-9;
        let gs = solve_energy(&PhysicalParams::unit(), &opts).unwrap();
        for pair in gs.trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn relativistic_energy_is_lower_and_satisfies_pohozaev() {
        let p = PhysicalParams::unit();
        let inf = solve_energy(&p, &energy_small()).unwrap();
        let rel = solve_energy(&p.with_c(c(50.0)), &energy_small()).unwrap();
        assert!(rel.level < inf.level);
        let po = pohozaev_residual(&rel).unwrap();
        assert!(po.abs() < 1e-4 * rel.level.abs(), "{po}");
    }

    #[test]
    fn perturbed_profile_breaks_pohozaev() {
        let p = PhysicalParams::unit();
        let mut gs = solve_energy(&p, &energy_small()).unwrap();
        let clean = pohozaev_residual(&gs).unwrap().abs();
        let bump = RadialField::from_fn(gs.profile.grid().clone(), |r| 0.1 * (-(r - 2.0).powi(2)).exp()).unwrap();
        gs.profile = normalized(&gs.profile.add(&bump).unwrap()).unwrap();
        let dirty = pohozaev_residual(&gs).unwrap().abs();
        assert!(dirty > 100.0 * clean.max(1e-12), "{clean} vs {dirty}");
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let p = PhysicalParams::unit().with_c(c(30.0));
        let cold = solve_energy(&p, &energy_small()).unwrap();
        let inf = solve_energy(&PhysicalParams::unit(), &energy_small()).unwrap();
        let warm = solve_energy(&p, &energy_small().with_initial(inf.profile)).unwrap();
        assert!(cold.profile.sub(&warm.profile).unwrap().l2_norm() < 1e-8);
        assert!(warm.iterations < cold.iterations);
    }

    #[test]
    fn subcritical_c_is_refused() {
        let p = PhysicalParams::unit().with_c(c(1.0));
        assert!(matches!(solve_energy(&p, &energy_small()), Err(Error::Subcritical { .. })));
    }

    #[test]
    fn collapse_is_detected_below_the_threshold() {
        let mut opts = energy_small();
        opts.c_min = 0.01;
        opts.newton = false;
        opts.max_iterations = 20_000;
        let p = PhysicalParams::unit().with_c(c(0.2));
        match solve_energy(&p, &opts) {
            Err(Error::Subcritical { .. }) | Err(Error::NotConverged { .. }) | Err(Error::Diverged { .. }) => {}
            other => panic!("expected a collapse diagnostic, got {other:?}"),
        }
    }

    #[test]
    fn nehari_scale_limits() {
        let p = PhysicalParams::unit();
        let inf = solve_action(&p, &small()).unwrap();
        let huge = nehari_scale(&inf.profile, &p.with_c(c(1e6))).unwrap();
        assert!((huge - 1.0).abs() < 1e-10);
        for cv in [10.0, 40.0, 160.0] {
            assert!(nehari_scale(&inf.profile, &p.with_c(c(cv))).unwrap() < 1.0);
        }
        assert!(nehari_scale(&inf.profile, &p).is_err());
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let gs = solve_action(&PhysicalParams::unit(), &small()).unwrap();
        assert!(matches!(pohozaev_residual(&gs), Err(Error::WrongKind(_))));
    }

    #[test]
    fn options_are_validated() {
        let p = PhysicalParams::unit();
        let mut o = small();
        o.damping = 0.0;
        assert!(solve_action(&p, &o).is_err());
        let mut o = small();
        o.initial = Some(RadialField::zeros(o.grid.clone()));
        assert!(solve_action(&p, &o).is_err());
        let zero_lambda = PhysicalParams { lambda: 0.0, ..p };
        assert!(solve_action(&zero_lambda, &small()).is_err());
    }

    #[test]
    fn grid_refinement_is_stable() {
        let p = PhysicalParams::unit();
        let coarse = solve_action(&p, &SolverOptions::on_grid(RadialGrid::new(512, 20.0).unwrap())).unwrap();
        let fine_grid = RadialGrid::new(1024, 40.0).unwrap();
        let fine = solve_action(&p, &SolverOptions::on_grid(fine_grid.clone())).unwrap();
        let d = crate::radial::resample(&coarse.profile, &fine_grid).sub(&fine.profile).unwrap();
        assert!(d.l2_norm() < 1e-6, "{}", d.l2_norm());
        let n = inner_product(&fine.profile, &fine.profile).unwrap();
        assert!((n.sqrt() - fine.profile.l2_norm()).abs() < 1e-12 * n);
    }
}
