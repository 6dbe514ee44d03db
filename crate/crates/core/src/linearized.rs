//! Linearized operators `L h = (P + freq) h − N'(base)[h]` around a ground state.

use crate::error::{invalid, Error, Result};
use crate::hartree::{n1_with_potential, nonlinearity};
use crate::minres::Problem;
use crate::multiplier::{MultiplierSpec, SymbolTable};
use crate::params::PhysicalParams;
use crate::radial::{weighted_dot, RadialField};

/// Default relative tolerance for [`solve_L`].
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_KRYLOV: usize = 5000;
const BASE_RESIDUAL_LIMIT: f64 = 1e-6;

/// `L = P_∞ + freq − N'(base)`, with `base` a limit ground state.
#[derive(Debug, Clone)]
pub struct LinearizedOp {
    base: RadialField,
    freq: f64,
    params: PhysicalParams,
    kinetic: SymbolTable,
    resolvent: SymbolTable,
    base_potential: Vec<f64>,
}

impl LinearizedOp {
    /// Builds the operator around a limit ground state, rejecting finite `c`
    /// and bases whose equation residual `‖(P_∞+freq)u − N(u)‖/‖N(u)‖`
    /// exceeds `1e-6`.
    pub fn new(base: RadialField, freq: f64, params: PhysicalParams) -> Result<Self> {
        if !params.c.is_infinite() {
            return Err(invalid("c", "the linearized operator is taken at c = inf"));
        }
        let op = Self::around(base, freq, params)?;
        let n = nonlinearity(&op.base);
        let mut res = op.kinetic.apply_unchecked(&op.base);
        res.axpy(op.freq, &op.base)?;
        res.axpy(-1.0, &n)?;
        let rel = res.l2_norm() / n.l2_norm();
        if !(rel < BASE_RESIDUAL_LIMIT) {
            return Err(Error::Degenerate(format!(
                "base is not a ground state at frequency {freq}: relative equation residual {rel:.3e}"
            )));
        }
        Ok(op)
    }

    /// Unchecked construction for any `c`; used by the Newton steps of the
    /// ground-state solvers.
    pub(crate) fn around(base: RadialField, freq: f64, params: PhysicalParams) -> Result<Self> {
        if !(freq.is_finite() && freq > 0.0) {
            return Err(invalid("freq", format!("must be positive, got {freq}")));
        }
        params.validate()?;
        let grid = base.grid().clone();
        let kinetic = MultiplierSpec::pc(params).table(&grid)?;
        let resolvent = MultiplierSpec::kinetic_resolvent(params, freq)?.table(&grid)?;
        let sq: Vec<f64> = base.values().iter().map(|u| u * u).collect();
        let base_potential = crate::hartree::coulomb_potential(&RadialField::from_raw(grid, sq)).into_values();
        Ok(LinearizedOp {
            base,
            freq,
            params,
            kinetic,
            resolvent,
            base_potential,
        })
    }

    pub fn base(&self) -> &RadialField {
        &self.base
    }

    pub fn freq(&self) -> f64 {
        self.freq
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn apply_raw(&self, h: &RadialField) -> RadialField {
        let mut out = self.kinetic.apply_unchecked(h);
        let n1 = n1_with_potential(&self.base_potential, &self.base, h);
        for ((o, h), n) in out.values_mut().iter_mut().zip(h.values()).zip(n1.values()) {
            *o += self.freq * h - n;
        }
        out
    }
}

/// `L h = (P + freq) h − N'(base)[h]`.
#[allow(non_snake_case)]
pub fn apply_L(op: &LinearizedOp, h: &RadialField) -> Result<RadialField> {
    op.base.check_grid(h)?;
    Ok(op.apply_raw(h))
}

/// Solution of a linear solve with its Krylov statistics.
#[derive(Debug, Clone)]
pub struct LinearSolve {
    pub solution: RadialField,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `L f = rhs` to `‖L f − rhs‖ ≤ tol·‖rhs‖` by MINRES preconditioned
/// with `(P + freq)^{-1}`.
#[allow(non_snake_case)]
pub fn solve_L(op: &LinearizedOp, rhs: &RadialField, tol: f64) -> Result<RadialField> {
    Ok(solve_L_detailed(op, rhs, tol)?.solution)
}

#[allow(non_snake_case)]
pub fn solve_L_detailed(op: &LinearizedOp, rhs: &RadialField, tol: f64) -> Result<LinearSolve> {
    op.base.check_grid(rhs)?;
    if !rhs.is_finite() {
        return Err(Error::NonFinite("right-hand side"));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid("tol", format!("must lie in (0, 1), got {tol}")));
    }
    let grid = op.base.grid().clone();
    let wrap = |v: &[f64]| RadialField::from_raw(grid.clone(), v.to_vec());
    let apply = |v: &[f64]| op.apply_raw(&wrap(v)).into_values();
    let precondition = |v: &[f64]| op.resolvent.apply_unchecked(&wrap(v)).into_values();
    let dot = |a: &[f64], b: &[f64]| weighted_dot(&grid, a, b);
    let problem = Problem {
        apply: &apply,
        precondition: &precondition,
        dot: &dot,
    };
    let out = problem.solve(rhs.values(), tol, MAX_KRYLOV)?;
    Ok(LinearSolve {
        solution: RadialField::from_raw(grid.clone(), out.x),
        iterations: out.iterations,
        relative_residual: out.relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{solve_action, SolverOptions};
    use crate::multiplier::apply_multiplier;
    use crate::radial::{h_s_norm, inner_product, RadialGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn limit_op(n: usize, radius: f64) -> LinearizedOp {
        let grid = RadialGrid::new(n, radius).unwrap();
        let p = PhysicalParams::unit();
        let gs = solve_action(&p, &SolverOptions::on_grid(grid)).unwrap();
        LinearizedOp::new(gs.profile, p.lambda, p).unwrap()
    }

    fn random_smooth(g: &Arc<RadialGrid>, seed: u64) -> RadialField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        RadialField::from_fn(g.clone(), |r| {
            a[0] * (-r * r).exp() + a[1] * (-0.5 * r).exp() * r + a[2] * (-(r - 3.0).powi(2)).exp()
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        let g = RadialGrid::new(256, 16.0).unwrap();
        let u = RadialField::from_fn(g, |r| (-r * r).exp()).unwrap();
        let p = PhysicalParams::unit();
        assert!(matches!(LinearizedOp::new(u.clone(), 1.0, p), Err(Error::Degenerate(_))));
        assert!(LinearizedOp::new(u.clone(), 0.0, p).is_err());
        let finite = p.with_c(crate::params::SpeedOfLight::Finite(10.0));
        assert!(LinearizedOp::new(u, 1.0, finite).is_err());
    }

    #[test]
    fn kernel_identity_and_symmetry() {
        let op = limit_op(1024, 30.0);
        let g = op.base().grid().clone();
        assert_eq!(apply_L(&op, &RadialField::zeros(g.clone())).unwrap().max_abs(), 0.0);
        let lu = apply_L(&op, op.base()).unwrap();
        let expect = nonlinearity(op.base()).scaled(-2.0);
        assert!(lu.sub(&expect).unwrap().l2_norm() < 1e-8 * expect.l2_norm());
        let a = random_smooth(&g, 1);
        let b = random_smooth(&g, 2);
        let lab = inner_product(&apply_L(&op, &a).unwrap(), &b).unwrap();
        let lba = inner_product(&apply_L(&op, &b).unwrap(), &a).unwrap();
        assert!((lab - lba).abs() < 1e-12 * lab.abs().max(1.0));
    }

    #[test]
    fn solve_inverts_apply() {
        let op = limit_op(1024, 30.0);
        let g = op.base().grid().clone();
        for seed in 0..3 {
            let h = random_smooth(&g, 10 + seed);
            let rhs = apply_L(&op, &h).unwrap();
            let f = solve_L(&op, &rhs, 1e-11).unwrap();
            assert!(f.sub(&h).unwrap().l2_norm() < 1e-8 * h.l2_norm());
        }
    }

    #[test]
    fn first_correction_equation() {
        let op = limit_op(1024, 30.0);
        let p = *op.params();
        let rhs = apply_multiplier(&MultiplierSpec::pinf_n(1, p), op.base()).unwrap().scaled(-1.0);
        let f1 = solve_L(&op, &rhs, 1e-11).unwrap();
        let res = apply_L(&op, &f1).unwrap().sub(&rhs).unwrap().l2_norm();
        assert!(res < 1e-8 * rhs.l2_norm());
    }

    #[test]
    fn solution_bound_is_grid_stable() {
        // ‖f‖_{H²}/‖rhs‖ should not drift under refinement
        let ratio = |n: usize, radius: f64| {
            let op = limit_op(n, radius);
            let g = op.base().grid().clone();
            let rhs = RadialField::from_fn(g, |r| (-(r - 1.0).powi(2)).exp()).unwrap();
            let f = solve_L(&op, &rhs, 1e-11).unwrap();
            h_s_norm(&f, 2.0).unwrap() / rhs.l2_norm()
        };
        let coarse = ratio(512, 24.0);
        let fine = ratio(1024, 24.0);
        assert!((coarse - fine).abs() < 1e-3 * fine, "{coarse} vs {fine}");
    }

    #[test]
    fn iteration_count_is_grid_stable() {
        let count = |n: usize| {
            let op = limit_op(n, 24.0);
            let g = op.base().grid().clone();
            let rhs = RadialField::from_fn(g, |r| (-r).exp()).unwrap();
            solve_L_detailed(&op, &rhs, 1e-10).unwrap().iterations
        };
        let (a, b) = (count(256), count(1024));
        assert!(b <= a + 10, "{a} vs {b}");
    }
}
