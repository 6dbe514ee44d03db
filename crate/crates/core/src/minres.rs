//! Preconditioned MINRES for symmetric, possibly indefinite operators.
//!
//! Works on plain slices with a caller-supplied inner product, so the same
//! routine serves the weighted L² pairing of the radial grid. The
//! preconditioner must be symmetric positive definite in that pairing.

use crate::error::{Error, Result};

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

pub(crate) struct Problem<'a, A, M, D>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
    D: Fn(&[f64], &[f64]) -> f64,
{
    pub apply: &'a A,
    pub precondition: &'a M,
    pub dot: &'a D,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

impl<A, M, D> Problem<'_, A, M, D>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
    D: Fn(&[f64], &[f64]) -> f64,
{
    fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let ax = (self.apply)(x);
        b.iter().zip(&ax).map(|(b, a)| b - a).collect()
    }

    fn norm(&self, v: &[f64]) -> f64 {
        (self.dot)(v, v).max(0.0).sqrt()
    }

    /// One MINRES cycle from zero on `A e = r`, stopping when the recurrence
    /// estimate of the preconditioned residual drops by `drop` or after
    /// `budget` steps.
    fn cycle(&self, r: &[f64], drop: f64, budget: usize) -> (Vec<f64>, usize) {
        let n = r.len();
        let mut x = vec![0.0; n];
        let mut r1 = r.to_vec();
        let mut r2 = r.to_vec();
        let mut y = (self.precondition)(r);
        let beta1 = (self.dot)(r, &y).max(0.0).sqrt();
        if beta1 == 0.0 {
            return (x, 0);
        }
        let (mut oldb, mut beta) = (0.0, beta1);
        let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
        let (mut cs, mut sn) = (-1.0f64, 0.0f64);
        let mut w = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        let mut steps = 0;
        while steps < budget {
            steps += 1;
            let v: Vec<f64> = y.iter().map(|y| y / beta).collect();
            y = (self.apply)(&v);
            if steps >= 2 {
                axpy(&mut y, -beta / oldb, &r1);
            }
            let alfa = (self.dot)(&v, &y);
            axpy(&mut y, -alfa / beta, &r2);
            r1 = std::mem::replace(&mut r2, y);
            y = (self.precondition)(&r2);
            oldb = beta;
            beta = (self.dot)(&r2, &y).max(0.0).sqrt();
            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = gbar.hypot(beta).max(f64::EPSILON);
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar *= sn;
            let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
            w = v
                .iter()
                .zip(&w1)
                .zip(&w2)
                .map(|((v, a), b)| (v - oldeps * a - delta * b) / gamma)
                .collect();
            axpy(&mut x, phi, &w);
            if phibar <= drop * beta1 || beta == 0.0 {
                break;
            }
        }
        (x, steps)
    }

    /// Solves `A x = b` to `‖b − A x‖ ≤ tol·‖b‖`, checking the true residual
    /// after each cycle and restarting on the remaining defect.
    pub fn solve(&self, b: &[f64], tol: f64, max_iterations: usize) -> Result<Outcome> {
        let bnorm = self.norm(b);
        let mut x = vec![0.0; b.len()];
        if bnorm == 0.0 {
            return Ok(Outcome { x, iterations: 0, relative_residual: 0.0 });
        }
        let mut r = b.to_vec();
        let mut rel = 1.0;
        let mut iterations = 0;
        let mut stalls = 0;
        while iterations < max_iterations {
            // ask each cycle for a little more than the remaining factor
            let drop = (0.1 * tol / rel).clamp(1e-14, 0.5);
            let (e, steps) = self.cycle(&r, drop, max_iterations - iterations);
            iterations += steps;
            axpy(&mut x, 1.0, &e);
            r = self.residual(b, &x);
            let new_rel = self.norm(&r) / bnorm;
            if !new_rel.is_finite() {
                return Err(Error::NonFinite("Krylov residual"));
            }
            if new_rel <= tol {
                return Ok(Outcome { x, iterations, relative_residual: new_rel });
            }
            if new_rel > 0.5 * rel {
                stalls += 1;
                if stalls >= 3 || steps == 0 {
                    return Err(Error::Stagnation { iterations, residual: new_rel });
                }
            } else {
                stalls = 0;
            }
            rel = new_rel;
        }
        Err(Error::Stagnation { iterations, residual: rel })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn solves_indefinite_diagonal_system() {
        let d: Vec<f64> = (0..200).map(|i| if i % 7 == 0 { -(1.0 + i as f64) } else { 1.0 + i as f64 }).collect();
        let apply = |v: &[f64]| v.iter().zip(&d).map(|(v, d)| v * d).collect::<Vec<_>>();
        let ident = |v: &[f64]| v.to_vec();
        let p = Problem { apply: &apply, precondition: &ident, dot: &dot };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = p.solve(&b, 1e-12, 2000).unwrap();
        for i in 0..200 {
            assert!((out.x[i] - b[i] / d[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let d: Vec<f64> = (0..50).map(|i| 1.0 + (i * i) as f64).collect();
        let apply = |v: &[f64]| v.iter().zip(&d).map(|(v, d)| v * d).collect::<Vec<_>>();
        let inv = |v: &[f64]| v.iter().zip(&d).map(|(v, d)| v / d).collect::<Vec<_>>();
        let p = Problem { apply: &apply, precondition: &inv, dot: &dot };
        let b = vec![1.0; 50];
        let out = p.solve(&b, 1e-13, 100).unwrap();
        assert!(out.iterations <= 2);
    }

    #[test]
    fn singular_system_reports_stagnation() {
        let apply = |v: &[f64]| {
            let mut out = v.to_vec();
            out[0] = 0.0;
            out
        };
        let ident = |v: &[f64]| v.to_vec();
        let p = Problem { apply: &apply, precondition: &ident, dot: &dot };
        let b = vec![1.0; 10];
        assert!(matches!(p.solve(&b, 1e-10, 200), Err(Error::Stagnation { .. })));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let ident = |v: &[f64]| v.to_vec();
        let p = Problem { apply: &ident, precondition: &ident, dot: &dot };
        let out = p.solve(&[0.0; 5], 1e-10, 10).unwrap();
        assert!(out.x.iter().all(|&x| x == 0.0));
    }
}
