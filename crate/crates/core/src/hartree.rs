//! The Hartree nonlinearity `N(u) = (|x|^{-1} * u²) u`, its derivatives, the
//! associated functionals and the multilinear derivatives of the
//! non-relativistic energy.
//!
//! All Coulomb convolutions go through [`coulomb_potential`], a single linear
//! operator `K`. Every derivative below is written in terms of `K` and
//! pointwise products, so the discrete Taylor identities hold exactly (up to
//! round-off), not just to quadrature accuracy.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::multiplier::{MultiplierKind, MultiplierSpec};
use crate::params::PhysicalParams;
use crate::radial::{weighted_dot, RadialField, RadialGrid};

fn coulomb_raw(grid: &RadialGrid, f: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let dr = grid.spacing();
    // exterior[i] = Σ_{j>i} r_j f_j dr
    let mut exterior = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        exterior[i] = acc;
        acc += grid.node(i) * f[i] * dr;
    }
    let corr = dr * dr / 12.0;
    let mut interior = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r = grid.node(i);
        interior += r * r * f[i] * dr;
        out.push(4.0 * PI * (interior / r + exterior[i] - corr * f[i]));
    }
    out
}

/// Radial Coulomb potential `(|x|^{-1} * f)(r)` by Newton's theorem.
///
/// `V(r) = (4π/r)∫₀^r s² f ds + 4π∫_r^R s f ds`, with both integrals taken by
/// the trapezoidal rule on the grid. The integrand has a kink at `s = r`; its
/// Euler–Maclaurin end correction is `−(dr²/12)·4π f(r)`, which is included.
/// The resulting discrete operator is symmetric in the L² pairing.
pub fn coulomb_potential(f: &RadialField) -> RadialField {
    let grid = f.grid().clone();
    let v = coulomb_raw(&grid, f.values());
    RadialField::from_raw(grid, v)
}

fn product(a: &RadialField, b: &RadialField) -> Vec<f64> {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).collect()
}

fn k_of(grid: &RadialGrid, a: &RadialField, b: &RadialField) -> Vec<f64> {
    coulomb_raw(grid, &product(a, b))
}

fn check_all(fields: &[&RadialField]) -> Result<()> {
    if let Some((first, rest)) = fields.split_first() {
        for f in rest {
            first.check_grid(f)?;
        }
    }
    Ok(())
}

/// `N(u) = (|x|^{-1} * u²) u`.
pub fn nonlinearity(u: &RadialField) -> RadialField {
    let grid = u.grid().clone();
    let k = k_of(&grid, u, u);
    let v = k.iter().zip(u.values()).map(|(a, b)| a * b).collect();
    RadialField::from_raw(grid, v)
}

/// `N'(u)[h] = (K u²) h + 2 (K(u h)) u`.
pub fn n1(u: &RadialField, h: &RadialField) -> Result<RadialField> {
    check_all(&[u, h])?;
    Ok(n1_unchecked(u, h))
}

pub(crate) fn n1_unchecked(u: &RadialField, h: &RadialField) -> RadialField {
    let grid = u.grid().clone();
    let kuu = k_of(&grid, u, u);
    n1_with_potential(&kuu, u, h)
}

/// `N'(u)[h]` with `K u²` precomputed.
pub(crate) fn n1_with_potential(kuu: &[f64], u: &RadialField, h: &RadialField) -> RadialField {
    let grid = u.grid().clone();
    let kuh = k_of(&grid, u, h);
    let v = (0..grid.len())
        .map(|i| kuu[i] * h.values()[i] + 2.0 * kuh[i] * u.values()[i])
        .collect();
    RadialField::from_raw(grid, v)
}

/// `N''(u)[h₁,h₂] = 2K(h₁h₂)u + 2K(uh₁)h₂ + 2K(uh₂)h₁`.
pub fn n2(u: &RadialField, h1: &RadialField, h2: &RadialField) -> Result<RadialField> {
    check_all(&[u, h1, h2])?;
    let grid = u.grid().clone();
    let k12 = k_of(&grid, h1, h2);
    let ku1 = k_of(&grid, u, h1);
    let ku2 = k_of(&grid, u, h2);
    let (u, h1, h2) = (u.values(), h1.values(), h2.values());
    let v = (0..grid.len())
        .map(|i| 2.0 * (k12[i] * u[i] + ku1[i] * h2[i] + ku2[i] * h1[i]))
        .collect();
    Ok(RadialField::from_raw(grid, v))
}

/// `N'''[h₁,h₂,h₃] = 2(K(h₁h₂)h₃ + K(h₁h₃)h₂ + K(h₂h₃)h₁)`; independent of `u`.
pub fn n3(h1: &RadialField, h2: &RadialField, h3: &RadialField) -> Result<RadialField> {
    check_all(&[h1, h2, h3])?;
    let grid = h1.grid().clone();
    let k12 = k_of(&grid, h1, h2);
    let k13 = k_of(&grid, h1, h3);
    let k23 = k_of(&grid, h2, h3);
    let (a, b, c) = (h1.values(), h2.values(), h3.values());
    let v = (0..grid.len())
        .map(|i| 2.0 * (k12[i] * c[i] + k13[i] * b[i] + k23[i] * a[i]))
        .collect();
    Ok(RadialField::from_raw(grid, v))
}

/// `H(u) = ∬ u²(x)u²(y)/|x−y| = ⟨K u², u²⟩`.
pub fn hartree_energy(u: &RadialField) -> f64 {
    let grid = u.grid();
    let sq = product(u, u);
    let k = coulomb_raw(grid, &sq);
    weighted_dot(grid, &k, &sq)
}

/// `∬ f(x) g(y)/|x−y|`.
pub(crate) fn coulomb_pairing(grid: &RadialGrid, f: &[f64], g: &[f64]) -> f64 {
    weighted_dot(grid, &coulomb_raw(grid, f), g)
}

fn kinetic_pairing(u: &RadialField, params: &PhysicalParams) -> Result<f64> {
    let table = MultiplierSpec::new(MultiplierKind::Pc, *params)?.table(u.grid())?;
    Ok(table.pairing(u, u))
}

/// `J(u) = ⟨(P+λ)u,u⟩ − ½H(u)`, with `P = P_c` or `P_∞` according to `params.c`.
pub fn action(u: &RadialField, params: &PhysicalParams) -> Result<f64> {
    params.validate_action()?;
    Ok(kinetic_pairing(u, params)? + params.lambda * u.l2_norm().powi(2) - 0.5 * hartree_energy(u))
}

/// `E(u) = ⟨P u,u⟩ − ½H(u)`.
pub fn energy(u: &RadialField, params: &PhysicalParams) -> Result<f64> {
    params.validate()?;
    Ok(kinetic_pairing(u, params)? - 0.5 * hartree_energy(u))
}

/// `⟨(P+λ)u,u⟩ − H(u)`, half of `dJ(u)[u]`; zero on the Nehari manifold.
pub fn nehari_residual(u: &RadialField, params: &PhysicalParams) -> Result<f64> {
    params.validate_action()?;
    Ok(kinetic_pairing(u, params)? + params.lambda * u.l2_norm().powi(2) - hartree_energy(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    Action,
    Energy,
    Hartree,
    NehariResidual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalValue {
    pub kind: FunctionalKind,
    pub value: f64,
}

pub fn evaluate(kind: FunctionalKind, u: &RadialField, params: &PhysicalParams) -> Result<FunctionalValue> {
    let value = match kind {
        FunctionalKind::Action => action(u, params)?,
        FunctionalKind::Energy => energy(u, params)?,
        FunctionalKind::Hartree => hartree_energy(u),
        FunctionalKind::NehariResidual => nehari_residual(u, params)?,
    };
    Ok(FunctionalValue { kind, value })
}

/// Ordered compositions of `total` into `parts` parts, each in `1..=max`.
pub(crate) fn compositions(total: usize, parts: usize, max: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if total == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for first in 1..=max.min(total) {
            if total - first < parts - 1 {
                break;
            }
            prefix.push(first);
            rec(total - first, parts - 1, max, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, max, &mut Vec::new(), &mut out);
    out
}

/// `T_k = Σ_{j=2}^{min(k,3)} (1/j!) Σ_{i₁+..+i_j = k, 1 ≤ i ≤ k−1} N^{(j)}(f₀)[f_{i₁},..,f_{i_j}]`.
///
/// Compositions are enumerated in order; the `1/j!` weight accounts for the
/// symmetry of `N^{(j)}`. `T_1 = 0`.
pub fn t_k(fields: &[RadialField], k: usize) -> Result<RadialField> {
    if k == 0 {
        return Err(invalid("k", "T_k is defined for k >= 1"));
    }
    if fields.len() < k {
        return Err(invalid(
            "fields",
            format!("T_{k} needs f_0..f_{}, got {} fields", k - 1, fields.len()),
        ));
    }
    let refs: Vec<&RadialField> = fields[..k].iter().collect();
    check_all(&refs)?;
    let f0 = &fields[0];
    let mut out = RadialField::zeros(f0.grid().clone());
    for (j, weight) in [(2usize, 0.5), (3, 1.0 / 6.0)] {
        if j > k.min(3) {
            break;
        }
        for comp in compositions(k, j, k - 1) {
            let term = match j {
                2 => n2(f0, &fields[comp[0]], &fields[comp[1]])?,
                _ => n3(&fields[comp[0]], &fields[comp[1]], &fields[comp[2]])?,
            };
            out.axpy(weight, &term)?;
        }
    }
    Ok(out)
}

/// `d^k E_∞(w)[h₁,..,h_k]` for `E_∞(u) = ⟨P_∞u,u⟩ − ½H(u)`, `k = 1..4`.
///
/// The kinetic part contributes for `k ≤ 2`. For the Hartree part, with
/// `⟪f,g⟫ = ∬ f(x)g(y)/|x−y|`:
/// `d²H = 4⟪h₁h₂, w²⟫ + 8⟪wh₁, wh₂⟫`,
/// `d³H = 8(⟪h₁h₂, wh₃⟫ + ⟪h₁h₃, wh₂⟫ + ⟪h₂h₃, wh₁⟫)`,
/// `d⁴H = 8(⟪h₁h₂, h₃h₄⟫ + ⟪h₁h₃, h₂h₄⟫ + ⟪h₁h₄, h₂h₃⟫)`.
pub fn d_e_inf(w: &RadialField, hs: &[&RadialField], params: &PhysicalParams) -> Result<f64> {
    let k = hs.len();
    if !(1..=4).contains(&k) {
        return Err(invalid("derivative order", format!("must be 1..=4, got {k}")));
    }
    let mut all = vec![w];
    all.extend_from_slice(hs);
    check_all(&all)?;
    let grid = w.grid().as_ref();
    let pinf = MultiplierSpec::pinf(*params).table(w.grid())?;
    let pair = |a: &RadialField, b: &RadialField, c: &RadialField, d: &RadialField| {
        coulomb_pairing(grid, &product(a, b), &product(c, d))
    };
    let value = match k {
        1 => {
            let h = hs[0];
            let nw = nonlinearity(w);
            2.0 * pinf.pairing(w, h) - 2.0 * weighted_dot(grid, nw.values(), h.values())
        }
        2 => {
            let (a, b) = (hs[0], hs[1]);
            let d2h = 4.0 * pair(a, b, w, w) + 8.0 * pair(w, a, w, b);
            2.0 * pinf.pairing(a, b) - 0.5 * d2h
        }
        3 => {
            let (a, b, c) = (hs[0], hs[1], hs[2]);
            let d3h = 8.0 * (pair(a, b, w, c) + pair(a, c, w, b) + pair(b, c, w, a));
            -0.5 * d3h
        }
        _ => {
            let (a, b, c, d) = (hs[0], hs[1], hs[2], hs[3]);
            let d4h = 8.0 * (pair(a, b, c, d) + pair(a, c, b, d) + pair(a, d, b, c));
            -0.5 * d4h
        }
    };
    Ok(value)
}
