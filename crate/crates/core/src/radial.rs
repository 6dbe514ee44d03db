//! Uniform radial grid, radial profiles and the sine-spectral representation.
//!
//! A radial function `u(|x|)` on ℝ³ is stored through its samples on the
//! interior nodes `r_i = i·dr`, `i = 1..N`, with `dr = R/(N+1)`. The values
//! at `r = 0` and `r = R` are implicit: the transform acts on `v(r) = r·u(r)`,
//! which vanishes at both ends.
//!
//! The type-I discrete sine transform of `v` diagonalises every radial Fourier
//! multiplier: `−Δu = −(1/r)(r u)''`, so a symbol `p(|ξ|)` acts on `v` as the
//! multiplication of its sine coefficients by `p(ρ_j)` with `ρ_j = jπ/R`.
//!
//! Normalisation: the transform is scaled by `√(2/(N+1))`, which makes it
//! orthogonal and its own inverse. Parseval then reads `Σ_j s_j² = Σ_i v_i²`,
//! and the ℝ³ L² norm of `u` is `4π·dr·Σ_j s_j²`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustdct::{Dst1, DctPlanner};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_POINTS: usize = 4096;
pub const DEFAULT_RADIUS: f64 = 40.0;

pub struct RadialGrid {
    n: usize,
    radius: f64,
    dr: f64,
    dst: Arc<dyn Dst1<f64>>,
}

impl fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialGrid")
            .field("n", &self.n)
            .field("radius", &self.radius)
            .finish()
    }
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.radius == other.radius
    }
}

impl RadialGrid {
    pub fn new(n: usize, radius: f64) -> Result<Arc<Self>> {
        if n < 2 {
            return Err(invalid("grid points", format!("need at least 2, got {n}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid("grid radius", format!("must be positive, got {radius}")));
        }
        let dst = DctPlanner::new().plan_dst1(n);
        Ok(Arc::new(RadialGrid {
            n,
            radius,
            dr: radius / (n + 1) as f64,
            dst,
        }))
    }

    /// The default grid: `N = 4096`, `R = 40`.
    pub fn default_grid() -> Arc<Self> {
        Self::new(DEFAULT_POINTS, DEFAULT_RADIUS).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.dr
    }

    /// Radius of the `i`-th stored node (0-based), i.e. `(i+1)·dr`.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dr
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Radial frequency of the `j`-th sine mode (0-based), `(j+1)π/R`.
    #[inline]
    pub fn frequency(&self, j: usize) -> f64 {
        (j + 1) as f64 * PI / self.radius
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.frequency(j))
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequency(self.n - 1)
    }

    /// Trapezoidal weight `4π r_i² dr` of the ℝ³ L² pairing.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        let r = self.node(i);
        4.0 * PI * r * r * self.dr
    }

    /// Orthonormal DST-I applied in place.
    pub(crate) fn dst_in_place(&self, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.dst.process_dst1(buf);
        let scale = (2.0 / (self.n + 1) as f64).sqrt();
        buf.iter_mut().for_each(|x| *x *= scale);
    }
}

fn same_grid(a: &Arc<RadialGrid>, b: &Arc<RadialGrid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn ensure_same_grid(a: &Arc<RadialGrid>, b: &Arc<RadialGrid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Samples `u(r_i)` of a radial profile.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl PartialEq for RadialField {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(
                "field",
                format!("expected {} values, got {}", grid.len(), values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(RadialField { grid, values })
    }

    /// Unchecked constructor for values produced inside the crate.
    pub(crate) fn from_raw(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        RadialField { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        RadialField::from_raw(grid, vec![0.0; n])
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        RadialField::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn check_grid(&self, other: &RadialField) -> Result<()> {
        ensure_same_grid(&self.grid, &other.grid)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn zip_with(&self, other: &RadialField, f: impl Fn(f64, f64) -> f64) -> Result<RadialField> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(RadialField::from_raw(self.grid.clone(), values))
    }

    pub fn add(&self, other: &RadialField) -> Result<RadialField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RadialField) -> Result<RadialField> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &RadialField) -> Result<RadialField> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scaled(&self, a: f64) -> RadialField {
        RadialField::from_raw(self.grid.clone(), self.values.iter().map(|v| a * v).collect())
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: f64, x: &RadialField) -> Result<()> {
        self.check_grid(x)?;
        for (y, &xv) in self.values.iter_mut().zip(&x.values) {
            *y += a * xv;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// ℝ³ L² norm.
    pub fn l2_norm(&self) -> f64 {
        weighted_dot(&self.grid, &self.values, &self.values).sqrt()
    }
}

/// Sine coefficients of `r·u(r)` under the orthonormal DST-I.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<RadialGrid>,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(grid: Arc<RadialGrid>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(invalid(
                "spectral field",
                format!("expected {} coefficients, got {}", grid.len(), coeffs.len()),
            ));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectral coefficients"));
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub(crate) fn from_raw(grid: Arc<RadialGrid>, coeffs: Vec<f64>) -> Self {
        SpectralField { grid, coeffs }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
}

pub fn sine_transform(u: &RadialField) -> Result<SpectralField> {
    if !u.is_finite() {
        return Err(Error::NonFinite("sine_transform input"));
    }
    Ok(forward(u))
}

pub(crate) fn forward(u: &RadialField) -> SpectralField {
    let grid = u.grid.clone();
    let mut buf: Vec<f64> = u
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| grid.node(i) * x)
        .collect();
    grid.dst_in_place(&mut buf);
    SpectralField::from_raw(grid, buf)
}

pub fn inverse_sine_transform(s: &SpectralField) -> Result<RadialField> {
    if s.coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("inverse_sine_transform input"));
    }
    Ok(inverse(s))
}

pub(crate) fn inverse(s: &SpectralField) -> RadialField {
    let grid = s.grid.clone();
    let mut buf = s.coeffs.clone();
    grid.dst_in_place(&mut buf);
    for (i, x) in buf.iter_mut().enumerate() {
        *x /= grid.node(i);
    }
    RadialField::from_raw(grid, buf)
}

/// Evaluates the sine series of `u` at the nodes of another grid (zero
/// beyond the source radius). Exact for fields band-limited on the source grid.
pub fn resample(u: &RadialField, target: &Arc<RadialGrid>) -> RadialField {
    let src = u.grid();
    let coeffs = forward(u).coeffs;
    let scale = (2.0 / (src.len() + 1) as f64).sqrt();
    let values = target
        .nodes()
        .map(|r| {
            if r >= src.radius() {
                return 0.0;
            }
            let v: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * (src.frequency(j) * r).sin())
                .sum();
            scale * v / r
        })
        .collect();
    RadialField::from_raw(target.clone(), values)
}

#[inline]
pub(crate) fn weighted_dot(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (&x, &y))| grid.weight(i) * x * y)
        .sum()
}

/// `4π ∫₀^R u v r² dr` by the trapezoidal rule (endpoint terms vanish).
pub fn inner_product(u: &RadialField, v: &RadialField) -> Result<f64> {
    u.check_grid(v)?;
    Ok(weighted_dot(&u.grid, &u.values, &v.values))
}

/// Spectral `H^s` norm, `(4π·dr·Σ_j (1+ρ_j²)^s s_j²)^{1/2}`.
pub fn h_s_norm(u: &RadialField, s: f64) -> Result<f64> {
    h_s_tail_norm(u, s, 0)
}

/// `H^s` norm of the sine modes `j ≥ from` only.
pub fn h_s_tail_norm(u: &RadialField, s: f64, from: usize) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(invalid("Sobolev index", format!("must be >= 0, got {s}")));
    }
    let spec = forward(u);
    let grid = &u.grid;
    let sum: f64 = spec
        .coeffs
        .iter()
        .enumerate()
        .skip(from)
        .map(|(j, &a)| {
            let rho = grid.frequency(j);
            (1.0 + rho * rho).powf(s) * a * a
        })
        .sum();
    Ok((4.0 * PI * grid.spacing() * sum).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Arc<RadialGrid>, seed: u64) -> RadialField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        RadialField::new(grid.clone(), values).unwrap()
    }

    #[test]
    fn zero_field_has_zero_coefficients() {
        let g = RadialGrid::new(64, 10.0).unwrap();
        let s = sine_transform(&RadialField::zeros(g)).unwrap();
        assert!(s.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn first_sine_mode_is_a_single_coefficient() {
        let g = RadialGrid::new(128, 10.0).unwrap();
        let r = g.radius();
        let u = RadialField::from_fn(g.clone(), |x| (PI * x / r).sin() / x).unwrap();
        let s = sine_transform(&u).unwrap();
        let lead = s.coeffs()[0].abs();
        assert!(lead > 1.0);
        for &c in &s.coeffs()[1..] {
            assert!(c.abs() < 1e-12 * lead, "leaked coefficient {c}");
        }
    }

    #[test]
    fn inverse_of_single_coefficient_is_sine_mode_over_r() {
        let g = RadialGrid::new(100, 8.0).unwrap();
        let j = 6;
        let mut coeffs = vec![0.0; g.len()];
        coeffs[j] = 1.0;
        let u = inverse_sine_transform(&SpectralField::new(g.clone(), coeffs).unwrap()).unwrap();
        let scale = (2.0 / (g.len() + 1) as f64).sqrt();
        for (i, r) in g.nodes().enumerate() {
            let expect = scale * (g.frequency(j) * r).sin() / r;
            assert!((u.values()[i] - expect).abs() < 1e-13);
        }
        let zero = inverse_sine_transform(&SpectralField::new(g.clone(), vec![0.0; 100]).unwrap()).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = RadialGrid::new(1000, 20.0).unwrap();
        let u = random_field(&g, 7);
        let back = inverse_sine_transform(&sine_transform(&u).unwrap()).unwrap();
        let err = u
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).abs() / a.abs().max(1e-3))
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "round trip error {err}");
    }

    #[test]
    fn parseval_holds_under_orthonormal_scaling() {
        let g = RadialGrid::new(777, 15.0).unwrap();
        let u = random_field(&g, 11);
        let s = sine_transform(&u).unwrap();
        // direct summation, independent of the library inner product
        let lhs: f64 = s.coeffs().iter().map(|c| c * c).sum();
        let rhs: f64 = g.nodes().zip(u.values()).map(|(r, x)| (r * x) * (r * x)).sum();
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }

    #[test]
    fn gaussian_norm_matches_closed_form() {
        let g = RadialGrid::default_grid();
        let u = RadialField::from_fn(g, |r| (-r * r / 2.0).exp()).unwrap();
        let ip = inner_product(&u, &u).unwrap();
        assert!((ip - PI.powf(1.5)).abs() < 1e-8, "{ip}");
    }

    #[test]
    fn inner_product_basic_properties() {
        let g = RadialGrid::new(300, 12.0).unwrap();
        let u = random_field(&g, 1);
        let v = random_field(&g, 2);
        let (uv, vu) = (inner_product(&u, &v).unwrap(), inner_product(&v, &u).unwrap());
        assert!((uv - vu).abs() <= 1e-14 * uv.abs());
        assert_eq!(inner_product(&RadialField::zeros(g.clone()), &v).unwrap(), 0.0);
        let other = RadialGrid::new(301, 12.0).unwrap();
        assert_eq!(
            inner_product(&u, &RadialField::zeros(other)),
            Err(Error::GridMismatch)
        );
    }

    #[test]
    fn quadrature_error_shrinks_at_least_quadratically() {
        // e^{-r²} against 4πr²dr; the integrand is even in r, so the trapezoid
        // rule is in fact spectrally accurate and the ratio only grows.
        let exact = PI.powf(1.5);
        let err = |n: usize| {
            let g = RadialGrid::new(n, 12.0).unwrap();
            let u = RadialField::from_fn(g.clone(), |r| (-r * r / 2.0).exp()).unwrap();
            (inner_product(&u, &u).unwrap() - exact).abs()
        };
        // dr = 12/(n+1): 1.0, then 0.5
        let coarse = err(11);
        let fine = err(23);
        assert!(coarse > 1e-6);
        assert!(fine <= coarse / 4.0, "coarse {coarse:e} fine {fine:e}");
    }

    #[test]
    fn h_s_norm_properties() {
        let g = RadialGrid::new(512, 20.0).unwrap();
        let u = random_field(&g, 3);
        let l2 = inner_product(&u, &u).unwrap().sqrt();
        let h0 = h_s_norm(&u, 0.0).unwrap();
        assert!((h0 - l2).abs() < 1e-10 * l2);
        let mut prev = h0;
        for s in [0.5, 1.0, 1.5, 2.0] {
            let h = h_s_norm(&u, s).unwrap();
            assert!(h >= prev);
            prev = h;
        }
        assert_eq!(h_s_norm(&RadialField::zeros(g.clone()), 2.0).unwrap(), 0.0);
        assert!(h_s_norm(&u, -0.5).is_err());
    }

    #[test]
    fn h1_norm_matches_gradient_integral() {
        // ‖u‖²_{H¹} = ‖u‖² + ‖∇u‖² with ∇ of e^{-r²/2} known in closed form.
        let g = RadialGrid::default_grid();
        let u = RadialField::from_fn(g, |r| (-r * r / 2.0).exp()).unwrap();
        let h1 = h_s_norm(&u, 1.0).unwrap();
        let expect = PI.powf(1.5) * (1.0 + 1.5);
        assert!((h1 * h1 - expect).abs() < 1e-8 * expect);
    }

    #[test]
    fn rejects_bad_fields() {
        let g = RadialGrid::new(4, 1.0).unwrap();
        assert!(RadialField::new(g.clone(), vec![0.0; 3]).is_err());
        assert_eq!(
            RadialField::new(g.clone(), vec![0.0, f64::NAN, 0.0, 0.0]).unwrap_err(),
            Error::NonFinite("field values")
        );
        assert!(RadialGrid::new(1, 1.0).is_err());
        assert!(RadialGrid::new(10, -1.0).is_err());
    }

    #[test]
    fn arithmetic_requires_shared_grid() {
        let a = RadialField::zeros(RadialGrid::new(10, 1.0).unwrap());
        let b = RadialField::zeros(RadialGrid::new(10, 2.0).unwrap());
        assert_eq!(a.add(&b).unwrap_err(), Error::GridMismatch);
        let c = RadialField::zeros(RadialGrid::new(10, 1.0).unwrap());
        assert!(a.add(&c).is_ok());
    }
}
