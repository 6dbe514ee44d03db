//! Physical parameters, in units with ħ = 1.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Speed of light: a finite positive value, or the non-relativistic limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedOfLight {
    Finite(f64),
    Infinite,
}

impl SpeedOfLight {
    pub fn finite(self) -> Option<f64> {
        match self {
            SpeedOfLight::Finite(c) => Some(c),
            SpeedOfLight::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, SpeedOfLight::Infinite)
    }
}

impl fmt::Display for SpeedOfLight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeedOfLight::Finite(c) => write!(f, "{c}"),
            SpeedOfLight::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for SpeedOfLight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(SpeedOfLight::Infinite);
        }
        let c: f64 = t
            .parse()
            .map_err(|_| invalid("c", format!("cannot parse {t:?} as a number or 'inf'")))?;
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("c", format!("must be positive and finite or 'inf', got {c}")));
        }
        Ok(SpeedOfLight::Finite(c))
    }
}

/// Mass `m`, frequency `λ` (only used by the action problem) and speed of light `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub mass: f64,
    pub lambda: f64,
    pub c: SpeedOfLight,
}

impl PhysicalParams {
    pub fn new(mass: f64, lambda: f64, c: SpeedOfLight) -> Result<Self> {
        let p = PhysicalParams { mass, lambda, c };
        p.validate()?;
        Ok(p)
    }

    /// Non-relativistic parameters with `m = 1`, `λ = 1`.
    pub fn unit() -> Self {
        PhysicalParams {
            mass: 1.0,
            lambda: 1.0,
            c: SpeedOfLight::Infinite,
        }
    }

    pub fn with_c(self, c: SpeedOfLight) -> Self {
        PhysicalParams { c, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(invalid("mass", format!("must be positive, got {}", self.mass)));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(invalid("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if let SpeedOfLight::Finite(c) = self.c {
            if !(c.is_finite() && c > 0.0) {
                return Err(invalid("c", format!("must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Validation for the action problem, which additionally needs `λ > 0`.
    pub fn validate_action(&self) -> Result<()> {
        self.validate()?;
        if self.lambda <= 0.0 {
            return Err(invalid("lambda", "the action problem needs lambda > 0"));
        }
        Ok(())
    }
}
