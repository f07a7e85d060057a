//! Collision parameters and Maxwellian normalizations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prefactor convention for the global Maxwellian `μ(v) = c·e^{−|v|²/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `c = (2π)^{-1}`: the outgoing flux `∫_{v·n>0} μ|v·n| dv` equals one.
    BoundaryMeasure,
    /// `c = (2π)^{-3/2}`: `∫ μ dv` equals one.
    #[default]
    UnitMass,
}

impl Normalization {
    /// The prefactor `c`.
    pub fn prefactor(self) -> f64 {
        match self {
            Normalization::BoundaryMeasure => 1.0 / (2.0 * PI),
            Normalization::UnitMass => (2.0 * PI).powf(-1.5),
        }
    }
}

/// Hard-sphere collision parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionParams {
    /// Hard-sphere constant `q₀ > 0`.
    pub q0: f64,
    /// Maxwellian prefactor convention.
    pub mu_normalization: Normalization,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self { q0: 1.0, mu_normalization: Normalization::UnitMass }
    }
}

impl CollisionParams {
    /// Validated constructor.
    pub fn new(q0: f64, mu_normalization: Normalization) -> Result<Self> {
        let p = Self { q0, mu_normalization };
        p.validate()?;
        Ok(p)
    }

    /// Checks `q₀ > 0` and finiteness.
    pub fn validate(&self) -> Result<()> {
        if !(self.q0 > 0.0) || !self.q0.is_finite() {
            return Err(Error::InvalidParameter(format!("q0 must be positive and finite, got {}", self.q0)));
        }
        Ok(())
    }

    /// Global Maxwellian `μ(v)` under the selected normalization.
    pub fn mu(&self, v: [f64; 3]) -> f64 {
        self.mu_normalization.prefactor() * (-0.5 * norm2(v)).exp()
    }
}

/// Squared Euclidean norm.
#[inline]
pub fn norm2(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Euclidean norm.
#[inline]
pub fn norm(v: [f64; 3]) -> f64 {
    norm2(v).sqrt()
}

/// Japanese bracket `⟨v⟩ = √(1 + |v|²)`.
#[inline]
pub fn bracket(v: [f64; 3]) -> f64 {
    (1.0 + norm2(v)).sqrt()
}

/// Unit-mass square-root Maxwellian `μ^{1/2}(v) = (2π)^{-3/4} e^{−|v|²/4}`.
#[inline]
pub fn sqrt_mu(v: [f64; 3]) -> f64 {
    (2.0 * PI).powf(-0.75) * (-0.25 * norm2(v)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_q0() {
        assert!(CollisionParams::new(0.0, Normalization::UnitMass).is_err());
        assert!(CollisionParams::new(-1.0, Normalization::UnitMass).is_err());
        assert!(CollisionParams::new(f64::NAN, Normalization::UnitMass).is_err());
        assert!(CollisionParams::new(2.0, Normalization::BoundaryMeasure).is_ok());
    }

    #[test]
    fn prefactors() {
        assert!((Normalization::UnitMass.prefactor() * (2.0 * PI).powf(1.5) - 1.0).abs() < 1e-15);
        assert!((Normalization::BoundaryMeasure.prefactor() * 2.0 * PI - 1.0).abs() < 1e-15);
    }
}
