//! Per-coordinate marginal laws with mean zero and variance `σ_m²`.

use crate::error::{Error, Result};
use crate::normal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IncrementKind {
    /// Values `−λ, 0, λ` with `P{±λ} = σ²/(2λ²)`.
    ThreePointLattice { lambda: f64 },
    /// Values `±σ` with probability one half each.
    TwoPointSymmetric,
    /// `N(0, σ²)`.
    GaussianExact,
    /// Uniform on `[−√3 σ, √3 σ]`.
    UniformSymmetric,
}

impl IncrementKind {
    /// Checks the law is well defined for a coordinate of variance `sigma_sq`.
    pub fn validate(&self, sigma_sq: f64) -> Result<()> {
        if let IncrementKind::ThreePointLattice { lambda } = *self {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::invalid(format!("lattice step must be positive, got {lambda}")));
            }
            if sigma_sq > lambda * lambda {
                return Err(Error::invalid(format!(
                    "three-point lattice law needs σ² ≤ λ², got σ² = {sigma_sq} > λ² = {}",
                    lambda * lambda
                )));
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, IncrementKind::ThreePointLattice { .. } | IncrementKind::TwoPointSymmetric)
    }

    /// Quantile function of the coordinate law at `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64, sigma_sq: f64) -> f64 {
        let sigma = sigma_sq.sqrt();
        match *self {
            IncrementKind::ThreePointLattice { lambda } => {
                lambda * self.lattice_units(u, sigma_sq) as f64
            }
            IncrementKind::TwoPointSymmetric => {
                if u < 0.5 {
                    -sigma
                } else {
                    sigma
                }
            }
            IncrementKind::GaussianExact => sigma * normal::quantile(u),
            IncrementKind::UniformSymmetric => 3f64.sqrt() * sigma * (2.0 * u - 1.0),
        }
    }

    /// Lattice quantile in units of `λ`: `−1`, `0` or `1`.
    pub fn lattice_units(&self, u: f64, sigma_sq: f64) -> i64 {
        match *self {
            IncrementKind::ThreePointLattice { lambda } => {
                let half = 0.5 * sigma_sq / (lambda * lambda);
                if u < half {
                    -1
                } else if u < 1.0 - half {
                    0
                } else {
                    1
                }
            }
            _ => panic!("lattice_units called on a non-lattice law"),
        }
    }

    /// Support points and probabilities of a discrete law.
    pub fn atoms(&self, sigma_sq: f64) -> Option<Vec<(f64, f64)>> {
        match *self {
            IncrementKind::ThreePointLattice { lambda } => {
                let p = sigma_sq / (lambda * lambda);
                Some(vec![(-lambda, 0.5 * p), (0.0, 1.0 - p), (lambda, 0.5 * p)])
            }
            IncrementKind::TwoPointSymmetric => {
                let s = sigma_sq.sqrt();
                Some(vec![(-s, 0.5), (s, 0.5)])
            }
            _ => None,
        }
    }

    /// `E|Z_m|^γ`.
    pub fn abs_moment(&self, gamma: f64, sigma_sq: f64) -> f64 {
        if sigma_sq == 0.0 {
            return 0.0;
        }
        let sigma_g = sigma_sq.powf(0.5 * gamma);
        match *self {
            IncrementKind::ThreePointLattice { lambda } => lambda.powf(gamma) * sigma_sq / (lambda * lambda),
            IncrementKind::TwoPointSymmetric => sigma_g,
            IncrementKind::GaussianExact => normal::abs_moment(gamma) * sigma_g,
            IncrementKind::UniformSymmetric => 3f64.powf(0.5 * gamma) / (gamma + 1.0) * sigma_g,
        }
    }

    /// `E|Z_m|^γ / σ_m^γ`; requires `σ_m² > 0`.
    pub fn abs_moment_ratio(&self, gamma: f64, sigma_sq: f64) -> f64 {
        match *self {
            IncrementKind::ThreePointLattice { lambda } => {
                (lambda * lambda / sigma_sq).powf(0.5 * (gamma - 2.0))
            }
            IncrementKind::TwoPointSymmetric => 1.0,
            IncrementKind::GaussianExact => normal::abs_moment(gamma),
            IncrementKind::UniformSymmetric => 3f64.powf(0.5 * gamma) / (gamma + 1.0),
        }
    }

    /// `E‖Z‖⁴` for independent coordinates with the given variances:
    /// `(Σσ²)² + Σ(E Z_m⁴ − σ_m⁴)`.
    pub fn norm_fourth_moment(&self, sigma_sq: &[f64]) -> f64 {
        let total: f64 = sigma_sq.iter().sum();
        let excess: f64 = sigma_sq
            .iter()
            .map(|&s| self.abs_moment(4.0, s) - s * s)
            .sum();
        total * total + excess
    }
}

impl fmt::Display for IncrementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IncrementKind::ThreePointLattice { lambda } => write!(f, "lattice:{lambda}"),
            IncrementKind::TwoPointSymmetric => f.write_str("two-point"),
            IncrementKind::GaussianExact => f.write_str("gaussian"),
            IncrementKind::UniformSymmetric => f.write_str("uniform"),
        }
    }
}

impl FromStr for IncrementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(l) = s.strip_prefix("lattice:") {
            let lambda: f64 = l
                .parse()
                .map_err(|_| Error::invalid(format!("bad lattice step `{l}`")))?;
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::invalid(format!("lattice step must be positive, got {lambda}")));
            }
            return Ok(IncrementKind::ThreePointLattice { lambda });
        }
        match s {
            "two-point" => Ok(IncrementKind::TwoPointSymmetric),
            "gaussian" => Ok(IncrementKind::GaussianExact),
            "uniform" => Ok(IncrementKind::UniformSymmetric),
            other => Err(Error::invalid(format!(
                "unknown increment model `{other}` (expected lattice:<λ>, two-point, gaussian or uniform)"
            ))),
        }
    }
}
