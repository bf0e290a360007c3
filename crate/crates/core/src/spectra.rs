//! Eigenvalue sequences of the covariance operator.
//!
//! A [`Spectrum`] models the nonincreasing, summable sequence `σ_m²`
//! (`m = 1, 2, …`) of variances of the uncorrelated coordinates of a
//! Hilbert-valued vector. Besides point evaluation it provides the tail
//! traces `B_d² = Σ_{m>d} σ_m²`, computed from closed forms where they exist
//! and otherwise by direct summation closed off with a certified integral
//! bracket.

use crate::error::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::gamma_ui;
use std::fmt;
use std::str::FromStr;

/// `log* b = max{1, ln b}`.
pub fn log_star(b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::invalid(format!("log* needs a positive argument, got {b}")));
    }
    Ok(log_star_unchecked(b))
}

#[inline]
pub(crate) fn log_star_unchecked(b: f64) -> f64 {
    b.ln().max(1.0)
}

/// Default hard cap on truncation dimensions.
pub const DEFAULT_DIM_CAP: usize = 10_000_000;

/// Relative stopping tolerance for the certified tail bracket.
const TAIL_REL_TOL: f64 = 1e-13;
/// Upper limit on directly summed terms inside one tail evaluation.
const TAIL_MAX_TERMS: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `σ_m² = exp(−α m^β)`.
    Exponential { alpha: f64, beta: f64 },
    /// `σ_m² = m^{−b}`, `b > 1`.
    Polynomial { b: f64 },
    /// `σ_m² = 1 / (m (log* m)^{1+τ})`, `τ > 0`.
    Logarithmic { tau: f64 },
    /// Finite list; coordinates past its end are exactly zero.
    Explicit { values: Vec<f64> },
}

/// A validated eigenvalue model.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    family: Family,
}

/// Value of a tail sum together with a certified half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub value: f64,
    pub half_width: f64,
}

impl TailEstimate {
    pub fn exact(value: f64) -> Self {
        TailEstimate { value, half_width: 0.0 }
    }

    pub fn lower(&self) -> f64 {
        (self.value - self.half_width).max(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width
    }
}

fn positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be a positive finite number, got {v}")))
    }
}

impl Spectrum {
    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        positive_finite("alpha", alpha)?;
        positive_finite("beta", beta)?;
        Ok(Spectrum { family: Family::Exponential { alpha, beta } })
    }

    pub fn polynomial(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 1.0) {
            return Err(Error::invalid(format!(
                "polynomial decay needs b > 1 for a finite trace, got {b}"
            )));
        }
        Ok(Spectrum { family: Family::Polynomial { b } })
    }

    pub fn logarithmic(tau: f64) -> Result<Self> {
        positive_finite("tau", tau)?;
        Ok(Spectrum { family: Family::Logarithmic { tau } })
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("explicit spectrum needs at least one value"));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "explicit spectrum value #{} = {v} is not a nonnegative finite number",
                    i + 1
                )));
            }
            if i > 0 && v > values[i - 1] {
                return Err(Error::invalid(format!(
                    "explicit spectrum must be nonincreasing: value #{} = {v} exceeds {}",
                    i + 1,
                    values[i - 1]
                )));
            }
        }
        Ok(Spectrum { family: Family::Explicit { values } })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Number of nonzero-capable coordinates, `None` for infinite support.
    pub fn support_len(&self) -> Option<usize> {
        match &self.family {
            Family::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    /// `σ_m²` for `m ≥ 1`.
    pub fn sigma_sq(&self, m: usize) -> f64 {
        assert!(m >= 1, "eigenvalues are indexed from 1");
        self.density(m as f64).unwrap_or_else(|| match &self.family {
            Family::Explicit { values } => values.get(m - 1).copied().unwrap_or(0.0),
            _ => unreachable!(),
        })
    }

    /// Continuous interpolant of `σ_m²`, used for integral comparison.
    fn density(&self, x: f64) -> Option<f64> {
        match self.family {
            Family::Exponential { alpha, beta } => Some((-alpha * x.powf(beta)).exp()),
            Family::Polynomial { b } => Some(x.powf(-b)),
            Family::Logarithmic { tau } => {
                Some(1.0 / (x * log_star_unchecked(x).powf(1.0 + tau)))
            }
            Family::Explicit { .. } => None,
        }
    }

    /// `∫_x^∞ f` for the continuous interpolant, valid for `x` in the
    /// region where [`Self::convex_from`] holds.
    fn tail_integral(&self, x: f64) -> f64 {
        match self.family {
            Family::Exponential { alpha, beta } => {
                let s = 1.0 / beta;
                let z = alpha * x.powf(beta);
                alpha.powf(-s) / beta * gamma_ui(s, z)
            }
            Family::Polynomial { b } => x.powf(1.0 - b) / (b - 1.0),
            Family::Logarithmic { tau } => x.ln().powf(-tau) / tau,
            Family::Explicit { .. } => unreachable!(),
        }
    }

    /// Smallest integer from which the interpolant is convex (and, for the
    /// logarithmic family, equal to its `ln` branch).
    fn convex_from(&self) -> usize {
        match self.family {
            Family::Exponential { alpha, beta } if beta > 1.0 => {
                ((beta - 1.0) / (alpha * beta)).powf(1.0 / beta).ceil() as usize + 1
            }
            Family::Logarithmic { .. } => 3,
            _ => 1,
        }
    }

    /// `Σ_{m=1}^{d} σ_m²`, compensated summation.
    pub fn head_variance(&self, d: usize) -> f64 {
        let d = self.support_len().map_or(d, |len| d.min(len));
        let mut acc = Neumaier::default();
        for m in 1..=d {
            acc.add(self.sigma_sq(m));
        }
        acc.total()
    }

    /// `B_d² = Σ_{m>d} σ_m²`.
    pub fn tail_variance(&self, d: usize) -> f64 {
        self.tail_bracket(d).value
    }

    /// `Σ_{m>0} σ_m² = E‖Z‖²`.
    pub fn total_variance(&self) -> f64 {
        self.tail_variance(0)
    }

    /// `B_d²` with a certified half-width. Closed forms report a zero
    /// half-width; summed tails report the integral bracket on the remainder.
    pub fn tail_bracket(&self, d: usize) -> TailEstimate {
        match self.family {
            Family::Explicit { ref values } => {
                let mut acc = Neumaier::default();
                for &v in values.iter().skip(d) {
                    acc.add(v);
                }
                TailEstimate::exact(acc.total())
            }
            Family::Exponential { alpha, beta } if beta == 1.0 => {
                // Σ_{m>d} e^{−αm} = e^{−α(d+1)} / (1 − e^{−α})
                let v = (-alpha * (d as f64 + 1.0)).exp() / -(-alpha).exp_m1();
                TailEstimate::exact(v)
            }
            Family::Exponential { beta, .. } if beta > 1.0 => self.geometric_tail(d),
            _ => self.integral_tail(d),
        }
    }

    /// Log-concave terms: the ratio `σ_{m+1}²/σ_m²` is nonincreasing, so the
    /// remainder after `M` is at most `σ_{M+1}² / (1 − q)`.
    fn geometric_tail(&self, d: usize) -> TailEstimate {
        let mut acc = Neumaier::default();
        let mut m = d;
        for _ in 0..TAIL_MAX_TERMS {
            let next = self.sigma_sq(m + 1);
            if next == 0.0 {
                return TailEstimate::exact(acc.total());
            }
            let q = self.sigma_sq(m + 2) / next;
            let bound = if q < 1.0 { next / (1.0 - q) } else { f64::INFINITY };
            if bound <= TAIL_REL_TOL * acc.total() {
                let half = 0.5 * bound;
                return TailEstimate { value: acc.total() + half, half_width: half };
            }
            m += 1;
            acc.add(next);
        }
        let next = self.sigma_sq(m + 1);
        let q = self.sigma_sq(m + 2) / next;
        let half = 0.5 * next / (1.0 - q);
        TailEstimate { value: acc.total() + half, half_width: half }
    }

    /// Convex decreasing terms: `∫_M^∞ f − f(M)/2 ≤ Σ_{m>M} f(m) ≤ ∫_{M+½}^∞ f`.
    fn integral_tail(&self, d: usize) -> TailEstimate {
        let start = self.convex_from();
        let mut acc = Neumaier::default();
        let mut m = d;
        let mut steps = 0usize;
        loop {
            if m >= start {
                let x = m as f64;
                let lo = (self.tail_integral(x) - 0.5 * self.sigma_sq(m)).max(0.0);
                let hi = self.tail_integral(x + 0.5);
                let half = 0.5 * (hi - lo).max(0.0);
                let base = acc.total() + lo;
                if half <= TAIL_REL_TOL * base || steps >= TAIL_MAX_TERMS || hi == 0.0 {
                    return TailEstimate { value: acc.total() + 0.5 * (lo + hi), half_width: half };
                }
            }
            m += 1;
            steps += 1;
            acc.add(self.sigma_sq(m));
        }
    }

    /// Smallest `D` with `B_D² ≤ rel_tol · B_0²`. Explicit spectra return
    /// their length.
    pub fn truncation_dim(&self, rel_tol: f64) -> Result<usize> {
        self.truncation_dim_capped(rel_tol, DEFAULT_DIM_CAP)
    }

    pub fn truncation_dim_capped(&self, rel_tol: f64, cap: usize) -> Result<usize> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::invalid(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
        }
        if let Some(len) = self.support_len() {
            return Ok(len);
        }
        let target = rel_tol * self.total_variance();
        let fits = |d: usize| self.tail_variance(d) <= target;
        if !fits(cap) {
            return Err(Error::numerical(format!(
                "spectrum {self} decays too slowly: B_D²/B_0² > {rel_tol} at the cap D = {cap}"
            )));
        }
        // gallop then bisect; the predicate is monotone in d
        let mut hi = 1usize;
        while hi < cap && !fits(hi) {
            hi = (hi * 2).min(cap);
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if fits(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi.max(1))
    }

    /// First `dim` eigenvalues.
    pub fn sigma_sq_vec(&self, dim: usize) -> Vec<f64> {
        (1..=dim).map(|m| self.sigma_sq(m)).collect()
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Exponential { alpha, beta } => write!(f, "exp:{alpha},{beta}"),
            Family::Polynomial { b } => write!(f, "poly:{b}"),
            Family::Logarithmic { tau } => write!(f, "log:{tau}"),
            Family::Explicit { values } => {
                f.write_str("explicit:")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Spectrum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("spectrum `{s}` is missing a `kind:` prefix")))?;
        let nums = rest
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number `{t}` in spectrum `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let want = |k: usize| -> Result<()> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "spectrum kind `{kind}` takes {k} parameter(s), got {}",
                    nums.len()
                )))
            }
        };
        match kind.trim() {
            "exp" => {
                want(2)?;
                Spectrum::exponential(nums[0], nums[1])
            }
            "poly" => {
                want(1)?;
                Spectrum::polynomial(nums[0])
            }
            "log" => {
                want(1)?;
                Spectrum::logarithmic(nums[0])
            }
            "explicit" => Spectrum::explicit(nums),
            other => Err(Error::invalid(format!(
                "unknown spectrum kind `{other}` (expected exp, poly, log or explicit)"
            ))),
        }
    }
}

impl Serialize for Spectrum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
