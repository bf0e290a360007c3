//! Conditions and right-hand sides of the coupling-rate bounds.
//!
//! Every bound is an order statement with an unspecified implied constant;
//! here each constant is fixed to 1 and the result is labelled an *order
//! value*. Large powers such as `d^{ψγ}` are carried in log space through
//! [`Magnitude`], so reports remain meaningful far beyond `f64::MAX`.

mod dimension;
mod magnitude;
pub mod rates;

pub use dimension::{select_dimension, select_dimension_capped, DimensionChoice, Rule, Strategy};
pub use magnitude::{Magnitude, OVERFLOW_LOG10};

use crate::error::{Error, Result};
use crate::laws::IncrementKind;
use crate::spectra::{log_star_unchecked, Spectrum};
use serde::Serialize;
use std::fmt;

pub const ORDER_VALUE_NOTE: &str = "order value: implied constants set to 1";

/// Source of the whitened head moment `E‖D_d^{−1/2} Z^{(d)}‖^γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WhitenedMoment {
    /// Values for `d = 1, 2, …, len`.
    Table(Vec<f64>),
    /// Regular moment growth: the value is `K · d^{γ/2}`.
    Regular { k: f64 },
}

impl WhitenedMoment {
    pub fn at(&self, d: usize, gamma: f64) -> Option<f64> {
        match self {
            WhitenedMoment::Table(v) => d.checked_sub(1).and_then(|i| v.get(i).copied()),
            WhitenedMoment::Regular { k } => Some(k * (d as f64).powf(0.5 * gamma)),
        }
    }
}

/// Source of the tail moment `E‖Z^{[d]}‖^γ` (coordinates `m > d`).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMoment {
    /// Values for `d = 0, 1, …, len − 1`.
    Table(Vec<f64>),
    /// Bound by the full moment `E‖Z‖^γ`.
    Total,
}

impl TailMoment {
    pub fn at(&self, d: usize, moment_z: f64) -> Option<f64> {
        match self {
            TailMoment::Table(v) => v.get(d).copied(),
            TailMoment::Total => Some(moment_z),
        }
    }
}

/// One bound or simulation scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemInstance {
    pub n: u64,
    pub gamma: f64,
    pub psi: f64,
    pub spectrum: Spectrum,
    /// `E‖Z‖^γ`.
    pub moment_z: f64,
    pub whitened_moment: Option<WhitenedMoment>,
    pub tail_moment: Option<TailMoment>,
    /// The unspecified constant of the dimension conditions.
    pub c_gamma: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ProblemInstance {
    /// Instance with `ψ = 11` and `C(γ) = 1`.
    ///
    /// A moment below the Lyapunov floor `(B_0²)^{γ/2}` is recorded as a
    /// warning; use [`Self::strict`] to reject it instead.
    pub fn new(n: u64, gamma: f64, spectrum: Spectrum, moment_z: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be a positive integer"));
        }
        if !(gamma.is_finite() && gamma >= 2.0) {
            return Err(Error::invalid(format!("gamma must be ≥ 2, got {gamma}")));
        }
        if !(moment_z.is_finite() && moment_z >= 0.0) {
            return Err(Error::invalid(format!("E‖Z‖^γ must be finite and ≥ 0, got {moment_z}")));
        }
        let mut inst = ProblemInstance {
            n,
            gamma,
            psi: 11.0,
            spectrum,
            moment_z,
            whitened_moment: None,
            tail_moment: None,
            c_gamma: 1.0,
            warnings: Vec::new(),
        };
        let floor = inst.lyapunov_floor();
        if moment_z < floor * (1.0 - 1e-12) {
            inst.warnings.push(format!(
                "E‖Z‖^γ = {moment_z} is below the Lyapunov floor (B_0²)^(γ/2) = {floor}"
            ));
        }
        Ok(inst)
    }

    /// Rejects instances whose moment violates Lyapunov's inequality.
    pub fn strict(self) -> Result<Self> {
        if let Some(w) = self.warnings.iter().find(|w| w.contains("Lyapunov")) {
            return Err(Error::invalid(w.clone()));
        }
        Ok(self)
    }

    pub fn with_psi(mut self, psi: f64) -> Result<Self> {
        if !(psi > 10.5 && psi <= 11.0) {
            return Err(Error::invalid(format!("psi must lie in (10.5, 11], got {psi}")));
        }
        self.psi = psi;
        Ok(self)
    }

    pub fn with_c_gamma(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::invalid(format!("C(γ) must be finite and ≥ 0, got {c}")));
        }
        self.c_gamma = c;
        Ok(self)
    }

    pub fn with_whitened_moment(mut self, w: WhitenedMoment) -> Result<Self> {
        let ok = match &w {
            WhitenedMoment::Table(v) => v.iter().all(|x| x.is_finite() && *x > 0.0),
            WhitenedMoment::Regular { k } => k.is_finite() && *k > 0.0,
        };
        if !ok {
            return Err(Error::invalid("whitened moments must be positive and finite"));
        }
        self.whitened_moment = Some(w);
        Ok(self)
    }

    pub fn with_tail_moment(mut self, t: TailMoment) -> Result<Self> {
        if let TailMoment::Table(v) = &t {
            if !v.iter().all(|x| x.is_finite() && *x >= 0.0) {
                return Err(Error::invalid("tail moments must be nonnegative and finite"));
            }
        }
        self.tail_moment = Some(t);
        Ok(self)
    }

    /// `(B_0²)^{γ/2}`, the smallest `E‖Z‖^γ` compatible with the spectrum.
    pub fn lyapunov_floor(&self) -> f64 {
        self.spectrum.total_variance().powf(0.5 * self.gamma)
    }

    fn require_gamma_above_two(&self, what: &str) -> Result<()> {
        if self.gamma > 2.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what} needs gamma > 2, got {}", self.gamma)))
        }
    }

    fn positive_sigma_sq(&self, d: usize) -> Result<f64> {
        let s = self.spectrum.sigma_sq(d);
        if s > 0.0 {
            Ok(s)
        } else {
            Err(Error::invalid(format!("σ_d² must be positive, but σ_{d}² = 0")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremId {
    /// One-dimensional bound `Σ E|ξ_j|^γ`.
    Thm2,
    /// Finite-dimensional bound with the factor `A`.
    Thm3,
    /// Finite-dimensional whitened condition.
    Thm4,
    /// Infinite-dimensional bound with whitened and tail moments.
    Thm6,
    /// Infinite-dimensional bound in terms of `E‖Z‖^γ` only.
    Thm9,
    /// Moment bound without any coupling.
    Rosenthal,
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TheoremId::Thm2 => "thm2",
            TheoremId::Thm3 => "thm3",
            TheoremId::Thm4 => "thm4",
            TheoremId::Thm6 => "thm6",
            TheoremId::Thm9 => "thm9",
            TheoremId::Rosenthal => "rosenthal",
        };
        f.write_str(s)
    }
}

/// Which dimension condition to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionVariant {
    Thm4,
    Thm6,
    Thm9,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub variant: ConditionVariant,
    pub d: usize,
    pub lhs: Magnitude,
    pub rhs: Magnitude,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Term {
    pub name: String,
    #[serde(flatten)]
    pub value: Magnitude,
}

impl Term {
    fn new(name: &str, value: Magnitude) -> Self {
        Term { name: name.to_owned(), value }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub theorem: TheoremId,
    /// Chosen dimension; 0 means the no-approximation fallback.
    pub d: usize,
    pub condition_ok: bool,
    pub condition: Option<ConditionCheck>,
    pub terms: Vec<Term>,
    /// Named multiplicative factors (not summed into `total`).
    pub factors: Vec<Term>,
    pub total: Magnitude,
    pub c_gamma: f64,
    pub overflow: bool,
    pub notes: Vec<String>,
}

impl BoundReport {
    fn assemble(
        theorem: TheoremId,
        d: usize,
        condition: Option<ConditionCheck>,
        terms: Vec<Term>,
        factors: Vec<Term>,
        inst_c: f64,
        mut notes: Vec<String>,
    ) -> Self {
        let total = Magnitude::sum(terms.iter().map(|t| t.value));
        let overflow = total.overflows() || terms.iter().any(|t| t.value.overflows());
        if overflow {
            notes.push(format!(
                "magnitude above 10^{OVERFLOW_LOG10}: total ≈ 10^{:.3}",
                total.log10()
            ));
        }
        notes.push(ORDER_VALUE_NOTE.to_owned());
        BoundReport {
            theorem,
            d,
            condition_ok: condition.is_none_or(|c| c.ok),
            condition,
            terms,
            factors,
            total,
            c_gamma: inst_c,
            overflow,
            notes,
        }
    }

    fn fallback(theorem: TheoremId, inst: &ProblemInstance) -> Self {
        let mut r = trivial_rosenthal_bound(inst);
        r.theorem = theorem;
        r.condition_ok = false;
        r.notes.insert(
            0,
            "d = 0: condition fails already at d = 1; the estimate is the moment bound, not a successful approximation"
                .to_owned(),
        );
        r
    }
}

fn ln_mag(v: f64) -> Magnitude {
    Magnitude::from_value(v)
}

/// Evaluates `C d^{γ/2} (log* d)^{γ+1} M^{2/γ} ≤ R` where `M` is the
/// whitened moment and `R = n^{1−2/γ}` (`thm4`, `thm6`), or `M = E‖Z‖^γ`
/// and `R = n^{1−2/γ} σ_d²` (`thm9`).
pub fn check_condition(
    variant: ConditionVariant,
    inst: &ProblemInstance,
    d: usize,
) -> Result<ConditionCheck> {
    if d == 0 {
        return Err(Error::invalid("the dimension condition needs d ≥ 1"));
    }
    let g = inst.gamma;
    let (moment, sigma_d) = match variant {
        ConditionVariant::Thm4 | ConditionVariant::Thm6 => {
            let w = inst.whitened_moment.as_ref().ok_or_else(|| {
                Error::missing(format!(
                    "{variant:?} condition needs the whitened moment (or K); see whitened_moment_bound"
                ))
            })?;
            let m = w.at(d, g).ok_or_else(|| {
                Error::missing(format!("no whitened moment supplied for d = {d}"))
            })?;
            (m, Magnitude::ONE)
        }
        ConditionVariant::Thm9 => (inst.moment_z, ln_mag(inst.positive_sigma_sq(d)?)),
    };
    let df = d as f64;
    let lhs = ln_mag(inst.c_gamma)
        .mul(ln_mag(df).powf(0.5 * g))
        .mul(ln_mag(log_star_unchecked(df)).powf(g + 1.0))
        .mul(ln_mag(moment).powf(2.0 / g));
    let rhs = ln_mag(inst.n as f64).powf(1.0 - 2.0 / g).mul(sigma_d);
    Ok(ConditionCheck { variant, d, lhs, rhs, ok: lhs.ln() <= rhs.ln() })
}

/// Order value of the infinite-dimensional bound in terms of `E‖Z‖^γ`:
/// `d^{ψγ} (σ_1/σ_d)^γ n E‖Z‖^γ + (n B_d²)^{γ/2}`.
pub fn bound_thm9(inst: &ProblemInstance, d: usize) -> Result<BoundReport> {
    inst.require_gamma_above_two("bound_thm9")?;
    if d == 0 {
        return Ok(BoundReport::fallback(TheoremId::Thm9, inst));
    }
    let g = inst.gamma;
    let sd = inst.positive_sigma_sq(d)?;
    let s1 = inst.spectrum.sigma_sq(1);
    let cond = check_condition(ConditionVariant::Thm9, inst, d)?;
    let head = ln_mag(d as f64)
        .powf(inst.psi * g)
        .mul(ln_mag(s1 / sd).powf(0.5 * g))
        .mul(ln_mag(inst.n as f64))
        .mul(ln_mag(inst.moment_z));
    let tail = gaussian_tail_term(inst, d);
    Ok(BoundReport::assemble(
        TheoremId::Thm9,
        d,
        Some(cond),
        vec![Term::new("coupled_head", head), Term::new("gaussian_tail", tail)],
        vec![],
        inst.c_gamma,
        inst.warnings.clone(),
    ))
}

fn gaussian_tail_term(inst: &ProblemInstance, d: usize) -> Magnitude {
    let bd = inst.spectrum.tail_variance(d);
    ln_mag(inst.n as f64 * bd).powf(0.5 * inst.gamma)
}

/// Order value of `d^{ψγ} n σ_1^γ E‖D_d^{−1/2}Z^{(d)}‖^γ + n E‖Z^{[d]}‖^γ + (n B_d²)^{γ/2}`.
pub fn bound_thm6(inst: &ProblemInstance, d: usize) -> Result<BoundReport> {
    inst.require_gamma_above_two("bound_thm6")?;
    if d == 0 {
        return Ok(BoundReport::fallback(TheoremId::Thm6, inst));
    }
    let g = inst.gamma;
    let cond = check_condition(ConditionVariant::Thm6, inst, d)?;
    let whitened = inst
        .whitened_moment
        .as_ref()
        .and_then(|w| w.at(d, g))
        .ok_or_else(|| Error::missing("bound_thm6 needs the whitened moment; see whitened_moment_bound"))?;
    let tail_moment = inst
        .tail_moment
        .as_ref()
        .ok_or_else(|| {
            Error::missing("bound_thm6 needs the tail moment E‖Z^[d]‖^γ (or `Total` to bound it by E‖Z‖^γ)")
        })?
        .at(d, inst.moment_z)
        .ok_or_else(|| Error::missing(format!("no tail moment supplied for d = {d}")))?;
    let s1 = inst.spectrum.sigma_sq(1);
    let head = ln_mag(d as f64)
        .powf(inst.psi * g)
        .mul(ln_mag(inst.n as f64))
        .mul(ln_mag(s1).powf(0.5 * g))
        .mul(ln_mag(whitened));
    // an empty tail has zero moment whatever the table says
    let tail_empty = inst.spectrum.tail_variance(d) == 0.0;
    let tail_mom = if tail_empty {
        Magnitude::ZERO
    } else {
        ln_mag(inst.n as f64).mul(ln_mag(tail_moment))
    };
    let gauss = gaussian_tail_term(inst, d);
    let mut notes = inst.warnings.clone();
    if matches!(inst.tail_moment, Some(TailMoment::Total)) {
        notes.push("tail moment bounded by E‖Z‖^γ".to_owned());
    }
    Ok(BoundReport::assemble(
        TheoremId::Thm6,
        d,
        Some(cond),
        vec![
            Term::new("coupled_head", head),
            Term::new("tail_moment", tail_mom),
            Term::new("gaussian_tail", gauss),
        ],
        vec![],
        inst.c_gamma,
        notes,
    ))
}

/// `A(γ, ψ, d) = max{d^{ψγ}, d^{γ(γ+2)/4} (log* d)^{γ(γ+1)/2}}`.
pub fn factor_a(gamma: f64, psi: f64, d: usize) -> Magnitude {
    let df = d as f64;
    let first = ln_mag(df).powf(psi * gamma);
    let second = ln_mag(df)
        .powf(gamma * (gamma + 2.0) / 4.0)
        .mul(ln_mag(log_star_unchecked(df)).powf(gamma * (gamma + 1.0) / 2.0));
    if first.ln() >= second.ln() {
        first
    } else {
        second
    }
}

/// Finite-dimensional bound `A (σ_1/σ_d)^γ n E‖Z‖^γ`; `γ ≥ 2` allowed.
pub fn bound_thm3(inst: &ProblemInstance, d: usize) -> Result<BoundReport> {
    if d == 0 {
        return Ok(BoundReport::fallback(TheoremId::Thm3, inst));
    }
    let g = inst.gamma;
    let sd = inst.positive_sigma_sq(d)?;
    let s1 = inst.spectrum.sigma_sq(1);
    let a = factor_a(g, inst.psi, d);
    let main = a
        .mul(ln_mag(s1 / sd).powf(0.5 * g))
        .mul(ln_mag(inst.n as f64))
        .mul(ln_mag(inst.moment_z));
    Ok(BoundReport::assemble(
        TheoremId::Thm3,
        d,
        None,
        vec![Term::new("finite_dim", main)],
        vec![Term::new("A", a)],
        inst.c_gamma,
        inst.warnings.clone(),
    ))
}

/// The no-coupling benchmark `n E‖Z‖^γ + (n B_0²)^{γ/2}`.
pub fn trivial_rosenthal_bound(inst: &ProblemInstance) -> BoundReport {
    let first = ln_mag(inst.n as f64).mul(ln_mag(inst.moment_z));
    let second = gaussian_tail_term(inst, 0);
    BoundReport::assemble(
        TheoremId::Rosenthal,
        0,
        None,
        vec![Term::new("moment_sum", first), Term::new("variance_power", second)],
        vec![],
        inst.c_gamma,
        inst.warnings.clone(),
    )
}

/// How to bound the whitened head moment.
#[derive(Debug, Clone, Copy)]
pub enum WhitenedMode<'a> {
    /// `σ_d^{−γ} E‖Z‖^γ`.
    Crude,
    /// Independent coordinates with the given marginal law:
    /// `d^{γ/2} + Σ_{m≤d} σ_m^{−γ} E|Z_m|^γ`.
    Independent(&'a IncrementKind),
    /// Independent coordinates with user-supplied ratios `E|Z_m|^γ / σ_m^γ`
    /// for `m = 1, …, d`.
    Ratios(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WhitenedBound {
    pub value: f64,
    /// `d^{γ/2}`, below which no whitened moment can lie.
    pub lyapunov_floor: f64,
}

pub fn whitened_moment_bound(
    inst: &ProblemInstance,
    d: usize,
    mode: WhitenedMode<'_>,
) -> Result<WhitenedBound> {
    if d == 0 {
        return Err(Error::invalid("whitened moments need d ≥ 1"));
    }
    let g = inst.gamma;
    let sd = inst.positive_sigma_sq(d)?;
    let floor = (d as f64).powf(0.5 * g);
    let value = match mode {
        WhitenedMode::Crude => sd.powf(-0.5 * g) * inst.moment_z,
        WhitenedMode::Independent(kind) => {
            let sum: f64 = (1..=d)
                .map(|m| kind.abs_moment_ratio(g, inst.spectrum.sigma_sq(m)))
                .sum();
            floor + sum
        }
        WhitenedMode::Ratios(r) => {
            if r.len() < d {
                return Err(Error::missing(format!(
                    "need {d} per-coordinate moment ratios, got {}",
                    r.len()
                )));
            }
            floor + r[..d].iter().sum::<f64>()
        }
    };
    Ok(WhitenedBound { value, lyapunov_floor: floor })
}

/// One-dimensional bound `L_γ = Σ_j E|ξ_j|^γ`.
pub fn sakhanenko_1d_bound(gamma: f64, per_summand_moments: &[f64]) -> Result<f64> {
    if !(gamma > 2.0) {
        return Err(Error::invalid(format!("the one-dimensional bound needs gamma > 2, got {gamma}")));
    }
    if let Some(bad) = per_summand_moments.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(Error::invalid(format!("per-summand moments must be finite and ≥ 0, got {bad}")));
    }
    Ok(per_summand_moments.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn poly2(n: u64, moment: f64) -> ProblemInstance {
        ProblemInstance::new(n, 4.0, Spectrum::polynomial(2.0).unwrap(), moment).unwrap()
    }

    #[test]
    fn condition_thm9_examples() {
        let one = Spectrum::explicit(vec![1.0]).unwrap();
        let inst = ProblemInstance::new(16, 4.0, one, 1.0).unwrap();
        let c = check_condition(ConditionVariant::Thm9, &inst, 1).unwrap();
        assert!((c.lhs.value() - 1.0).abs() < 1e-14);
        assert!((c.rhs.value() - 4.0).abs() < 1e-13);
        assert!(c.ok);

        let inst = poly2(16, 1.0);
        let c = check_condition(ConditionVariant::Thm9, &inst, 4).unwrap();
        let want = 16.0 * 4f64.ln().powi(5);
        assert!((c.lhs.value() - want).abs() < 1e-10 * want);
        assert!((c.lhs.value() - 82.0).abs() < 0.2);
        assert!((c.rhs.value() - 0.25).abs() < 1e-14);
        assert!(!c.ok);
    }

    #[test]
    fn zero_constant_always_passes() {
        let inst = poly2(2, 100.0)
            .with_c_gamma(0.0)
            .unwrap()
            .with_whitened_moment(WhitenedMoment::Regular { k: 5.0 })
            .unwrap();
        for v in [ConditionVariant::Thm4, ConditionVariant::Thm6, ConditionVariant::Thm9] {
            for d in [1, 10, 1000] {
                let c = check_condition(v, &inst, d).unwrap();
                assert!(c.lhs.is_zero() && c.ok);
            }
        }
    }

    #[test]
    fn condition_errors() {
        let inst = poly2(10, 1.0);
        assert!(matches!(
            check_condition(ConditionVariant::Thm6, &inst, 1),
            Err(Error::MissingInput(_))
        ));
        assert!(check_condition(ConditionVariant::Thm9, &inst, 0).is_err());
        let short = ProblemInstance::new(10, 4.0, Spectrum::explicit(vec![1.0]).unwrap(), 1.0).unwrap();
        assert!(check_condition(ConditionVariant::Thm9, &short, 2).is_err());
    }

    #[test]
    fn thm9_examples() {
        let inst = poly2(100, 1.0);
        let r = bound_thm9(&inst, 1).unwrap();
        assert_eq!(r.terms.len(), 2);
        assert!((r.terms[0].value.value() - 100.0).abs() < 1e-10);
        let t2 = (100.0 * (PI * PI / 6.0 - 1.0)).powi(2);
        assert!((r.terms[1].value.value() - t2).abs() < 1e-7 * t2);
        assert!((r.terms[1].value.value() - 4159.4).abs() < 0.1);
        assert!((r.total.value() - 4259.4).abs() < 0.1);

        let r2 = bound_thm9(&inst, 2).unwrap();
        let want = 2f64.powi(44) * 16.0 * 100.0;
        assert!((r2.terms[0].value.value() - want).abs() < 1e-9 * want);
        assert!((r2.terms[0].value.value() - 2.815e16).abs() < 1e13);
    }

    #[test]
    fn thm9_empty_tail_and_fallback() {
        let ex = Spectrum::explicit(vec![1.0, 0.5, 0.25]).unwrap();
        let inst = ProblemInstance::new(100, 4.0, ex, 4.0).unwrap();
        let r = bound_thm9(&inst, 3).unwrap();
        assert!(r.terms[1].value.is_zero());
        let f = bound_thm9(&inst, 0).unwrap();
        assert_eq!(f.d, 0);
        assert_eq!(f.theorem, TheoremId::Thm9);
        assert_eq!(f.terms.len(), 2);
        assert!(!f.condition_ok);
        assert!(ProblemInstance::new(0, 4.0, Spectrum::polynomial(2.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn thm9_rejects_gamma_two() {
        let inst = ProblemInstance::new(10, 2.0, Spectrum::polynomial(2.0).unwrap(), 2.0).unwrap();
        assert!(bound_thm9(&inst, 1).is_err());
        assert!(bound_thm3(&inst, 1).is_ok());
    }

    #[test]
    fn thm6_examples() {
        let inst = ProblemInstance::new(10, 4.0, Spectrum::polynomial(2.0).unwrap(), 1.0)
            .unwrap()
            .with_whitened_moment(WhitenedMoment::Regular { k: 1.0 })
            .unwrap()
            .with_tail_moment(TailMoment::Total)
            .unwrap();
        let r = bound_thm6(&inst, 3).unwrap();
        let want = 3f64.powi(44) * 10.0 * 9.0;
        assert!((r.terms[0].value.value() - want).abs() < 1e-9 * want);
        assert_eq!(r.terms.len(), 3);

        // chi-square fourth moment d(d+2) for Gaussian whitened coordinates
        let inst = inst
            .with_whitened_moment(WhitenedMoment::Table(vec![3.0, 8.0, 15.0]))
            .unwrap();
        let r = bound_thm6(&inst, 3).unwrap();
        let want = 3f64.powi(44) * 10.0 * 15.0;
        assert!((r.terms[0].value.value() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn thm6_zero_tail_and_missing_inputs() {
        let ex = Spectrum::explicit(vec![1.0, 0.5]).unwrap();
        let inst = ProblemInstance::new(10, 4.0, ex, 4.0)
            .unwrap()
            .with_whitened_moment(WhitenedMoment::Regular { k: 1.0 })
            .unwrap();
        assert!(matches!(bound_thm6(&inst, 2), Err(Error::MissingInput(_))));
        let inst = inst.with_tail_moment(TailMoment::Total).unwrap();
        let r = bound_thm6(&inst, 2).unwrap();
        assert!(r.terms[1].value.is_zero() && r.terms[2].value.is_zero());
        let bare = ProblemInstance::new(10, 4.0, Spectrum::polynomial(2.0).unwrap(), 4.0).unwrap();
        assert!(matches!(bound_thm6(&bare, 1), Err(Error::MissingInput(_))));
    }

    #[test]
    fn factor_a_examples() {
        assert!((factor_a(4.0, 11.0, 1).value() - 1.0).abs() < 1e-15);
        let a2 = factor_a(4.0, 11.0, 2).value();
        assert!((a2 - 2f64.powi(44)).abs() < 1e-9 * a2);
        let a3 = factor_a(2.0, 11.0, 3).value();
        assert!((a3 - 3f64.powi(22)).abs() < 1e-9 * a3);
        let second = 9.0 * 3f64.ln().powi(3);
        assert!((second - 11.9).abs() < 0.05);
    }

    #[test]
    fn trivial_rosenthal_examples() {
        let inst = poly2(100, 1.0);
        let r = trivial_rosenthal_bound(&inst);
        assert!((r.terms[0].value.value() - 100.0).abs() < 1e-10);
        let want = (100.0 * PI * PI / 6.0).powi(2);
        assert!((r.terms[1].value.value() - want).abs() < 1e-7 * want);
        assert!((r.terms[1].value.value() - 27058.08).abs() < 0.01);
        assert!((r.total.value() - 27158.08).abs() < 0.01);

        let s = Spectrum::polynomial(2.0).unwrap();
        let b0 = s.total_variance();
        let inst = ProblemInstance::new(1, 2.0, s, b0).unwrap();
        let r = trivial_rosenthal_bound(&inst);
        assert!((r.terms[0].value.value() - b0).abs() < 1e-14);
        assert!((r.terms[1].value.value() - b0).abs() < 1e-14);

        let zero = ProblemInstance::new(5, 4.0, Spectrum::explicit(vec![0.0]).unwrap(), 0.0).unwrap();
        let r = trivial_rosenthal_bound(&zero);
        assert!(r.terms.iter().all(|t| t.value.is_zero()));
        assert!(r.total.is_zero());
    }

    #[test]
    fn whitened_bounds() {
        let inst = poly2(10, 1.0);
        let lattice = IncrementKind::ThreePointLattice { lambda: 1.0 };
        let w = whitened_moment_bound(&inst, 3, WhitenedMode::Independent(&lattice)).unwrap();
        assert!((w.value - 23.0).abs() < 1e-9);
        assert_eq!(w.lyapunov_floor, 9.0);
        assert!(w.value >= w.lyapunov_floor);

        // Gaussian: the exact whitened fourth moment is d(d+2) = 15; the crude
        // bound uses the exact E‖Z‖⁴ = B_0⁴ + 2Σσ⁴ and must dominate it.
        let z4 = (PI * PI / 6.0).powi(2) + 2.0 * PI.powi(4) / 90.0;
        let inst = poly2(10, z4);
        let crude = whitened_moment_bound(&inst, 3, WhitenedMode::Crude).unwrap();
        assert!((crude.value - 81.0 * z4).abs() < 1e-9);
        assert!(crude.value >= 15.0);
        let indep = whitened_moment_bound(&inst, 3, WhitenedMode::Independent(&IncrementKind::GaussianExact))
            .unwrap();
        assert!((indep.value - 18.0).abs() < 1e-12);
        let r = whitened_moment_bound(&inst, 2, WhitenedMode::Ratios(&[1.0, 2.0])).unwrap();
        assert_eq!(r.value, 7.0);
        assert!(whitened_moment_bound(&inst, 3, WhitenedMode::Ratios(&[1.0])).is_err());
    }

    #[test]
    fn sakhanenko_examples() {
        assert_eq!(sakhanenko_1d_bound(3.0, &[1.0; 7]).unwrap(), 7.0);
        assert_eq!(sakhanenko_1d_bound(3.0, &[1.0, 2.0, 3.0]).unwrap(), 6.0);
        assert_eq!(sakhanenko_1d_bound(4.0, &[3.0; 5]).unwrap(), 15.0);
        assert_eq!(sakhanenko_1d_bound(4.0, &[]).unwrap(), 0.0);
        assert!(sakhanenko_1d_bound(2.0, &[1.0]).is_err());
    }

    #[test]
    fn instance_validation() {
        let s = Spectrum::polynomial(2.0).unwrap();
        assert!(ProblemInstance::new(10, 1.5, s.clone(), 1.0).is_err());
        let inst = ProblemInstance::new(10, 4.0, s.clone(), 1.0).unwrap();
        assert!(inst.clone().with_psi(10.5).is_err());
        assert!(inst.clone().with_psi(11.5).is_err());
        assert_eq!(inst.clone().with_psi(10.75).unwrap().psi, 10.75);
        // (π²/6)² ≈ 2.71 > 1: below the Lyapunov floor
        assert_eq!(inst.warnings.len(), 1);
        assert!(inst.strict().is_err());
        let ok = ProblemInstance::new(10, 4.0, s, 3.0).unwrap();
        assert!(ok.warnings.is_empty());
        assert!(ok.strict().is_ok());
    }
}
