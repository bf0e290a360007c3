use super::{check_condition, ConditionCheck, ConditionVariant, ProblemInstance, WhitenedMoment};
use crate::error::{Error, Result};
use crate::spectra::Family;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;

/// Default upper end of dimension scans.
pub const DEFAULT_SCAN_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "strategy", content = "arg")]
pub enum Strategy {
    /// Largest `d` satisfying the chosen dimension condition.
    MaxFeasible(ConditionVariant),
    /// The dimension rule of worked example 1..=5.
    ExampleFormula(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    MaxFeasible,
    ExampleFormula,
    /// The example rule violated the theorem condition; the dimension was
    /// reduced to the largest feasible one.
    ExampleFallback,
    /// No `d ≥ 1` qualifies; the caller should use the moment bound.
    Fallback,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionChoice {
    pub d: usize,
    pub strategy: Strategy,
    pub rule: Rule,
    /// Condition at the chosen `d` (absent for `d = 0` or when not applicable).
    pub condition: Option<ConditionCheck>,
    pub notes: Vec<String>,
}

pub fn select_dimension(inst: &ProblemInstance, strategy: Strategy) -> Result<DimensionChoice> {
    select_dimension_capped(inst, strategy, DEFAULT_SCAN_CAP)
}

pub fn select_dimension_capped(
    inst: &ProblemInstance,
    strategy: Strategy,
    cap: usize,
) -> Result<DimensionChoice> {
    match strategy {
        Strategy::MaxFeasible(v) => {
            let (d, notes) = max_feasible(inst, v, cap)?;
            Ok(finish(inst, strategy, d, Rule::MaxFeasible, Some(v), notes))
        }
        Strategy::ExampleFormula(id) => example_formula(inst, id, cap),
    }
}

fn finish(
    inst: &ProblemInstance,
    strategy: Strategy,
    d: usize,
    rule: Rule,
    variant: Option<ConditionVariant>,
    mut notes: Vec<String>,
) -> DimensionChoice {
    let rule = if d == 0 { Rule::Fallback } else { rule };
    if d == 0 {
        notes.push("no d ≥ 1 qualifies: use the moment bound without coupling".to_owned());
    }
    let condition = match (d, variant) {
        (0, _) | (_, None) => None,
        (d, Some(v)) => check_condition(v, inst, d).ok(),
    };
    DimensionChoice { d, strategy, rule, condition, notes }
}

/// Largest index the scan may visit: the support length for explicit
/// spectra, the whitened table length when one is used, else `cap`.
fn scan_limit(inst: &ProblemInstance, variant: Option<ConditionVariant>, cap: usize) -> usize {
    let mut limit = inst.spectrum.support_len().unwrap_or(usize::MAX).min(cap);
    if let (Some(ConditionVariant::Thm4 | ConditionVariant::Thm6), Some(WhitenedMoment::Table(t))) =
        (variant, &inst.whitened_moment)
    {
        limit = limit.min(t.len());
    }
    limit
}

/// Largest `d ≤ limit` with `pred(d)`, assuming the feasible set is a prefix.
/// `Ok(None)` means the predicate still held at the cap of an unbounded scan.
fn scan_prefix<F>(limit: usize, bounded: bool, mut pred: F) -> Result<Option<usize>>
where
    F: FnMut(usize) -> Result<bool>,
{
    let mut d = 0;
    while d < limit {
        if !pred(d + 1)? {
            return Ok(Some(d));
        }
        d += 1;
    }
    Ok(if bounded { Some(d) } else { None })
}

fn cap_error(what: &str, cap: usize) -> Error {
    Error::numerical(format!("{what}: still feasible at the scan cap d = {cap}; raise the cap"))
}

fn max_feasible(
    inst: &ProblemInstance,
    v: ConditionVariant,
    cap: usize,
) -> Result<(usize, Vec<String>)> {
    if v != ConditionVariant::Thm9 && inst.whitened_moment.is_none() {
        return Err(Error::missing(format!(
            "{v:?} scan needs the whitened moment (or K); see whitened_moment_bound"
        )));
    }
    let limit = scan_limit(inst, Some(v), cap);
    let bounded = limit < cap;
    let mut notes = Vec::new();
    let d = scan_prefix(limit, bounded, |d| Ok(check_condition(v, inst, d)?.ok))?
        .ok_or_else(|| cap_error("max-feasible scan", cap))?;
    if d == limit && bounded && limit > 0 {
        notes.push(format!("scan stopped at the last available index {limit}"));
    }
    Ok((d, notes))
}

fn ln_sigma_sq(inst: &ProblemInstance, m: usize) -> f64 {
    inst.spectrum.sigma_sq(m).ln()
}

fn example_formula(inst: &ProblemInstance, id: u8, cap: usize) -> Result<DimensionChoice> {
    let strategy = Strategy::ExampleFormula(id);
    let g = inst.gamma;
    let ln_n = (inst.n as f64).ln();
    let limit = scan_limit(inst, None, cap);
    let bounded = limit < cap;
    match id {
        1 => {
            // σ_m⁴ > n^{2/γ−1} (log* n)^{2ψ/β}
            let beta = match inst.spectrum.family() {
                Family::Exponential { beta, .. } => *beta,
                _ => {
                    return Err(Error::invalid(
                        "example 1 rule needs an exponential spectrum exp(−α m^β)",
                    ))
                }
            };
            let ln_ls = crate::spectra::log_star_unchecked(inst.n as f64).ln();
            let thresh = (2.0 / g - 1.0) * ln_n + 2.0 * inst.psi / beta * ln_ls;
            let d = scan_prefix(limit, bounded, |m| Ok(2.0 * ln_sigma_sq(inst, m) > thresh))?
                .ok_or_else(|| cap_error("example 1 rule", cap))?;
            Ok(finish(inst, strategy, d, Rule::ExampleFormula, Some(ConditionVariant::Thm9), vec![]))
        }
        2 => {
            // smallest m with n B_m² < 1
            let n = inst.n as f64;
            let mut m = 1;
            loop {
                if n * inst.spectrum.tail_variance(m) < 1.0 {
                    break;
                }
                if m >= cap {
                    return Err(cap_error("example 2 rule", cap));
                }
                m += 1;
            }
            let variant = inst.whitened_moment.as_ref().map(|_| ConditionVariant::Thm6);
            Ok(finish(inst, strategy, m, Rule::ExampleFormula, variant, vec![]))
        }
        3 => {
            // n^{2/γ} m^{2ψ} / σ_m² < n m σ_m²
            let d = scan_prefix(limit, bounded, |m| {
                let lm = (m as f64).ln();
                let s = ln_sigma_sq(inst, m);
                Ok((2.0 / g) * ln_n + 2.0 * inst.psi * lm - s < ln_n + lm + s)
            })?
            .ok_or_else(|| cap_error("example 3 rule", cap))?;
            with_fallback(inst, strategy, d, ConditionVariant::Thm9, cap)
        }
        4 => {
            // n^{2/γ} m^{2ψ+1} < n m σ_m², largest such m
            let d = scan_prefix(limit, bounded, |m| {
                let lm = (m as f64).ln();
                let s = ln_sigma_sq(inst, m);
                Ok((2.0 / g) * ln_n + (2.0 * inst.psi + 1.0) * lm < ln_n + lm + s)
            })?
            .ok_or_else(|| cap_error("example 4 rule", cap))?;
            if inst.whitened_moment.is_none() {
                return Err(Error::missing(
                    "example 4 rule needs the whitened moment (or K); see whitened_moment_bound",
                ));
            }
            let mut choice = with_fallback(inst, strategy, d, ConditionVariant::Thm6, cap)?;
            choice
                .notes
                .push("the rule's `min` is read as `max`: the set is a prefix, so `min` would always be 1".to_owned());
            Ok(choice)
        }
        5 => {
            let d = example5_dimension(inst.n, g)?;
            let d = usize::try_from(d).map_err(|_| Error::numerical("example 5 dimension overflows"))?;
            let variant = (d >= 1 && inst.spectrum.sigma_sq(d) > 0.0).then_some(ConditionVariant::Thm9);
            Ok(finish(inst, strategy, d, Rule::ExampleFormula, variant, vec![]))
        }
        other => Err(Error::invalid(format!("example id must be 1..=5, got {other}"))),
    }
}

fn with_fallback(
    inst: &ProblemInstance,
    strategy: Strategy,
    d: usize,
    v: ConditionVariant,
    cap: usize,
) -> Result<DimensionChoice> {
    if d >= 1 && check_condition(v, inst, d)?.ok {
        return Ok(finish(inst, strategy, d, Rule::ExampleFormula, Some(v), vec![]));
    }
    let (reduced, mut notes) = max_feasible(inst, v, cap)?;
    notes.insert(
        0,
        format!("condition fails at the balanced d = {d}; reduced to the largest feasible dimension"),
    );
    Ok(finish(inst, strategy, reduced, Rule::ExampleFallback, Some(v), notes))
}

/// `⌊n^ε⌋` with `ε = (γ−2)/(γ(γ+22))`, evaluated exactly when `γ` is a
/// short decimal.
pub fn example5_dimension(n: u64, gamma: f64) -> Result<u64> {
    let eps = super::rates::example5_epsilon(gamma)?;
    let p = eps.numer();
    let q = eps.denom();
    let (Some(p), Some(q)) = (p.to_u32(), q.to_u32()) else {
        return Ok((n as f64).powf(super::rates::to_f64(&eps)).floor() as u64);
    };
    if q > 4096 || p > 4096 {
        return Ok((n as f64).powf(super::rates::to_f64(&eps)).floor() as u64);
    }
    // largest d with d^q ≤ n^p
    let target = BigUint::from(n).pow(p);
    let approx = (n as f64).powf(p as f64 / q as f64).floor() as u64;
    let fits = |d: u64| BigUint::from(d).pow(q) <= target;
    let mut d = approx.max(1);
    while d > 1 && !fits(d) {
        d -= 1;
    }
    while fits(d + 1) {
        d += 1;
    }
    Ok(if fits(d) { d } else { 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::Spectrum;

    fn inst(n: u64, spectrum: Spectrum, m: f64) -> ProblemInstance {
        ProblemInstance::new(n, 4.0, spectrum, m).unwrap()
    }

    #[test]
    fn max_feasible_example() {
        let i = inst(1_000_000, Spectrum::polynomial(2.0).unwrap(), 1.0);
        let c = select_dimension(&i, Strategy::MaxFeasible(ConditionVariant::Thm9)).unwrap();
        assert_eq!(c.d, 3);
        assert_eq!(c.rule, Rule::MaxFeasible);
        assert!(c.condition.unwrap().ok);
        assert!(!check_condition(ConditionVariant::Thm9, &i, 4).unwrap().ok);
    }

    #[test]
    fn fallback_when_first_dimension_fails() {
        let i = inst(2, Spectrum::polynomial(2.0).unwrap(), 100.0);
        let c = select_dimension(&i, Strategy::MaxFeasible(ConditionVariant::Thm9)).unwrap();
        assert_eq!(c.d, 0);
        assert_eq!(c.rule, Rule::Fallback);
        assert!(c.condition.is_none());
    }

    #[test]
    fn explicit_spectra_stop_at_support() {
        let s = Spectrum::explicit(vec![1.0, 1.0, 1.0]).unwrap();
        let i = inst(1_000_000_000, s, 1.0);
        let c = select_dimension(&i, Strategy::MaxFeasible(ConditionVariant::Thm9)).unwrap();
        assert_eq!(c.d, 3);
    }

    #[test]
    fn cap_is_a_numerical_error() {
        let i = inst(1_000_000, Spectrum::polynomial(2.0).unwrap(), 1.0).with_c_gamma(0.0).unwrap();
        let e = select_dimension_capped(&i, Strategy::MaxFeasible(ConditionVariant::Thm9), 50).unwrap_err();
        assert!(matches!(e, Error::Numerical(_)));
    }

    #[test]
    fn example5_floor() {
        assert_eq!(example5_dimension(1, 4.0).unwrap(), 1);
        assert_eq!(example5_dimension(2u64.pow(52), 4.0).unwrap(), 2);
        assert_eq!(example5_dimension(2u64.pow(52) - 1, 4.0).unwrap(), 1);
        assert_eq!(example5_dimension(3u64.pow(39), 4.0).unwrap(), 2);
        let i = inst(2u64.pow(52), Spectrum::logarithmic(1.0).unwrap(), 1.0);
        let c = select_dimension(&i, Strategy::ExampleFormula(5)).unwrap();
        assert_eq!(c.d, 2);
    }

    #[test]
    fn example3_balanced_or_reduced() {
        let s = Spectrum::polynomial(3.0).unwrap();
        let i = inst(1_000_000_000_000, s, 1.0);
        let c = select_dimension(&i, Strategy::ExampleFormula(3)).unwrap();
        // n^{1/2} m^{25} < n m^{-2} means m^{27} < 10^6, so d = 1
        assert_eq!(c.d, 1);
        assert_eq!(c.rule, Rule::ExampleFormula);
        let strict = inst(1_000_000_000_000, Spectrum::polynomial(3.0).unwrap(), 1.0)
            .with_c_gamma(1e7)
            .unwrap();
        let c = select_dimension(&strict, Strategy::ExampleFormula(3)).unwrap();
        assert_eq!(c.d, 0);
        assert_eq!(c.rule, Rule::Fallback);
    }

    #[test]
    fn example4_needs_whitened_moment() {
        let s = Spectrum::polynomial(3.0).unwrap();
        let i = inst(1_000_000, s, 1.0);
        assert!(matches!(
            select_dimension(&i, Strategy::ExampleFormula(4)),
            Err(Error::MissingInput(_))
        ));
        let i = i.with_whitened_moment(WhitenedMoment::Regular { k: 1.0 }).unwrap();
        let c = select_dimension(&i, Strategy::ExampleFormula(4)).unwrap();
        assert!(c.notes.iter().any(|n| n.contains("max")));
    }

    #[test]
    fn example2_tail_rule() {
        let s = Spectrum::exponential(1.0, 1.0).unwrap();
        let i = inst(1000, s.clone(), 1.0);
        let c = select_dimension(&i, Strategy::ExampleFormula(2)).unwrap();
        assert!(1000.0 * s.tail_variance(c.d) < 1.0);
        assert!(1000.0 * s.tail_variance(c.d - 1) >= 1.0);
    }

    #[test]
    fn example1_needs_exponential() {
        let i = inst(1000, Spectrum::polynomial(2.0).unwrap(), 1.0);
        assert!(select_dimension(&i, Strategy::ExampleFormula(1)).is_err());
        assert!(select_dimension(&i, Strategy::ExampleFormula(6)).is_err());
    }
}
