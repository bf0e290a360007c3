//! Exact rate exponents of the worked examples.
//!
//! Inputs are converted from their shortest decimal representation, so
//! `γ = 4`, `b = 2.5` or `β = 0.3` become the rationals 4, 5/2 and 3/10 and
//! every exponent below is computed without rounding.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;

pub type Rational = Ratio<BigInt>;

/// Serializes as `"p/q"`, always including the denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Exact(pub Rational);

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn to_f64(x: &Rational) -> f64 {
    x.numer().to_f64().unwrap_or(f64::NAN) / x.denom().to_f64().unwrap_or(f64::NAN)
}

/// Exact rational equal to the shortest decimal that round-trips `x`.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("cannot convert {x} to a rational")));
    }
    let s = format!("{x}");
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.as_str()),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let num: BigInt = format!("{int}{frac}")
        .parse()
        .map_err(|_| Error::invalid(format!("cannot convert {x} to a rational")))?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let r = Rational::new(num, den);
    Ok(if neg { -r } else { r })
}

/// Parses `p/q`, an integer, or a decimal literal.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| Error::invalid(format!("bad rational `{s}`")))?;
        let q: BigInt = q.trim().parse().map_err(|_| Error::invalid(format!("bad rational `{s}`")))?;
        if q.is_zero() {
            return Err(Error::invalid(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational::new(p, q));
    }
    let x: f64 = s.parse().map_err(|_| Error::invalid(format!("bad number `{s}`")))?;
    rational_from_f64(x)
}

/// Family parameters of the five examples.
#[derive(Debug, Clone, PartialEq)]
pub enum ExampleParams {
    /// `σ_m² = exp(−α m^β)`, examples 1 and 2.
    Exponential { alpha: Rational, beta: Rational },
    /// `σ_m² = m^{−b}`, examples 3 and 4.
    Polynomial { b: Rational },
    /// `σ_m² = 1/(m (log* m)^{1+τ})`, example 5.
    Logarithmic { tau: Rational },
}

/// `n^{n_power} (log n)^{log_power}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Order {
    pub n_power: Exact,
    pub log_power: Exact,
}

impl Order {
    fn new(n_power: Rational, log_power: Rational) -> Self {
        Order { n_power: Exact(n_power), log_power: Exact(log_power) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Regime {
    pub name: String,
    pub order: Order,
    pub formula: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub example_id: u8,
    pub regimes: Vec<Regime>,
    /// Index into `regimes` of the order that holds for large `n`.
    pub governing: usize,
    pub auxiliary: BTreeMap<String, Exact>,
    /// `γ < 2(b − 1 + 2ψ)` for examples 3 and 4.
    pub window_ok: Option<bool>,
    pub notes: Vec<String>,
}

impl RateReport {
    pub fn governing_order(&self) -> &Order {
        &self.regimes[self.governing].order
    }

    pub fn aux(&self, name: &str) -> Option<&Rational> {
        self.auxiliary.get(name).map(|e| &e.0)
    }
}

fn check_common(gamma: &Rational, psi: &Rational) -> Result<()> {
    if *gamma <= rat(2, 1) {
        return Err(Error::invalid(format!("rate exponents need gamma > 2, got {}", Exact(gamma.clone()))));
    }
    if *psi <= rat(21, 2) || *psi > rat(11, 1) {
        return Err(Error::invalid(format!("psi must lie in (21/2, 11], got {}", Exact(psi.clone()))));
    }
    Ok(())
}

fn positive(name: &str, x: &Rational) -> Result<()> {
    if x.is_positive() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {}", Exact(x.clone()))))
    }
}

/// `ε = (γ − 2)/(γ(γ + 22))`.
pub fn example5_epsilon(gamma: f64) -> Result<Rational> {
    let g = rational_from_f64(gamma)?;
    if g <= rat(2, 1) {
        return Err(Error::invalid(format!("gamma must exceed 2, got {gamma}")));
    }
    Ok(epsilon(&g))
}

fn epsilon(g: &Rational) -> Rational {
    (g - rat(2, 1)) / (g * (g + rat(22, 1)))
}

fn regime(name: &str, n_power: Rational, log_power: Rational, formula: &str) -> Regime {
    Regime { name: name.to_owned(), order: Order::new(n_power, log_power), formula: formula.to_owned() }
}

fn aux(pairs: &[(&str, &Rational)]) -> BTreeMap<String, Exact> {
    pairs.iter().map(|(k, v)| (k.to_string(), Exact((*v).clone()))).collect()
}

/// Exact order of `E Δ_n^γ` (up to the factor `E‖Z‖^γ`) for example `id`.
pub fn asymptotic_rate(
    id: u8,
    params: &ExampleParams,
    gamma: &Rational,
    psi: &Rational,
) -> Result<RateReport> {
    check_common(gamma, psi)?;
    let g = gamma;
    let one = Rational::one();
    let two = rat(2, 1);
    let zero = Rational::zero();
    let mismatch = || Error::invalid(format!("example {id} does not take parameters {params:?}"));
    match (id, params) {
        (1, ExampleParams::Exponential { alpha, beta }) => {
            positive("alpha", alpha)?;
            positive("beta", beta)?;
            let np = (&two + g) / rat(4, 1);
            let lp = psi * g / (&two * beta);
            Ok(RateReport {
                example_id: 1,
                regimes: vec![regime("main", np, lp, "n^((2+γ)/4) (log n)^(ψγ/(2β))")],
                governing: 0,
                auxiliary: BTreeMap::new(),
                window_ok: None,
                notes: vec![],
            })
        }
        (2, ExampleParams::Exponential { alpha, beta }) => {
            positive("alpha", alpha)?;
            positive("beta", beta)?;
            let lp = (&two * psi + &one) * g / (&two * beta);
            Ok(RateReport {
                example_id: 2,
                regimes: vec![regime("main", one, lp, "n (log n)^((2ψ+1)γ/(2β))")],
                governing: 0,
                auxiliary: BTreeMap::new(),
                window_ok: None,
                notes: vec!["assumes regular whitened moments K d^(γ/2)".to_owned()],
            })
        }
        (3 | 4, ExampleParams::Polynomial { b }) => {
            if *b <= one {
                return Err(Error::invalid(format!("b must exceed 1, got {}", Exact(b.clone()))));
            }
            let bm1 = b - &one;
            let (small, large, small_name, large_name) = if id == 3 {
                (
                    &bm1 / (&two * b - &one + &two * psi),
                    &two * &bm1 / (&two * b + g),
                    "r",
                    "delta",
                )
            } else {
                (&bm1 / (b + &two * psi), &two * &bm1 / (&two + g), "rho", "mu")
            };
            let gm2 = g - &two;
            let balanced = (g - &small * &gm2) / &two;
            let reduced = (g - &large * &gm2) / &two;
            let reduced_log = &large * g * (g + &one) / &two;
            let window_ok = *g < &two * (&bm1 + &two * psi);
            let (sym_s, sym_l) = if id == 3 { ("r", "δ") } else { ("ρ", "μ") };
            let regimes = vec![
                regime(
                    "balanced",
                    balanced.clone(),
                    zero,
                    &format!("n^((γ−{sym_s}(γ−2))/2)"),
                ),
                regime(
                    "condition",
                    reduced.clone(),
                    reduced_log,
                    &format!("n^((γ−{sym_l}(γ−2))/2) (log n)^({sym_l}γ(γ+1)/2)"),
                ),
            ];
            let mut notes = Vec::new();
            let governing = if window_ok {
                // inside the window the balanced exponent is the larger one
                if balanced >= reduced { 0 } else { 1 }
            } else {
                notes.push("condition regime only: γ ≥ 2(b − 1 + 2ψ)".to_owned());
                1
            };
            if id == 4 {
                notes.push("assumes regular whitened moments K d^(γ/2)".to_owned());
            }
            Ok(RateReport {
                example_id: id,
                regimes,
                governing,
                auxiliary: aux(&[(small_name, &small), (large_name, &large)]),
                window_ok: Some(window_ok),
                notes,
            })
        }
        (5, ExampleParams::Logarithmic { tau }) => {
            positive("tau", tau)?;
            let eps = epsilon(g);
            let np = g / &two;
            let lp = -(tau * g) / &two;
            Ok(RateReport {
                example_id: 5,
                regimes: vec![regime("main", np, lp, "(n/(log n)^τ)^(γ/2)")],
                governing: 0,
                auxiliary: aux(&[("epsilon", &eps)]),
                window_ok: None,
                notes: vec![],
            })
        }
        (1..=5, _) => Err(mismatch()),
        (other, _) => Err(Error::invalid(format!("example id must be 1..=5, got {other}"))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub example_id: u8,
    pub lower: Order,
    pub upper: Order,
    pub tight: bool,
    pub notes: Vec<String>,
}

/// Lower order `(n B_k²)^{γ/2}` from the lattice construction next to the
/// governing upper order.
pub fn compare_lower_upper(
    id: u8,
    params: &ExampleParams,
    gamma: &Rational,
    psi: &Rational,
) -> Result<Comparison> {
    let upper_report = asymptotic_rate(id, params, gamma, psi)?;
    let upper = upper_report.governing_order().clone();
    let two = rat(2, 1);
    let mut notes = Vec::new();
    let lower = match (id, params) {
        (1, ExampleParams::Exponential { beta, .. }) => {
            // k ≍ (log n)^{1/β} and n B_k² ≍ k^{max(0, 1−β)}
            let lp = (Rational::one() - beta) * gamma / (&two * beta);
            let lp = if lp.is_negative() { Rational::zero() } else { lp };
            notes.push("far from the upper bound".to_owned());
            Order::new(Rational::zero(), lp)
        }
        (3, ExampleParams::Polynomial { b }) => Order::new(gamma / (&two * b), Rational::zero()),
        (5, ExampleParams::Logarithmic { tau }) => {
            Order::new(gamma / &two, -(tau * gamma) / &two)
        }
        _ => {
            return Err(Error::invalid(format!(
                "lower/upper comparison is available for examples 1, 3 and 5, got {id}"
            )))
        }
    };
    let tight = lower == upper;
    if tight {
        notes.push("upper and lower orders coincide".to_owned());
    }
    Ok(Comparison { example_id: id, lower, upper, tight, notes })
}
