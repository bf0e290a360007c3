use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use std::fmt;

/// Reports flag magnitudes above this power of ten.
pub const OVERFLOW_LOG10: f64 = 300.0;

/// A nonnegative quantity stored by its natural logarithm, so that products
/// such as `d^{ψγ} · n · E‖Z‖^γ` stay representable far beyond `f64::MAX`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Magnitude {
    ln: f64,
}

impl Magnitude {
    pub const ZERO: Magnitude = Magnitude { ln: f64::NEG_INFINITY };
    pub const ONE: Magnitude = Magnitude { ln: 0.0 };

    pub fn from_value(v: f64) -> Self {
        debug_assert!(v >= 0.0, "magnitudes are nonnegative, got {v}");
        Magnitude { ln: v.ln() }
    }

    pub fn from_ln(ln: f64) -> Self {
        Magnitude { ln }
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    pub fn log10(&self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }

    /// Linear value; `+∞` when it does not fit in an `f64`.
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    pub fn overflows(&self) -> bool {
        self.log10() > OVERFLOW_LOG10
    }

    pub fn mul(self, other: Magnitude) -> Magnitude {
        if self.is_zero() || other.is_zero() {
            return Magnitude::ZERO;
        }
        Magnitude { ln: self.ln + other.ln }
    }

    pub fn powf(self, p: f64) -> Magnitude {
        if self.is_zero() {
            return if p == 0.0 { Magnitude::ONE } else { Magnitude::ZERO };
        }
        Magnitude { ln: self.ln * p }
    }

    pub fn add(self, other: Magnitude) -> Magnitude {
        let (hi, lo) = if self.ln >= other.ln { (self, other) } else { (other, self) };
        if lo.is_zero() {
            return hi;
        }
        Magnitude { ln: hi.ln + (lo.ln - hi.ln).exp().ln_1p() }
    }

    pub fn sum<I: IntoIterator<Item = Magnitude>>(items: I) -> Magnitude {
        items.into_iter().fold(Magnitude::ZERO, Magnitude::add)
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.overflows() {
            write!(f, "10^{:.3}", self.log10())
        } else {
            write!(f, "{}", self.value())
        }
    }
}

/// Serialized as `{"value": <linear or null>, "log10": <log10 or null>}`;
/// `value` is null past `f64::MAX`, `log10` is null for zero.
impl Serialize for Magnitude {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Magnitude", 2)?;
        let v = self.value();
        st.serialize_field("value", &v.is_finite().then_some(v))?;
        st.serialize_field("log10", &(!self.is_zero()).then(|| self.log10()))?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = Magnitude::from_value(3.0);
        let b = Magnitude::from_value(5.0);
        assert!((a.add(b).value() - 8.0).abs() < 1e-14);
        assert!((a.mul(b).value() - 15.0).abs() < 1e-13);
        assert!((a.powf(2.0).value() - 9.0).abs() < 1e-13);
        assert_eq!(Magnitude::ZERO.add(a), a);
        assert!(Magnitude::ZERO.mul(a).is_zero());
        assert_eq!(Magnitude::ZERO.powf(0.0), Magnitude::ONE);
    }

    #[test]
    fn huge_values_keep_their_log() {
        let big = Magnitude::from_value(10.0).powf(400.0);
        assert!(big.overflows());
        assert!(big.value().is_infinite());
        assert!((big.log10() - 400.0).abs() < 1e-9);
        let json = serde_json::to_value(big).unwrap();
        assert!(json["value"].is_null());
        assert!((json["log10"].as_f64().unwrap() - 400.0).abs() < 1e-9);
        let zero = serde_json::to_value(Magnitude::ZERO).unwrap();
        assert_eq!(zero["value"].as_f64(), Some(0.0));
        assert!(zero["log10"].is_null());
    }
}
