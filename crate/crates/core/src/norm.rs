//! Finite-dimensional target spaces `ℓ_q^d` and the type exponent `p`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};

/// The `ℓ_q` norm on `R^d`, `q` in `[1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    q: f64,
}

impl NormSpec {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_nan() || q < 1.0 {
            return Err(LabError::InvalidNormExponent(q));
        }
        Ok(Self { q })
    }

    pub fn l1() -> Self {
        Self { q: 1.0 }
    }

    pub fn l2() -> Self {
        Self { q: 2.0 }
    }

    pub fn linf() -> Self {
        Self { q: f64::INFINITY }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        if self.q == 2.0 {
            v.iter().map(|x| x * x).sum::<f64>().sqrt()
        } else if self.q == 1.0 {
            v.iter().map(|x| x.abs()).sum()
        } else if self.q.is_infinite() {
            v.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
        } else {
            v.iter().map(|x| x.abs().powf(self.q)).sum::<f64>().powf(1.0 / self.q)
        }
    }

    /// `‖v‖^p`, avoiding the square root in the Hilbert case.
    #[inline]
    pub fn norm_pow(&self, v: &[f64], p: Exponent) -> f64 {
        let p = p.value();
        if self.q == 2.0 && p == 2.0 {
            return v.iter().map(|x| x * x).sum();
        }
        let r = self.norm(v);
        if p == 1.0 {
            r
        } else if p == 2.0 {
            r * r
        } else {
            r.powf(p)
        }
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.q)
        }
    }
}

impl std::str::FromStr for NormSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Self::linf()),
            other => other
                .parse::<f64>()
                .map_err(|_| LabError::InvalidNormExponent(f64::NAN))
                .and_then(Self::new),
        }
    }
}

// JSON has no infinity, so q serializes as a number or the string "inf".
impl Serialize for NormSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.q.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.q)
        }
    }
}

impl<'de> Deserialize<'de> for NormSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(q) => NormSpec::new(q).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Type exponent `p` in `[1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&p) {
            return Err(LabError::InvalidExponent(p));
        }
        Ok(Self(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Exponent::new(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norms() -> Vec<NormSpec> {
        vec![NormSpec::l1(), NormSpec::new(1.5).unwrap(), NormSpec::l2(), NormSpec::new(3.0).unwrap(), NormSpec::linf()]
    }

    #[test]
    fn known_values() {
        let v = [3.0, -4.0];
        assert_eq!(NormSpec::l1().norm(&v), 7.0);
        assert_eq!(NormSpec::l2().norm(&v), 5.0);
        assert_eq!(NormSpec::linf().norm(&v), 4.0);
        assert_eq!(NormSpec::l2().norm_pow(&v, Exponent::new(2.0).unwrap()), 25.0);
    }

    #[test]
    fn validation() {
        assert!(NormSpec::new(0.5).is_err());
        assert!(Exponent::new(2.5).is_err());
        assert!(Exponent::new(0.9).is_err());
        assert_eq!("inf".parse::<NormSpec>().unwrap(), NormSpec::linf());
    }

    #[test]
    fn serde_infinity() {
        let s = serde_json::to_string(&NormSpec::linf()).unwrap();
        assert_eq!(s, "\"inf\"");
        let back: NormSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, NormSpec::linf());
        let two: NormSpec = serde_json::from_str("2").unwrap();
        assert_eq!(two, NormSpec::l2());
    }

    proptest! {
        #[test]
        fn norm_axioms(
            a in prop::collection::vec(-10.0f64..10.0, 3),
            b in prop::collection::vec(-10.0f64..10.0, 3),
            c in -5.0f64..5.0,
        ) {
            for n in norms() {
                let na = n.norm(&a);
                prop_assert!(na >= 0.0);
                prop_assert_eq!(na == 0.0, a.iter().all(|&x| x == 0.0));
                let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                prop_assert!(n.norm(&sum) <= na + n.norm(&b) + 1e-9);
                let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
                prop_assert!((n.norm(&scaled) - c.abs() * na).abs() <= 1e-9 * (1.0 + na));
            }
        }
    }
}
