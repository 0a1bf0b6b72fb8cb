//! Extended-real contest scores.
//!
//! Inclusive scoring sums log probabilities, so a score is either a finite
//! real or exactly negative infinity (some trial preferred a response the
//! scored policy gave zero probability). NaN is unrepresentable: addition
//! absorbs into `NegInfinity` instead of ever forming `-inf + inf`, and the
//! ordering is total.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    NegInfinity,
    Finite(f64),
}

impl Score {
    /// Wraps a finite value. Panics on NaN or infinity: those indicate an
    /// arithmetic bug upstream, never a legal score.
    pub fn finite(value: f64) -> Score {
        assert!(value.is_finite(), "score must be finite, got {value}");
        Score::Finite(value)
    }

    /// Maps a raw f64: finite values stay finite, -inf becomes
    /// `NegInfinity`. Panics on NaN and +inf.
    pub fn from_f64(value: f64) -> Score {
        if value == f64::NEG_INFINITY {
            Score::NegInfinity
        } else {
            Score::finite(value)
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Score::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Score::Finite(v) => Some(*v),
            Score::NegInfinity => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Score::Finite(v) => *v,
            Score::NegInfinity => f64::NEG_INFINITY,
        }
    }
}

impl Add for Score {
    type Output = Score;

    fn add(self, rhs: Score) -> Score {
        match (self, rhs) {
            (Score::Finite(a), Score::Finite(b)) => Score::from_f64(a + b),
            _ => Score::NegInfinity,
        }
    }
}

impl AddAssign for Score {
    fn add_assign(&mut self, rhs: Score) {
        *self = *self + rhs;
    }
}

impl Sum for Score {
    fn sum<I: Iterator<Item = Score>>(iter: I) -> Score {
        iter.fold(Score::Finite(0.0), Add::add)
    }
}

// Reflexivity holds because Finite never carries NaN.
impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Score) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Score) -> Ordering {
        match (self, other) {
            (Score::NegInfinity, Score::NegInfinity) => Ordering::Equal,
            (Score::NegInfinity, Score::Finite(_)) => Ordering::Less,
            (Score::Finite(_), Score::NegInfinity) => Ordering::Greater,
            (Score::Finite(a), Score::Finite(b)) => {
                a.partial_cmp(b).expect("finite scores are never NaN")
            }
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Finite(v) => write!(f, "{v}"),
            Score::NegInfinity => write!(f, "-inf"),
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Finite(v) => serializer.serialize_f64(*v),
            Score::NegInfinity => serializer.serialize_str("-inf"),
        }
    }
}

/// Field-level serializers for f64 values that may be infinite, such as
/// divergences and check margins. JSON has no infinity literal and
/// `serde_json` silently turns non-finite floats into `null` before any
/// formatter sees them, so infinities are written as the strings `"inf"` and
/// `"-inf"` instead. NaN is rejected with an error: it always indicates an
/// arithmetic bug.
pub mod json_num {
    use serde::ser::Error as _;
    use serde::{Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_nan() {
            return Err(S::Error::custom("NaN has no report representation"));
        }
        if *value == f64::INFINITY {
            serializer.serialize_str("inf")
        } else if *value == f64::NEG_INFINITY {
            serializer.serialize_str("-inf")
        } else {
            serializer.serialize_f64(*value)
        }
    }

    struct Wrap(f64);

    impl Serialize for Wrap {
        fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
            serialize(&self.0, serializer)
        }
    }

    pub mod map {
        use super::*;

        pub fn serialize<S: Serializer>(
            values: &BTreeMap<String, f64>,
            serializer: S,
        ) -> Result<S::Ok, S::Error> {
            serializer.collect_map(values.iter().map(|(k, v)| (k, Wrap(*v))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn addition_absorbs_neg_infinity() {
        let s = Score::finite(1.5) + Score::NegInfinity;
        assert_eq!(s, Score::NegInfinity);
        assert_eq!(Score::NegInfinity + Score::NegInfinity, Score::NegInfinity);
        assert_eq!(
            Score::finite(1.0) + Score::finite(2.0),
            Score::Finite(3.0)
        );
    }

    #[test]
    fn sum_identity_is_zero() {
        let empty: Vec<Score> = vec![];
        assert_eq!(empty.into_iter().sum::<Score>(), Score::Finite(0.0));
        let vals = vec![Score::finite(1.0), Score::NegInfinity, Score::finite(4.0)];
        assert_eq!(vals.into_iter().sum::<Score>(), Score::NegInfinity);
    }

    #[test]
    fn total_order() {
        let mut v = vec![
            Score::finite(2.0),
            Score::NegInfinity,
            Score::finite(-3.5),
            Score::finite(0.0),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                Score::NegInfinity,
                Score::finite(-3.5),
                Score::finite(0.0),
                Score::finite(2.0),
            ]
        );
        assert!(Score::NegInfinity < Score::finite(f64::MIN));
    }

    #[test]
    #[should_panic(expected = "score must be finite")]
    fn nan_rejected() {
        let _ = Score::finite(f64::NAN);
    }

    #[test]
    fn display_and_serde() {
        assert_eq!(Score::NegInfinity.to_string(), "-inf");
        assert_eq!(Score::finite(2.5).to_string(), "2.5");
        assert_eq!(serde_json::to_string(&Score::NegInfinity).unwrap(), "\"-inf\"");
        assert_eq!(serde_json::to_string(&Score::finite(2.5)).unwrap(), "2.5");
    }

    #[test]
    fn json_num_handles_infinities_and_rejects_nan() {
        #[derive(Serialize)]
        struct S {
            #[serde(serialize_with = "crate::score::json_num::serialize")]
            v: f64,
        }
        let render = |v: f64| serde_json::to_string(&S { v });
        assert_eq!(render(2.5).unwrap(), "{\"v\":2.5}");
        assert_eq!(render(f64::INFINITY).unwrap(), "{\"v\":\"inf\"}");
        assert_eq!(render(f64::NEG_INFINITY).unwrap(), "{\"v\":\"-inf\"}");
        assert!(render(f64::NAN).is_err());

        #[derive(Serialize)]
        struct M {
            #[serde(serialize_with = "crate::score::json_num::map::serialize")]
            m: std::collections::BTreeMap<String, f64>,
        }
        let m: std::collections::BTreeMap<String, f64> =
            [("a".to_string(), f64::INFINITY), ("b".to_string(), 1.0)]
                .into_iter()
                .collect();
        assert_eq!(
            serde_json::to_string(&M { m }).unwrap(),
            "{\"m\":{\"a\":\"inf\",\"b\":1.0}}"
        );
    }
}
