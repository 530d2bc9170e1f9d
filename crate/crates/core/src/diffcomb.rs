//! Differential fusion of two embeddings of the same subject.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest_io::Embedding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinationMode {
    /// `|a - b|`
    Abs,
    /// `a - b`
    Sub,
    /// `(a - b)^2`
    #[default]
    Sub2,
    /// `(a - b)^3`
    Sub3,
}

impl CombinationMode {
    pub const ALL: [CombinationMode; 4] =
        [CombinationMode::Abs, CombinationMode::Sub, CombinationMode::Sub2, CombinationMode::Sub3];

    pub fn name(self) -> &'static str {
        match self {
            CombinationMode::Abs => "abs",
            CombinationMode::Sub => "sub",
            CombinationMode::Sub2 => "sub2",
            CombinationMode::Sub3 => "sub3",
        }
    }

    /// Label used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            CombinationMode::Abs => "ABS",
            CombinationMode::Sub => "SUB",
            CombinationMode::Sub2 => "(SUB)^2",
            CombinationMode::Sub3 => "(SUB)^3",
        }
    }

    #[inline]
    pub fn apply(self, d: f64) -> f64 {
        match self {
            CombinationMode::Abs => d.abs(),
            CombinationMode::Sub => d,
            CombinationMode::Sub2 => d * d,
            CombinationMode::Sub3 => d * d * d,
        }
    }
}

impl fmt::Display for CombinationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CombinationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CombinationMode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown combination `{s}` (expected abs, sub, sub2 or sub3)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairProvenance {
    pub video_id: String,
    pub frame_i: u32,
    pub frame_j: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedFeature {
    pub values: Vec<f64>,
    pub mode: CombinationMode,
    pub pair: Option<PairProvenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot combine embeddings of length {left} and {right}")]
pub struct LengthMismatch {
    pub left: usize,
    pub right: usize,
}

/// Elementwise combination of `a - b`, computed in `f64`.
pub fn combine_values(a: &[f32], b: &[f32], mode: CombinationMode) -> Result<Vec<f64>, LengthMismatch> {
    if a.len() != b.len() {
        return Err(LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| mode.apply(f64::from(x) - f64::from(y))).collect())
}

pub fn combine(a: &Embedding, b: &Embedding, mode: CombinationMode) -> Result<CombinedFeature, LengthMismatch> {
    Ok(CombinedFeature { values: combine_values(a.as_slice(), b.as_slice(), mode)?, mode, pair: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn worked_example() {
        let (a, b) = (emb(&[1.0, 2.0]), emb(&[0.0, 4.0]));
        let get = |m| combine(&a, &b, m).unwrap().values;
        assert_eq!(get(CombinationMode::Abs), vec![1.0, 2.0]);
        assert_eq!(get(CombinationMode::Sub), vec![1.0, -2.0]);
        assert_eq!(get(CombinationMode::Sub2), vec![1.0, 4.0]);
        assert_eq!(get(CombinationMode::Sub3), vec![1.0, -8.0]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert_eq!(
            combine(&emb(&[1.0]), &emb(&[1.0, 2.0]), CombinationMode::Sub),
            Err(LengthMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn names_round_trip_and_default_is_sub2() {
        for m in CombinationMode::ALL {
            assert_eq!(m.to_string().parse::<CombinationMode>().unwrap(), m);
        }
        assert_eq!("SUB2".parse::<CombinationMode>().unwrap(), CombinationMode::Sub2);
        assert!("mul".parse::<CombinationMode>().is_err());
        assert_eq!(CombinationMode::default(), CombinationMode::Sub2);
    }

    fn pair() -> impl Strategy<Value = (Vec<f32>, Vec<f32>)> {
        (1usize..32).prop_flat_map(|n| {
            (proptest::collection::vec(-1e3f32..1e3, n), proptest::collection::vec(-1e3f32..1e3, n))
        })
    }

    proptest! {
        #[test]
        fn equal_inputs_give_zero(a in proptest::collection::vec(-1e6f32..1e6, 1..64)) {
            for m in CombinationMode::ALL {
                prop_assert!(combine_values(&a, &a, m).unwrap().iter().all(|&v| v == 0.0));
            }
        }

        #[test]
        fn symmetry_classes((a, b) in pair()) {
            let ab = |m| combine_values(&a, &b, m).unwrap();
            let ba = |m| combine_values(&b, &a, m).unwrap();
            let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();
            prop_assert_eq!(ab(CombinationMode::Sub), neg(ba(CombinationMode::Sub)));
            prop_assert_eq!(ab(CombinationMode::Sub3), neg(ba(CombinationMode::Sub3)));
            prop_assert_eq!(ab(CombinationMode::Abs), ba(CombinationMode::Abs));
            prop_assert_eq!(ab(CombinationMode::Sub2), ba(CombinationMode::Sub2));
            prop_assert!(ab(CombinationMode::Abs).iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn powers_compose((a, b) in pair()) {
            let sub = combine_values(&a, &b, CombinationMode::Sub).unwrap();
            let sub2 = combine_values(&a, &b, CombinationMode::Sub2).unwrap();
            let sub3 = combine_values(&a, &b, CombinationMode::Sub3).unwrap();
            for i in 0..sub.len() {
                prop_assert_eq!(sub2[i], sub[i] * sub[i]);
                prop_assert_eq!(sub3[i], sub2[i] * sub[i]);
            }
        }
    }
}
