use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion counts with "member" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `fp / (fp + tn)`, or `None` without negatives.
    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    /// `fn / (fn + tp)`, or `None` without positives.
    pub fn fnr(&self) -> Option<f64> {
        ratio(self.fn_, self.fn_ + self.tp)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Accuracy plus the two error rates. A rate whose denominator is empty is
/// `None` and prints as `undefined`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub counts: ConfusionCounts,
    pub acc: f64,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

/// Text form of a rate: full precision, or `undefined`.
pub struct Rate(pub Option<f64>);

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("undefined"),
        }
    }
}

/// Confusion counts and rates of thresholded scores. A pair is called a
/// member when its score is strictly above `threshold`.
pub fn compute_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Metrics> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Validation(format!(
            "need equal, non-zero numbers of scores and labels (got {} and {})",
            scores.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (i, (&s, &y)) in scores.iter().zip(labels).enumerate() {
        if s.is_nan() {
            return Err(Error::NonFinite(format!("score {i} is NaN")));
        }
        match (s > threshold, y) {
            (true, 1) => c.tp += 1,
            (true, 0) => c.fp += 1,
            (false, 0) => c.tn += 1,
            (false, 1) => c.fn_ += 1,
            (_, other) => {
                return Err(Error::Validation(format!("label {i} is {other}, expected 0 or 1")))
            }
        }
    }
    Ok(Metrics {
        counts: c,
        acc: c.accuracy(),
        fpr: c.fpr(),
        fnr: c.fnr(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_inverted() {
        let m = compute_metrics(&[0.9, 0.1, 0.8], &[1, 0, 1], 0.5).unwrap();
        assert_eq!((m.acc, m.fpr, m.fnr), (1.0, Some(0.0), Some(0.0)));
        let m = compute_metrics(&[0.4, 0.6], &[1, 0], 0.5).unwrap();
        assert_eq!((m.acc, m.fpr, m.fnr), (0.0, Some(1.0), Some(1.0)));
    }

    #[test]
    fn missing_class_leaves_rate_undefined() {
        let m = compute_metrics(&[0.9, 0.2], &[1, 1], 0.5).unwrap();
        assert_eq!(m.fpr, None);
        assert_eq!(m.fnr, Some(0.5));
        assert_eq!(Rate(m.fpr).to_string(), "undefined");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(compute_metrics(&[], &[], 0.5).is_err());
        assert!(compute_metrics(&[0.5], &[1, 0], 0.5).is_err());
        assert!(compute_metrics(&[0.5], &[2], 0.5).is_err());
        assert!(matches!(compute_metrics(&[f64::NAN], &[1], 0.5), Err(Error::NonFinite(_))));
    }

    #[test]
    fn agrees_with_enumeration_oracle() {
        // Every labelling of up to 12 fixed scores.
        for n in 1..=12usize {
            let scores: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 13) as f64 / 12.0).collect();
            for mask in 0u32..(1 << n) {
                let labels: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                let m = compute_metrics(&scores, &labels, 0.5).unwrap();
                let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
                for i in 0..n {
                    let pred = scores[i] > 0.5;
                    let pos = labels[i] == 1;
                    if pred && pos {
                        tp += 1;
                    } else if pred {
                        fp += 1;
                    } else if pos {
                        fneg += 1;
                    } else {
                        tn += 1;
                    }
                }
                assert_eq!(m.counts, ConfusionCounts { tp, fp, tn, fn_: fneg });
                assert_eq!(m.acc * n as f64, (tp + tn) as f64);
                assert_eq!(m.fpr, (fp + tn > 0).then(|| fp as f64 / (fp + tn) as f64));
                assert_eq!(m.fnr, (fneg + tp > 0).then(|| fneg as f64 / (fneg + tp) as f64));
            }
        }
    }

    proptest! {
        #[test]
        fn balanced_identity(half in 1usize..200, seed in any::<u64>()) {
            let mut rng = crate::numerics::RngState::new(seed);
            let labels: Vec<u8> = (0..2 * half).map(|i| (i % 2) as u8).collect();
            let scores: Vec<f64> = labels.iter().map(|_| rng.uniform(0.0, 1.0)).collect();
            let m = compute_metrics(&scores, &labels, 0.5).unwrap();
            let c = m.counts;
            // Integer form: 2h(tp + tn) = 2h * 2h - h(fp + fn) * 2 for h per class.
            prop_assert_eq!(c.fp + c.tn, half);
            prop_assert_eq!((c.tp + c.tn) * half * 2, 2 * half * 2 * half - (c.fp + c.fn_) * 2 * half);
            let rhs = 1.0 - (m.fpr.unwrap() + m.fnr.unwrap()) / 2.0;
            prop_assert!((m.acc - rhs).abs() < 1e-15);
        }
    }
}
