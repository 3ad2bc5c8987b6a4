//! Confusion counts and precision / recall / F1.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted_face: bool, is_face: bool) {
        match (predicted_face, is_face) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Confusion::default();
        for (p, t) in pairs {
            c.add(p, t);
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// TP / (TP + FP), undefined without positive predictions.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// TP / (TP + FN), undefined without positive examples.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// 2PR / (P + R) when both are defined and P + R > 0.
    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        if p + r > 0.0 {
            Some(2.0 * p * r / (p + r))
        } else {
            None
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Undefined values serialize as null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub size: usize,
    pub qp: u8,
    pub threshold: f64,
    #[serde(flatten)]
    pub counts: Confusion,
    #[serde(flatten)]
    pub metrics: Metrics,
}

impl EvalReport {
    pub fn new(size: usize, qp: u8, threshold: f64, counts: Confusion) -> Self {
        EvalReport {
            size,
            qp,
            threshold,
            counts,
            metrics: counts.metrics(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(tp: u64, fp: u64, tn: u64, fn_: u64) -> Confusion {
        Confusion { tp, fp, tn, fn_ }
    }

    #[test]
    fn perfect() {
        let m = c(1, 0, 9, 0).metrics();
        assert_eq!(
            (m.precision, m.recall, m.f1),
            (Some(1.0), Some(1.0), Some(1.0))
        );
    }

    #[test]
    fn worked_example() {
        let m = c(95, 3, 0, 5).metrics();
        assert!((m.precision.unwrap() - 0.9694).abs() < 5e-5);
        assert_eq!(m.recall, Some(0.95));
        assert!((m.f1.unwrap() - 0.9596).abs() < 5e-5);
    }

    #[test]
    fn degenerate() {
        let m = c(0, 0, 5, 3).metrics();
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.recall, Some(0.0));
        let m = c(0, 2, 5, 3).metrics();
        assert_eq!((m.precision, m.recall, m.f1), (Some(0.0), Some(0.0), None));
    }

    #[test]
    fn report_json_shape() {
        let r = EvalReport::new(64, 32, 0.5, c(0, 0, 4, 1));
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["fn"], 1);
        assert!(v["precision"].is_null());
        assert_eq!(v["recall"], 0.0);
    }

    #[test]
    fn order_independent() {
        let pairs = vec![
            (true, true),
            (false, true),
            (true, false),
            (false, false),
            (true, true),
        ];
        let mut rev = pairs.clone();
        rev.reverse();
        assert_eq!(Confusion::from_pairs(pairs), Confusion::from_pairs(rev));
    }
}
