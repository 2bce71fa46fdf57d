//! Confusion-matrix metrics with dynamic (label 1) as the positive class.

use crate::{Error, Result};

pub const STATIC: u8 = 0;
pub const DYNAMIC: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, truth: u8, predicted: u8) {
        match (truth == DYNAMIC, predicted == DYNAMIC) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    /// Counts with the positive class swapped.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

/// A metric value; undefined metrics (zero denominator) report 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub value: f64,
    pub defined: bool,
}

impl Metric {
    fn ratio(num: f64, den: f64) -> Self {
        if den > 0.0 {
            Metric {
                value: num / den,
                defined: true,
            }
        } else {
            Metric {
                value: 0.0,
                defined: false,
            }
        }
    }
}

pub fn confusion(truth: &[u8], predicted: &[u8]) -> Result<ConfusionCounts> {
    if truth.len() != predicted.len() {
        return Err(Error::Domain(format!(
            "label length mismatch: {} truths vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        c.add(t, p);
    }
    Ok(c)
}

pub fn accuracy(c: &ConfusionCounts) -> Metric {
    Metric::ratio((c.tp + c.tn) as f64, c.total() as f64)
}

pub fn precision(c: &ConfusionCounts) -> Metric {
    Metric::ratio(c.tp as f64, (c.tp + c.fp) as f64)
}

pub fn recall(c: &ConfusionCounts) -> Metric {
    Metric::ratio(c.tp as f64, (c.tp + c.fn_) as f64)
}

pub fn f1(c: &ConfusionCounts) -> Metric {
    let p = precision(c);
    let r = recall(c);
    if !(p.defined && r.defined) {
        return Metric {
            value: 0.0,
            defined: false,
        };
    }
    Metric::ratio(2.0 * p.value * r.value, p.value + r.value)
}

/// The four metrics of one evaluated method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        Self {
            counts,
            accuracy: accuracy(&counts).value,
            precision: precision(&counts).value,
            recall: recall(&counts).value,
            f1: f1(&counts).value,
        }
    }

    pub fn evaluate(truth: &[u8], predicted: &[u8]) -> Result<Self> {
        Ok(Self::from_counts(confusion(truth, predicted)?))
    }
}
