//! Threshold classifiers used as comparison baselines.
//!
//! A point is dynamic when any enabled feature exceeds its threshold. The
//! epipolar term is compared by magnitude. Thresholds are fitted by an
//! exhaustive sweep that maximises training F1.

use crate::features::{FeatureVector, LabeledFeature};
use crate::metrics::{DYNAMIC, STATIC};
use crate::{Error, Result};

/// Upper bound on coordinate-ascent passes for multi-feature rules.
const MAX_COORDINATE_PASSES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Intensity,
    Epipolar,
    Reprojection,
}

impl FeatureKind {
    pub fn value(&self, v: &FeatureVector) -> f64 {
        match self {
            FeatureKind::Intensity => v.e_i,
            FeatureKind::Epipolar => v.e_d.abs(),
            FeatureKind::Reprojection => v.e_re,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureKind::Intensity => "e_I",
            FeatureKind::Epipolar => "e_D",
            FeatureKind::Reprojection => "e_Re",
        }
    }
}

/// Which features a threshold rule uses, before fitting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdSpec {
    pub name: String,
    pub features: Vec<FeatureKind>,
}

impl ThresholdSpec {
    pub fn new(name: impl Into<String>, features: Vec<FeatureKind>) -> Result<Self> {
        let mut seen = Vec::new();
        for f in &features {
            if seen.contains(f) {
                return Err(Error::Config(format!("feature {} listed twice", f.name())));
            }
            seen.push(*f);
        }
        if features.is_empty() {
            return Err(Error::Config("a threshold rule needs at least one feature".into()));
        }
        Ok(Self {
            name: name.into(),
            features,
        })
    }

    /// Reprojection error only.
    pub fn reprojection_only() -> Self {
        Self {
            name: "reprojection-only (PointSLOT-like)".into(),
            features: vec![FeatureKind::Reprojection],
        }
    }

    /// Reprojection plus epipolar error.
    pub fn reprojection_epipolar() -> Self {
        Self {
            name: "reprojection+epipolar (CFP-SLAM-like)".into(),
            features: vec![FeatureKind::Reprojection, FeatureKind::Epipolar],
        }
    }

    pub fn epipolar_only() -> Self {
        Self {
            name: "epipolar-only".into(),
            features: vec![FeatureKind::Epipolar],
        }
    }

    pub fn intensity_only() -> Self {
        Self {
            name: "intensity-only".into(),
            features: vec![FeatureKind::Intensity],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    pub feature: FeatureKind,
    pub threshold: f64,
    /// The feature took a single value on the training data.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdClassifier {
    pub name: String,
    pub rules: Vec<ThresholdRule>,
    /// Training F1 reached by the fitted rules.
    pub train_f1: f64,
}

impl ThresholdClassifier {
    pub fn new(name: impl Into<String>, rules: Vec<ThresholdRule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Config("a threshold rule needs at least one feature".into()));
        }
        if let Some(r) = rules.iter().find(|r| !(r.threshold >= 0.0)) {
            return Err(Error::Config(format!(
                "threshold for {} must be >= 0, got {}",
                r.feature.name(),
                r.threshold
            )));
        }
        Ok(Self {
            name: name.into(),
            rules,
            train_f1: f64::NAN,
        })
    }

    pub fn classify(&self, v: &FeatureVector) -> u8 {
        if self
            .rules
            .iter()
            .any(|r| r.feature.value(v) > r.threshold)
        {
            DYNAMIC
        } else {
            STATIC
        }
    }

    pub fn classify_batch(&self, vs: &[FeatureVector]) -> Vec<u8> {
        vs.iter().map(|v| self.classify(v)).collect()
    }
}

fn f1_from(tp: usize, fp: usize, positives: usize) -> f64 {
    let fn_ = positives - tp;
    let den = 2 * tp + fp + fn_;
    if tp == 0 || den == 0 {
        0.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

/// Candidate thresholds for one feature: the smallest value, every midpoint
/// between consecutive distinct values, and the largest value (which flags
/// nothing). A constant feature yields one candidate.
pub fn candidate_thresholds(values: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut out = Vec::with_capacity(sorted.len() * 2);
    if let Some(&first) = sorted.first() {
        out.push(first);
    }
    for w in sorted.windows(2) {
        out.push(0.5 * (w[0] + w[1]));
    }
    if sorted.len() > 1 {
        out.push(sorted[sorted.len() - 1]);
    }
    out
}

/// Best threshold for `values` when the points in `already_dynamic` are
/// flagged regardless. Returns `(threshold, f1)`; ties keep the lowest
/// threshold.
fn sweep(values: &[f64], labels: &[u8], order: &[usize], already_dynamic: &[bool]) -> (f64, f64) {
    let positives = labels.iter().filter(|&&l| l == DYNAMIC).count();
    let (mut base_tp, mut base_fp) = (0, 0);
    let (mut free_pos, mut free_neg) = (0, 0);
    for i in 0..values.len() {
        let pos = labels[i] == DYNAMIC;
        match (already_dynamic[i], pos) {
            (true, true) => base_tp += 1,
            (true, false) => base_fp += 1,
            (false, true) => free_pos += 1,
            (false, false) => free_neg += 1,
        }
    }

    let candidates = candidate_thresholds(values);
    // Walk candidates ascending; `cursor` skips free points with value <= c.
    let (mut above_pos, mut above_neg) = (free_pos, free_neg);
    let mut cursor = 0;
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for &c in &candidates {
        while cursor < order.len() && values[order[cursor]] <= c {
            let i = order[cursor];
            if !already_dynamic[i] {
                if labels[i] == DYNAMIC {
                    above_pos -= 1;
                } else {
                    above_neg -= 1;
                }
            }
            cursor += 1;
        }
        let f = f1_from(base_tp + above_pos, base_fp + above_neg, positives);
        if f > best.1 {
            best = (c, f);
        }
    }
    best
}

/// Fits one threshold per enabled feature by maximising training F1.
///
/// A single feature is swept exhaustively. With several features the rule is
/// refined by coordinate ascent: each threshold is re-swept with the others
/// held fixed until no sweep improves the training F1. The search starts
/// from the best single-feature rule with the remaining features disabled
/// (threshold at their maximum), so the fitted F1 is never below that of
/// any of its single-feature sub-rules.
pub fn fit_thresholds(train: &[LabeledFeature], spec: &ThresholdSpec) -> Result<ThresholdClassifier> {
    let positives = train.iter().filter(|s| s.label == DYNAMIC).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::InsufficientData(
            "threshold fitting needs both static and dynamic samples".into(),
        ));
    }
    let labels: Vec<u8> = train.iter().map(|s| s.label).collect();
    let columns: Vec<Vec<f64>> = spec
        .features
        .iter()
        .map(|f| train.iter().map(|s| f.value(&s.vector)).collect())
        .collect();
    let orders: Vec<Vec<usize>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..col.len()).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            idx
        })
        .collect();
    let maxima: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let degenerate: Vec<bool> = columns
        .iter()
        .map(|c| candidate_thresholds(c).len() == 1)
        .collect();

    let none_flagged = vec![false; train.len()];
    let singles: Vec<(f64, f64)> = (0..columns.len())
        .map(|j| sweep(&columns[j], &labels, &orders[j], &none_flagged))
        .collect();

    let mut thresholds = maxima.clone();
    let start = (0..singles.len())
        .max_by(|&a, &b| singles[a].1.total_cmp(&singles[b].1).then(b.cmp(&a)))
        .unwrap_or(0);
    thresholds[start] = singles[start].0;
    let mut best_f1 = singles[start].1;

    if columns.len() > 1 {
        for _ in 0..MAX_COORDINATE_PASSES {
            let mut improved = false;
            for j in 0..columns.len() {
                let flagged: Vec<bool> = (0..train.len())
                    .map(|i| (0..columns.len()).any(|m| m != j && columns[m][i] > thresholds[m]))
                    .collect();
                let (t, f) = sweep(&columns[j], &labels, &orders[j], &flagged);
                if f > best_f1 {
                    best_f1 = f;
                    thresholds[j] = t;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
    }

    let rules = spec
        .features
        .iter()
        .enumerate()
        .map(|(j, &feature)| ThresholdRule {
            feature,
            threshold: thresholds[j].max(0.0),
            degenerate: degenerate[j],
        })
        .collect();
    let mut out = ThresholdClassifier::new(spec.name.clone(), rules)?;
    out.train_f1 = best_f1;
    Ok(out)
}
