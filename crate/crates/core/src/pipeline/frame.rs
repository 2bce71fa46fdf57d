//! Per-frame coarse, classify, fine pose estimation.

use std::collections::BTreeMap;

use super::solver::{estimate_pose, Correspondence, RobustSolverConfig, SolveReport, MIN_CORRESPONDENCES};
use crate::baselines::ThresholdClassifier;
use crate::dataset::{FeatureRecord, FrameBox};
use crate::depth_filter::{depth_filter, BoundingBox, DepthFilterParams, ObjectClass};
use crate::features::{build_feature_from_parts, FeatureVector};
use crate::geometry::{backproject, essential_from_relative, CameraIntrinsics, Pose};
use crate::metrics::{DYNAMIC, STATIC};
use crate::mlp::MlpModel;
use crate::{Error, Result};

/// Labels in-box points as static or dynamic.
pub trait PointClassifier {
    fn classify(&self, features: &FeatureVector, record: &FeatureRecord) -> u8;
}

impl PointClassifier for MlpModel {
    fn classify(&self, features: &FeatureVector, _: &FeatureRecord) -> u8 {
        self.predict(features).label
    }
}

impl PointClassifier for ThresholdClassifier {
    fn classify(&self, features: &FeatureVector, _: &FeatureRecord) -> u8 {
        ThresholdClassifier::classify(self, features)
    }
}

/// Answers with the record's ground-truth class.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelOracle;

impl PointClassifier for LabelOracle {
    fn classify(&self, _: &FeatureVector, record: &FeatureRecord) -> u8 {
        record.class
    }
}

/// Records of one frame pair plus the detections of its first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    pub records: Vec<FeatureRecord>,
    pub boxes: Vec<BoundingBox>,
}

impl FrameInput {
    /// `(id1, id2)` of the records, if any.
    pub fn frame_ids(&self) -> Option<(i64, i64)> {
        self.records.first().map(|r| (r.id1, r.id2))
    }

    fn correspondence(&self, i: usize, k: &CameraIntrinsics) -> Result<Correspondence> {
        let r = &self.records[i];
        Ok(Correspondence {
            point: backproject(r.pixel1(), r.z1, k)?,
            pixel: r.pixel2(),
        })
    }

    fn correspondences(&self, ids: &[usize], k: &CameraIntrinsics) -> Result<Vec<Correspondence>> {
        ids.iter().map(|&i| self.correspondence(i, k)).collect()
    }
}

/// Groups records by frame pair (ordered by `id2`) and attaches the boxes
/// whose frame id equals the pair's `id1`.
pub fn frames_from_records(records: &[FeatureRecord], boxes: &[FrameBox]) -> Vec<FrameInput> {
    let mut groups: BTreeMap<(i64, i64), Vec<FeatureRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.id2, r.id1)).or_default().push(*r);
    }
    groups
        .into_iter()
        .map(|((_, id1), records)| FrameInput {
            records,
            boxes: boxes.iter().filter(|b| b.frame_id == id1).map(|b| b.bbox).collect(),
        })
        .collect()
}

/// How a point was treated by [`run_frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointRole {
    OutsideBox,
    /// Inside a box but rejected by the depth filter.
    Background,
    ClassifiedStatic,
    ClassifiedDynamic,
}

impl PointRole {
    pub fn is_static(&self) -> bool {
        !matches!(self, PointRole::ClassifiedDynamic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameDiagnostics {
    pub points: usize,
    pub outside_box: usize,
    pub background: usize,
    pub classified_static: usize,
    pub classified_dynamic: usize,
    pub coarse_points: usize,
    pub fine_points: usize,
    pub coarse_iterations: usize,
    pub fine_iterations: usize,
    /// Too few coarse points: the initialization stood in for the coarse
    /// pose.
    pub coarse_fallback: bool,
    /// Too few fine points: the coarse pose was returned.
    pub fine_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    /// Estimated pose of camera `t` relative to camera `t - 1`.
    pub pose: Pose,
    pub coarse: Pose,
    pub roles: Vec<PointRole>,
    pub diagnostics: FrameDiagnostics,
}

fn solve(
    frame: &FrameInput,
    ids: &[usize],
    k: &CameraIntrinsics,
    init: &Pose,
    cfg: &RobustSolverConfig,
) -> Result<Option<SolveReport>> {
    if ids.len() < MIN_CORRESPONDENCES {
        return Ok(None);
    }
    match estimate_pose(&frame.correspondences(ids, k)?, k, init, cfg) {
        Ok(r) => Ok(Some(r)),
        Err(Error::InsufficientData(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Coarse pose from points outside every potentially-dynamic box plus
/// depth-filter background, classification of the remaining in-box points
/// under the coarse pose, then a fine re-solve on all static points started
/// at the coarse pose.
pub fn run_frame(
    frame: &FrameInput,
    classifier: &dyn PointClassifier,
    params: &DepthFilterParams,
    cfg: &RobustSolverConfig,
    k: &CameraIntrinsics,
    init: &Pose,
) -> Result<FrameResult> {
    let n = frame.records.len();
    let boxes: Vec<&BoundingBox> = frame
        .boxes
        .iter()
        .filter(|b| b.object_class == ObjectClass::PotentiallyDynamic)
        .collect();

    // A point stays a candidate if any box containing it retains it.
    let mut in_box = vec![false; n];
    let mut retained = vec![false; n];
    for b in &boxes {
        let members: Vec<usize> = (0..n).filter(|&i| b.contains(&frame.records[i].pixel1())).collect();
        let depths: Vec<f64> = members.iter().map(|&i| frame.records[i].z1).collect();
        let part = depth_filter(&depths, params);
        for &m in &members {
            in_box[m] = true;
        }
        for &j in &part.retained {
            retained[members[j]] = true;
        }
    }

    let mut roles = vec![PointRole::OutsideBox; n];
    let mut coarse_ids = Vec::new();
    let mut candidates = Vec::new();
    for i in 0..n {
        if !in_box[i] {
            coarse_ids.push(i);
        } else if !retained[i] {
            roles[i] = PointRole::Background;
            coarse_ids.push(i);
        } else {
            candidates.push(i);
        }
    }

    let mut diag = FrameDiagnostics {
        points: n,
        outside_box: n - in_box.iter().filter(|b| **b).count(),
        coarse_points: coarse_ids.len(),
        ..Default::default()
    };
    diag.background = coarse_ids.len() - diag.outside_box;

    let coarse = match solve(frame, &coarse_ids, k, init, cfg)? {
        Some(r) => {
            diag.coarse_iterations = r.iterations;
            r.pose
        }
        None => {
            diag.coarse_fallback = true;
            *init
        }
    };

    let e = essential_from_relative(&coarse);
    let mut fine_ids = coarse_ids.clone();
    for &i in &candidates {
        let r = &frame.records[i];
        let label = match build_feature_from_parts(r.pixel1(), r.z1, r.pixel2(), r.e_i, &coarse, &e, k) {
            Ok(built) => classifier.classify(&built.vector, r),
            Err(_) => DYNAMIC,
        };
        if label == STATIC {
            roles[i] = PointRole::ClassifiedStatic;
            diag.classified_static += 1;
            fine_ids.push(i);
        } else {
            roles[i] = PointRole::ClassifiedDynamic;
            diag.classified_dynamic += 1;
        }
    }
    fine_ids.sort_unstable();
    diag.fine_points = fine_ids.len();

    let pose = if fine_ids.len() == coarse_ids.len() && !diag.coarse_fallback {
        coarse
    } else {
        match solve(frame, &fine_ids, k, &coarse, cfg)? {
            Some(r) => {
                diag.fine_iterations = r.iterations;
                r.pose
            }
            None => {
                diag.fine_fallback = true;
                coarse
            }
        }
    };

    Ok(FrameResult {
        pose,
        coarse,
        roles,
        diagnostics: diag,
    })
}

/// Single robust solve on every correspondence, ignoring boxes.
pub fn run_frame_naive(
    frame: &FrameInput,
    cfg: &RobustSolverConfig,
    k: &CameraIntrinsics,
    init: &Pose,
) -> Result<FrameResult> {
    let n = frame.records.len();
    let ids: Vec<usize> = (0..n).collect();
    let mut diag = FrameDiagnostics {
        points: n,
        outside_box: n,
        coarse_points: n,
        fine_points: n,
        ..Default::default()
    };
    let pose = match solve(frame, &ids, k, init, cfg)? {
        Some(r) => {
            diag.coarse_iterations = r.iterations;
            r.pose
        }
        None => {
            diag.coarse_fallback = true;
            diag.fine_fallback = true;
            *init
        }
    };
    Ok(FrameResult {
        pose,
        coarse: pose,
        roles: vec![PointRole::OutsideBox; n],
        diagnostics: diag,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    /// World-to-camera poses; the first is the identity.
    pub trajectory: Vec<Pose>,
    pub frames: Vec<FrameResult>,
}

fn in_frame(e: Error, index: usize) -> Error {
    let tag = |m: String| format!("frame {index}: {m}");
    match e {
        Error::Domain(m) => Error::Domain(tag(m)),
        Error::InsufficientData(m) => Error::InsufficientData(tag(m)),
        Error::Config(m) => Error::Config(tag(m)),
        Error::Numerical(m) => Error::Numerical(tag(m)),
        other => other,
    }
}

/// Chains per-frame relative poses from the identity. Each frame is
/// initialized with the previous frame's estimate (identity for the first).
pub fn run_sequence<F>(frames: &[FrameInput], mut estimate: F) -> Result<SequenceResult>
where
    F: FnMut(&FrameInput, &Pose) -> Result<FrameResult>,
{
    let mut trajectory = vec![Pose::identity()];
    let mut results = Vec::with_capacity(frames.len());
    let mut prior = Pose::identity();
    for (i, frame) in frames.iter().enumerate() {
        let r = estimate(frame, &prior).map_err(|e| in_frame(e, i))?;
        let last = *trajectory.last().expect("non-empty");
        trajectory.push(r.pose.compose(&last));
        prior = r.pose;
        results.push(r);
    }
    Ok(SequenceResult {
        trajectory,
        frames: results,
    })
}

pub fn run_pipeline_sequence(
    frames: &[FrameInput],
    classifier: &dyn PointClassifier,
    params: &DepthFilterParams,
    cfg: &RobustSolverConfig,
    k: &CameraIntrinsics,
) -> Result<SequenceResult> {
    run_sequence(frames, |f, init| run_frame(f, classifier, params, cfg, k, init))
}

pub fn run_naive_sequence(
    frames: &[FrameInput],
    cfg: &RobustSolverConfig,
    k: &CameraIntrinsics,
) -> Result<SequenceResult> {
    run_sequence(frames, |f, init| run_frame_naive(f, cfg, k, init))
}
