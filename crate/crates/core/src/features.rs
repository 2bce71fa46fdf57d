//! Per-correspondence error features: intensity, epipolar and reprojection
//! error.
//!
//! A correspondence pairs an observation in frame 1 (with known depth) and
//! one in frame 2. `rel` is always the relative pose mapping camera-1
//! coordinates into camera-2 coordinates.

use crate::geometry::{
    backproject, essential_from_relative, project, CameraIntrinsics, EssentialMatrix, Pixel, Pose,
};
use crate::{Error, Result};
use nalgebra::Vector3;

/// Depth value used when an observation has no depth measurement.
pub const UNKNOWN_DEPTH: f64 = -1.0;

/// Below this line-normal magnitude the epipolar line is undefined.
const DEGENERATE_LINE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureObservation {
    pub pixel: Pixel,
    /// Depth in meters, or [`UNKNOWN_DEPTH`].
    pub depth: f64,
    pub frame_id: i64,
    /// Grayscale intensity in `[0, 255]`.
    pub intensity: f64,
}

impl FeatureObservation {
    pub fn new(pixel: Pixel, depth: f64, frame_id: i64, intensity: f64) -> Result<Self> {
        if !(depth > 0.0 || depth == UNKNOWN_DEPTH) {
            return Err(Error::Domain(format!(
                "observation depth must be positive or {UNKNOWN_DEPTH}, got {depth}"
            )));
        }
        Ok(Self {
            pixel,
            depth,
            frame_id,
            intensity,
        })
    }

    pub fn has_depth(&self) -> bool {
        self.depth > 0.0
    }
}

/// The classifier input `(e_I, e_D, e_Re)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    /// Absolute grayscale difference.
    pub e_i: f64,
    /// Signed epipolar point-to-line distance in normalized coordinates.
    pub e_d: f64,
    /// Squared reprojection distance in pixels².
    pub e_re: f64,
}

impl FeatureVector {
    pub fn new(e_i: f64, e_d: f64, e_re: f64) -> Self {
        Self { e_i, e_d, e_re }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.e_i, self.e_d, self.e_re]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// A feature vector with its ground-truth label (0 static, 1 dynamic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledFeature {
    pub vector: FeatureVector,
    pub label: u8,
}

impl LabeledFeature {
    pub fn new(vector: FeatureVector, label: u8) -> Self {
        Self { vector, label }
    }
}

/// How the epipolar line `p2ᵀE` is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpipolarNormalization {
    /// Divide by the norm of the first two line coefficients, giving a
    /// geometric point-to-line distance.
    #[default]
    LineNormal,
    /// Divide by the norm of the full 3-vector.
    FullVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpipolarError {
    pub value: f64,
    /// Set when the line is undefined (zero essential matrix or a point at
    /// the epipole); `value` is then 0.
    pub degenerate: bool,
}

pub fn intensity_error(obs1: &FeatureObservation, obs2: &FeatureObservation) -> f64 {
    (obs1.intensity - obs2.intensity).abs()
}

/// Signed distance of `p1` to the epipolar line `p2ᵀE` in frame 1.
/// Both points are normalized homogeneous coordinates.
pub fn epipolar_error(e: &EssentialMatrix, p1: &Vector3<f64>, p2: &Vector3<f64>) -> EpipolarError {
    epipolar_error_with(e, p1, p2, EpipolarNormalization::LineNormal)
}

pub fn epipolar_error_with(
    e: &EssentialMatrix,
    p1: &Vector3<f64>,
    p2: &Vector3<f64>,
    normalization: EpipolarNormalization,
) -> EpipolarError {
    let line = e.matrix().transpose() * p2;
    let norm = match normalization {
        EpipolarNormalization::LineNormal => line.x.hypot(line.y),
        EpipolarNormalization::FullVector => line.norm(),
    };
    if e.is_degenerate() || !(norm >= DEGENERATE_LINE_NORM) {
        return EpipolarError {
            value: 0.0,
            degenerate: true,
        };
    }
    EpipolarError {
        value: line.dot(p1) / norm,
        degenerate: false,
    }
}

/// Squared pixel distance between `target` and the projection of `source`
/// (lifted with `source_depth`) after applying `transform`.
///
/// With `transform = T_12`, `target = P1`, `source = P2` and
/// `source_depth = d2` this is the textbook reprojection error of a frame-2
/// point into frame 1. Swapping the frame roles (`T_21`, `P2`, `P1`, `d1`)
/// measures the same error in the opposite direction.
pub fn reprojection_error(
    transform: &Pose,
    target: Pixel,
    source: Pixel,
    source_depth: f64,
    k: &CameraIntrinsics,
) -> Result<f64> {
    let lifted = backproject(source, source_depth, k)?;
    let moved = transform.transform(&lifted);
    if !(moved.z > 0.0) {
        return Err(Error::Domain(format!(
            "reprojected point lies behind the camera (depth {})",
            moved.z
        )));
    }
    let reprojected = project(&moved, k)?;
    Ok(reprojected.squared_distance(&target))
}

/// Result of [`build_feature`], carrying the degeneracy flag of the
/// epipolar term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuiltFeature {
    pub vector: FeatureVector,
    pub epipolar_degenerate: bool,
}

/// Builds `(e_I, e_D, e_Re)` for the correspondence `obs1 -> obs2`.
///
/// `obs1` must carry depth: it is lifted into 3D, moved by `rel` and
/// reprojected into frame 2.
pub fn build_feature(
    obs1: &FeatureObservation,
    obs2: &FeatureObservation,
    rel: &Pose,
    e: &EssentialMatrix,
    k: &CameraIntrinsics,
) -> Result<BuiltFeature> {
    build_feature_from_parts(
        obs1.pixel,
        obs1.depth,
        obs2.pixel,
        intensity_error(obs1, obs2),
        rel,
        e,
        k,
    )
}

/// Same as [`build_feature`] for callers that only hold the pixels, the
/// frame-1 depth and a precomputed intensity error (e.g. dataset records).
pub fn build_feature_from_parts(
    px1: Pixel,
    depth1: f64,
    px2: Pixel,
    e_i: f64,
    rel: &Pose,
    e: &EssentialMatrix,
    k: &CameraIntrinsics,
) -> Result<BuiltFeature> {
    if !(depth1 > 0.0) {
        return Err(Error::Domain(format!(
            "frame-1 observation needs a positive depth, got {depth1}"
        )));
    }
    let ep = epipolar_error(e, &k.normalize(px1), &k.normalize(px2));
    let e_re = reprojection_error(rel, px2, px1, depth1, k)?;
    Ok(BuiltFeature {
        vector: FeatureVector::new(e_i, ep.value, e_re),
        epipolar_degenerate: ep.degenerate,
    })
}

/// Convenience: computes the essential matrix from `rel` and builds the
/// feature.
pub fn build_feature_for_pose(
    obs1: &FeatureObservation,
    obs2: &FeatureObservation,
    rel: &Pose,
    k: &CameraIntrinsics,
) -> Result<BuiltFeature> {
    build_feature(obs1, obs2, rel, &essential_from_relative(rel), k)
}
