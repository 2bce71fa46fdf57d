//! Depth-band rejection of background points inside a detection box.
//!
//! Points whose depth falls strictly outside `[mean - eta*std, mean + eta*std]`
//! of the box population are background and treated as static.

use crate::features::FeatureObservation;
use crate::geometry::Pixel;
use crate::{Error, Result};

pub const DEFAULT_ETA: f64 = 1.2;
pub const DEFAULT_MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthFilterParams {
    pub eta: f64,
    pub min_points: usize,
}

impl Default for DepthFilterParams {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            min_points: DEFAULT_MIN_POINTS,
        }
    }
}

impl DepthFilterParams {
    pub fn new(eta: f64, min_points: usize) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) || min_points < 2 {
            return Err(Error::Config(format!(
                "depth filter needs eta > 0 and min_points >= 2 (eta={eta}, min_points={min_points})"
            )));
        }
        Ok(Self { eta, min_points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectClass {
    /// A class that can move (car, pedestrian, ...); its points are candidates.
    PotentiallyDynamic,
    /// A class known to be static; the box does not affect classification.
    Static,
}

impl ObjectClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::PotentiallyDynamic => "dynamic",
            ObjectClass::Static => "static",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dynamic" => Some(ObjectClass::PotentiallyDynamic),
            "static" => Some(ObjectClass::Static),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub object_class: ObjectClass,
    pub track_id: i64,
}

impl BoundingBox {
    pub fn new(
        u_min: f64,
        v_min: f64,
        u_max: f64,
        v_max: f64,
        object_class: ObjectClass,
        track_id: i64,
    ) -> Result<Self> {
        if !(u_min < u_max && v_min < v_max) {
            return Err(Error::Domain(format!(
                "empty bounding box [{u_min}, {u_max}] x [{v_min}, {v_max}]"
            )));
        }
        Ok(Self {
            u_min,
            v_min,
            u_max,
            v_max,
            object_class,
            track_id,
        })
    }

    /// Inclusive containment test.
    pub fn contains(&self, px: &Pixel) -> bool {
        px.u >= self.u_min && px.u <= self.u_max && px.v >= self.v_min && px.v <= self.v_max
    }
}

/// The accepted depth interval of one box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthBand {
    pub mean: f64,
    pub std: f64,
    pub low: f64,
    pub high: f64,
}

impl DepthBand {
    /// Fits the band with the population standard deviation.
    pub fn fit(depths: &[f64], eta: f64) -> Option<Self> {
        if depths.is_empty() {
            return None;
        }
        let n = depths.len() as f64;
        let mean = depths.iter().sum::<f64>() / n;
        let var = depths.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        Some(Self {
            mean,
            std,
            low: mean - eta * std,
            high: mean + eta * std,
        })
    }

    /// Boundary values count as inside.
    pub fn contains(&self, depth: f64) -> bool {
        depth >= self.low && depth <= self.high
    }

    pub fn partition(&self, depths: &[f64]) -> DepthPartition {
        let mut out = DepthPartition {
            band: Some(*self),
            ..Default::default()
        };
        for (i, &d) in depths.iter().enumerate() {
            if d > 0.0 && !self.contains(d) {
                out.background.push(i);
            } else {
                out.retained.push(i);
            }
        }
        out
    }
}

/// Index partition of the input points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DepthPartition {
    /// Indices that stay potentially dynamic.
    pub retained: Vec<usize>,
    /// Indices rejected as static background.
    pub background: Vec<usize>,
    /// `None` when the filter was skipped.
    pub band: Option<DepthBand>,
}

impl DepthPartition {
    pub fn skipped(&self) -> bool {
        self.band.is_none()
    }
}

/// Splits the depths of one box into candidates and background.
///
/// Non-positive depths (unknown) do not contribute to the statistics and are
/// always retained. With fewer than `min_points` known depths the filter is
/// skipped and everything is retained.
pub fn depth_filter(depths: &[f64], params: &DepthFilterParams) -> DepthPartition {
    let known: Vec<f64> = depths.iter().copied().filter(|&d| d > 0.0).collect();
    if known.len() < params.min_points {
        return DepthPartition {
            retained: (0..depths.len()).collect(),
            background: Vec::new(),
            band: None,
        };
    }
    match DepthBand::fit(&known, params.eta) {
        Some(band) => band.partition(depths),
        None => unreachable!("min_points >= 2 guarantees a non-empty population"),
    }
}

pub fn depth_filter_observations(
    points: &[FeatureObservation],
    params: &DepthFilterParams,
) -> DepthPartition {
    let depths: Vec<f64> = points.iter().map(|p| p.depth).collect();
    depth_filter(&depths, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DepthFilterParams {
        DepthFilterParams::new(1.2, 5).unwrap()
    }

    #[test]
    fn zero_variance_retains_all() {
        let p = depth_filter(&[10.0; 4], &DepthFilterParams::new(1.2, 2).unwrap());
        let band = p.band.unwrap();
        assert_eq!(band.std, 0.0);
        assert_eq!((band.low, band.high), (10.0, 10.0));
        assert_eq!(p.retained, vec![0, 1, 2, 3]);
        assert!(p.background.is_empty());
    }

    #[test]
    fn far_background_point_rejected() {
        // mean = 80/6; population variance = sum(d²)/6 - mean²
        //      = 1410/6 - 6400/36 = 2060/36
        let depths = [8.0, 9.0, 10.0, 11.0, 12.0, 30.0];
        let p = depth_filter(&depths, &params());
        let band = p.band.unwrap();
        let mean = 80.0 / 6.0;
        let std = (2060.0f64 / 36.0).sqrt();
        assert!((band.mean - mean).abs() < 1e-12);
        assert!((band.std - std).abs() < 1e-12);
        // Rounded reference figures: mean 13.33, std 7.56, band [4.26, 22.41].
        assert!((band.mean - 13.33).abs() < 5e-3);
        assert!((band.std - 7.56).abs() < 5e-3);
        assert!((band.low - 4.26).abs() < 5e-3);
        assert!((band.high - 22.41).abs() < 5e-3);
        assert!((band.low - (mean - 1.2 * std)).abs() < 1e-12);
        assert!((band.high - (mean + 1.2 * std)).abs() < 1e-12);
        assert_eq!(p.background, vec![5]);
        assert_eq!(p.retained, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn too_few_points_skips() {
        let p = depth_filter(&[42.0], &params());
        assert!(p.skipped());
        assert_eq!(p.retained, vec![0]);
        let p = depth_filter(&[], &params());
        assert!(p.retained.is_empty() && p.background.is_empty());
    }

    #[test]
    fn boundary_points_are_retained() {
        // Two-point population {9, 11}: mean 10, std 1; eta = 1 puts both
        // points exactly on the band edges.
        let p = depth_filter(&[9.0, 11.0], &DepthFilterParams::new(1.0, 2).unwrap());
        assert_eq!(p.retained, vec![0, 1]);
    }

    #[test]
    fn unknown_depths_are_retained_and_ignored() {
        let depths = [8.0, 9.0, -1.0, 10.0, 11.0, 12.0, 30.0];
        let p = depth_filter(&depths, &params());
        assert_eq!(p.background, vec![6]);
        assert!(p.retained.contains(&2));
    }

    #[test]
    fn rerun_with_original_band_is_stable() {
        let depths = [8.0, 9.0, 10.0, 11.0, 12.0, 30.0, 2.0];
        let p = depth_filter(&depths, &params());
        let band = p.band.unwrap();
        let kept: Vec<f64> = p.retained.iter().map(|&i| depths[i]).collect();
        let again = band.partition(&kept);
        assert!(again.background.is_empty());
        assert_eq!(again.retained.len(), kept.len());
    }

    #[test]
    fn params_validation() {
        assert!(DepthFilterParams::new(0.0, 5).is_err());
        assert!(DepthFilterParams::new(1.2, 1).is_err());
        assert_eq!(DepthFilterParams::default().eta, 1.2);
    }

    #[test]
    fn box_validation_and_containment() {
        assert!(BoundingBox::new(10.0, 0.0, 10.0, 5.0, ObjectClass::Static, 0).is_err());
        let b = BoundingBox::new(0.0, 0.0, 10.0, 5.0, ObjectClass::PotentiallyDynamic, 3).unwrap();
        assert!(b.contains(&Pixel::new(10.0, 5.0)));
        assert!(!b.contains(&Pixel::new(10.1, 5.0)));
    }
}
