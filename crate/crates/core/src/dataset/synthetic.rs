//! Synthetic driving scenes: a forward-moving camera, a static world, and
//! boxed objects that are either moving or parked.

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::GeneratorConfig;
use super::records::FeatureRecord;
use crate::depth_filter::{BoundingBox, ObjectClass};
use crate::features::{build_feature, FeatureObservation};
use crate::geometry::{essential_from_relative, project, relative_pose, CameraIntrinsics, Pixel, Point3, Pose};
use crate::metrics::{DYNAMIC, STATIC};
use crate::{Error, Result};

const PLACEMENT_ATTEMPTS: usize = 400;
const MAX_DATASET_SCENES: u64 = 10_000;
const MIN_DATASET_SCENES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePoint {
    /// Position at frame 0.
    pub position: Point3,
    pub albedo: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub center: Point3,
    pub half_extent: Vector3<f64>,
    /// World displacement per frame; zero for parked objects.
    pub velocity: Vector3<f64>,
    pub moving: bool,
    pub points: Vec<ScenePoint>,
}

impl SceneObject {
    pub fn offset_at(&self, frame: usize) -> Vector3<f64> {
        self.velocity * frame as f64
    }

    pub fn corners_at(&self, frame: usize) -> [Point3; 8] {
        let c = self.center + self.offset_at(frame);
        let h = self.half_extent;
        let mut out = [c; 8];
        for (i, p) in out.iter_mut().enumerate() {
            let s = |bit: usize| if i & bit == 0 { -1.0 } else { 1.0 };
            *p = c + Vector3::new(s(1) * h.x, s(2) * h.y, s(4) * h.z);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub pixel_sigma: f64,
    pub depth_rel_sigma: f64,
    pub intensity_sigma_static: f64,
    pub intensity_sigma_dynamic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub static_points: Vec<ScenePoint>,
    pub objects: Vec<SceneObject>,
    /// World-to-camera pose of every frame.
    pub trajectory: Vec<Pose>,
    pub intrinsics: CameraIntrinsics,
    pub noise: NoiseModel,
    pub image_width: f64,
    pub image_height: f64,
    pub min_depth: f64,
    pub box_margin: f64,
    /// Seeds the per-observation noise.
    pub noise_seed: u64,
}

/// Ground-truth view of one correspondence emitted by [`observe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedPair {
    pub point_id: usize,
    /// Index into `scene.objects`, if the point belongs to an object.
    pub object: Option<usize>,
    pub first: FeatureObservation,
    pub second: FeatureObservation,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameData {
    /// `(t - 1, t)`.
    pub frames: (usize, usize),
    pub records: Vec<FeatureRecord>,
    pub pairs: Vec<ObservedPair>,
    /// Detections in frame `t - 1`.
    pub boxes: Vec<BoundingBox>,
    /// Ground-truth pose of camera `t` relative to camera `t - 1`.
    pub relative: Pose,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed derived from a base seed and a list of indices.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).map_or(0.0, |n| n.sample(rng))
}

/// Camera pose at `frame`: yaw about the vertical axis, moving along the
/// current heading.
pub fn camera_trajectory(frames: usize, forward_speed: f64, yaw_rate: f64) -> Vec<Pose> {
    let mut center = Vector3::zeros();
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let yaw = yaw_rate * t as f64;
        let (s, c) = yaw.sin_cos();
        let r_wc = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
        let r_cw = r_wc.transpose();
        out.push(Pose::new(r_cw, -(r_cw * center)).expect("yaw rotation is orthonormal"));
        center += forward_speed * Vector3::new(s, 0.0, c);
    }
    out
}

impl SyntheticScene {
    pub fn frames(&self) -> usize {
        self.trajectory.len()
    }

    /// Total number of point ids (static points first, then object points in
    /// object order).
    pub fn point_count(&self) -> usize {
        self.static_points.len() + self.objects.iter().map(|o| o.points.len()).sum::<usize>()
    }

    /// Noiseless pixel and depth of a world point, if visible.
    pub fn view(&self, frame: usize, p: &Point3) -> Option<(Pixel, f64)> {
        let c = self.trajectory[frame].transform(p);
        if !(c.z >= self.min_depth) {
            return None;
        }
        let px = project(&c, &self.intrinsics).ok()?;
        let inside = px.u >= 0.0 && px.u < self.image_width && px.v >= 0.0 && px.v < self.image_height;
        inside.then_some((px, c.z))
    }

    fn object_visible(&self, object: &SceneObject, frame: usize) -> bool {
        object.corners_at(frame).iter().all(|c| self.view(frame, c).is_some())
    }

    /// The scene with every moving object removed; parked objects stay.
    pub fn without_moving_objects(&self) -> Self {
        let mut out = self.clone();
        out.objects.retain(|o| !o.moving);
        out
    }

    fn noisy_observation(
        &self,
        point_id: usize,
        frame: usize,
        pixel: Pixel,
        depth: f64,
        albedo: f64,
        dynamic: bool,
    ) -> Option<FeatureObservation> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.noise_seed,
            &[point_id as u64, frame as u64],
        ));
        let n = &self.noise;
        let u = pixel.u + gaussian(&mut rng, n.pixel_sigma);
        let v = pixel.v + gaussian(&mut rng, n.pixel_sigma);
        let d = depth * (1.0 + gaussian(&mut rng, n.depth_rel_sigma));
        let sigma = if dynamic { n.intensity_sigma_dynamic } else { n.intensity_sigma_static };
        let intensity = (albedo + gaussian(&mut rng, sigma)).clamp(0.0, 255.0);
        if !(d > 0.0) {
            return None;
        }
        FeatureObservation::new(Pixel::new(u, v), d, frame as i64, intensity).ok()
    }

    /// Whether the object's detection box meets that of an already placed
    /// object. Overlaps are avoided because occlusion is not modeled.
    fn overlaps_placed(&self, object: &SceneObject, frame: usize) -> bool {
        let Some(a) = self.detection(object, 0, frame) else {
            return true;
        };
        self.objects.iter().any(|o| {
            self.detection(o, 0, frame).is_some_and(|b| {
                a.u_min <= b.u_max && b.u_min <= a.u_max && a.v_min <= b.v_max && b.v_min <= a.v_max
            })
        })
    }

    fn detection(&self, object: &SceneObject, track_id: usize, frame: usize) -> Option<BoundingBox> {
        let mut lo = Vector3::new(f64::INFINITY, f64::INFINITY, 0.0);
        let mut hi = Vector3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0);
        for c in object.corners_at(frame) {
            let cam = self.trajectory[frame].transform(&c);
            if !(cam.z >= self.min_depth) {
                return None;
            }
            let px = project(&cam, &self.intrinsics).ok()?;
            lo.x = lo.x.min(px.u);
            lo.y = lo.y.min(px.v);
            hi.x = hi.x.max(px.u);
            hi.y = hi.y.max(px.v);
        }
        let m = self.box_margin;
        let u_min = (lo.x - m).max(0.0);
        let v_min = (lo.y - m).max(0.0);
        let u_max = (hi.x + m).min(self.image_width);
        let v_max = (hi.y + m).min(self.image_height);
        BoundingBox::new(u_min, v_min, u_max, v_max, ObjectClass::PotentiallyDynamic, track_id as i64).ok()
    }
}

/// Builds a scene from the generator settings. Deterministic in `seed`.
pub fn generate_scene(cfg: &GeneratorConfig, seed: u64) -> Result<SyntheticScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectory = camera_trajectory(cfg.frames, cfg.forward_speed, cfg.yaw_rate);
    let mut scene = SyntheticScene {
        static_points: Vec::new(),
        objects: Vec::new(),
        trajectory,
        intrinsics: cfg.intrinsics()?,
        noise: NoiseModel {
            pixel_sigma: cfg.pixel_sigma,
            depth_rel_sigma: cfg.depth_rel_sigma,
            intensity_sigma_static: cfg.intensity_sigma_static,
            intensity_sigma_dynamic: cfg.intensity_sigma_dynamic,
        },
        image_width: cfg.image_width,
        image_height: cfg.image_height,
        min_depth: cfg.min_depth,
        box_margin: cfg.box_margin,
        noise_seed: derive_seed(seed, &[u64::MAX]),
    };

    let uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if lo < hi { rng.random_range(lo..hi) } else { lo };
    let albedo = |rng: &mut ChaCha8Rng| rng.random_range(20.0..235.0);

    for _ in 0..cfg.static_points {
        let position = Point3::new(
            uniform(&mut rng, cfg.world_x_min, cfg.world_x_max),
            uniform(&mut rng, cfg.world_y_min, cfg.world_y_max),
            uniform(&mut rng, cfg.world_z_min, cfg.world_z_max),
        );
        scene.static_points.push(ScenePoint { position, albedo: albedo(&mut rng) });
    }

    let half_extent = Vector3::new(cfg.object_width, cfg.object_height, cfg.object_length) / 2.0;
    let travel = (cfg.frames - 1) as f64;
    let n_moving = if cfg.dynamic_fraction > 0.0 { cfg.moving_objects } else { 0 };
    for i in 0..cfg.parked_objects() + cfg.moving_objects {
        let moving = i >= cfg.parked_objects();
        let mut best: Option<(usize, SceneObject)> = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let (velocity, ahead) = if moving {
                let heading = uniform(&mut rng, -cfg.object_heading_spread, cfg.object_heading_spread);
                let speed = uniform(&mut rng, cfg.object_speed_min, cfg.object_speed_max);
                let v = speed * Vector3::new(heading.sin(), 0.0, heading.cos());
                (v, (cfg.forward_speed - v.z).max(0.0) * travel)
            } else {
                (Vector3::zeros(), cfg.forward_speed * travel)
            };
            let x = if moving {
                uniform(&mut rng, -cfg.object_x_spread, cfg.object_x_spread)
            } else {
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                side * uniform(&mut rng, 0.5 * cfg.object_x_spread, cfg.object_x_spread)
            };
            let z = uniform(&mut rng, cfg.object_z_min, cfg.object_z_max + ahead);
            let candidate = SceneObject {
                center: Point3::new(x, cfg.world_y_max - half_extent.y, z),
                half_extent,
                velocity,
                moving,
                points: Vec::new(),
            };
            let score = (0..cfg.frames)
                .filter(|&t| scene.object_visible(&candidate, t) && !scene.overlaps_placed(&candidate, t))
                .count();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, candidate));
            }
            if score == cfg.frames {
                break;
            }
        }
        let (_, mut object) = best.expect("at least one placement attempt");
        if !moving {
            for _ in 0..cfg.parked_points {
                object.points.push(object_point(&mut rng, &object));
            }
        }
        scene.objects.push(object);
    }

    // Size the moving objects so that they hold the requested share of the
    // points visible in an average frame.
    if n_moving > 0 {
        let visible_static: usize = (0..cfg.frames)
            .map(|t| {
                let s = scene.static_points.iter().filter(|p| scene.view(t, &p.position).is_some()).count();
                let parked: usize = scene
                    .objects
                    .iter()
                    .filter(|o| !o.moving)
                    .flat_map(|o| o.points.iter())
                    .filter(|p| scene.view(t, &p.position).is_some())
                    .count();
                s + parked
            })
            .sum();
        let avg = visible_static as f64 / cfg.frames as f64;
        let f = cfg.dynamic_fraction;
        let total = (f / (1.0 - f) * avg).round() as usize;
        let moving_ids: Vec<usize> = (0..scene.objects.len()).filter(|&i| scene.objects[i].moving).collect();
        let n = moving_ids.len();
        for (k, &i) in moving_ids.iter().enumerate() {
            let count = total / n + usize::from(k < total % n);
            for _ in 0..count {
                let p = object_point(&mut rng, &scene.objects[i]);
                scene.objects[i].points.push(p);
            }
        }
    }
    Ok(scene)
}

fn object_point(rng: &mut ChaCha8Rng, object: &SceneObject) -> ScenePoint {
    let h = object.half_extent;
    let offset = Vector3::new(
        rng.random_range(-h.x..=h.x),
        rng.random_range(-h.y..=h.y),
        rng.random_range(-h.z..=h.z),
    );
    ScenePoint {
        position: object.center + offset,
        albedo: rng.random_range(20.0..235.0),
    }
}

/// Observes the frame pair `(t - 1, t)`.
///
/// Every point visible in both frames yields one record whose features are
/// computed under the ground-truth relative pose. Boxes are the detections of
/// frame `t - 1`, one per object.
pub fn observe(scene: &SyntheticScene, t: usize) -> Result<FrameData> {
    if t == 0 || t >= scene.frames() {
        return Err(Error::Domain(format!(
            "frame pair ({}, {t}) is outside a {}-frame sequence",
            t as i64 - 1,
            scene.frames()
        )));
    }
    let rel = relative_pose(&scene.trajectory[t - 1], &scene.trajectory[t]);
    let e = essential_from_relative(&rel);
    let k = &scene.intrinsics;

    let mut out = FrameData {
        frames: (t - 1, t),
        records: Vec::new(),
        pairs: Vec::new(),
        boxes: Vec::new(),
        relative: rel,
    };

    let mut emit = |point_id: usize, object: Option<usize>, p: &ScenePoint, shift: (Vector3<f64>, Vector3<f64>), dynamic: bool| {
        let (Some((px1, d1)), Some((px2, d2))) = (
            scene.view(t - 1, &(p.position + shift.0)),
            scene.view(t, &(p.position + shift.1)),
        ) else {
            return;
        };
        let (Some(first), Some(second)) = (
            scene.noisy_observation(point_id, t - 1, px1, d1, p.albedo, dynamic),
            scene.noisy_observation(point_id, t, px2, d2, p.albedo, dynamic),
        ) else {
            return;
        };
        let Ok(built) = build_feature(&first, &second, &rel, &e, k) else {
            return;
        };
        let label = if dynamic { DYNAMIC } else { STATIC };
        let v = built.vector;
        out.records.push(FeatureRecord {
            u1: first.pixel.u,
            v1: first.pixel.v,
            z1: first.depth,
            id1: first.frame_id,
            u2: second.pixel.u,
            v2: second.pixel.v,
            id2: second.frame_id,
            class: label,
            e_i: v.e_i,
            e_re: v.e_re,
            e_d: v.e_d,
        });
        out.pairs.push(ObservedPair { point_id, object, first, second, label });
    };

    let zero = (Vector3::zeros(), Vector3::zeros());
    for (id, p) in scene.static_points.iter().enumerate() {
        emit(id, None, p, zero, false);
    }
    let mut id = scene.static_points.len();
    for (oi, object) in scene.objects.iter().enumerate() {
        let shift = (object.offset_at(t - 1), object.offset_at(t));
        for p in &object.points {
            emit(id, Some(oi), p, shift, object.moving);
            id += 1;
        }
    }
    for (oi, object) in scene.objects.iter().enumerate() {
        if let Some(b) = scene.detection(object, oi, t - 1) {
            out.boxes.push(b);
        }
    }
    Ok(out)
}

/// All frame pairs of the scene in order.
pub fn observe_all(scene: &SyntheticScene) -> Result<Vec<FrameData>> {
    (1..scene.frames()).map(|t| observe(scene, t)).collect()
}

/// Labeled records from seeded scenes, exactly `round(n * dynamic_fraction)`
/// of them dynamic.
///
/// Each scene contributes at most a `1 / MIN_DATASET_SCENES` share of either
/// class, so that no single scene's objects dominate the dataset.
pub fn generate_dataset(cfg: &GeneratorConfig, n: usize, seed: u64) -> Result<Vec<FeatureRecord>> {
    cfg.validate()?;
    let n_dynamic = (n as f64 * cfg.dynamic_fraction).round() as usize;
    let n_static = n - n_dynamic;
    if n_dynamic > 0 && cfg.moving_objects == 0 {
        return Err(Error::Config(
            "a dynamic share needs at least one moving object".into(),
        ));
    }
    let cap_dynamic = n_dynamic.div_ceil(MIN_DATASET_SCENES);
    let cap_static = n_static.div_ceil(MIN_DATASET_SCENES);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[u64::MAX]));
    let mut dynamic = Vec::with_capacity(n_dynamic);
    let mut static_ = Vec::with_capacity(n_static);
    let mut scene_index = 0;
    while dynamic.len() < n_dynamic || static_.len() < n_static {
        if scene_index == MAX_DATASET_SCENES {
            return Err(Error::InsufficientData(format!(
                "{MAX_DATASET_SCENES} scenes produced {} dynamic and {} static records",
                dynamic.len(),
                static_.len()
            )));
        }
        let scene = generate_scene(cfg, derive_seed(seed, &[scene_index]))?;
        let (mut d, mut s): (Vec<FeatureRecord>, Vec<FeatureRecord>) = observe_all(&scene)?
            .into_iter()
            .flat_map(|f| f.records)
            .partition(|r| r.class == DYNAMIC);
        d.shuffle(&mut rng);
        s.shuffle(&mut rng);
        let take_d = cap_dynamic.min(n_dynamic - dynamic.len());
        let take_s = cap_static.min(n_static - static_.len());
        dynamic.extend(d.into_iter().take(take_d));
        static_.extend(s.into_iter().take(take_s));
        scene_index += 1;
    }
    let mut out = dynamic;
    out.append(&mut static_);
    out.shuffle(&mut rng);
    Ok(out)
}
