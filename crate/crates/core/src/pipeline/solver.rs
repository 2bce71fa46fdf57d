//! Robust pose estimation from 3D-2D correspondences.

use nalgebra::{Matrix2x3, Matrix3x6, Matrix6, Vector2, Vector6};

use crate::geometry::{se3_exp, skew, CameraIntrinsics, Pixel, Point3, Pose};
use crate::{Error, Result};

pub const MIN_CORRESPONDENCES: usize = 6;
pub const DEFAULT_HUBER_DELTA: f64 = 2.0;

const MAX_DAMPING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RobustKernel {
    /// Plain least squares.
    None,
    /// Huber loss on the residual norm, threshold in pixels.
    Huber(f64),
}

impl RobustKernel {
    /// Cost of a residual with norm `r`; equals `r² / 2` inside the
    /// quadratic region.
    pub fn cost(&self, r: f64) -> f64 {
        match *self {
            RobustKernel::None => 0.5 * r * r,
            RobustKernel::Huber(d) if r <= d => 0.5 * r * r,
            RobustKernel::Huber(d) => d * (r - 0.5 * d),
        }
    }

    /// IRLS weight `ρ'(r) / r`.
    pub fn weight(&self, r: f64) -> f64 {
        match *self {
            RobustKernel::Huber(d) if r > d => d / r,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustSolverConfig {
    pub kernel: RobustKernel,
    pub max_iterations: usize,
    /// Stop once the update norm falls below this.
    pub epsilon: f64,
    pub initial_damping: f64,
    /// Damping multiplier after a rejected step.
    pub damping_increase: f64,
    /// Damping multiplier after an accepted step.
    pub damping_decrease: f64,
}

impl Default for RobustSolverConfig {
    fn default() -> Self {
        Self {
            kernel: RobustKernel::Huber(DEFAULT_HUBER_DELTA),
            max_iterations: 100,
            epsilon: 1e-12,
            initial_damping: 1e-4,
            damping_increase: 10.0,
            damping_decrease: 0.1,
        }
    }
}

impl RobustSolverConfig {
    pub fn with_kernel(kernel: RobustKernel) -> Self {
        Self {
            kernel,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let RobustKernel::Huber(d) = self.kernel {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("Huber threshold must be positive, got {d}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.initial_damping >= 0.0
            && self.damping_increase > 1.0
            && self.damping_decrease > 0.0
            && self.damping_decrease < 1.0)
        {
            return Err(Error::Config(
                "damping must be non-negative, increase > 1 and decrease in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// A point expressed in the reference frame and its observed pixel in the
/// current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub point: Point3,
    pub pixel: Pixel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub pose: Pose,
    /// Robust cost at `pose`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Robust cost after the initial evaluation and after every accepted
    /// step.
    pub cost_history: Vec<f64>,
    /// Correspondences in front of the initial camera.
    pub used: usize,
}

fn residual(c: &Correspondence, pose: &Pose, k: &CameraIntrinsics) -> Option<(Vector2<f64>, Point3)> {
    let q = pose.transform(&c.point);
    if !(q.z > 0.0) {
        return None;
    }
    let u = k.fx * q.x / q.z + k.cx;
    let v = k.fy * q.y / q.z + k.cy;
    Some((Vector2::new(c.pixel.u - u, c.pixel.v - v), q))
}

/// Total robust cost, or `None` if a point falls behind the camera.
fn total_cost(corr: &[Correspondence], pose: &Pose, k: &CameraIntrinsics, kernel: RobustKernel) -> Option<f64> {
    let mut sum = 0.0;
    for c in corr {
        let (r, _) = residual(c, pose, k)?;
        sum += kernel.cost(r.norm());
    }
    Some(sum)
}

/// Minimizes the robust reprojection cost over the pose with damped
/// Gauss-Newton steps `T <- exp(xi) T`. A step is only accepted if it does
/// not increase the cost.
pub fn estimate_pose(
    corr: &[Correspondence],
    k: &CameraIntrinsics,
    init: &Pose,
    cfg: &RobustSolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    if corr.len() < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientData(format!(
            "pose is under-constrained: {} correspondences, need {MIN_CORRESPONDENCES}",
            corr.len()
        )));
    }
    let visible: Vec<Correspondence> = corr
        .iter()
        .copied()
        .filter(|c| init.transform(&c.point).z > 0.0)
        .collect();
    if visible.is_empty() {
        return Err(Error::Domain("all points lie behind the initial camera".into()));
    }
    if visible.len() < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientData(format!(
            "pose is under-constrained: {} points in front of the camera, need {MIN_CORRESPONDENCES}",
            visible.len()
        )));
    }

    let kernel = cfg.kernel;
    let mut pose = *init;
    let mut cost = total_cost(&visible, &pose, k, kernel).expect("filtered to visible points");
    let mut history = vec![cost];
    let mut lambda = cfg.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for c in &visible {
            let (r, q) = residual(c, &pose, k).expect("accepted poses keep points visible");
            let w = kernel.weight(r.norm());
            let iz = 1.0 / q.z;
            let d_proj = Matrix2x3::new(
                k.fx * iz,
                0.0,
                -k.fx * q.x * iz * iz,
                0.0,
                k.fy * iz,
                -k.fy * q.y * iz * iz,
            );
            let mut d_point = Matrix3x6::<f64>::zeros();
            d_point.fixed_view_mut::<3, 3>(0, 0).fill_with_identity();
            d_point.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&q.coords)));
            let j = -(d_proj * d_point);
            h += w * j.transpose() * j;
            g += w * j.transpose() * r;
        }

        loop {
            let mut damped = h;
            for i in 0..6 {
                damped[(i, i)] += lambda * h[(i, i)].max(1e-9);
            }
            let step = damped.cholesky().map(|ch| -ch.solve(&g));
            let Some(step) = step else {
                lambda = (lambda * cfg.damping_increase).max(1e-9);
                if lambda > MAX_DAMPING {
                    break;
                }
                continue;
            };
            let candidate = se3_exp(&step).compose(&pose);
            match total_cost(&visible, &candidate, k, kernel) {
                Some(c) if c <= cost => {
                    debug_assert!(c <= *history.last().expect("non-empty"));
                    pose = candidate;
                    cost = c;
                    history.push(c);
                    lambda *= cfg.damping_decrease;
                    if step.norm() < cfg.epsilon {
                        converged = true;
                    }
                    break;
                }
                _ if step.norm() < cfg.epsilon => {
                    // Rounding noise at the optimum.
                    converged = true;
                    break;
                }
                _ => {
                    lambda = (lambda * cfg.damping_increase).max(1e-9);
                    if lambda > MAX_DAMPING {
                        break;
                    }
                }
            }
        }
        if converged || lambda > MAX_DAMPING {
            break;
        }
    }

    Ok(SolveReport {
        pose,
        cost,
        iterations,
        converged,
        cost_history: history,
        used: visible.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 0.5).unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let xi = Vector6::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.2..0.2),
            rng.random_range(-1.5..1.5),
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.1..0.1),
            rng.random_range(-0.05..0.05),
        );
        se3_exp(&xi)
    }

    fn scene(rng: &mut ChaCha8Rng, truth: &Pose, n: usize) -> Vec<Correspondence> {
        let mut out = Vec::new();
        while out.len() < n {
            let p = Point3::new(
                rng.random_range(-15.0..15.0),
                rng.random_range(-5.0..3.0),
                rng.random_range(5.0..60.0),
            );
            let q = truth.transform(&p);
            if q.z > 1.0 {
                out.push(Correspondence { point: p, pixel: project(&q, &k()).unwrap() });
            }
        }
        out
    }

    fn perturb(p: &Pose, rng: &mut ChaCha8Rng, angle: f64, shift: f64) -> Pose {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            .normalize();
        let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            .normalize();
        let xi = Vector6::new(dir.x * shift, dir.y * shift, dir.z * shift, axis.x * angle, axis.y * angle, axis.z * angle);
        se3_exp(&xi).compose(p)
    }

    #[test]
    fn huber_kernel_values() {
        let h = RobustKernel::Huber(2.0);
        assert_eq!(h.cost(1.0), 0.5);
        assert_eq!(h.cost(4.0), 2.0 * (4.0 - 1.0));
        assert_eq!(h.weight(1.0), 1.0);
        assert_eq!(h.weight(4.0), 0.5);
        assert_eq!(RobustKernel::None.weight(100.0), 1.0);
    }

    #[test]
    fn ground_truth_init_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let truth = random_pose(&mut rng);
            let corr = scene(&mut rng, &truth, 100);
            let r = estimate_pose(&corr, &k(), &truth, &RobustSolverConfig::default()).unwrap();
            assert!(r.iterations <= 2, "{}", r.iterations);
            assert!(r.pose.rotation_distance(&truth) < 1e-9);
            assert!(r.pose.translation_distance(&truth) < 1e-9);
        }
    }

    #[test]
    fn recovers_from_perturbed_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let truth = random_pose(&mut rng);
            let corr = scene(&mut rng, &truth, 100);
            let init = perturb(&truth, &mut rng, 0.05, 0.1);
            let r = estimate_pose(&corr, &k(), &init, &RobustSolverConfig::default()).unwrap();
            assert!(r.converged);
            assert!(r.pose.rotation_distance(&truth) < 1e-6);
            assert!(r.pose.translation_distance(&truth) < 1e-6);
            assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn huber_beats_least_squares_with_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let truth = random_pose(&mut rng);
            let mut corr = scene(&mut rng, &truth, 100);
            for c in corr.iter_mut() {
                c.pixel.u += rng.random_range(-0.5..0.5);
                c.pixel.v += rng.random_range(-0.5..0.5);
            }
            for c in corr.iter_mut().take(30) {
                c.pixel.u += rng.random_range(10.0..40.0);
                c.pixel.v += rng.random_range(-40.0..-10.0);
            }
            let init = perturb(&truth, &mut rng, 0.02, 0.05);
            let robust = estimate_pose(&corr, &k(), &init, &RobustSolverConfig::default()).unwrap();
            let plain =
                estimate_pose(&corr, &k(), &init, &RobustSolverConfig::with_kernel(RobustKernel::None)).unwrap();
            let err = |p: &Pose| p.translation_distance(&truth) + p.rotation_distance(&truth);
            assert!(err(&robust.pose) < err(&plain.pose));
        }
    }

    #[test]
    fn equivariant_under_rigid_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let truth = random_pose(&mut rng);
            let corr = scene(&mut rng, &truth, 60);
            let init = perturb(&truth, &mut rng, 0.03, 0.05);
            let g = random_pose(&mut rng);
            let moved: Vec<Correspondence> = corr
                .iter()
                .map(|c| Correspondence { point: g.transform(&c.point), pixel: c.pixel })
                .collect();
            let cfg = RobustSolverConfig::default();
            let a = estimate_pose(&corr, &k(), &init, &cfg).unwrap().pose;
            let b = estimate_pose(&moved, &k(), &init.compose(&g.inverse()), &cfg).unwrap().pose;
            let b_back = b.compose(&g);
            assert!(a.rotation_distance(&b_back) < 1e-6);
            assert!(a.translation_distance(&b_back) < 1e-6);
        }
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let corr = scene(&mut rng, &Pose::identity(), 5);
        assert!(matches!(
            estimate_pose(&corr, &k(), &Pose::identity(), &RobustSolverConfig::default()),
            Err(Error::InsufficientData(_))
        ));
        let corr = scene(&mut rng, &Pose::identity(), 10);
        let behind = Pose::from_translation(Vector3::new(0.0, 0.0, -1000.0));
        assert!(matches!(
            estimate_pose(&corr, &k(), &behind, &RobustSolverConfig::default()),
            Err(Error::Domain(_))
        ));
        let bad = RobustSolverConfig::with_kernel(RobustKernel::Huber(0.0));
        assert!(matches!(
            estimate_pose(&corr, &k(), &Pose::identity(), &bad),
            Err(Error::Config(_))
        ));
    }
}
