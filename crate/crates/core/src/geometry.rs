//! Pinhole camera model and SE(3) rigid transforms.
//!
//! Poses map world coordinates into camera coordinates (`X_c = R * X_w + t`).
//! The relative pose between two consecutive frames is `T2 * T1^-1`, which
//! maps camera-1 coordinates into camera-2 coordinates.

use nalgebra::{Matrix3, UnitQuaternion, Vector3, Vector6};

use crate::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance used to validate rotation matrices handed to [`Pose::new`].
const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Stereo baseline in meters.
    pub baseline: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, baseline: f64) -> Result<Self> {
        let finite = [fx, fy, cx, cy, baseline].iter().all(|v| v.is_finite());
        if !finite || fx <= 0.0 || fy <= 0.0 || baseline <= 0.0 {
            return Err(Error::Config(format!(
                "intrinsics require finite values with fx, fy, baseline > 0 \
                 (fx={fx}, fy={fy}, baseline={baseline})"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            baseline,
        })
    }

    /// Normalized homogeneous coordinates `K^-1 (u, v, 1)`.
    pub fn normalize(&self, px: Pixel) -> Vector3<f64> {
        Vector3::new((px.u - self.cx) / self.fx, (px.v - self.cy) / self.fy, 1.0)
    }
}

/// Image coordinates in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn squared_distance(&self, other: &Pixel) -> f64 {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        du * du + dv * dv
    }
}

/// Projects a camera-frame point onto the image plane.
pub fn project(p: &Point3, k: &CameraIntrinsics) -> Result<Pixel> {
    if !(p.z > 0.0) {
        return Err(Error::Domain(format!(
            "cannot project point with non-positive depth {}",
            p.z
        )));
    }
    Ok(Pixel {
        u: k.fx * p.x / p.z + k.cx,
        v: k.fy * p.y / p.z + k.cy,
    })
}

/// Lifts a pixel with known depth back into the camera frame.
pub fn backproject(px: Pixel, depth: f64, k: &CameraIntrinsics) -> Result<Point3> {
    if !(depth > 0.0) {
        return Err(Error::Domain(format!(
            "cannot backproject with non-positive depth {depth}"
        )));
    }
    Ok(Point3::new(
        (px.u - k.cx) / k.fx * depth,
        (px.v - k.cy) / k.fy * depth,
        depth,
    ))
}

/// A rigid transform in SE(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, rejecting rotations that are not orthonormal with unit
    /// determinant.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(ortho <= ROTATION_TOLERANCE) || !((det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(Error::Domain(format!(
                "rotation is not in SO(3): orthogonality error {ortho:e}, det {det}"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("translation is not finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: *q.to_rotation_matrix().matrix(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut rotation = self.rotation * other.rotation;
        if orthogonality_error(&rotation) > 1e-12 {
            rotation = orthonormalize(&rotation);
        }
        Pose {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Camera center in world coordinates for a world-to-camera pose.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Rotation angle of `self^-1 * other` in radians.
    pub fn rotation_distance(&self, other: &Pose) -> f64 {
        let r = self.rotation.transpose() * other.rotation;
        rotation_angle(&r)
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn invert(a: &Pose) -> Pose {
    a.inverse()
}

pub fn transform(a: &Pose, p: &Point3) -> Point3 {
    a.transform(p)
}

/// Relative pose mapping camera-1 coordinates into camera-2 coordinates.
pub fn relative_pose(first: &Pose, second: &Pose) -> Pose {
    second.compose(&first.inverse())
}

fn orthogonality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Nearest rotation via polar decomposition.
fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = u * v_t;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * v_t;
    }
    out
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    // atan2 form stays accurate near 0 and π.
    let s = 0.5 * vee(&(r - r.transpose())).norm();
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c)
}

/// Below this squared angle the series expansions are exact to rounding.
const SMALL_ANGLE2: f64 = 1e-8;

fn one_minus_cos(theta: f64) -> f64 {
    let h = (0.5 * theta).sin();
    2.0 * h * h
}

/// Rodrigues' formula.
pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let w = skew(phi);
    let (a, b) = if theta2 < SMALL_ANGLE2 {
        (1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, one_minus_cos(theta) / theta2)
    };
    Matrix3::identity() + w * a + w * w * b
}

pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let theta = rotation_angle(r);
    let axis_part = 0.5 * vee(&(r - r.transpose()));
    if theta < 1e-6 {
        // theta / sin(theta) ≈ 1 + theta²/6
        return axis_part * (1.0 + theta * theta / 6.0);
    }
    if std::f64::consts::PI - theta < 1e-6 {
        // Near π the antisymmetric part vanishes; recover the axis from the
        // symmetric part instead.
        let b = (r + Matrix3::identity()) * 0.5;
        let col = (0..3)
            .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
            .unwrap_or(0);
        let mut axis: Vector3<f64> = b.column(col).into();
        axis /= axis.norm();
        if axis.dot(&axis_part) < 0.0 {
            axis = -axis;
        }
        return axis * theta;
    }
    axis_part * (theta / theta.sin())
}

/// Left Jacobian of SO(3), used to couple translation and rotation in the
/// SE(3) exponential.
fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let w = skew(phi);
    let (a, b) = if theta2 < SMALL_ANGLE2 {
        (
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
            1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0,
        )
    } else {
        let theta = theta2.sqrt();
        (
            one_minus_cos(theta) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + w * a + w * w * b
}

fn so3_left_jacobian_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let w = skew(phi);
    let c = if theta2 < SMALL_ANGLE2 {
        1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    } else {
        let theta = theta2.sqrt();
        (1.0 - theta * theta.sin() / (2.0 * one_minus_cos(theta))) / theta2
    };
    Matrix3::identity() - w * 0.5 + w * w * c
}

/// Exponential map from a twist `(rho, phi)` (translation part first) to a pose.
pub fn se3_exp(xi: &Vector6<f64>) -> Pose {
    let rho = Vector3::new(xi[0], xi[1], xi[2]);
    let phi = Vector3::new(xi[3], xi[4], xi[5]);
    Pose {
        rotation: so3_exp(&phi),
        translation: so3_left_jacobian(&phi) * rho,
    }
}

pub fn se3_log(p: &Pose) -> Vector6<f64> {
    let phi = so3_log(&p.rotation);
    let rho = so3_left_jacobian_inverse(&phi) * p.translation;
    Vector6::new(rho.x, rho.y, rho.z, phi.x, phi.y, phi.z)
}

/// An essential matrix `E = [t]x R` built from a relative pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix {
    matrix: Matrix3<f64>,
    degenerate: bool,
}

impl EssentialMatrix {
    pub fn from_matrix(matrix: Matrix3<f64>) -> Self {
        let degenerate = matrix.amax() < 1e-12;
        Self { matrix, degenerate }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// True for pure rotation, where no epipolar constraint exists.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Essential matrix for a pose mapping camera-1 into camera-2 coordinates;
/// normalized points satisfy `p2ᵀ E p1 = 0`.
pub fn essential_from_relative(rel: &Pose) -> EssentialMatrix {
    let degenerate = rel.translation.norm() < 1e-12;
    let matrix = if degenerate {
        Matrix3::zeros()
    } else {
        skew(&rel.translation) * rel.rotation
    };
    EssentialMatrix { matrix, degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn k100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 0.5).unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng, max_angle: f64) -> Pose {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let angle = rng.random_range(0.0..max_angle);
        let t = Vector3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        Pose::new(so3_exp(&(axis * angle)), t).unwrap()
    }

    fn pose_diff(a: &Pose, b: &Pose) -> f64 {
        (a.rotation - b.rotation)
            .amax()
            .max((a.translation - b.translation).amax())
    }

    #[test]
    fn project_examples() {
        let px = project(&Point3::new(0.0, 0.0, 1.0), &k100()).unwrap();
        assert_eq!(px, Pixel::new(50.0, 50.0));
        let px = project(&Point3::new(1.0, 0.0, 2.0), &k100()).unwrap();
        assert_eq!(px, Pixel::new(100.0, 50.0));

        // u = 520 * 0.3 / 4 + 320 = 359, v = 480 * -0.2 / 4 + 240 = 216
        let k = CameraIntrinsics::new(520.0, 480.0, 320.0, 240.0, 0.5).unwrap();
        let px = project(&Point3::new(0.3, -0.2, 4.0), &k).unwrap();
        assert_close(px.u, 359.0, 1e-12);
        assert_close(px.v, 216.0, 1e-12);
    }

    #[test]
    fn project_rejects_non_positive_depth() {
        assert!(matches!(
            project(&Point3::new(1.0, 1.0, 0.0), &k100()),
            Err(Error::Domain(_))
        ));
        assert!(project(&Point3::new(1.0, 1.0, -2.0), &k100()).is_err());
    }

    #[test]
    fn backproject_examples() {
        let p = backproject(Pixel::new(50.0, 50.0), 3.0, &k100()).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 3.0));
        let p = backproject(Pixel::new(100.0, 50.0), 2.0, &k100()).unwrap();
        assert_eq!(p, Point3::new(1.0, 0.0, 2.0));
        assert!(backproject(Pixel::new(1.0, 1.0), 0.0, &k100()).is_err());
        assert!(backproject(Pixel::new(1.0, 1.0), -1.0, &k100()).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(CameraIntrinsics::new(1.0, -1.0, 0.0, 0.0, 1.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pose_group_examples() {
        let id = Pose::identity();
        assert_eq!(invert(&id), id);

        let t = Pose::from_translation(Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(
            transform(&t, &Point3::new(1.0, 1.0, 1.0)),
            Point3::new(1.0, 1.0, 2.0)
        );

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = random_pose(&mut rng, 3.0);
            let b = random_pose(&mut rng, 3.0);
            let c = random_pose(&mut rng, 3.0);
            assert!(pose_diff(&compose(&a, &invert(&a)), &id) < 1e-9);
            assert!(pose_diff(&compose(&id, &a), &a) < 1e-12);
            let left = compose(&compose(&a, &b), &c);
            let right = compose(&a, &compose(&b, &c));
            assert!(pose_diff(&left, &right) < 1e-9);
            let p = Point3::new(1.0, -2.0, 3.0);
            let direct = transform(&compose(&a, &b), &p);
            let chained = transform(&a, &transform(&b, &p));
            assert!((direct - chained).amax() < 1e-9);
        }
    }

    #[test]
    fn pose_new_rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Pose::new(m, Vector3::zeros()).is_err());
        assert!(Pose::new(Matrix3::identity() * 1.01, Vector3::zeros()).is_err());
    }

    #[test]
    fn rotation_stays_orthonormal_after_many_compositions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut acc = Pose::identity();
        for _ in 0..1000 {
            acc = acc.compose(&random_pose(&mut rng, 3.0));
        }
        assert!(orthogonality_error(&acc.rotation) < 1e-6);
        assert!((acc.rotation.determinant() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn essential_examples() {
        let e = essential_from_relative(&Pose::identity());
        assert!(e.is_degenerate());
        assert_eq!(*e.matrix(), Matrix3::zeros());

        let e = essential_from_relative(&Pose::from_translation(Vector3::new(1.0, 0.0, 0.0)));
        assert!(!e.is_degenerate());
        let expected = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_eq!(*e.matrix(), expected);
    }

    #[test]
    fn essential_constraint_and_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 0.5).unwrap();
        for _ in 0..20 {
            let rel = random_pose(&mut rng, 0.3);
            let e = essential_from_relative(&rel);
            let sv = e.matrix().singular_values();
            let (max, min) = (sv.max(), sv.min());
            assert!(min < 1e-9 * max);

            let mut worst: f64 = 0.0;
            let mut used = 0;
            while used < 50 {
                let p1 = Point3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(1.0..30.0),
                );
                let p2 = rel.transform(&p1);
                if p2.z <= 0.1 {
                    continue;
                }
                used += 1;
                let x1 = k.normalize(project(&p1, &k).unwrap());
                let x2 = k.normalize(project(&p2, &k).unwrap());
                worst = worst.max((x2.transpose() * e.matrix() * x1)[0].abs());
            }
            assert!(worst < 1e-9, "epipolar residual {worst}");
        }
    }

    #[test]
    fn se3_exp_examples() {
        assert_eq!(se3_exp(&Vector6::zeros()), Pose::identity());
        let theta = 0.7;
        let p = se3_exp(&Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, theta));
        let (s, c) = theta.sin_cos();
        let rz = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        assert!((p.rotation - rz).amax() < 1e-15);
        assert_eq!(p.translation, Vector3::zeros());
    }

    #[test]
    fn se3_round_trip_random_twists() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let xi = Vector6::from_fn(|_, _| rng.random_range(-0.5..0.5));
            let back = se3_log(&se3_exp(&xi));
            worst = worst.max((back - xi).amax());
            let p = se3_exp(&xi);
            worst = worst.max(pose_diff(&se3_exp(&se3_log(&p)), &p));
        }
        assert!(worst < 1e-9, "max deviation {worst}");
    }

    #[test]
    fn se3_round_trip_near_pi_and_tiny_angles() {
        for angle in [1e-12, 1e-7, 1e-3, 3.0, std::f64::consts::PI - 1e-4] {
            let xi = Vector6::new(0.3, -0.2, 1.0, 0.0, angle, 0.0);
            let p = se3_exp(&xi);
            assert!(pose_diff(&se3_exp(&se3_log(&p)), &p) < 1e-9, "angle {angle}");
        }
    }

    proptest! {
        #[test]
        fn project_backproject_inverse(u in -500.0..1500.0f64, v in -500.0..1500.0f64, d in 0.01..200.0f64) {
            let k = CameraIntrinsics::new(520.0, 480.0, 320.0, 240.0, 0.5).unwrap();
            let p = backproject(Pixel::new(u, v), d, &k).unwrap();
            prop_assert_eq!(p.z, d);
            let back = project(&p, &k).unwrap();
            prop_assert!((back.u - u).abs() < 1e-9 && (back.v - v).abs() < 1e-9);
        }
    }
}
