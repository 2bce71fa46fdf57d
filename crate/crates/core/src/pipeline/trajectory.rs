//! Trajectory files and absolute translation error.
//!
//! File format, one frame per line:
//! `frame_id tx ty tz qx qy qz qw`, the camera position and orientation in
//! the world (camera-to-world), quaternion scalar-last.

use std::io::{BufRead, Write};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::geometry::Pose;
use crate::{Error, Result};

/// RMSE of camera-center differences after aligning the first estimated
/// pose onto the first ground-truth pose. The alignment frame itself is
/// excluded from the mean.
pub fn ate(estimated: &[Pose], ground_truth: &[Pose]) -> Result<f64> {
    if estimated.len() != ground_truth.len() {
        return Err(Error::Domain(format!(
            "trajectory lengths differ: {} vs {}",
            estimated.len(),
            ground_truth.len()
        )));
    }
    if estimated.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 poses, got {}",
            estimated.len()
        )));
    }
    let align = estimated[0].inverse().compose(&ground_truth[0]);
    let sum: f64 = estimated
        .iter()
        .zip(ground_truth)
        .skip(1)
        .map(|(e, g)| (e.compose(&align).center() - g.center()).norm_squared())
        .sum();
    Ok((sum / (estimated.len() - 1) as f64).sqrt())
}

pub fn write_trajectory<W: Write>(poses: &[(i64, Pose)], mut out: W) -> Result<()> {
    writeln!(out, "# frame_id tx ty tz qx qy qz qw")?;
    for (id, pose) in poses {
        let c = pose.center();
        let q = pose.inverse().quaternion();
        let q = q.quaternion();
        writeln!(
            out,
            "{id} {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
            c.x, c.y, c.z, q.i, q.j, q.k, q.w
        )?;
    }
    Ok(())
}

pub fn parse_trajectory<R: BufRead>(input: R) -> Result<Vec<(i64, Pose)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(Error::parse(i + 1, format!("expected 8 fields, found {}", fields.len())));
        }
        let id = fields[0]
            .parse::<i64>()
            .map_err(|_| Error::parse(i + 1, format!("`{}` is not a frame id", fields[0])))?;
        let mut v = [0.0; 7];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = match f.parse::<f64>() {
                Ok(x) if x.is_finite() => x,
                _ => return Err(Error::parse(i + 1, format!("`{f}` is not a finite number"))),
            };
        }
        let q = Quaternion::new(v[6], v[3], v[4], v[5]);
        if !((q.norm() - 1.0).abs() < 1e-6) {
            return Err(Error::parse(i + 1, format!("quaternion norm {} is not 1", q.norm())));
        }
        let camera_to_world = Pose::from_quaternion(&UnitQuaternion::from_quaternion(q), Vector3::new(v[0], v[1], v[2]));
        out.push((id, camera_to_world.inverse()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::se3_exp;
    use nalgebra::Vector6;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_trajectory(rng: &mut ChaCha8Rng, n: usize) -> Vec<Pose> {
        (0..n)
            .map(|_| se3_exp(&Vector6::from_fn(|_, _| rng.random_range(-2.0..2.0))))
            .collect()
    }

    #[test]
    fn identical_trajectories() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_trajectory(&mut rng, 10);
        assert!(ate(&t, &t).unwrap() < 1e-12);
    }

    #[test]
    fn constant_offset_after_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gt = random_trajectory(&mut rng, 12);
        let offset = Vector3::new(0.6, 0.0, 0.8);
        let mut est = vec![gt[0]];
        for g in &gt[1..] {
            // Move the camera center by `offset` in the world.
            let shifted = Pose::new(*g.rotation(), g.translation() - g.rotation() * offset).unwrap();
            est.push(shifted);
        }
        assert!((ate(&est, &gt).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = random_trajectory(&mut rng, 15);
        let g = se3_exp(&Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0)));
        // Estimated trajectory in another world frame plus noise.
        let est: Vec<Pose> = gt
            .iter()
            .map(|p| {
                let noise = se3_exp(&Vector6::from_fn(|_, _| rng.random_range(-0.05..0.05)));
                noise.compose(p).compose(&g)
            })
            .collect();
        // Oracle: express everything relative to the first camera.
        let mut sum = 0.0;
        for i in 1..gt.len() {
            let e_rel = est[i].compose(&est[0].inverse());
            let g_rel = gt[i].compose(&gt[0].inverse());
            let e_c = gt[0].inverse().transform(&e_rel.inverse().transform(&crate::geometry::Point3::origin()));
            let g_c = gt[0].inverse().transform(&g_rel.inverse().transform(&crate::geometry::Point3::origin()));
            sum += (e_c - g_c).norm_squared();
        }
        let oracle = (sum / (gt.len() - 1) as f64).sqrt();
        assert!((ate(&est, &gt).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn length_errors() {
        let t = vec![Pose::identity(); 3];
        assert!(matches!(ate(&t, &t[..2]), Err(Error::Domain(_))));
        assert!(ate(&t[..1], &t[..1]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let poses: Vec<(i64, Pose)> = random_trajectory(&mut rng, 8).into_iter().enumerate().map(|(i, p)| (i as i64, p)).collect();
        let mut buf = Vec::new();
        write_trajectory(&poses, &mut buf).unwrap();
        let back = parse_trajectory(&buf[..]).unwrap();
        assert_eq!(back.len(), poses.len());
        for ((ia, a), (ib, b)) in poses.iter().zip(&back) {
            assert_eq!(ia, ib);
            assert!(a.rotation_distance(b) < 1e-12);
            assert!(a.translation_distance(b) < 1e-12);
        }
        assert!(matches!(parse_trajectory("0 1 2 3\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_trajectory("# h\n0 1 2 3 0 0 0 2\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
