//! Per-step translation and rotation increments.

use crate::geometry::{matrix_rpy, rpy_matrix, yaw_matrix, Vec3, UP};
use nalgebra::Matrix3;

/// Translation toward the repelled waypoint: `g + d - q_p`.
pub fn compute_delta_p(waypoint: &Vec3, repulsive: &Vec3, position: &Vec3) -> Vec3 {
    waypoint + repulsive - position
}

/// Current trunk frame and the frame the trunk should turn toward.
#[derive(Debug, Clone, PartialEq)]
pub struct Origins {
    pub current: Matrix3<f64>,
    pub target: Matrix3<f64>,
}

const DEGENERATE: f64 = 1e-9;

impl Origins {
    /// Target frame whose x axis is the heading `delta_p` and whose z axis is
    /// the world up vector made orthogonal to it. When `delta_p` is parallel
    /// to up, the target keeps the current yaw and is level.
    pub fn from_heading(current: Matrix3<f64>, delta_p: &Vec3) -> Self {
        let target = heading_frame(delta_p).unwrap_or_else(|| {
            let [_, _, yaw] = matrix_rpy(&current);
            yaw_matrix(yaw)
        });
        Self { current, target }
    }

    /// Roll/pitch/yaw of the rotation taking the current frame onto the target,
    /// expressed in the current frame: `target = current · R(δr)`.
    pub fn rotation_delta(&self) -> Vec3 {
        let rel = self.current.transpose() * self.target;
        Vec3::from(matrix_rpy(&rel))
    }
}

fn heading_frame(delta_p: &Vec3) -> Option<Matrix3<f64>> {
    let len = delta_p.norm();
    if len < DEGENERATE {
        return None;
    }
    let x = delta_p / len;
    let z = UP - x * UP.dot(&x);
    let zn = z.norm();
    if zn < DEGENERATE {
        return None;
    }
    let z = z / zn;
    let y = z.cross(&x);
    Some(Matrix3::from_columns(&[x, y, z]))
}

/// Rotation increment `(roll, pitch, yaw)` from the current trunk frame
/// toward the heading of `delta_p`. A zero-length heading yields no rotation.
pub fn compute_rotation_delta(current: &Matrix3<f64>, delta_p: &Vec3) -> Vec3 {
    if delta_p.norm() < DEGENERATE {
        return Vec3::zeros();
    }
    Origins::from_heading(*current, delta_p).rotation_delta()
}

/// Rotation matrix of a roll/pitch/yaw increment.
pub fn delta_rotation(delta_r: &Vec3) -> Matrix3<f64> {
    rpy_matrix(delta_r.x, delta_r.y, delta_r.z)
}

/// Rescales each vector to the given norm when it exceeds it.
pub fn clamp_deltas(delta_p: &Vec3, delta_r: &Vec3, p_max: f64, r_max: f64) -> (Vec3, Vec3) {
    (clamp_norm(delta_p, p_max), clamp_norm(delta_r, r_max))
}

// The relative slack keeps clamping idempotent under rounding.
fn clamp_norm(v: &Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max * (1.0 + 1e-12) {
        v * (max / n)
    } else {
        *v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn delta_p_examples() {
        let z = Vec3::zeros();
        let g = Vec3::new(0.3, -0.2, 0.1);
        assert_eq!(compute_delta_p(&g, &z, &g), z);
        assert_eq!(
            compute_delta_p(&Vec3::new(1.0, 0.0, 0.0), &Vec3::new(0.0, 0.0, 0.1), &z),
            Vec3::new(1.0, 0.0, 0.1)
        );
    }

    #[test]
    fn aligned_frames_give_zero() {
        let d = compute_rotation_delta(&Matrix3::identity(), &Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(d, Vec3::zeros());
    }

    #[test]
    fn quarter_turn_left() {
        let d = compute_rotation_delta(&Matrix3::identity(), &Vec3::new(0.0, 0.2, 0.0));
        assert_relative_eq!(d, Vec3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-15);
    }

    #[test]
    fn heading_frame_is_right_handed_with_up_in_plane() {
        let dp = Vec3::new(0.3, -0.1, 0.2);
        let o = Origins::from_heading(Matrix3::identity(), &dp);
        let t = o.target;
        assert_relative_eq!(t.column(0).into_owned(), dp.normalize(), epsilon = 1e-15);
        assert_relative_eq!(t.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.transpose() * t, Matrix3::identity(), epsilon = 1e-12);
        // third axis lies in span(δp, up)
        let n = dp.cross(&UP);
        assert!(t.column(2).dot(&n).abs() < 1e-12);
        assert!(t.column(2).dot(&UP) > 0.0);
    }

    #[test]
    fn vertical_heading_keeps_yaw() {
        let current = rpy_matrix(0.1, 0.2, 0.7);
        let o = Origins::from_heading(current, &Vec3::new(0.0, 0.0, 0.3));
        let [r, p, y] = matrix_rpy(&o.target);
        assert_eq!((r, p), (0.0, 0.0));
        assert_relative_eq!(y, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn propagating_the_delta_reaches_target() {
        let current = rpy_matrix(0.05, -0.1, 0.4);
        let dp = Vec3::new(-0.2, 0.3, 0.05);
        let o = Origins::from_heading(current, &dp);
        let dr = o.rotation_delta();
        assert_relative_eq!(current * delta_rotation(&dr), o.target, epsilon = 1e-12);
    }

    #[test]
    fn clamp_examples() {
        let half = Vec3::new(0.015, 0.0, 0.0);
        let (p, _) = clamp_deltas(&half, &Vec3::zeros(), 0.03, 0.05);
        assert_eq!(p, half);
        let (p, r) = clamp_deltas(
            &Vec3::new(0.06, 0.0, 0.0),
            &Vec3::new(0.0, 0.3, 0.4),
            0.03,
            0.05,
        );
        assert_eq!(p, Vec3::new(0.03, 0.0, 0.0));
        assert_relative_eq!(r.norm(), 0.05, epsilon = 1e-15);
        let (p2, r2) = clamp_deltas(&p, &r, 0.03, 0.05);
        assert_eq!((p2, r2), (p, r));
    }
}
