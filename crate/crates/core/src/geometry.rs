//! Shared geometric primitives: rotations in roll/pitch/yaw form, oriented
//! box vs. axis-aligned box separation, and exact segment vs. box distance.

use nalgebra::{Matrix3, Rotation3, Vector3};

pub type Vec3 = Vector3<f64>;

/// World up axis. Gravity acts along `-UP`.
pub const UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Rotation matrix `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rpy_matrix(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// Extracts `(roll, pitch, yaw)` from a rotation matrix using the Z-Y-X
/// convention:
///
/// * yaw   = atan2(R21, R11)
/// * pitch = atan2(-R31, sqrt(R32² + R33²))
/// * roll  = atan2(R32, R33)
///
/// At gimbal lock (`|pitch| = π/2`) roll is pinned to zero and the fused
/// angle is reported as yaw.
pub fn matrix_rpy(m: &Matrix3<f64>) -> [f64; 3] {
    let r11 = m[(0, 0)];
    let r21 = m[(1, 0)];
    let r31 = m[(2, 0)];
    let r32 = m[(2, 1)];
    let r33 = m[(2, 2)];
    let cos_pitch = (r32 * r32 + r33 * r33).sqrt();
    let pitch = (-r31).atan2(cos_pitch);
    if cos_pitch < 1e-12 {
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        return [0.0, pitch, yaw];
    }
    [r32.atan2(r33), pitch, r21.atan2(r11)]
}

pub fn yaw_matrix(yaw: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vec3::z_axis(), yaw).matrix()
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a % TAU;
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// Axis-aligned box given by its min and max corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn half_extents(&self) -> Vec3 {
        (self.max - self.min) * 0.5
    }

    pub fn clamp_point(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Outward normal of the face nearest to an interior point. Ties resolve
    /// in the order -x, +x, -y, +y, -z, +z.
    pub fn nearest_face_normal(&self, p: &Vec3) -> Vec3 {
        let mut best = f64::INFINITY;
        let mut normal = Vec3::zeros();
        for axis in 0..3 {
            for (dist, sign) in [
                (p[axis] - self.min[axis], -1.0),
                (self.max[axis] - p[axis], 1.0),
            ] {
                if dist < best {
                    best = dist;
                    normal = Vec3::zeros();
                    normal[axis] = sign;
                }
            }
        }
        normal
    }
}

/// Oriented box: center, rotation (columns are the box axes in world frame)
/// and half extents along those axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec3,
    pub rotation: Matrix3<f64>,
    pub half_extents: Vec3,
}

impl Obb {
    pub fn bounding_aabb(&self) -> Aabb {
        let abs = self.rotation.abs();
        let reach = abs * self.half_extents;
        Aabb {
            min: self.center - reach,
            max: self.center + reach,
        }
    }

    fn axis(&self, i: usize) -> Vec3 {
        self.rotation.column(i).into_owned()
    }
}

/// Separating-axis test between an oriented box and an axis-aligned box.
///
/// Returns true only for a positive-volume overlap: projections must overlap
/// by more than `eps` on every candidate axis, so boxes that merely share a
/// face are reported as disjoint.
pub fn obb_aabb_overlap(obb: &Obb, aabb: &Aabb, eps: f64) -> bool {
    let b_center = aabb.center();
    let b_half = aabb.half_extents();
    let delta = obb.center - b_center;

    let world = [Vec3::x(), Vec3::y(), Vec3::z()];
    let own = [obb.axis(0), obb.axis(1), obb.axis(2)];

    let separated_on = |axis: &Vec3| -> bool {
        let len = axis.norm();
        if len < 1e-9 {
            return false;
        }
        let l = axis / len;
        let ra: f64 = (0..3)
            .map(|i| obb.half_extents[i] * own[i].dot(&l).abs())
            .sum();
        let rb: f64 = (0..3).map(|i| b_half[i] * l[i].abs()).sum();
        delta.dot(&l).abs() >= ra + rb - eps
    };

    for axis in world.iter().chain(own.iter()) {
        if separated_on(axis) {
            return false;
        }
    }
    for a in &own {
        for w in &world {
            if separated_on(&a.cross(w)) {
                return false;
            }
        }
    }
    true
}

/// Closest pair between the segment `a + t (b - a)`, `t ∈ [0, 1]`, and a box.
///
/// Returns `(segment_point, box_point, distance)`. The squared distance from
/// a moving point to a box is a convex piecewise quadratic in `t`; each piece
/// between face-crossing breakpoints is minimized in closed form.
pub fn segment_aabb_closest(a: &Vec3, b: &Vec3, aabb: &Aabb) -> (Vec3, Vec3, f64) {
    let dir = b - a;
    let mut breaks = vec![0.0, 1.0];
    for i in 0..3 {
        if dir[i].abs() > 0.0 {
            for bound in [aabb.min[i], aabb.max[i]] {
                let t = (bound - a[i]) / dir[i];
                if t > 0.0 && t < 1.0 {
                    breaks.push(t);
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);

    let dist2 = |t: f64| -> f64 {
        let p = a + dir * t;
        (p - aabb.clamp_point(&p)).norm_squared()
    };

    let mut best_t = 0.0;
    let mut best_d = dist2(0.0);
    let consider = |t: f64, best_t: &mut f64, best_d: &mut f64| {
        let d = dist2(t);
        if d < *best_d {
            *best_d = d;
            *best_t = t;
        }
    };
    for w in breaks.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        consider(t1, &mut best_t, &mut best_d);
        if t1 - t0 <= 0.0 {
            continue;
        }
        let mid = a + dir * (0.5 * (t0 + t1));
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..3 {
            let bound = if mid[i] < aabb.min[i] {
                aabb.min[i]
            } else if mid[i] > aabb.max[i] {
                aabb.max[i]
            } else {
                continue;
            };
            num -= dir[i] * (a[i] - bound);
            den += dir[i] * dir[i];
        }
        if den > 0.0 {
            consider((num / den).clamp(t0, t1), &mut best_t, &mut best_d);
        }
    }
    let p = a + dir * best_t;
    let q = aabb.clamp_point(&p);
    (p, q, best_d.sqrt())
}
