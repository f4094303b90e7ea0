//! Analytic kinematics of one three-joint leg.
//!
//! With all joints at zero the leg hangs straight down from the abduction
//! link: the paw sits at `(0, ±l_abd, -(l_thigh + l_shank))` relative to the
//! hip. Abduction rotates about the trunk x axis; hip pitch and knee rotate
//! about the abducted y axis, positive angles swinging the distal link
//! backwards. The knee bends backwards, so valid knee angles are ≤ 0.

use super::config::{leg_side, RobotConfig};
use crate::geometry::{wrap_angle, Vec3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LegError {
    #[error("target out of reach")]
    Unreachable,
    #[error("joint {joint} angle {angle:.4} outside limits")]
    JointLimit { joint: usize, angle: f64 },
}

const LIMIT_SLACK: f64 = 1e-12;
const COS_SLACK: f64 = 1e-9;

/// Knee and paw positions relative to the hip, in the trunk frame.
pub fn leg_points(angles: &[f64; 3], config: &RobotConfig, leg: usize) -> (Vec3, Vec3, Vec3) {
    let s = leg_side(leg);
    let [abd, hip, knee] = *angles;
    let (sa, ca) = abd.sin_cos();
    let rot_x = |v: Vec3| Vec3::new(v.x, v.y * ca - v.z * sa, v.y * sa + v.z * ca);
    let lateral = Vec3::new(0.0, s * config.l_abd, 0.0);
    let knee_local = Vec3::new(
        -config.l_thigh * hip.sin(),
        s * config.l_abd,
        -config.l_thigh * hip.cos(),
    );
    let paw_local = knee_local
        + Vec3::new(
            -config.l_shank * (hip + knee).sin(),
            0.0,
            -config.l_shank * (hip + knee).cos(),
        );
    (rot_x(lateral), rot_x(knee_local), rot_x(paw_local))
}

/// Paw position relative to the hip joint, in the trunk frame.
pub fn leg_fk(angles: &[f64; 3], config: &RobotConfig, leg: usize) -> Vec3 {
    leg_points(angles, config, leg).2
}

/// Closed-form inverse kinematics on the knee-backward branch with the paw
/// below the hip in the leg plane.
pub fn leg_ik(target: &Vec3, config: &RobotConfig, leg: usize) -> Result<[f64; 3], LegError> {
    let s = leg_side(leg);
    let (lt, ls, la) = (config.l_thigh, config.l_shank, config.l_abd);
    if target.norm() > config.max_reach() + COS_SLACK {
        return Err(LegError::Unreachable);
    }

    // Frontal plane: (s·l_abd, z') rotated by the abduction angle lands on
    // the target's (y, z) projection.
    let frontal2 = target.y * target.y + target.z * target.z;
    let planar2 = frontal2 - la * la;
    if planar2 < 0.0 {
        return Err(LegError::Unreachable);
    }
    let z_leg = -planar2.sqrt();
    let abd = wrap_angle(target.z.atan2(target.y) - z_leg.atan2(s * la));

    // Sagittal two-link subproblem in the abducted frame.
    let u = -target.x;
    let v = -z_leg;
    let mut c = (u * u + v * v - lt * lt - ls * ls) / (2.0 * lt * ls);
    if !(-1.0 - COS_SLACK..=1.0 + COS_SLACK).contains(&c) {
        return Err(LegError::Unreachable);
    }
    c = c.clamp(-1.0, 1.0);
    let knee = -c.acos();
    let hip = wrap_angle(u.atan2(v) - (ls * knee.sin()).atan2(lt + ls * knee.cos()));

    let angles = [abd, hip, knee];
    for (joint, (&angle, [lo, hi])) in angles.iter().zip(config.joint_limits).enumerate() {
        if angle < lo - LIMIT_SLACK || angle > hi + LIMIT_SLACK {
            return Err(LegError::JointLimit { joint, angle });
        }
    }
    Ok(angles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_configuration() {
        let c = RobotConfig::default();
        for leg in 0..4 {
            let p = leg_fk(&[0.0; 3], &c, leg);
            assert_relative_eq!(
                p,
                Vec3::new(0.0, leg_side(leg) * c.l_abd, -(c.l_thigh + c.l_shank))
            );
            let angles = leg_ik(&p, &c, leg).unwrap();
            for a in angles {
                assert!(a.abs() < 1e-7, "{angles:?}");
            }
        }
    }

    #[test]
    fn right_angle_knee() {
        let c = RobotConfig::default();
        let p = leg_fk(&[0.0, 0.0, FRAC_PI_2], &c, 0);
        assert_relative_eq!(
            p,
            Vec3::new(-c.l_shank, c.l_abd, -c.l_thigh),
            epsilon = 1e-15
        );
        let p = leg_fk(&[0.0, 0.0, -FRAC_PI_2], &c, 1);
        assert_relative_eq!(
            p,
            Vec3::new(c.l_shank, -c.l_abd, -c.l_thigh),
            epsilon = 1e-15
        );
    }

    #[test]
    fn out_of_reach() {
        let c = RobotConfig::default();
        let far = Vec3::new(0.0, 0.0, -(c.max_reach() + 0.01));
        assert_eq!(leg_ik(&far, &c, 0), Err(LegError::Unreachable));
        // Inside the abduction cylinder.
        assert_eq!(
            leg_ik(&Vec3::new(0.0, 0.0, -0.01), &c, 0),
            Err(LegError::Unreachable)
        );
    }

    #[test]
    fn joint_limit_violation() {
        let c = RobotConfig::default();
        // Paw far in front of the hip needs more hip flexion than allowed.
        let p = leg_fk(&[0.0, -1.2, -0.3], &c, 0);
        assert!(leg_ik(&p, &c, 0).is_ok());
        let mut tight = c.clone();
        tight.joint_limits[1] = [-1.0, 1.0];
        assert!(matches!(
            leg_ik(&p, &tight, 0),
            Err(LegError::JointLimit { joint: 1, .. })
        ));
    }

    #[test]
    fn mirror_symmetry() {
        let c = RobotConfig::default();
        let left = Vec3::new(0.03, 0.07, -0.2);
        let right = Vec3::new(left.x, -left.y, left.z);
        let l = leg_ik(&left, &c, 0).unwrap();
        let r = leg_ik(&right, &c, 1).unwrap();
        assert_relative_eq!(l[0], -r[0], epsilon = 1e-12);
        assert_relative_eq!(l[1], r[1], epsilon = 1e-12);
        assert_relative_eq!(l[2], r[2], epsilon = 1e-12);
    }
}
