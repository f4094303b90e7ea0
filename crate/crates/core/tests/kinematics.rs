mod common;

use common::*;
use nalgebra::{UnitQuaternion, Vector3, Vector4};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stairwise::geometry::{matrix_rpy, rpy_matrix};
use stairwise::kinematics::{
    leg_fk, leg_ik, level_stance_paws, solve_state, standing_height_max, RobotConfig, LEG_COUNT,
};

/// Angles inside the limits whose paw stays below the hip in the leg plane,
/// which is the branch the analytic solver returns.
fn random_angles(r: &mut ChaCha8Rng, c: &RobotConfig) -> [f64; 3] {
    loop {
        let a: [f64; 3] =
            std::array::from_fn(|j| r.random_range(c.joint_limits[j][0]..c.joint_limits[j][1]));
        let (hip, knee) = (a[1], a[2]);
        let planar_z = -c.l_thigh * hip.cos() - c.l_shank * (hip + knee).cos();
        if knee < -1e-3 && planar_z < -0.02 {
            return a;
        }
    }
}

fn random_rotation(r: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let v = Vector4::from_fn(|_, _| r.random_range(-1.0..1.0));
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(v))
}

#[test]
fn fk_then_ik_then_fk_round_trips() {
    let c = RobotConfig::default();
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let leg = i % LEG_COUNT;
        let target = leg_fk(&random_angles(&mut r, &c), &c, leg);
        let back = leg_fk(&leg_ik(&target, &c, leg).unwrap(), &c, leg);
        worst = worst.max((back - target).norm());
    }
    assert!(worst < 1e-9, "worst error {worst}");
}

#[test]
fn sampled_reachable_targets_round_trip() {
    let c = RobotConfig::default();
    let mut r = rng(12);
    let reach = c.max_reach();
    let mut solved = 0;
    while solved < 1000 {
        let leg = solved % LEG_COUNT;
        let target = Vector3::new(
            r.random_range(-reach..reach),
            r.random_range(-reach..reach),
            r.random_range(-reach..0.0),
        );
        let Ok(angles) = leg_ik(&target, &c, leg) else {
            continue;
        };
        let err = (leg_fk(&angles, &c, leg) - target).norm();
        assert!(err < 1e-9, "target {target:?}: error {err}");
        solved += 1;
    }
}

#[test]
fn ik_recovers_generating_angles() {
    let c = RobotConfig::default();
    let mut r = rng(13);
    for i in 0..1000 {
        let leg = i % LEG_COUNT;
        let a = random_angles(&mut r, &c);
        let back = leg_ik(&leg_fk(&a, &c, leg), &c, leg).unwrap();
        for j in 0..3 {
            assert!((back[j] - a[j]).abs() < 1e-9, "leg {leg} {a:?} -> {back:?}");
        }
    }
}

#[test]
fn rotations_round_trip_through_angles() {
    let mut r = rng(14);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = *random_rotation(&mut r).to_rotation_matrix().matrix();
        let [roll, pitch, yaw] = matrix_rpy(&m);
        worst = worst.max((rpy_matrix(roll, pitch, yaw) - m).abs().max());
    }
    assert!(worst < 1e-9, "worst entry error {worst}");
}

#[test]
fn angle_convention_matches_elementary_rotations() {
    let mut r = rng(15);
    for _ in 0..1000 {
        let (roll, pitch, yaw) = (
            r.random_range(-3.1..3.1),
            r.random_range(-1.5..1.5),
            r.random_range(-3.1..3.1),
        );
        let diff = (rpy_matrix(roll, pitch, yaw) - oracle_rpy(roll, pitch, yaw))
            .abs()
            .max();
        assert!(diff < 1e-12);
        let back = matrix_rpy(&rpy_matrix(roll, pitch, yaw));
        for (a, b) in back.iter().zip([roll, pitch, yaw]) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn fk_generated_stances_are_recovered() {
    let c = RobotConfig::default();
    let mut r = rng(16);
    for _ in 0..200 {
        let position = Vector3::new(
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(0.0..1.0),
        );
        let orientation = [
            r.random_range(-0.4..0.4),
            r.random_range(-0.4..0.4),
            r.random_range(-3.1..3.1),
        ];
        let rot = rpy_matrix(orientation[0], orientation[1], orientation[2]);
        let joints: [[f64; 3]; LEG_COUNT] = std::array::from_fn(|_| random_angles(&mut r, &c));
        let paws = std::array::from_fn(|leg| {
            position + rot * (Vector3::from(c.hip_offsets[leg]) + leg_fk(&joints[leg], &c, leg))
        });
        let s = solve_state(&position, &orientation, &paws, &c).unwrap();
        for (got, want) in s.joints.iter().flatten().zip(joints.iter().flatten()) {
            assert!((got - want).abs() < 1e-9);
        }
        let back = s.paws(&c);
        for leg in 0..LEG_COUNT {
            assert!((back[leg] - paws[leg]).norm() < 1e-9);
        }
    }
}

#[test]
fn standing_height_is_the_bisection_limit() {
    for margin in [0.0, 0.02, 0.05] {
        let c = RobotConfig {
            standing_margin: margin,
            ..Default::default()
        };
        let h = standing_height_max(&c);
        let solvable = |depth: f64| {
            let p = Vector3::new(0.0, 0.0, 1.0);
            solve_state(&p, &[0.0; 3], &level_stance_paws(&p, 0.0, depth, &c), &c).is_ok()
        };
        // Largest solvable depth up to the margin-limited cap, by bisection.
        let cap = c.l_thigh + c.l_shank - margin;
        let (mut lo, mut hi) = (0.0, cap + 0.01);
        if solvable(cap) {
            lo = cap;
        } else {
            while hi - lo > 1e-4 {
                let mid = 0.5 * (lo + hi);
                if solvable(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        assert!((h - lo).abs() < 1e-3, "margin {margin}: {h} vs {lo}");
        assert!(solvable(h));
    }
}

proptest! {
    #[test]
    fn mirrored_targets_negate_abduction(x in -0.1f64..0.1, y in 0.0f64..0.08, z in -0.28f64..-0.15) {
        let c = RobotConfig::default();
        for (left, right) in [(0, 1), (2, 3)] {
            let l = leg_ik(&Vector3::new(x, y, z), &c, left);
            let r = leg_ik(&Vector3::new(x, -y, z), &c, right);
            match (l, r) {
                (Ok(l), Ok(r)) => {
                    prop_assert!((l[0] + r[0]).abs() < 1e-12);
                    prop_assert!((l[1] - r[1]).abs() < 1e-12);
                    prop_assert!((l[2] - r[2]).abs() < 1e-12);
                }
                (l, r) => prop_assert_eq!(l.is_ok(), r.is_ok()),
            }
        }
    }

    #[test]
    fn out_of_reach_targets_fail(dir in prop::array::uniform3(-1.0f64..1.0), extra in 0.001f64..1.0) {
        let c = RobotConfig::default();
        let d = Vector3::from(dir);
        prop_assume!(d.norm() > 1e-3);
        let t = d.normalize() * (c.max_reach() + extra);
        prop_assert!(leg_ik(&t, &c, 0).is_err());
    }
}
