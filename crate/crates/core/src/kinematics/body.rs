use super::config::{leg_side, RobotConfig, LEG_COUNT};
use super::leg::{leg_fk, leg_ik, leg_points, LegError};
use crate::geometry::{obb_aabb_overlap, rpy_matrix, segment_aabb_closest, Obb, Vec3, UP};
use crate::maps::VoxelMap;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Full robot configuration: trunk position (m), trunk roll/pitch/yaw (rad)
/// and three joint angles per leg, 18 scalars in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: [f64; 3],
    pub orientation: [f64; 3],
    pub joints: [[f64; 3]; LEG_COUNT],
}

impl RobotState {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let [r, p, y] = self.orientation;
        rpy_matrix(r, p, y)
    }

    pub fn to_tuple(&self) -> [f64; 18] {
        let mut out = [0.0; 18];
        out[..3].copy_from_slice(&self.position);
        out[3..6].copy_from_slice(&self.orientation);
        for (leg, j) in self.joints.iter().enumerate() {
            out[6 + 3 * leg..9 + 3 * leg].copy_from_slice(j);
        }
        out
    }

    /// World position of a hip joint.
    pub fn hip(&self, config: &RobotConfig, leg: usize) -> Vec3 {
        self.position() + self.rotation() * Vec3::from(config.hip_offsets[leg])
    }

    /// World position of every paw, by forward kinematics.
    pub fn paws(&self, config: &RobotConfig) -> [Vec3; LEG_COUNT] {
        let rot = self.rotation();
        std::array::from_fn(|leg| {
            self.hip(config, leg) + rot * leg_fk(&self.joints[leg], config, leg)
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("inverse kinematics failed for legs {}", describe(.0))]
    Legs(Vec<(usize, LegError)>),
}

fn describe(failures: &[(usize, LegError)]) -> String {
    failures
        .iter()
        .map(|(leg, e)| format!("{}: {e}", super::config::LEG_NAMES[*leg]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Expresses each world paw target in its hip frame and solves every leg.
/// All failing legs are reported.
pub fn solve_state(
    position: &Vec3,
    orientation: &[f64; 3],
    paws: &[Vec3; LEG_COUNT],
    config: &RobotConfig,
) -> Result<RobotState, SolveError> {
    let rot = rpy_matrix(orientation[0], orientation[1], orientation[2]);
    let inv = rot.transpose();
    let mut joints = [[0.0; 3]; LEG_COUNT];
    let mut failures = Vec::new();
    for leg in 0..LEG_COUNT {
        let rel = inv * (paws[leg] - position) - Vec3::from(config.hip_offsets[leg]);
        match leg_ik(&rel, config, leg) {
            Ok(a) => joints[leg] = a,
            Err(e) => failures.push((leg, e)),
        }
    }
    if failures.is_empty() {
        Ok(RobotState {
            position: (*position).into(),
            orientation: *orientation,
            joints,
        })
    } else {
        Err(SolveError::Legs(failures))
    }
}

/// A body/voxel contact: the point on the voxel closest to the body
/// primitive and the unit normal pointing from that point toward the
/// primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub point: [f64; 3],
    pub normal: [f64; 3],
}

impl Contact {
    pub fn point(&self) -> Vec3 {
        Vec3::from(self.point)
    }

    pub fn normal(&self) -> Vec3 {
        Vec3::from(self.normal)
    }
}

const OVERLAP_EPS: f64 = 1e-9;

pub fn trunk_obb(state: &RobotState, config: &RobotConfig) -> Obb {
    Obb {
        center: state.position(),
        rotation: state.rotation(),
        half_extents: Vec3::from(config.trunk_half_extents),
    }
}

/// Leg capsule axes `(start, end)` in world coordinates: thigh then shank.
pub fn leg_segments(state: &RobotState, config: &RobotConfig, leg: usize) -> [(Vec3, Vec3); 2] {
    let rot = state.rotation();
    let hip = state.hip(config, leg);
    let (lateral, knee, paw) = leg_points(&state.joints[leg], config, leg);
    let (a, k, p) = (hip + rot * lateral, hip + rot * knee, hip + rot * paw);
    [(a, k), (k, p)]
}

/// Contacts between the trunk box, the eight leg capsules and the occupied
/// voxels. One entry per colliding (primitive, voxel) pair, trunk first, then
/// legs in FL, FR, RL, RR order.
pub fn check_collisions(state: &RobotState, map: &VoxelMap, config: &RobotConfig) -> Vec<Contact> {
    let mut out = trunk_collisions(state, map, config);
    for leg in 0..LEG_COUNT {
        out.extend(leg_collisions(state, map, config, leg));
    }
    out
}

/// Contacts of one leg's thigh and shank capsules. Shank contacts that are
/// the paw resting on its surface are skipped: those within
/// `foot_contact_tol` of the paw, and those lying on the paw's support plane
/// within half a shank length of it.
pub fn leg_collisions(
    state: &RobotState,
    map: &VoxelMap,
    config: &RobotConfig,
    leg: usize,
) -> Vec<Contact> {
    let segments = leg_segments(state, config, leg);
    let paw = segments[1].1;
    let tol = config.foot_contact_tol;
    let mut out = Vec::new();
    for (i, (a, b)) in segments.iter().enumerate() {
        let is_shank = i == 1;
        for c in capsule_collisions(a, b, config.link_radius, map) {
            let p = c.point();
            if is_shank {
                let near_paw = (p - paw).norm() <= tol;
                let on_support = (p.z - paw.z).abs() <= tol
                    && c.normal[2] > 0.0
                    && (p - paw).xy().norm() <= 0.5 * config.l_shank;
                if near_paw || on_support {
                    continue;
                }
            }
            out.push(c);
        }
    }
    out
}

/// Trunk-only contacts; usable even when the legs have no IK solution.
pub fn trunk_collisions(state: &RobotState, map: &VoxelMap, config: &RobotConfig) -> Vec<Contact> {
    let obb = trunk_obb(state, config);
    let Some((lo, hi)) = map.cell_range(&obb.bounding_aabb()) else {
        return Vec::new();
    };
    map.occupied_in(lo, hi)
        .filter_map(|q| {
            let cell = map.cell_aabb(q);
            if !obb_aabb_overlap(&obb, &cell, OVERLAP_EPS) {
                return None;
            }
            let p = cell.clamp_point(&obb.center);
            let n = outward_normal(&obb.center, &p, &cell);
            Some(Contact {
                point: p.into(),
                normal: n.into(),
            })
        })
        .collect()
}

fn outward_normal(target: &Vec3, p: &Vec3, cell: &crate::geometry::Aabb) -> Vec3 {
    let d = target - p;
    let len = d.norm();
    if len > 1e-12 {
        d / len
    } else {
        cell.nearest_face_normal(p)
    }
}

fn capsule_collisions(a: &Vec3, b: &Vec3, radius: f64, map: &VoxelMap) -> Vec<Contact> {
    let pad = Vec3::repeat(radius);
    let bounds = crate::geometry::Aabb {
        min: a.inf(b) - pad,
        max: a.sup(b) + pad,
    };
    let Some((lo, hi)) = map.cell_range(&bounds) else {
        return Vec::new();
    };
    map.occupied_in(lo, hi)
        .filter_map(|q| {
            let cell = map.cell_aabb(q);
            let (s, p, dist) = segment_aabb_closest(a, b, &cell);
            let hit = if radius > 0.0 {
                dist < radius - OVERLAP_EPS
            } else {
                dist == 0.0
            };
            hit.then(|| Contact {
                point: p.into(),
                normal: outward_normal(&s, &p, &cell).into(),
            })
        })
        .collect()
}

/// Whether a world point rests on the top face of the voxel column below it,
/// within `tol`.
pub fn paw_supported(paw: &Vec3, map: &VoxelMap, tol: f64) -> bool {
    let res = map.resolution();
    let start = map.discretize(&(paw + UP * tol));
    let floor = map.discretize(&(paw - UP * (tol + res)));
    let mut q = start;
    while q.z >= floor.z && q.z >= 0 {
        if map.is_occupied(q) {
            let gap = paw.z - map.layer_top(q.z);
            return gap.abs() <= tol;
        }
        q = q.below();
    }
    false
}

/// Number of paws standing on a voxel surface.
pub fn support_count(state: &RobotState, map: &VoxelMap, config: &RobotConfig) -> usize {
    state
        .paws(config)
        .iter()
        .filter(|p| paw_supported(p, map, config.foot_contact_tol))
        .count()
}

/// Paw targets straight below each hip's abduction link at `depth` below the
/// hip, for a level trunk with the given yaw.
pub fn level_stance_paws(
    position: &Vec3,
    yaw: f64,
    depth: f64,
    config: &RobotConfig,
) -> [Vec3; LEG_COUNT] {
    let rot = rpy_matrix(0.0, 0.0, yaw);
    std::array::from_fn(|leg| {
        let local = Vec3::from(config.hip_offsets[leg])
            + Vec3::new(0.0, leg_side(leg) * config.l_abd, -depth);
        position + rot * local
    })
}

/// Maximum height of the hips above a flat support at which a level stance
/// is still solvable: the straight-leg reach minus the configured margin,
/// lowered if inverse kinematics disagrees.
pub fn standing_height_max(config: &RobotConfig) -> f64 {
    let target = config.l_thigh + config.l_shank - config.standing_margin;
    let feasible = |h: f64| {
        (0..LEG_COUNT).all(|leg| {
            leg_ik(
                &Vec3::new(0.0, leg_side(leg) * config.l_abd, -h),
                config,
                leg,
            )
            .is_ok()
        })
    };
    if feasible(target) {
        return target;
    }
    let (mut lo, mut hi) = (0.0, target);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
