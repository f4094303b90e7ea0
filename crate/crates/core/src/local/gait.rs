//! Trunk propagation and the single-swing-leg gait.
//!
//! Every step moves the trunk by the clamped increments while planted paws
//! keep their world positions. Each leg accumulates how far its hip has
//! travelled; the leg with the largest accumulated travel (above a trigger
//! threshold) is lifted for one step toward a foothold ahead of its neutral
//! point and planted on the following step, which resets its accumulator.

use super::frames::delta_rotation;
use crate::geometry::{matrix_rpy, rpy_matrix, Vec3, UP};
use crate::kinematics::{leg_collisions, leg_ik, leg_side, RobotConfig, RobotState, LEG_COUNT};
use crate::maps::VoxelMap;
use serde::{Deserialize, Serialize};

/// Planner-side state carried between steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalState {
    pub robot: RobotState,
    /// World paw targets; the swing leg's entry is its lifted position.
    pub paws: [[f64; 3]; LEG_COUNT],
    /// Per-leg accumulated hip travel since the leg was last planted (m).
    pub accumulated_swing: [f64; LEG_COUNT],
    pub swing_leg: Option<usize>,
    /// Where the swing leg lands on the next step.
    pub swing_foothold: Option<[f64; 3]>,
    /// Repulsion accumulated at the current waypoint (m).
    pub accumulated_d: [f64; 3],
    pub waypoint_index: usize,
}

impl LocalState {
    pub fn paw(&self, leg: usize) -> Vec3 {
        Vec3::from(self.paws[leg])
    }

    pub fn paw_array(&self) -> [Vec3; LEG_COUNT] {
        std::array::from_fn(|l| self.paw(l))
    }
}

/// Trunk pose and paw targets of a proposed next state, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub position: Vec3,
    pub orientation: [f64; 3],
    pub paws: [Vec3; LEG_COUNT],
    pub accumulated_swing: [f64; LEG_COUNT],
    pub swing_leg: Option<usize>,
    pub swing_foothold: Option<Vec3>,
}

impl Candidate {
    pub fn rotation(&self) -> nalgebra::Matrix3<f64> {
        let [r, p, y] = self.orientation;
        rpy_matrix(r, p, y)
    }

    pub fn hip(&self, config: &RobotConfig, leg: usize) -> Vec3 {
        self.position + self.rotation() * Vec3::from(config.hip_offsets[leg])
    }
}

/// Applies the rigid step `[R(δr) | δp]` to the trunk. Planted paws keep
/// their world positions; each hip's displacement norm is added to that
/// leg's accumulator.
pub fn propagate(
    state: &LocalState,
    delta_p: &Vec3,
    delta_r: &Vec3,
    config: &RobotConfig,
) -> Candidate {
    let before = state.robot.rotation();
    let orientation = matrix_rpy(&(before * delta_rotation(delta_r)));
    let [r, p, y] = orientation;
    let after = rpy_matrix(r, p, y);
    let position = state.robot.position() + delta_p;
    let mut accumulated_swing = state.accumulated_swing;
    for (leg, acc) in accumulated_swing.iter_mut().enumerate() {
        let h = Vec3::from(config.hip_offsets[leg]);
        let moved = (position + after * h) - (state.robot.position() + before * h);
        *acc += moved.norm();
    }
    Candidate {
        position,
        orientation,
        paws: state.paw_array(),
        accumulated_swing,
        swing_leg: state.swing_leg,
        swing_foothold: state.swing_foothold.map(Vec3::from),
    }
}

/// Leg with the largest accumulated travel, if that travel exceeds
/// `threshold`. Ties go to the first leg in FL, FR, RL, RR order.
pub fn select_swing_leg(accumulated: &[f64; LEG_COUNT], threshold: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (leg, &v) in accumulated.iter().enumerate() {
        if v > threshold && best.is_none_or(|b| v > accumulated[b]) {
            best = Some(leg);
        }
    }
    best
}

/// Point below the hip where the leg hangs with zero abduction.
pub fn neutral_point(
    position: &Vec3,
    orientation: &[f64; 3],
    config: &RobotConfig,
    leg: usize,
) -> Vec3 {
    let [r, p, y] = *orientation;
    let rot = rpy_matrix(r, p, y);
    let local =
        Vec3::from(config.hip_offsets[leg]) + Vec3::new(0.0, leg_side(leg) * config.l_abd, 0.0);
    position + rot * local
}

/// Top surface of the voxel column under `(x, y)` within leg range of a hip
/// at height `hip_z`, or `None` when the column is empty there.
pub fn find_foothold(map: &VoxelMap, x: f64, y: f64, hip_z: f64, reach: f64) -> Option<Vec3> {
    let top = map.discretize(&Vec3::new(x, y, hip_z + 0.5 * reach));
    let bottom = map.discretize(&Vec3::new(x, y, hip_z - reach - map.resolution()));
    let mut q = top;
    while q.z >= bottom.z.max(0) {
        if map.is_occupied(q) {
            let mut surface = q;
            while map.is_occupied(surface.step_up()) {
                surface = surface.step_up();
            }
            return Some(Vec3::new(x, y, map.layer_top(surface.z)));
        }
        q = q.below();
    }
    None
}

trait StepUp {
    fn step_up(self) -> Self;
}

impl StepUp for crate::maps::DiscreteState {
    fn step_up(self) -> Self {
        Self::new(self.x, self.y, self.z + 1)
    }
}

/// Landing spot for a leg: its neutral point shifted by `ahead`, dropped onto
/// the surface below. Without a surface in range the paw stays in the air at
/// full leg length.
pub fn foothold_for(
    map: &VoxelMap,
    position: &Vec3,
    orientation: &[f64; 3],
    config: &RobotConfig,
    leg: usize,
    ahead: &Vec3,
) -> Vec3 {
    let n = neutral_point(position, orientation, config, leg) + Vec3::new(ahead.x, ahead.y, 0.0);
    let reach = config.l_thigh + config.l_shank;
    find_foothold(map, n.x, n.y, n.z, reach).unwrap_or(n - UP * reach)
}

/// Whether the leg can reach `target` from the candidate pose without its
/// links touching the map.
fn leg_clear(
    c: &Candidate,
    map: &VoxelMap,
    config: &RobotConfig,
    leg: usize,
    target: &Vec3,
) -> bool {
    let rel =
        c.rotation().transpose() * (target - c.position) - Vec3::from(config.hip_offsets[leg]);
    let Ok(angles) = leg_ik(&rel, config, leg) else {
        return false;
    };
    let mut joints = [[0.0; 3]; LEG_COUNT];
    joints[leg] = angles;
    let state = RobotState {
        position: c.position.into(),
        orientation: c.orientation,
        joints,
    };
    leg_collisions(&state, map, config, leg).is_empty()
}

/// Lifted paw position above `foothold`: the clearance is halved until the
/// leg reaches it without touching the map, down to the foothold itself.
fn swing_target(
    c: &Candidate,
    map: &VoxelMap,
    config: &RobotConfig,
    leg: usize,
    foothold: &Vec3,
    clearance: f64,
) -> Option<Vec3> {
    let mut lift = clearance;
    for _ in 0..4 {
        let target = foothold + UP * lift;
        if leg_clear(c, map, config, leg, &target) {
            return Some(target);
        }
        lift *= 0.5;
    }
    leg_clear(c, map, config, leg, foothold).then_some(*foothold)
}

/// Whether the surface is at the foothold's height a `margin` away in each
/// horizontal axis direction, keeping paws off edges and away from risers.
fn level_around(map: &VoxelMap, foothold: &Vec3, margin: f64, tol: f64) -> bool {
    [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
        .iter()
        .all(|&(dx, dy)| {
            let p = Vec3::new(
                foothold.x + dx * margin,
                foothold.y + dy * margin,
                foothold.z,
            );
            let q = map.discretize(&(p + UP * tol));
            !map.is_occupied(q) && map.is_occupied(map.discretize(&(p - UP * tol)))
        })
}

/// Shifts along the direction of travel, in voxels, tried in order when
/// the nominal foothold cannot be swung to cleanly.
const FOOTHOLD_SHIFTS: [f64; 9] = [0.0, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];

/// Foothold and swing target for `leg`: the nominal foothold ahead of the
/// neutral point, or failing that the nearest level one shifted along the
/// direction of travel that the leg can reach without touching the map.
fn swing_plan(
    c: &Candidate,
    map: &VoxelMap,
    config: &RobotConfig,
    leg: usize,
    travel: &Vec3,
    ahead: &Vec3,
    clearance: f64,
) -> Option<(Vec3, Vec3)> {
    let res = map.resolution();
    let dir = if travel.norm() > 1e-12 {
        travel.normalize()
    } else {
        Vec3::zeros()
    };
    for k in FOOTHOLD_SHIFTS {
        if k != 0.0 && dir == Vec3::zeros() {
            break;
        }
        let foothold = foothold_for(
            map,
            &c.position,
            &c.orientation,
            config,
            leg,
            &(ahead + dir * (k * res)),
        );
        if !level_around(map, &foothold, res, config.foot_contact_tol) {
            continue;
        }
        if let Some(target) = swing_target(c, map, config, leg, &foothold, clearance) {
            return Some((foothold, target));
        }
    }
    None
}

/// Plants the previous swing leg and lifts the next one.
///
/// A stance leg that cannot keep its paw at the new trunk pose (out of
/// reach, past a joint limit or touching the map) is lifted first, ties
/// going to the leg that has travelled furthest. Otherwise legs past the
/// swing threshold are tried furthest first, and the first that has a clean
/// foothold (see `swing_plan`) is lifted. When no leg qualifies all four stay
/// down, except that a stranded leg is always lifted towards its nominal
/// foothold so validation can report the problem.
pub fn step_gait(
    mut c: Candidate,
    delta_p: &Vec3,
    threshold: f64,
    clearance: f64,
    map: &VoxelMap,
    config: &RobotConfig,
) -> Candidate {
    if let (Some(leg), Some(foothold)) = (c.swing_leg, c.swing_foothold) {
        c.paws[leg] = foothold;
        c.accumulated_swing[leg] = 0.0;
    }
    c.swing_leg = None;
    c.swing_foothold = None;
    // Stance legs that can no longer hold their paw at the new pose go
    // first; otherwise legs past the threshold, furthest travelled first.
    let acc = c.accumulated_swing;
    let by_travel = |a: &usize, b: &usize| acc[*b].total_cmp(&acc[*a]).then(a.cmp(b));
    let mut stranded: Vec<usize> = (0..LEG_COUNT)
        .filter(|&l| !leg_clear(&c, map, config, l, &c.paws[l]))
        .collect();
    stranded.sort_by(by_travel);
    let mut due: Vec<usize> = (0..LEG_COUNT).filter(|&l| acc[l] > threshold).collect();
    due.sort_by(by_travel);
    let order = if stranded.is_empty() { &due } else { &stranded };
    let travel = Vec3::new(delta_p.x, delta_p.y, 0.0);
    let ahead = travel * (LEG_COUNT as f64 / 2.0);
    let chosen = order.iter().find_map(|&leg| {
        swing_plan(&c, map, config, leg, &travel, &ahead, clearance).map(|(f, t)| (leg, f, t))
    });
    let (leg, foothold, target) = match (chosen, stranded.first()) {
        (Some(plan), _) => plan,
        // A stranded leg has to move anyway; validation reports the problem.
        (None, Some(&leg)) => {
            let f = foothold_for(map, &c.position, &c.orientation, config, leg, &ahead);
            (leg, f, f + UP * clearance)
        }
        // No leg can be placed cleanly and none has to: keep all four down.
        (None, None) => return c,
    };
    c.paws[leg] = target;
    c.swing_leg = Some(leg);
    c.swing_foothold = Some(foothold);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{level_stance_paws, solve_state};
    use approx::assert_relative_eq;

    fn state() -> LocalState {
        let c = RobotConfig::default();
        let pos = Vec3::new(0.0, 0.0, 0.25);
        let paws = level_stance_paws(&pos, 0.0, 0.2, &c);
        let robot = solve_state(&pos, &[0.0; 3], &paws, &c).unwrap();
        LocalState {
            robot,
            paws: paws.map(Into::into),
            accumulated_swing: [0.0; 4],
            swing_leg: None,
            swing_foothold: None,
            accumulated_d: [0.0; 3],
            waypoint_index: 0,
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let c = RobotConfig::default();
        let s = state();
        let cand = propagate(&s, &Vec3::zeros(), &Vec3::zeros(), &c);
        assert_eq!(cand.position, s.robot.position());
        assert_eq!(cand.orientation, s.robot.orientation);
        assert_eq!(cand.accumulated_swing, [0.0; 4]);
    }

    #[test]
    fn pure_translation() {
        let c = RobotConfig::default();
        let s = state();
        let cand = propagate(&s, &Vec3::new(0.03, 0.0, 0.0), &Vec3::zeros(), &c);
        assert_relative_eq!(cand.position, Vec3::new(0.03, 0.0, 0.25));
        assert_eq!(cand.orientation, [0.0; 3]);
        assert_eq!(cand.paws, s.paw_array());
        for a in cand.accumulated_swing {
            assert_relative_eq!(a, 0.03, epsilon = 1e-15);
        }
    }

    #[test]
    fn select_examples() {
        assert_eq!(select_swing_leg(&[0.09, 0.03, 0.03, 0.03], 0.05), Some(0));
        assert_eq!(select_swing_leg(&[0.01, 0.03, 0.03, 0.03], 0.05), None);
        assert_eq!(select_swing_leg(&[0.01, 0.07, 0.07, 0.03], 0.05), Some(1));
        // Exactly at the threshold does not trigger.
        assert_eq!(select_swing_leg(&[0.05, 0.0, 0.0, 0.0], 0.05), None);
    }
}
