use crate::geometry::Vec3;
use crate::kinematics::{
    check_collisions, paw_supported, solve_state, support_count, trunk_collisions, Contact,
    RobotConfig, RobotState, LEG_COUNT,
};
use crate::maps::VoxelMap;

/// Paws that must rest on a surface for a state to be statically supported.
pub const MIN_SUPPORT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Validity {
    Valid(RobotState),
    Invalid {
        collisions: Vec<Contact>,
        ik_failed: bool,
        support: usize,
    },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid(_))
    }
}

/// Solves the legs for the given trunk pose and paw targets, then checks
/// body collisions and paw support. When some leg has no solution only the
/// trunk can be checked for collisions and support is judged on the targets.
pub fn validate(
    position: &Vec3,
    orientation: &[f64; 3],
    paws: &[Vec3; LEG_COUNT],
    map: &VoxelMap,
    config: &RobotConfig,
) -> Validity {
    match solve_state(position, orientation, paws, config) {
        Ok(state) => {
            let collisions = check_collisions(&state, map, config);
            let support = support_count(&state, map, config);
            if collisions.is_empty() && support >= MIN_SUPPORT {
                Validity::Valid(state)
            } else {
                Validity::Invalid {
                    collisions,
                    ik_failed: false,
                    support,
                }
            }
        }
        Err(_) => {
            let trunk_only = RobotState {
                position: (*position).into(),
                orientation: *orientation,
                joints: [[0.0; 3]; LEG_COUNT],
            };
            Validity::Invalid {
                collisions: trunk_collisions(&trunk_only, map, config),
                ik_failed: true,
                support: paws
                    .iter()
                    .filter(|p| paw_supported(p, map, config.foot_contact_tol))
                    .count(),
            }
        }
    }
}

/// Re-checks a finished state from its joint angles alone.
pub fn recheck(state: &RobotState, map: &VoxelMap, config: &RobotConfig) -> bool {
    let paws = state.paws(config);
    validate(&state.position(), &state.orientation, &paws, map, config).is_valid()
}

/// Waypoint displacement pushing the trunk away from its contacts: the mean
/// of `q_next - p_k + n_k` over all contacts, or straight down by the
/// standing-height limit when there are none (the trunk lost support).
pub fn compute_repulsive(q_next: &Vec3, collisions: &[Contact], h_th: f64) -> Vec3 {
    if collisions.is_empty() {
        return Vec3::new(0.0, 0.0, -h_th);
    }
    let sum: Vec3 = collisions
        .iter()
        .map(|c| q_next - c.point() + c.normal())
        .sum();
    sum / collisions.len() as f64
}
