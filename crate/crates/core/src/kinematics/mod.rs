//! Quadruped digital twin: geometry, per-leg forward/inverse kinematics,
//! whole-body stance solving, collision detection against the voxel map and
//! the support check.

mod body;
mod config;
mod leg;

pub use body::{
    check_collisions, leg_collisions, leg_segments, level_stance_paws, paw_supported, solve_state,
    standing_height_max, support_count, trunk_collisions, trunk_obb, Contact, RobotState,
    SolveError,
};
pub use config::{leg_side, ConfigError, RobotConfig, LEG_COUNT, LEG_NAMES};
pub use leg::{leg_fk, leg_ik, leg_points, LegError};
