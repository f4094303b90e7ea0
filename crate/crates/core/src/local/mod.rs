//! Local planner: turns a global cell path into a sequence of valid
//! whole-body robot states, feeding weight updates back to the global layer
//! wherever the body cannot follow.

mod frames;
mod gait;
mod params;
mod refine;
mod validate;

pub use frames::{clamp_deltas, compute_delta_p, compute_rotation_delta, delta_rotation, Origins};
pub use gait::{
    find_foothold, foothold_for, neutral_point, propagate, select_swing_leg, step_gait, Candidate,
    LocalState,
};
pub use params::{ParamsError, PropagationParams};
pub use refine::{
    feedback_for, FollowOutcome, LocalError, LocalPlanner, LocalResult, ReplanEvent, Traversal,
};
pub use validate::{compute_repulsive, recheck, validate, Validity, MIN_SUPPORT};
