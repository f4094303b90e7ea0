//! Hierarchical path planning for a quadruped robot in voxel worlds.
//!
//! A weighted A* search finds a path of trunk cells; the local planner turns
//! it into whole-body robot states and, where the body cannot follow, raises
//! the weights of the offending cells and moves so later searches avoid
//! them. The orchestrator repeats this until the path stops changing, while
//! user-placed virtual obstacles reshape the world between iterations.

pub mod geometry;
pub mod global;
pub mod kinematics;
pub mod local;
pub mod maps;
pub mod orchestrator;
pub mod session;
pub mod world;
