//! The three map types the planners share: the voxel occupancy map, the
//! positional weight map and the action weight map, plus the discrete grid
//! geometry (cells and 26-neighbourhood moves) they are keyed by.

mod discrete;
pub mod export;
mod voxel;
mod weights;

pub use discrete::{Action, DiscreteState};
pub use voxel::{CellTag, MapError, VoxelMap};
pub use weights::{
    ActionWeightMap, PositionalWeightMap, WeightError, WeightLogEntry, WeightMaps, WeightUpdate,
};
