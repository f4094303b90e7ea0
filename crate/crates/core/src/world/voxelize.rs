use super::{boxes_bounds, BoxObstacle, Scenario, ScenarioError};
use crate::geometry::{obb_aabb_overlap, Aabb, Vec3};
use crate::maps::{DiscreteState, MapError, VoxelMap};

/// Free space kept around the terrain (and start/goal) on every side, in metres.
pub const WORLD_MARGIN: f64 = 0.5;
pub const DEFAULT_MAX_CELLS: u64 = 16_000_000;

/// Cells must overlap a box by more than this (m) to count as occupied, so
/// boxes that only touch a cell face leave it free.
const OVERLAP_EPS: f64 = 1e-9;

/// Placement of the voxel grid: origin snapped to a multiple of the
/// resolution so box faces on that lattice coincide with cell faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    pub resolution: f64,
    pub origin: Vec3,
    pub dims: [usize; 3],
}

impl GridLayout {
    pub fn discretize(&self, p: &Vec3) -> DiscreteState {
        let rel = (p - self.origin) / self.resolution;
        DiscreteState::new(
            rel.x.floor() as i32,
            rel.y.floor() as i32,
            rel.z.floor() as i32,
        )
    }
}

/// Grid covering the scenario's own boxes plus start and goal, inflated by
/// [`WORLD_MARGIN`]. Boxes added later are clipped to this layout, which keeps
/// cell indices (and therefore learned weights) stable across edits.
pub fn grid_layout(scenario: &Scenario) -> Result<GridLayout, ScenarioError> {
    let res = scenario.resolution;
    let mut pts = Aabb {
        min: scenario.start.position().inf(&scenario.goal.position()),
        max: scenario.start.position().sup(&scenario.goal.position()),
    };
    if let Some(b) = boxes_bounds(&scenario.boxes) {
        pts.min = pts.min.inf(&b.min);
        pts.max = pts.max.sup(&b.max);
    }
    let lo = pts.min - Vec3::repeat(WORLD_MARGIN);
    let hi = pts.max + Vec3::repeat(WORLD_MARGIN);
    let origin = lo.map(|v| ((v / res) + 1e-9).floor() * res);
    let mut dims = [0usize; 3];
    for i in 0..3 {
        let n = ((hi[i] - origin[i]) / res - 1e-9).ceil();
        if !(1.0..1e9).contains(&n) {
            return Err(MapError::TooLarge {
                requested: u64::MAX,
                limit: DEFAULT_MAX_CELLS,
            }
            .into());
        }
        dims[i] = n as usize;
    }
    Ok(GridLayout {
        resolution: res,
        origin,
        dims,
    })
}

/// Occupancy of the scenario's boxes: a cell is occupied iff its cube
/// overlaps some box with positive volume.
pub fn voxelize(scenario: &Scenario) -> Result<VoxelMap, ScenarioError> {
    voxelize_boxes(scenario, &[])
}

/// Voxelizes the scenario's boxes plus `extra` (typically user obstacles)
/// on the scenario's grid layout.
pub fn voxelize_boxes(
    scenario: &Scenario,
    extra: &[BoxObstacle],
) -> Result<VoxelMap, ScenarioError> {
    let layout = grid_layout(scenario)?;
    let mut map = VoxelMap::with_limit(
        layout.resolution,
        layout.origin,
        layout.dims,
        DEFAULT_MAX_CELLS,
    )?;
    for b in scenario.boxes.iter().chain(extra) {
        stamp(&mut map, b);
    }
    Ok(map)
}

fn stamp(map: &mut VoxelMap, b: &BoxObstacle) {
    let obb = b.obb();
    let Some((lo, hi)) = map.cell_range(&obb.bounding_aabb()) else {
        return;
    };
    for z in lo.z..=hi.z {
        for y in lo.y..=hi.y {
            for x in lo.x..=hi.x {
                let q = DiscreteState::new(x, y, z);
                if obb_aabb_overlap(&obb, &map.cell_aabb(q), OVERLAP_EPS) {
                    map.mark(q, b.tag);
                }
            }
        }
    }
}
