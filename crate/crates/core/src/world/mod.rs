//! Scenario description (terrain and user boxes, start/goal poses, robot and
//! planner settings) and its voxelization.

mod stairs;
mod voxelize;

pub use stairs::{generate_stairs, stairs_scenario, StairsSpec};
pub use voxelize::{
    grid_layout, voxelize, voxelize_boxes, GridLayout, DEFAULT_MAX_CELLS, WORLD_MARGIN,
};

use crate::geometry::{yaw_matrix, Aabb, Obb, Vec3};
use crate::kinematics::RobotConfig;
use crate::local::PropagationParams;
use crate::maps::{CellTag, MapError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

/// Yaw-rotated box obstacle, dimensions in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxObstacle {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "terrain")]
    pub tag: CellTag,
}

fn terrain() -> CellTag {
    CellTag::Terrain
}

impl BoxObstacle {
    pub fn axis_aligned(min: [f64; 3], max: [f64; 3], tag: CellTag) -> Self {
        Self {
            center: std::array::from_fn(|i| 0.5 * (min[i] + max[i])),
            half_extents: std::array::from_fn(|i| 0.5 * (max[i] - min[i])),
            yaw: 0.0,
            tag,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self
            .half_extents
            .iter()
            .any(|&e| !(e > 0.0 && e.is_finite()))
        {
            return invalid(format!(
                "box half_extents must be positive, got {:?}",
                self.half_extents
            ));
        }
        if self
            .center
            .iter()
            .chain([self.yaw].iter())
            .any(|v| !v.is_finite())
        {
            return invalid("box center and yaw must be finite");
        }
        Ok(())
    }

    pub fn obb(&self) -> Obb {
        Obb {
            center: Vec3::from(self.center),
            rotation: yaw_matrix(self.yaw),
            half_extents: Vec3::from(self.half_extents),
        }
    }

    pub fn aabb(&self) -> Aabb {
        self.obb().bounding_aabb()
    }
}

/// Trunk position (m) and heading (rad).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: [f64; 3], yaw: f64) -> Self {
        Self { position, yaw }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

/// A validated planning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub boxes: Vec<BoxObstacle>,
    pub start: Pose,
    pub goal: Pose,
    pub resolution: f64,
    #[serde(default)]
    pub robot: RobotConfig,
    #[serde(default)]
    pub params: PropagationParams,
}

pub const DEFAULT_RESOLUTION: f64 = 0.05;

impl Scenario {
    /// Parses and validates a JSON scenario document. A missing
    /// `robot.foot_contact_tol` defaults to half the voxel resolution.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let mut doc: serde_json::Value = serde_json::from_str(text)?;
        let res = doc
            .get("resolution")
            .and_then(|r| r.as_f64())
            .unwrap_or(DEFAULT_RESOLUTION);
        if let Some(obj) = doc.as_object_mut() {
            obj.entry("resolution")
                .or_insert(serde_json::json!(DEFAULT_RESOLUTION));
            let robot = obj.entry("robot").or_insert(serde_json::json!({}));
            if let Some(r) = robot.as_object_mut() {
                r.entry("foot_contact_tol")
                    .or_insert(serde_json::json!(res / 2.0));
            }
        }
        let scenario: Scenario = serde_json::from_value(doc)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return invalid(format!(
                "resolution must be positive, got {}",
                self.resolution
            ));
        }
        for b in &self.boxes {
            b.validate()?;
        }
        self.robot
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.params
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        for (name, pose) in [("start", &self.start), ("goal", &self.goal)] {
            if pose
                .position
                .iter()
                .chain([pose.yaw].iter())
                .any(|v| !v.is_finite())
            {
                return invalid(format!("{name} pose must be finite"));
            }
        }
        if !self.boxes.is_empty() {
            let bounds = boxes_bounds(&self.boxes).expect("non-empty");
            let margin = Vec3::repeat(WORLD_MARGIN);
            let inflated = Aabb {
                min: bounds.min - margin,
                max: bounds.max + margin,
            };
            for (name, pose) in [("start", &self.start), ("goal", &self.goal)] {
                if !inflated.contains(&pose.position()) {
                    return invalid(format!("{name} lies outside the world bounds"));
                }
            }
        }
        let layout = grid_layout(self)?;
        if layout.discretize(&self.start.position()) == layout.discretize(&self.goal.position()) {
            return invalid("start and goal fall in the same cell");
        }
        Ok(())
    }
}

/// Union of the boxes' axis-aligned bounds.
pub fn boxes_bounds(boxes: &[BoxObstacle]) -> Option<Aabb> {
    boxes.iter().map(BoxObstacle::aabb).reduce(|a, b| Aabb {
        min: a.min.inf(&b.min),
        max: a.max.sup(&b.max),
    })
}
