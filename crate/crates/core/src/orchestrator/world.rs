use crate::maps::{CellTag, VoxelMap};
use crate::world::{voxelize_boxes, BoxObstacle, Scenario, ScenarioError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EditError {
    #[error("no user obstacle with id {0:?}")]
    UnknownId(String),
    #[error("a user obstacle with id {0:?} already exists")]
    DuplicateId(String),
    #[error("invalid obstacle {id:?}: {reason}")]
    InvalidBox { id: String, reason: String },
}

/// Addition or removal of a user-placed virtual obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleEdit {
    Add {
        id: String,
        #[serde(rename = "box")]
        obstacle: BoxObstacle,
    },
    Remove {
        id: String,
    },
}

impl ObstacleEdit {
    pub fn id(&self) -> &str {
        match self {
            ObstacleEdit::Add { id, .. } | ObstacleEdit::Remove { id } => id,
        }
    }
}

/// Scenario terrain plus the user obstacles, with edits held back until the
/// next iteration boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub scenario: Scenario,
    user_boxes: BTreeMap<String, BoxObstacle>,
    pending: Vec<ObstacleEdit>,
}

impl World {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            user_boxes: BTreeMap::new(),
            pending: Vec::new(),
        }
    }

    /// Applied user obstacles, by id.
    pub fn user_boxes(&self) -> &BTreeMap<String, BoxObstacle> {
        &self.user_boxes
    }

    pub fn pending(&self) -> &[ObstacleEdit] {
        &self.pending
    }

    /// Whether `id` names a user obstacle once the queued edits are applied.
    fn will_exist(&self, id: &str) -> bool {
        let mut exists = self.user_boxes.contains_key(id);
        for e in &self.pending {
            if e.id() == id {
                exists = matches!(e, ObstacleEdit::Add { .. });
            }
        }
        exists
    }

    /// Checks an edit against the world as it will be after the queued edits
    /// and queues it. An add followed by a remove of the same id cancels out.
    pub fn queue(&mut self, edit: ObstacleEdit) -> Result<(), EditError> {
        match &edit {
            ObstacleEdit::Add { id, obstacle } => {
                if self.will_exist(id) {
                    return Err(EditError::DuplicateId(id.clone()));
                }
                obstacle.validate().map_err(|e| EditError::InvalidBox {
                    id: id.clone(),
                    reason: e.to_string(),
                })?;
            }
            ObstacleEdit::Remove { id } => {
                if !self.will_exist(id) {
                    return Err(EditError::UnknownId(id.clone()));
                }
                if let Some(pos) = self
                    .pending
                    .iter()
                    .rposition(|e| matches!(e, ObstacleEdit::Add { id: added, .. } if added == id))
                {
                    self.pending.remove(pos);
                    return Ok(());
                }
            }
        }
        self.pending.push(edit);
        Ok(())
    }

    /// Applies the queued edits; returns whether any were pending.
    pub fn apply_pending(&mut self) -> bool {
        let changed = !self.pending.is_empty();
        for edit in self.pending.drain(..) {
            match edit {
                ObstacleEdit::Add { id, mut obstacle } => {
                    obstacle.tag = CellTag::UserVirtual;
                    self.user_boxes.insert(id, obstacle);
                }
                ObstacleEdit::Remove { id } => {
                    self.user_boxes.remove(&id);
                }
            }
        }
        changed
    }

    /// Voxel map of the terrain and the applied user obstacles.
    pub fn voxelize(&self) -> Result<VoxelMap, ScenarioError> {
        let extra: Vec<BoxObstacle> = self.user_boxes.values().cloned().collect();
        voxelize_boxes(&self.scenario, &extra)
    }
}
