use crate::kinematics::RobotState;
use crate::maps::{CellTag, DiscreteState, VoxelMap, WeightMaps, WeightUpdate};
use crate::orchestrator::{EditScript, IterationMetrics, RunReport};
use crate::world::{BoxObstacle, Pose, Scenario};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const PROTOCOL_VERSION: u32 = 1;

/// States per `local_states` frame.
pub const DEFAULT_CHUNK_STATES: usize = 200;

/// A client request. Every frame carries the protocol version and a
/// client-chosen sequence number that the acknowledgment echoes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientFrame {
    pub v: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub message: ClientMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Replaces the scenario and clears the weights. The document has the
    /// same shape as a scenario file.
    LoadScenario {
        scenario: serde_json::Value,
    },
    SetStart {
        pose: Pose,
    },
    SetGoal {
        pose: Pose,
    },
    AddObstacle {
        id: String,
        #[serde(rename = "box")]
        obstacle: BoxObstacle,
    },
    RemoveObstacle {
        id: String,
    },
    StartRun {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iterations: Option<usize>,
        /// Record wall-clock time per iteration.
        #[serde(default = "yes")]
        timing: bool,
        /// Edits replayed at iteration boundaries, as in an edit script file.
        #[serde(default, skip_serializing_if = "is_empty_script")]
        edits: EditScript,
    },
    PauseRun,
    ResetWeights,
    RequestSnapshot,
}

fn yes() -> bool {
    true
}

fn is_empty_script(s: &EditScript) -> bool {
    s.0.is_empty()
}

impl ClientFrame {
    pub fn new(seq: u64, message: ClientMessage) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            seq,
            message,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnsupportedVersion,
    InvalidScenario,
    InvalidPose,
    InvalidRequest,
    EditRejected,
    NoScenario,
    RunInProgress,
    NoRunInProgress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AckError {
    pub code: ErrorCode,
    pub message: String,
}

/// A server event. Acks go to the requesting client only; everything else is
/// broadcast to all attached clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerFrame {
    pub v: u32,
    #[serde(flatten)]
    pub event: ServerEvent,
}

impl From<ServerEvent> for ServerFrame {
    fn from(event: ServerEvent) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            event,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerEvent {
    Ack {
        seq: u64,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<AckError>,
    },
    WorldSnapshot(Box<WorldSnapshot>),
    GlobalPath {
        iteration: usize,
        cells: Vec<[i32; 3]>,
        cost: f64,
        expansions: usize,
    },
    /// One slice of an iteration's state sequence; chunk indices run from 0
    /// to `chunk_count - 1` without gaps.
    LocalStates {
        iteration: usize,
        chunk_index: usize,
        chunk_count: usize,
        states: Vec<[f64; 18]>,
    },
    WeightUpdate {
        iteration: usize,
        updates: Vec<WeightRecord>,
    },
    IterationMetrics {
        metrics: IterationMetrics,
    },
    RunFinished {
        report: RunReport,
    },
    Error {
        message: String,
    },
}

impl ServerEvent {
    pub fn ack(seq: u64) -> Self {
        ServerEvent::Ack {
            seq,
            ok: true,
            error: None,
        }
    }

    pub fn nack(seq: u64, code: ErrorCode, message: impl Into<String>) -> Self {
        ServerEvent::Ack {
            seq,
            ok: false,
            error: Some(AckError {
                code,
                message: message.into(),
            }),
        }
    }

    /// Events a client can recover from a later snapshot, and which may be
    /// dropped when its queue overflows.
    pub fn refreshable(&self) -> bool {
        matches!(
            self,
            ServerEvent::WorldSnapshot(_)
                | ServerEvent::GlobalPath { .. }
                | ServerEvent::LocalStates { .. }
                | ServerEvent::WeightUpdate { .. }
        )
    }
}

/// A weight increment on the wire: `action` is present for action weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub cell: [i32; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<[i8; 3]>,
    pub weight: f64,
}

impl From<&WeightUpdate> for WeightRecord {
    fn from(u: &WeightUpdate) -> Self {
        match *u {
            WeightUpdate::Positional { state, delta } => Self {
                cell: cell(state),
                action: None,
                weight: delta,
            },
            WeightUpdate::Action {
                state,
                action,
                delta,
            } => Self {
                cell: cell(state),
                action: Some([action.dx, action.dy, action.dz]),
                weight: delta,
            },
        }
    }
}

pub(crate) fn cell(q: DiscreteState) -> [i32; 3] {
    [q.x, q.y, q.z]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapInfo {
    pub resolution: f64,
    /// World position of the minimum corner of cell (0, 0, 0).
    pub origin: [f64; 3],
    pub dims: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelRecord {
    pub cell: [i32; 3],
    pub tag: CellTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserObstacle {
    pub id: String,
    #[serde(rename = "box")]
    pub obstacle: BoxObstacle,
}

/// Everything a client needs to redraw from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    /// `None` until a scenario is loaded.
    pub scenario: Option<Scenario>,
    pub user_obstacles: Vec<UserObstacle>,
    pub map: Option<MapInfo>,
    pub voxels: Vec<VoxelRecord>,
    /// Accumulated weights, one record per cell or cell/action pair.
    pub weights: Vec<WeightRecord>,
    /// States of the last finished iteration.
    pub last_path: Vec<[f64; 18]>,
    pub running: bool,
}

impl WorldSnapshot {
    pub fn empty() -> Self {
        Self {
            scenario: None,
            user_obstacles: Vec::new(),
            map: None,
            voxels: Vec::new(),
            weights: Vec::new(),
            last_path: Vec::new(),
            running: false,
        }
    }

    pub fn set_map(&mut self, map: &VoxelMap) {
        let o = map.origin();
        self.map = Some(MapInfo {
            resolution: map.resolution(),
            origin: [o.x, o.y, o.z],
            dims: map.dims(),
        });
        self.voxels = map
            .occupied()
            .into_iter()
            .map(|(q, tag)| VoxelRecord { cell: cell(q), tag })
            .collect();
    }

    pub fn set_user_obstacles(&mut self, boxes: &BTreeMap<String, BoxObstacle>) {
        self.user_obstacles = boxes
            .iter()
            .map(|(id, b)| UserObstacle {
                id: id.clone(),
                obstacle: b.clone(),
            })
            .collect();
    }

    pub fn set_weights(&mut self, weights: &WeightMaps) {
        let positional = weights.positional.iter().map(|(q, w)| WeightRecord {
            cell: cell(q),
            action: None,
            weight: w,
        });
        let action = weights.action.iter().map(|(q, a, w)| WeightRecord {
            cell: cell(q),
            action: Some([a.dx, a.dy, a.dz]),
            weight: w,
        });
        self.weights = positional.chain(action).collect();
    }

    pub fn set_last_path(&mut self, states: &[RobotState]) {
        self.last_path = states.iter().map(RobotState::to_tuple).collect();
    }
}

/// Why an incoming text frame was refused, with the sequence number when
/// one could be read.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeError {
    pub seq: Option<u64>,
    pub code: ErrorCode,
    pub message: String,
}

impl DecodeError {
    /// The reply for the client: a failed ack when the frame had a sequence
    /// number, a bare error event otherwise.
    pub fn reply(&self) -> ServerFrame {
        match self.seq {
            Some(seq) => ServerEvent::nack(seq, self.code, self.message.clone()),
            None => ServerEvent::Error {
                message: self.message.clone(),
            },
        }
        .into()
    }
}

pub fn decode_client(text: &str) -> Result<ClientFrame, DecodeError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| DecodeError {
        seq: None,
        code: ErrorCode::Malformed,
        message: format!("not a JSON document: {e}"),
    })?;
    let seq = value.get("seq").and_then(serde_json::Value::as_u64);
    let fail = |code, message: String| DecodeError { seq, code, message };
    match value.get("v").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(PROTOCOL_VERSION) => {}
        Some(v) => {
            return Err(fail(
                ErrorCode::UnsupportedVersion,
                format!("protocol version {v} is not supported (expected {PROTOCOL_VERSION})"),
            ))
        }
        None => {
            return Err(fail(
                ErrorCode::Malformed,
                "missing protocol version `v`".into(),
            ))
        }
    }
    if seq.is_none() {
        return Err(fail(
            ErrorCode::Malformed,
            "missing sequence number `seq`".into(),
        ));
    }
    serde_json::from_value(value).map_err(|e| fail(ErrorCode::Malformed, e.to_string()))
}

pub fn encode_server(frame: &ServerFrame) -> String {
    serde_json::to_string(frame).expect("server frames serialize")
}

pub fn encode_client(frame: &ClientFrame) -> String {
    serde_json::to_string(frame).expect("client frames serialize")
}

/// Splits a state sequence into `local_states` events.
pub fn chunk_states(iteration: usize, states: &[RobotState], chunk: usize) -> Vec<ServerEvent> {
    let chunk = chunk.max(1);
    let chunk_count = states.len().div_ceil(chunk).max(1);
    (0..chunk_count)
        .map(|chunk_index| {
            let part = states.iter().skip(chunk_index * chunk).take(chunk);
            ServerEvent::LocalStates {
                iteration,
                chunk_index,
                chunk_count,
                states: part.map(RobotState::to_tuple).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_variant_keeps_seq() {
        let e = decode_client(r#"{"v": 1, "seq": 7, "type": "fly"}"#).unwrap_err();
        assert_eq!(e.seq, Some(7));
        assert_eq!(e.code, ErrorCode::Malformed);
        assert!(matches!(
            e.reply().event,
            ServerEvent::Ack {
                seq: 7,
                ok: false,
                ..
            }
        ));
    }

    #[test]
    fn version_checked() {
        let e = decode_client(r#"{"v": 2, "seq": 1, "type": "pause_run"}"#).unwrap_err();
        assert_eq!(e.code, ErrorCode::UnsupportedVersion);
        let e = decode_client("[1, 2").unwrap_err();
        assert_eq!(e.seq, None);
        assert!(matches!(e.reply().event, ServerEvent::Error { .. }));
    }

    #[test]
    fn start_run_defaults() {
        let f = decode_client(r#"{"v": 1, "seq": 3, "type": "start_run"}"#).unwrap();
        assert_eq!(
            f.message,
            ClientMessage::StartRun {
                max_iterations: None,
                timing: true,
                edits: EditScript::default()
            }
        );
    }

    #[test]
    fn chunks_cover_the_sequence() {
        let s = RobotState {
            position: [0.0; 3],
            orientation: [0.0; 3],
            joints: [[0.0; 3]; 4],
        };
        let states = vec![s; 450];
        let chunks = chunk_states(2, &states, 200);
        assert_eq!(chunks.len(), 3);
        let sizes: Vec<usize> = chunks
            .iter()
            .map(|c| match c {
                ServerEvent::LocalStates { states, .. } => states.len(),
                _ => 0,
            })
            .collect();
        assert_eq!(sizes, [200, 200, 50]);
        assert_eq!(chunk_states(1, &[], 200).len(), 1);
    }
}
