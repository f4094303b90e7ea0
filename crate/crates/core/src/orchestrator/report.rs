use crate::kinematics::{RobotConfig, RobotState};
use crate::local::recheck;
use crate::maps::VoxelMap;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// Nodes expanded by the global plan and every in-iteration replan.
    pub global_expansions: usize,
    pub path_length_states: usize,
    pub request_count: usize,
    /// Cumulative positional weight updates since the weights were last reset.
    pub positional_weights_set: usize,
    pub action_weights_set: usize,
    /// Seconds; zero when timing is disabled.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub iterations: Vec<IterationMetrics>,
    pub converged: bool,
    /// The run was stopped from outside before converging.
    #[serde(default)]
    pub interrupted: bool,
    pub final_path: Vec<RobotState>,
    pub total_requests: usize,
    pub total_weights: usize,
}

pub const CSV_HEADER: &str =
    "iteration,expansions,path_states,requests,pos_weights_cum,act_weights_cum,wall_time_s";

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for m in &self.iterations {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.6}",
                m.iteration,
                m.global_expansions,
                m.path_length_states,
                m.request_count,
                m.positional_weights_set,
                m.action_weights_set,
                m.wall_time
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn last(&self) -> Option<&IterationMetrics> {
        self.iterations.last()
    }
}

/// One line per state: the 18 scalars (position, roll/pitch/yaw, joint
/// angles leg by leg) followed by `valid` or `invalid` from an independent
/// re-check against `map`.
pub fn states_to_text(states: &[RobotState], map: &VoxelMap, config: &RobotConfig) -> String {
    let mut out = String::from("# robot-states v1\n");
    for s in states {
        let fields: Vec<String> = s.to_tuple().iter().map(|v| v.to_string()).collect();
        let validity = if recheck(s, map, config) {
            "valid"
        } else {
            "invalid"
        };
        writeln!(out, "{} {validity}", fields.join(" ")).unwrap();
    }
    out
}
