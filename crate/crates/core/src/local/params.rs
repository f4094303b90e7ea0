use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("propagation params: {0}")]
pub struct ParamsError(pub String);

/// Step limits, budgets and gait tuning of the local planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationParams {
    /// Maximum trunk translation per step (m).
    pub delta_p_max: f64,
    /// Maximum trunk rotation per step, as the norm of the roll/pitch/yaw
    /// increment (rad).
    pub delta_r_max: f64,
    /// Extra waypoints to back off by after a blocked waypoint.
    pub back_off_shift: usize,
    pub max_steps_per_waypoint: usize,
    /// Action weight increment per metre of repulsion.
    pub action_weight_gain: f64,
    pub max_propagation_steps: usize,
    /// Replan requests allowed within one refinement before giving up.
    pub max_requests: usize,
    /// Swing trigger threshold is `0.5 * delta_p_max * step_trigger_factor`.
    pub step_trigger_factor: f64,
    /// Swing paw lift above its foothold (m); defaults to two voxels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_clearance: Option<f64>,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            delta_p_max: 0.03,
            delta_r_max: 0.05,
            back_off_shift: 1,
            max_steps_per_waypoint: 500,
            action_weight_gain: 1.0,
            max_propagation_steps: 100_000,
            max_requests: 1_000,
            step_trigger_factor: 2.0,
            step_clearance: None,
        }
    }
}

impl PropagationParams {
    pub fn swing_threshold(&self) -> f64 {
        0.5 * self.delta_p_max * self.step_trigger_factor
    }

    pub fn step_clearance(&self, resolution: f64) -> f64 {
        self.step_clearance.unwrap_or(2.0 * resolution)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive = [
            ("delta_p_max", self.delta_p_max),
            ("delta_r_max", self.delta_r_max),
            ("action_weight_gain", self.action_weight_gain),
            ("step_trigger_factor", self.step_trigger_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamsError(format!("{name} must be positive")));
            }
        }
        if self.max_steps_per_waypoint == 0
            || self.max_propagation_steps == 0
            || self.max_requests == 0
        {
            return Err(ParamsError("step budgets must be positive".into()));
        }
        if let Some(c) = self.step_clearance {
            if c.is_nan() || c < 0.0 {
                return Err(ParamsError("step_clearance must be non-negative".into()));
            }
        }
        Ok(())
    }
}
