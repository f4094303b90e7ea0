use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LEG_COUNT: usize = 4;
pub const LEG_NAMES: [&str; LEG_COUNT] = ["FL", "FR", "RL", "RR"];

/// +1 for left legs, -1 for right legs.
pub fn leg_side(leg: usize) -> f64 {
    if leg.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("robot config: {0}")]
    Invalid(String),
}

/// Geometry of the quadruped digital twin. Legs are ordered FL, FR, RL, RR;
/// each is an abduction → hip-pitch → knee chain hanging from its hip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    pub trunk_half_extents: [f64; 3],
    /// Hip joint positions in the trunk frame.
    pub hip_offsets: [[f64; 3]; LEG_COUNT],
    pub l_abd: f64,
    pub l_thigh: f64,
    pub l_shank: f64,
    /// `(min, max)` for abduction, hip pitch and knee, shared by all legs.
    pub joint_limits: [[f64; 2]; 3],
    pub foot_contact_tol: f64,
    /// Radius of the thigh and shank capsules.
    pub link_radius: f64,
    /// Clearance subtracted from the straight-leg reach to get the maximum
    /// standing height.
    pub standing_margin: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            trunk_half_extents: [0.20, 0.10, 0.05],
            hip_offsets: [
                [0.10, 0.06, -0.05],
                [0.10, -0.06, -0.05],
                [-0.10, 0.06, -0.05],
                [-0.10, -0.06, -0.05],
            ],
            l_abd: 0.04,
            l_thigh: 0.15,
            l_shank: 0.15,
            joint_limits: [[-0.6, 0.6], [-1.6, 2.6], [-2.7, 0.0]],
            foot_contact_tol: 0.025,
            link_radius: 0.01,
            standing_margin: 0.02,
        }
    }
}

impl RobotConfig {
    pub fn max_reach(&self) -> f64 {
        self.l_abd + self.l_thigh + self.l_shank
    }

    // Negated comparisons so NaN fails too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        if self.trunk_half_extents.iter().any(|&e| !(e > 0.0)) {
            return fail("trunk half extents must be positive");
        }
        if ![self.l_abd, self.l_thigh, self.l_shank]
            .iter()
            .all(|&l| l > 0.0)
        {
            return fail("link lengths must be positive");
        }
        if self.joint_limits.iter().any(|[lo, hi]| !(lo < hi)) {
            return fail("joint limits need min < max");
        }
        if !(self.foot_contact_tol >= 0.0) || !(self.link_radius >= 0.0) {
            return fail("tolerances must be non-negative");
        }
        if !(self.standing_margin >= 0.0) || self.standing_margin >= self.l_thigh + self.l_shank {
            return fail("standing margin must lie in [0, l_thigh + l_shank)");
        }
        let h = &self.hip_offsets;
        let mirrored = |a: &[f64; 3], b: &[f64; 3]| {
            (a[0] - b[0]).abs() < 1e-12
                && (a[1] + b[1]).abs() < 1e-12
                && (a[2] - b[2]).abs() < 1e-12
        };
        if !mirrored(&h[0], &h[1]) || !mirrored(&h[2], &h[3]) || h[0][1] <= 0.0 || h[2][1] <= 0.0 {
            return fail("hip offsets must mirror across the sagittal plane, left legs at +y");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        RobotConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_asymmetric_hips() {
        let mut c = RobotConfig::default();
        c.hip_offsets[1][1] = -0.07;
        assert!(c.validate().is_err());
        let mut c = RobotConfig::default();
        c.joint_limits[2] = [0.0, 0.0];
        assert!(c.validate().is_err());
        let c = RobotConfig {
            l_thigh: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_document_takes_defaults() {
        let c: RobotConfig = serde_json::from_str(r#"{"l_thigh": 0.2}"#).unwrap();
        assert_eq!(c.l_thigh, 0.2);
        assert_eq!(c.l_shank, 0.15);
    }
}
