use super::{BoxObstacle, Pose, Scenario, ScenarioError};
use crate::maps::CellTag;

/// Axis-aligned staircase climbing along +x from the floor plane z = 0.
///
/// Step `i` (1-based) is a solid block spanning `[i·run, (i+1)·run]` in x,
/// `[-width/2, width/2]` in y and `[0, i·rise]` in z, so its top face sits at
/// `i·rise`. Neighbouring blocks share faces but no volume.
pub fn generate_stairs(
    steps: usize,
    rise: f64,
    run: f64,
    width: f64,
) -> Result<Vec<BoxObstacle>, ScenarioError> {
    if steps == 0 {
        return Err(ScenarioError::Invalid(
            "stairs need at least one step".into(),
        ));
    }
    if [rise, run, width]
        .iter()
        .any(|&v| !(v > 0.0 && v.is_finite()))
    {
        return Err(ScenarioError::Invalid(
            "stair rise, run and width must be positive".into(),
        ));
    }
    Ok((1..=steps)
        .map(|i| {
            let i = i as f64;
            BoxObstacle::axis_aligned(
                [i * run, -0.5 * width, 0.0],
                [(i + 1.0) * run, 0.5 * width, i * rise],
                CellTag::Terrain,
            )
        })
        .collect())
}

/// Parameters of the bundled stairs scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct StairsSpec {
    pub steps: usize,
    pub rise: f64,
    pub run: f64,
    pub width: f64,
    pub resolution: f64,
    /// Trunk-center height above the support surface at start and goal.
    pub stance_height: f64,
    /// Distance of the start pose before the first step.
    pub approach: f64,
}

impl Default for StairsSpec {
    fn default() -> Self {
        Self {
            steps: 10,
            rise: 0.1,
            run: 0.3,
            width: 1.0,
            resolution: 0.05,
            stance_height: 0.22,
            approach: 0.9,
        }
    }
}

/// Floor plus staircase; the start stands on the floor in front of the first
/// step and the goal on the middle of the top step.
pub fn stairs_scenario(spec: &StairsSpec) -> Result<Scenario, ScenarioError> {
    let mut boxes = vec![BoxObstacle::axis_aligned(
        [-spec.approach - 0.6, -0.5 * spec.width - 0.5, -0.1],
        [
            (spec.steps as f64 + 1.0) * spec.run + 0.6,
            0.5 * spec.width + 0.5,
            0.0,
        ],
        CellTag::Terrain,
    )];
    boxes.extend(generate_stairs(
        spec.steps, spec.rise, spec.run, spec.width,
    )?);
    let top = spec.steps as f64;
    let scenario = Scenario {
        boxes,
        start: Pose::new([spec.run - spec.approach, 0.0, spec.stance_height], 0.0),
        goal: Pose::new(
            [
                (top + 0.5) * spec.run,
                0.0,
                top * spec.rise + spec.stance_height,
            ],
            0.0,
        ),
        resolution: spec.resolution,
        robot: crate::kinematics::RobotConfig {
            foot_contact_tol: spec.resolution / 2.0,
            ..Default::default()
        },
        params: Default::default(),
    };
    scenario.validate()?;
    Ok(scenario)
}
