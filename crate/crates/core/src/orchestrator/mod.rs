//! The learning loop: global plan, local refinement and weight feedback,
//! repeated until the path length settles, with user obstacle edits applied
//! between iterations.

mod report;
mod world;

pub use report::{states_to_text, IterationMetrics, RunReport, CSV_HEADER};
pub use world::{EditError, ObstacleEdit, World};

use crate::global::{self, GlobalPath, PlanError};
use crate::kinematics::{standing_height_max, RobotState};
use crate::local::{LocalError, LocalPlanner, LocalResult};
use crate::maps::{VoxelMap, WeightMaps, WeightUpdate};
use crate::world::{Scenario, ScenarioError};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

pub const DEFAULT_MAX_ITERATIONS: usize = 20;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("iteration {iteration}: {source}")]
    Scenario {
        iteration: usize,
        #[source]
        source: ScenarioError,
    },
    #[error("iteration {iteration}: global planning failed: {source}")]
    Global {
        iteration: usize,
        #[source]
        source: PlanError,
    },
    #[error("iteration {iteration}: local planning failed: {source}")]
    Local {
        iteration: usize,
        #[source]
        source: LocalError,
    },
    #[error("iteration {iteration}: {source}")]
    Edit {
        iteration: usize,
        #[source]
        source: EditError,
    },
    #[error("max_iterations must be at least 1")]
    NoIterations,
}

/// Supplies obstacle edits at iteration boundaries.
pub trait EditSource {
    /// Edits to queue before iteration `iteration` (1-based) is planned.
    fn edits_before(&mut self, iteration: usize) -> Vec<ObstacleEdit>;
}

/// No edits at all.
pub struct NoEdits;

impl EditSource for NoEdits {
    fn edits_before(&mut self, _iteration: usize) -> Vec<ObstacleEdit> {
        Vec::new()
    }
}

/// One entry of an edit script: the edit is queued at the boundary before
/// `iteration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEdit {
    pub iteration: usize,
    #[serde(flatten)]
    pub edit: ObstacleEdit,
}

/// Edits keyed to iteration indices, replayed in file order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EditScript(pub Vec<ScriptedEdit>);

impl EditScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl EditSource for EditScript {
    fn edits_before(&mut self, iteration: usize) -> Vec<ObstacleEdit> {
        // Entries keyed to an iteration that already passed are applied at
        // the first boundary reached.
        let (due, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.0)
            .into_iter()
            .partition(|e| e.iteration <= iteration);
        self.0 = later;
        due.into_iter().map(|e| e.edit).collect()
    }
}

impl EditSource for std::sync::mpsc::Receiver<ObstacleEdit> {
    fn edits_before(&mut self, _iteration: usize) -> Vec<ObstacleEdit> {
        self.try_iter().collect()
    }
}

/// Progress notifications from the learning loop.
#[allow(unused_variables)]
pub trait Observer {
    fn map_ready(&mut self, iteration: usize, world: &World, map: &VoxelMap) {}
    fn global_path(&mut self, iteration: usize, path: &GlobalPath) {}
    fn weight_updates(&mut self, iteration: usize, updates: &[WeightUpdate]) {}
    fn local_states(&mut self, iteration: usize, states: &[RobotState]) {}
    fn iteration_done(&mut self, metrics: &IterationMetrics) {}
    /// Polled at every iteration boundary; returning true ends the run early.
    fn should_stop(&mut self) -> bool {
        false
    }
}

pub struct NullObserver;

impl Observer for NullObserver {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub max_iterations: usize,
    /// Record wall-clock time per iteration; off gives reproducible reports.
    pub record_timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            record_timing: true,
        }
    }
}

/// Owns the world and the weights, which persist across iterations and
/// across runs until reset.
#[derive(Debug, Clone)]
pub struct Orchestrator {
    pub world: World,
    pub weights: WeightMaps,
    /// States of the most recent successful iteration.
    pub last_states: Vec<RobotState>,
}

/// Outcome of a single iteration.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub metrics: IterationMetrics,
    pub global: GlobalPath,
    pub local: LocalResult,
}

impl Orchestrator {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            world: World::new(scenario),
            weights: WeightMaps::new(),
            last_states: Vec::new(),
        }
    }

    /// Height limit used by both planners: the tallest level stance.
    pub fn height_threshold(&self) -> f64 {
        standing_height_max(&self.world.scenario.robot)
    }

    /// Plans and refines once on the current world and weights.
    pub fn iterate(
        &mut self,
        iteration: usize,
        record_timing: bool,
        observer: &mut dyn Observer,
    ) -> Result<IterationOutcome, RunError> {
        let started = Instant::now();
        let map = self
            .world
            .voxelize()
            .map_err(|source| RunError::Scenario { iteration, source })?;
        observer.map_ready(iteration, &self.world, &map);
        let scenario = &self.world.scenario;
        let h_th = self.height_threshold();
        let start = map.discretize(&scenario.start.position());
        let goal = map.discretize(&scenario.goal.position());
        let global = global::plan(start, goal, &map, &self.weights, h_th)
            .map_err(|source| RunError::Global { iteration, source })?;
        observer.global_path(iteration, &global);

        let planner = LocalPlanner::new(&map, &scenario.robot, &scenario.params, h_th);
        let local_err = |source| RunError::Local { iteration, source };
        let start_state = planner.initial_state(&scenario.start).map_err(local_err)?;
        let local = planner
            .refine(&global, &start_state, &scenario.goal, &mut self.weights)
            .map_err(|e| match e {
                LocalError::Plan(source) => RunError::Global { iteration, source },
                other => local_err(other),
            })?;
        observer.weight_updates(iteration, &local.feedback);
        observer.local_states(iteration, &local.states);

        let metrics = IterationMetrics {
            iteration,
            global_expansions: global.expansions + local.replan_expansions,
            path_length_states: local.states.len(),
            request_count: local.request_count,
            positional_weights_set: self.weights.positional_set_count(),
            action_weights_set: self.weights.action_set_count(),
            wall_time: if record_timing {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        observer.iteration_done(&metrics);
        self.last_states = local.states.clone();
        Ok(IterationOutcome {
            metrics,
            global,
            local,
        })
    }

    /// Runs iterations until the path length repeats with at most one replan
    /// request, `max_iterations` is reached or the observer asks to stop.
    pub fn run(
        &mut self,
        options: &RunOptions,
        edits: &mut dyn EditSource,
        observer: &mut dyn Observer,
    ) -> Result<RunReport, RunError> {
        if options.max_iterations == 0 {
            return Err(RunError::NoIterations);
        }
        let mut iterations: Vec<IterationMetrics> = Vec::new();
        let mut converged = false;
        let mut interrupted = false;
        for iteration in 1..=options.max_iterations {
            if observer.should_stop() {
                interrupted = true;
                break;
            }
            for edit in edits.edits_before(iteration) {
                self.world
                    .queue(edit)
                    .map_err(|source| RunError::Edit { iteration, source })?;
            }
            self.world.apply_pending();
            let outcome = self.iterate(iteration, options.record_timing, observer)?;
            let metrics = outcome.metrics;
            converged = iterations
                .last()
                .is_some_and(|prev| settled(prev, &metrics));
            iterations.push(metrics);
            if converged {
                break;
            }
        }
        let total_requests = iterations.iter().map(|m| m.request_count).sum();
        let total_weights = self.weights.positional_set_count() + self.weights.action_set_count();
        Ok(RunReport {
            iterations,
            converged,
            interrupted,
            final_path: self.last_states.clone(),
            total_requests,
            total_weights,
        })
    }
}

/// Convergence rule: same number of states as the previous iteration and at
/// most one replan request.
pub fn settled(previous: &IterationMetrics, current: &IterationMetrics) -> bool {
    current.path_length_states == previous.path_length_states && current.request_count <= 1
}

/// Runs the learning loop on a fresh world with empty weights.
pub fn run_learning(
    scenario: Scenario,
    options: &RunOptions,
    edits: &mut dyn EditSource,
    observer: &mut dyn Observer,
) -> Result<RunReport, RunError> {
    Orchestrator::new(scenario).run(options, edits, observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::CellTag;
    use crate::world::{BoxObstacle, Pose};

    fn edit(iteration: usize, id: &str) -> ScriptedEdit {
        ScriptedEdit {
            iteration,
            edit: ObstacleEdit::Add {
                id: id.into(),
                obstacle: BoxObstacle::axis_aligned([0.0; 3], [0.1; 3], CellTag::UserVirtual),
            },
        }
    }

    #[test]
    fn script_releases_edits_by_iteration() {
        let mut s = EditScript(vec![edit(2, "b"), edit(1, "a"), edit(2, "c")]);
        let ids = |v: Vec<ObstacleEdit>| v.iter().map(|e| e.id().to_string()).collect::<Vec<_>>();
        assert_eq!(ids(s.edits_before(1)), ["a"]);
        assert_eq!(ids(s.edits_before(2)), ["b", "c"]);
        assert!(s.edits_before(3).is_empty());
    }

    #[test]
    fn script_json() {
        let s = EditScript::from_json(
            r#"[{"iteration": 1, "op": "add", "id": "base",
                 "box": {"center": [0.2, 0, 0.1], "half_extents": [0.05, 0.3, 0.1], "tag": "user_virtual"}},
                {"iteration": 3, "op": "remove", "id": "base"}]"#,
        )
        .unwrap();
        assert_eq!(s.0.len(), 2);
        assert_eq!(s.0[1].edit, ObstacleEdit::Remove { id: "base".into() });
    }

    fn flat() -> Scenario {
        Scenario {
            boxes: vec![BoxObstacle::axis_aligned(
                [-1.0, -1.0, -0.1],
                [1.0, 1.0, 0.0],
                CellTag::Terrain,
            )],
            start: Pose::new([-0.05, 0.025, 0.225], 0.0),
            goal: Pose::new([0.05, 0.025, 0.225], 0.0),
            resolution: 0.05,
            robot: Default::default(),
            params: Default::default(),
        }
    }

    #[test]
    fn flat_three_cells_converge_at_two() {
        let report = run_learning(
            flat(),
            &RunOptions::default(),
            &mut NoEdits,
            &mut NullObserver,
        )
        .unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations.len(), 2);
        for m in &report.iterations {
            assert_eq!(m.request_count, 0);
        }
        assert_eq!(
            report.iterations[0].path_length_states,
            report.iterations[1].path_length_states
        );
    }

    #[test]
    fn zero_iterations_rejected() {
        let opts = RunOptions {
            max_iterations: 0,
            record_timing: false,
        };
        assert!(matches!(
            run_learning(flat(), &opts, &mut NoEdits, &mut NullObserver),
            Err(RunError::NoIterations)
        ));
    }
}
