//! Waypoint following with repulsion, rewind and in-place replanning.

use super::frames::{clamp_deltas, compute_delta_p, compute_rotation_delta, Origins};
use super::gait::{foothold_for, propagate, step_gait, Candidate, LocalState};
use super::params::PropagationParams;
use super::validate::{compute_repulsive, validate, Validity};
use crate::geometry::{yaw_matrix, Vec3};
use crate::global::{self, GlobalPath, PlanError};
use crate::kinematics::{RobotConfig, RobotState, LEG_COUNT};
use crate::maps::{Action, DiscreteState, VoxelMap, WeightMaps, WeightUpdate};
use crate::world::Pose;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalError {
    #[error("start pose is not a valid robot state: {0}")]
    InvalidStart(String),
    #[error("global path is empty")]
    EmptyPath,
    #[error("propagation budget of {0} steps exhausted")]
    StepBudget(usize),
    #[error("gave up after {0} replan requests")]
    RequestBudget(usize),
    #[error("replanning failed: {0}")]
    Plan(#[from] PlanError),
}

/// One rewind-and-replan event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanEvent {
    /// Index of the blocked waypoint in the path being followed at the time.
    pub blocked_index: usize,
    pub blocked_cell: DiscreteState,
    /// Waypoint the robot was rewound to, `None` for the start state.
    pub rewind_index: Option<usize>,
    /// Accumulated repulsion at the blocked waypoint.
    pub repulsive: [f64; 3],
    pub replan_expansions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    /// Valid states from the start state to the goal.
    pub states: Vec<RobotState>,
    pub final_state: LocalState,
    /// Waypoint cells actually followed, after all in-place replans.
    pub path: Vec<DiscreteState>,
    pub feedback: Vec<WeightUpdate>,
    pub events: Vec<ReplanEvent>,
    pub replan_requested: bool,
    pub request_count: usize,
    /// Expansions spent by the in-place replans.
    pub replan_expansions: usize,
    pub steps: usize,
}

/// Where a single pass over a path stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum FollowOutcome {
    Reached,
    Blocked { index: usize, repulsive: Vec3 },
}

/// Progress through a waypoint list: produced states plus a snapshot of the
/// planner state at every achieved waypoint so the walk can be rewound.
#[derive(Debug, Clone)]
pub struct Traversal {
    pub path: Vec<DiscreteState>,
    pub states: Vec<RobotState>,
    pub current: LocalState,
    start: LocalState,
    achieved: Vec<(usize, LocalState)>,
    waypoint_steps: usize,
    /// Highest waypoint index achieved since the last rewind.
    pub furthest: usize,
    pub steps: usize,
    /// Most recent candidate that failed validation.
    pub last_invalid: Option<Candidate>,
}

impl Traversal {
    pub fn new(path: Vec<DiscreteState>, start: LocalState) -> Self {
        let mut start = start;
        start.waypoint_index = 0;
        start.accumulated_d = [0.0; 3];
        Self {
            path,
            states: vec![start.robot.clone()],
            current: start.clone(),
            start,
            achieved: Vec::new(),
            waypoint_steps: 0,
            furthest: 0,
            steps: 0,
            last_invalid: None,
        }
    }

    /// Restores the state in which waypoint `index` was achieved, or the
    /// start state for `None`, and drops every later state.
    pub fn rewind(&mut self, index: Option<usize>) {
        match index {
            Some(i) => {
                let (len, state) = self.achieved[i].clone();
                self.states.truncate(len);
                self.current = state;
                self.current.waypoint_index = i + 1;
                self.achieved.truncate(i + 1);
            }
            None => {
                self.states.truncate(1);
                self.current = self.start.clone();
                self.achieved.clear();
            }
        }
        self.current.accumulated_d = [0.0; 3];
        self.waypoint_steps = 0;
    }

    /// Replaces the path from waypoint `from` on with `tail`, whose first
    /// cell must equal `path[from]`.
    pub fn splice(&mut self, from: usize, tail: Vec<DiscreteState>) {
        self.path.truncate(from);
        self.path.extend(tail);
    }
}

/// Borrowed inputs shared by every step of the local planner.
#[derive(Debug, Clone, Copy)]
pub struct LocalPlanner<'a> {
    pub map: &'a VoxelMap,
    pub config: &'a RobotConfig,
    pub params: &'a PropagationParams,
    /// Standing-height limit (m), for replanning and downward repulsion.
    pub h_th: f64,
}

impl<'a> LocalPlanner<'a> {
    pub fn new(
        map: &'a VoxelMap,
        config: &'a RobotConfig,
        params: &'a PropagationParams,
        h_th: f64,
    ) -> Self {
        Self {
            map,
            config,
            params,
            h_th,
        }
    }

    /// Level trunk at the pose with every paw dropped from its neutral point
    /// onto the surface below.
    pub fn initial_state(&self, pose: &Pose) -> Result<LocalState, LocalError> {
        let position = pose.position();
        let orientation = [0.0, 0.0, pose.yaw];
        let paws: [Vec3; LEG_COUNT] = std::array::from_fn(|leg| {
            foothold_for(
                self.map,
                &position,
                &orientation,
                self.config,
                leg,
                &Vec3::zeros(),
            )
        });
        match validate(&position, &orientation, &paws, self.map, self.config) {
            Validity::Valid(robot) => Ok(LocalState {
                robot,
                paws: paws.map(Into::into),
                accumulated_swing: [0.0; LEG_COUNT],
                swing_leg: None,
                swing_foothold: None,
                accumulated_d: [0.0; 3],
                waypoint_index: 0,
            }),
            Validity::Invalid {
                collisions,
                ik_failed,
                support,
            } => Err(LocalError::InvalidStart(format!(
                "{} contacts, ik {}, {} paws supported",
                collisions.len(),
                if ik_failed { "failed" } else { "ok" },
                support
            ))),
        }
    }

    /// Walks the traversal forward until the goal pose is reached or a
    /// waypoint is blocked. `budget` counts remaining propagation steps.
    pub fn follow(
        &self,
        t: &mut Traversal,
        goal: &Pose,
        budget: &mut usize,
    ) -> Result<FollowOutcome, LocalError> {
        if t.path.is_empty() {
            return Err(LocalError::EmptyPath);
        }
        let p_max = self.params.delta_p_max;
        let r_max = self.params.delta_r_max;
        let goal_rotation = yaw_matrix(goal.yaw);
        loop {
            let n = t.path.len();
            let i = t.current.waypoint_index;
            // A one-cell path means the start already is in the goal cell;
            // head straight for the goal pose.
            let final_stage = i >= n || n == 1;
            let (index, waypoint) = if final_stage {
                (n - 1, goal.position())
            } else {
                (i, self.map.discrete_to_world(t.path[i]))
            };
            let d = Vec3::from(t.current.accumulated_d);
            let position = t.current.robot.position();
            let rotation = t.current.robot.rotation();
            let delta_p = compute_delta_p(&waypoint, &d, &position);
            let delta_r = if final_stage {
                Origins {
                    current: rotation,
                    target: goal_rotation,
                }
                .rotation_delta()
            } else {
                compute_rotation_delta(&rotation, &delta_p)
            };
            let (dp, dr) = clamp_deltas(&delta_p, &delta_r, p_max, r_max);

            if dp.norm() < p_max {
                if final_stage {
                    if dr.norm() < r_max {
                        return Ok(FollowOutcome::Reached);
                    }
                } else {
                    t.achieved.push((t.states.len(), t.current.clone()));
                    t.furthest = t.furthest.max(i);
                    t.current.waypoint_index += 1;
                    t.current.accumulated_d = [0.0; 3];
                    t.waypoint_steps = 0;
                    continue;
                }
            }
            if t.waypoint_steps >= self.params.max_steps_per_waypoint {
                let repulsive = if d.norm() > 0.0 {
                    d
                } else {
                    Vec3::new(0.0, 0.0, self.map.resolution())
                };
                return Ok(FollowOutcome::Blocked { index, repulsive });
            }
            if *budget == 0 {
                return Err(LocalError::StepBudget(self.params.max_propagation_steps));
            }
            *budget -= 1;
            t.steps += 1;
            t.waypoint_steps += 1;

            let moved = propagate(&t.current, &dp, &dr, self.config);
            let candidate = step_gait(
                moved,
                &dp,
                self.params.swing_threshold(),
                self.params.step_clearance(self.map.resolution()),
                self.map,
                self.config,
            );
            match validate(
                &candidate.position,
                &candidate.orientation,
                &candidate.paws,
                self.map,
                self.config,
            ) {
                Validity::Valid(robot) => {
                    t.states.push(robot.clone());
                    let c = &mut t.current;
                    c.robot = robot;
                    c.paws = candidate.paws.map(Into::into);
                    c.accumulated_swing = candidate.accumulated_swing;
                    c.swing_leg = candidate.swing_leg;
                    c.swing_foothold = candidate.swing_foothold.map(Into::into);
                }
                Validity::Invalid { collisions, .. } => {
                    t.last_invalid = Some(candidate.clone());
                    let push = compute_repulsive(&candidate.position, &collisions, self.h_th);
                    let d = d + push;
                    t.current.accumulated_d = d.into();
                    if self.map.discretize(&(waypoint + d)) != self.map.discretize(&waypoint) {
                        return Ok(FollowOutcome::Blocked {
                            index,
                            repulsive: d,
                        });
                    }
                }
            }
        }
    }

    /// Follows `path` from `start` to the goal pose. Every blocked waypoint
    /// adds feedback to `weights`, rewinds past it and replans the remainder
    /// of the path with the updated weights.
    pub fn refine(
        &self,
        path: &GlobalPath,
        start: &LocalState,
        goal: &Pose,
        weights: &mut WeightMaps,
    ) -> Result<LocalResult, LocalError> {
        let goal_cell = *path.states.last().ok_or(LocalError::EmptyPath)?;
        let mut t = Traversal::new(path.states.clone(), start.clone());
        let mut budget = self.params.max_propagation_steps;
        let mut feedback = Vec::new();
        let mut events = Vec::new();
        let mut replan_expansions = 0;
        let mut last_blocked: Option<usize> = None;
        let mut streak = 0;
        loop {
            let (index, repulsive) = match self.follow(&mut t, goal, &mut budget)? {
                FollowOutcome::Reached => break,
                FollowOutcome::Blocked { index, repulsive } => (index, repulsive),
            };
            if events.len() >= self.params.max_requests {
                return Err(LocalError::RequestBudget(events.len()));
            }
            let updates = feedback_for(&t.path, index, &repulsive, self.params.action_weight_gain);
            for u in &updates {
                weights.apply(u).expect("feedback weights are non-negative");
            }
            feedback.extend(updates);

            // Blocking again without getting past the previous blocked
            // waypoint backs off one waypoint further each time, so a
            // snapshot that cannot move forward is eventually left behind.
            streak = match last_blocked {
                Some(prev) if t.furthest <= prev => streak + 1,
                _ => 0,
            };
            last_blocked = Some(index);
            t.furthest = 0;
            let rewind_index = index.checked_sub(1 + self.params.back_off_shift + streak);
            t.rewind(rewind_index);
            let from = rewind_index.unwrap_or(0);
            let replanned = global::plan(t.path[from], goal_cell, self.map, weights, self.h_th)?;
            replan_expansions += replanned.expansions;
            events.push(ReplanEvent {
                blocked_index: index,
                blocked_cell: t.path[index],
                rewind_index,
                repulsive: repulsive.into(),
                replan_expansions: replanned.expansions,
            });
            t.splice(from, replanned.states);
        }
        let request_count = events.len();
        Ok(LocalResult {
            states: t.states,
            final_state: t.current,
            path: t.path,
            feedback,
            events,
            replan_requested: request_count > 0,
            request_count,
            replan_expansions,
            steps: t.steps,
        })
    }
}

/// Weight increments for a blocked waypoint: `|d|` on the cell and
/// `gain · |d|` on the move that led into it.
pub fn feedback_for(
    path: &[DiscreteState],
    index: usize,
    repulsive: &Vec3,
    gain: f64,
) -> Vec<WeightUpdate> {
    let magnitude = repulsive.norm();
    let mut out = vec![WeightUpdate::Positional {
        state: path[index],
        delta: magnitude,
    }];
    if index > 0 {
        let from = path[index - 1];
        if let Some(action) = Action::between(from, path[index]) {
            out.push(WeightUpdate::Action {
                state: from,
                action,
                delta: gain * magnitude,
            });
        }
    }
    out
}
