//! A* over the 26-connected trunk-cell grid.
//!
//! Edge cost of move `a` from `q` is `|a| + f̂(a, q)` and the heuristic is
//! `|goal - q| + ĥ(q)`, both in cell units: weights are stored in metres and
//! divided by the map resolution here. A positional weight can make the
//! heuristic overestimate, in which case the returned path is not
//! guaranteed optimal; it is still a valid path.

use crate::maps::{Action, DiscreteState, VoxelMap, WeightMaps};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start cell {0} is not a valid trunk cell")]
    InvalidStart(DiscreteState),
    #[error("goal cell {0} is not a valid trunk cell")]
    InvalidGoal(DiscreteState),
    #[error("no path from {start} to {goal} ({expansions} expansions)")]
    NoPath {
        start: DiscreteState,
        goal: DiscreteState,
        expansions: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPath {
    pub states: Vec<DiscreteState>,
    pub total_cost: f64,
    pub expansions: usize,
}

/// Standing-height limit in whole cells (rounded down).
pub fn height_threshold_cells(h_th: f64, resolution: f64) -> u32 {
    // The 1e-9 absorbs representation error in exact multiples, e.g. 0.3 / 0.05.
    ((h_th / resolution) + 1e-9).floor().max(0.0) as u32
}

/// A trunk cell is valid when it is free and some occupied cell lies at most
/// `h_th_cells` free cells beneath it.
pub fn valid_discrete_state(q: DiscreteState, map: &VoxelMap, h_th_cells: u32) -> bool {
    map.in_bounds(q)
        && !map.is_occupied(q)
        && map.support_distance(q).is_some_and(|d| d <= h_th_cells)
}

pub fn heuristic(
    q: DiscreteState,
    goal: DiscreteState,
    weights: &WeightMaps,
    resolution: f64,
) -> f64 {
    q.distance(goal) + weights.positional.get(q) / resolution
}

pub fn action_cost(a: Action, q: DiscreteState, weights: &WeightMaps, resolution: f64) -> f64 {
    a.norm() + weights.action.get(q, a) / resolution
}

/// Sum of the step costs along `states`, added smallest first. Paths sharing
/// the same multiset of step costs therefore report bit-identical totals.
pub fn path_cost(states: &[DiscreteState], weights: &WeightMaps, resolution: f64) -> f64 {
    let mut costs: Vec<f64> = states
        .windows(2)
        .map(|w| {
            let a = Action::between(w[0], w[1]).expect("consecutive path cells are neighbours");
            action_cost(a, w[0], weights, resolution)
        })
        .collect();
    costs.sort_by(f64::total_cmp);
    costs.iter().sum()
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    h: f64,
    g: f64,
    state: DiscreteState,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // Reversed: BinaryHeap is a max-heap and we pop the smallest
    // (f, h, state) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.state.cmp(&self.state))
    }
}

/// Closed-set A* from `start` to `goal`. `expansions` counts popped nodes.
pub fn plan(
    start: DiscreteState,
    goal: DiscreteState,
    map: &VoxelMap,
    weights: &WeightMaps,
    h_th: f64,
) -> Result<GlobalPath, PlanError> {
    let res = map.resolution();
    let h_cells = height_threshold_cells(h_th, res);
    if !valid_discrete_state(start, map, h_cells) {
        return Err(PlanError::InvalidStart(start));
    }
    if !valid_discrete_state(goal, map, h_cells) {
        return Err(PlanError::InvalidGoal(goal));
    }

    let n = map.cell_count();
    let mut g_score = vec![f64::INFINITY; n];
    let mut parent = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    // 0 = unknown, 1 = valid, 2 = invalid
    let mut validity = vec![0u8; n];
    let idx = |q: DiscreteState| map.index(q).expect("in bounds");
    let [nx, ny, _] = map.dims();
    let unindex = |i: usize| {
        DiscreteState::new(
            (i % nx) as i32,
            ((i / nx) % ny) as i32,
            (i / (nx * ny)) as i32,
        )
    };

    let mut open = BinaryHeap::new();
    let h0 = heuristic(start, goal, weights, res);
    g_score[idx(start)] = 0.0;
    open.push(Open {
        f: h0,
        h: h0,
        g: 0.0,
        state: start,
    });
    let mut expansions = 0;
    let actions = Action::all();

    while let Some(node) = open.pop() {
        let i = idx(node.state);
        if closed[i] || node.g > g_score[i] {
            continue;
        }
        closed[i] = true;
        expansions += 1;
        if node.state == goal {
            let mut states = vec![goal];
            let mut cur = i;
            while parent[cur] != u32::MAX {
                cur = parent[cur] as usize;
                states.push(unindex(cur));
            }
            states.reverse();
            let total_cost = path_cost(&states, weights, res);
            return Ok(GlobalPath {
                states,
                total_cost,
                expansions,
            });
        }
        for a in actions {
            let next = node.state.step(a);
            let Some(j) = map.index(next) else { continue };
            if closed[j] {
                continue;
            }
            if validity[j] == 0 {
                validity[j] = if valid_discrete_state(next, map, h_cells) {
                    1
                } else {
                    2
                };
            }
            if validity[j] == 2 {
                continue;
            }
            let g = node.g + action_cost(a, node.state, weights, res);
            if g < g_score[j] {
                g_score[j] = g;
                parent[j] = i as u32;
                let h = heuristic(next, goal, weights, res);
                open.push(Open {
                    f: g + h,
                    h,
                    g,
                    state: next,
                });
            }
        }
    }
    Err(PlanError::NoPath {
        start,
        goal,
        expansions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::maps::CellTag;

    /// `nx × ny` free layer at z = 1 resting on a full floor layer at z = 0.
    fn floor(nx: usize, ny: usize) -> VoxelMap {
        let cells = (0..nx as i32).flat_map(|x| {
            (0..ny as i32).map(move |y| (DiscreteState::new(x, y, 0), CellTag::Terrain))
        });
        VoxelMap::from_cells(1.0, Vec3::zeros(), [nx, ny, 3], cells).unwrap()
    }

    #[test]
    fn validity_examples() {
        let mut map = floor(5, 5);
        assert!(!valid_discrete_state(DiscreteState::new(0, 0, 0), &map, 1));
        assert!(valid_discrete_state(DiscreteState::new(0, 0, 1), &map, 0));
        // support distance 1 with a zero-cell threshold
        assert!(!valid_discrete_state(DiscreteState::new(0, 0, 2), &map, 0));
        assert!(valid_discrete_state(DiscreteState::new(0, 0, 2), &map, 1));
        map.set(DiscreteState::new(0, 0, 0), None).unwrap();
        assert!(!valid_discrete_state(DiscreteState::new(0, 0, 1), &map, 5));
    }

    #[test]
    fn heuristic_examples() {
        let mut w = WeightMaps::new();
        let o = DiscreteState::new(0, 0, 0);
        assert_eq!(heuristic(o, o, &w, 1.0), 0.0);
        assert_eq!(heuristic(o, DiscreteState::new(3, 4, 0), &w, 1.0), 5.0);
        w.add_positional_weight(o, 2.5).unwrap();
        assert_eq!(heuristic(o, o, &w, 1.0), 2.5);
        assert_eq!(heuristic(o, o, &w, 0.5), 5.0);
    }

    #[test]
    fn action_cost_examples() {
        let mut w = WeightMaps::new();
        let q = DiscreteState::new(1, 1, 1);
        let x = Action::new(1, 0, 0).unwrap();
        assert_eq!(action_cost(x, q, &w, 1.0), 1.0);
        assert_eq!(
            action_cost(Action::new(1, 1, 1).unwrap(), q, &w, 1.0),
            3f64.sqrt()
        );
        w.add_action_weight(q, x, 0.5).unwrap();
        assert_eq!(action_cost(x, q, &w, 1.0), 1.5);
    }

    #[test]
    fn trivial_plan() {
        let map = floor(5, 5);
        let s = DiscreteState::new(2, 2, 1);
        let p = plan(s, s, &map, &WeightMaps::new(), 1.0).unwrap();
        assert_eq!(p.states, vec![s]);
        assert_eq!(p.total_cost, 0.0);
    }

    #[test]
    fn diagonal_plan() {
        let map = floor(5, 5);
        let p = plan(
            DiscreteState::new(0, 0, 1),
            DiscreteState::new(4, 4, 1),
            &map,
            &WeightMaps::new(),
            0.0,
        )
        .unwrap();
        assert_eq!(p.states.len(), 5);
        assert!((p.total_cost - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let map = floor(5, 5);
        let w = WeightMaps::new();
        let good = DiscreteState::new(0, 0, 1);
        assert_eq!(
            plan(DiscreteState::new(0, 0, 0), good, &map, &w, 1.0),
            Err(PlanError::InvalidStart(DiscreteState::new(0, 0, 0)))
        );
        let mut walled = floor(5, 5);
        for y in 0..5 {
            walled
                .set(DiscreteState::new(2, y, 1), Some(CellTag::Terrain))
                .unwrap();
            walled
                .set(DiscreteState::new(2, y, 2), Some(CellTag::Terrain))
                .unwrap();
        }
        let r = plan(good, DiscreteState::new(4, 0, 1), &walled, &w, 0.0);
        assert!(matches!(r, Err(PlanError::NoPath { .. })));
    }

    #[test]
    fn threshold_floor() {
        assert_eq!(height_threshold_cells(0.28, 0.05), 5);
        assert_eq!(height_threshold_cells(0.30, 0.05), 6);
        assert_eq!(height_threshold_cells(0.299, 0.05), 5);
    }
}
