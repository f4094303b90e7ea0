//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stairwise::kinematics::{leg_ik, leg_segments, Contact, RobotConfig, RobotState};
use stairwise::maps::{Action, CellTag, DiscreteState, VoxelMap, WeightMaps};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A small grid with a solid floor layer and random pillars and overhangs.
pub struct GridCase {
    pub map: VoxelMap,
    pub start: DiscreteState,
    pub goal: DiscreteState,
    pub h_cells: u32,
    pub h_th: f64,
}

pub const GRID_RES: f64 = 0.05;

/// Trunk cell validity written out from scratch: free, and an occupied cell
/// somewhere within `h_cells` free cells straight below.
pub fn oracle_valid(map: &VoxelMap, q: DiscreteState, h_cells: u32) -> bool {
    let [nx, ny, nz] = map.dims();
    let inside = |c: DiscreteState| {
        c.x >= 0
            && c.y >= 0
            && c.z >= 0
            && (c.x as usize) < nx
            && (c.y as usize) < ny
            && (c.z as usize) < nz
    };
    if !inside(q) || map.is_occupied(q) {
        return false;
    }
    (1..=h_cells as i32 + 1)
        .map(|k| DiscreteState::new(q.x, q.y, q.z - k))
        .take_while(|c| c.z >= 0)
        .any(|c| map.is_occupied(c))
}

pub fn random_grid(r: &mut ChaCha8Rng, dims: [usize; 3]) -> GridCase {
    let mut map = VoxelMap::new(GRID_RES, Vector3::zeros(), dims).unwrap();
    for x in 0..dims[0] as i32 {
        for y in 0..dims[1] as i32 {
            map.set(DiscreteState::new(x, y, 0), Some(CellTag::Terrain))
                .unwrap();
            if r.random_bool(0.25) {
                let top = r.random_range(1..dims[2] as i32);
                for z in 1..=top {
                    map.set(DiscreteState::new(x, y, z), Some(CellTag::Terrain))
                        .unwrap();
                }
            } else if r.random_bool(0.08) {
                let z = r.random_range(2..dims[2] as i32);
                map.set(DiscreteState::new(x, y, z), Some(CellTag::Terrain))
                    .unwrap();
            }
        }
    }
    let h_cells = r.random_range(1..=2);
    let valid: Vec<DiscreteState> = (0..dims[2] as i32)
        .flat_map(|z| {
            (0..dims[1] as i32)
                .flat_map(move |y| (0..dims[0] as i32).map(move |x| DiscreteState::new(x, y, z)))
        })
        .filter(|&q| oracle_valid(&map, q, h_cells))
        .collect();
    let start = valid[r.random_range(0..valid.len())];
    let goal = valid[r.random_range(0..valid.len())];
    GridCase {
        map,
        start,
        goal,
        h_cells,
        h_th: h_cells as f64 * GRID_RES,
    }
}

fn all_moves() -> Vec<(i32, i32, i32)> {
    let mut v = Vec::new();
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    v.push((dx, dy, dz));
                }
            }
        }
    }
    v
}

/// Random non-negative weights in metres on a random subset of cells and
/// moves.
pub fn random_weights(
    r: &mut ChaCha8Rng,
    case: &GridCase,
    positional: bool,
    action: bool,
) -> WeightMaps {
    let mut w = WeightMaps::new();
    let [nx, ny, nz] = case.map.dims();
    for z in 0..nz as i32 {
        for y in 0..ny as i32 {
            for x in 0..nx as i32 {
                let q = DiscreteState::new(x, y, z);
                if !oracle_valid(&case.map, q, case.h_cells) {
                    continue;
                }
                if positional && r.random_bool(0.2) {
                    w.add_positional_weight(q, r.random_range(0.0..0.3))
                        .unwrap();
                }
                if action {
                    for (dx, dy, dz) in all_moves() {
                        if r.random_bool(0.1) {
                            let a = Action::new(dx as i8, dy as i8, dz as i8).unwrap();
                            w.add_action_weight(q, a, r.random_range(0.0..0.3)).unwrap();
                        }
                    }
                }
            }
        }
    }
    w
}

/// Step cost in cell units, computed without the planner's helpers.
pub fn oracle_step_cost(
    from: DiscreteState,
    to: DiscreteState,
    weights: &WeightMaps,
    res: f64,
) -> f64 {
    let (dx, dy, dz) = (to.x - from.x, to.y - from.y, to.z - from.z);
    let base = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
    let a = Action::new(dx as i8, dy as i8, dz as i8).unwrap();
    base + weights.action.get(from, a) / res
}

/// Path cost with step costs summed in ascending order, so two paths with
/// the same multiset of steps give bit-identical totals.
pub fn oracle_path_cost(path: &[DiscreteState], weights: &WeightMaps, res: f64) -> f64 {
    let mut c: Vec<f64> = path
        .windows(2)
        .map(|w| oracle_step_cost(w[0], w[1], weights, res))
        .collect();
    c.sort_by(f64::total_cmp);
    c.iter().sum()
}

pub struct DijkstraResult {
    pub path: Vec<DiscreteState>,
    pub cost: f64,
    pub expansions: usize,
}

/// Plain Dijkstra over edge costs; positional weights do not enter path cost.
pub fn dijkstra(case: &GridCase, weights: &WeightMaps) -> Option<DijkstraResult> {
    let res = case.map.resolution();
    let mut dist: BTreeMap<DiscreteState, f64> = BTreeMap::new();
    let mut parent: BTreeMap<DiscreteState, DiscreteState> = BTreeMap::new();
    let mut done = std::collections::BTreeSet::new();
    // Keys are ordered bit patterns of non-negative floats.
    let mut heap = BinaryHeap::new();
    dist.insert(case.start, 0.0);
    heap.push(Reverse((0f64.to_bits(), case.start)));
    let mut expansions = 0;
    while let Some(Reverse((bits, q))) = heap.pop() {
        if !done.insert(q) {
            continue;
        }
        expansions += 1;
        let d = f64::from_bits(bits);
        if q == case.goal {
            let mut path = vec![q];
            while let Some(&p) = parent.get(path.last().unwrap()) {
                path.push(p);
            }
            path.reverse();
            let cost = oracle_path_cost(&path, weights, res);
            return Some(DijkstraResult {
                path,
                cost,
                expansions,
            });
        }
        for (dx, dy, dz) in all_moves() {
            let n = DiscreteState::new(q.x + dx, q.y + dy, q.z + dz);
            if done.contains(&n) || !oracle_valid(&case.map, n, case.h_cells) {
                continue;
            }
            let nd = d + oracle_step_cost(q, n, weights, res);
            if dist.get(&n).is_none_or(|&old| nd < old) {
                dist.insert(n, nd);
                parent.insert(n, q);
                heap.push(Reverse((nd.to_bits(), n)));
            }
        }
    }
    None
}

/// Repulsive displacement evaluated straight from its definition: the mean
/// of `q - p_k + n_k` over the contacts, or `(0, 0, -h_th)` without any.
pub fn oracle_repulsive(q: &Vector3<f64>, contacts: &[Contact], h_th: f64) -> Vector3<f64> {
    if contacts.is_empty() {
        return Vector3::new(0.0, 0.0, -h_th);
    }
    let mut sum = Vector3::zeros();
    for c in contacts {
        let p = Vector3::from(c.point);
        let n = Vector3::from(c.normal);
        sum += q - p + n;
    }
    sum / contacts.len() as f64
}

/// Rotation from roll, pitch, yaw as Rz·Ry·Rx built from elementary
/// matrices.
pub fn oracle_rpy(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

/// Largest per-step trunk translation and largest norm of the per-step
/// roll/pitch/yaw increment along a state sequence. The increment is read
/// off the relative rotation between consecutive states.
pub fn max_steps(states: &[RobotState]) -> (f64, f64) {
    let mut dp: f64 = 0.0;
    let mut dr: f64 = 0.0;
    for w in states.windows(2) {
        dp = dp.max((w[1].position() - w[0].position()).norm());
        let m = w[0].rotation().transpose() * w[1].rotation();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        dr = dr.max((roll * roll + pitch * pitch + yaw * yaw).sqrt());
    }
    (dp, dr)
}

fn inside_occupied(map: &VoxelMap, p: &Vector3<f64>) -> Option<DiscreteState> {
    map.world_to_discrete(p)
        .ok()
        .filter(|&q| map.is_occupied(q))
}

/// Re-validates one state without the planner's validator: every joint
/// within limits and IK reproducing each paw, no occupied voxel containing
/// a sample of the trunk interior or of the thigh and upper shank, and at
/// least three paws within the contact tolerance of an occupied voxel's top
/// face.
pub fn oracle_state_ok(
    state: &RobotState,
    map: &VoxelMap,
    config: &RobotConfig,
) -> Result<(), String> {
    let rot = state.rotation();
    let pos = state.position();
    let paws = state.paws(config);
    for (leg, (joints, paw)) in state.joints.iter().zip(paws.iter()).enumerate() {
        for (k, (a, lim)) in joints.iter().zip(config.joint_limits.iter()).enumerate() {
            if *a < lim[0] - 1e-9 || *a > lim[1] + 1e-9 {
                return Err(format!("leg {leg} joint {k} = {a} outside {lim:?}"));
            }
        }
        let hip = pos + rot * Vector3::from(config.hip_offsets[leg]);
        let local = rot.transpose() * (paw - hip);
        leg_ik(&local, config, leg).map_err(|e| format!("leg {leg}: {e}"))?;
    }

    let he = config.trunk_half_extents;
    let n = 8;
    let f = |t: usize, h: f64| (t as f64 / n as f64 * 2.0 - 1.0) * h * 0.98;
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let p = pos + rot * Vector3::new(f(i, he[0]), f(j, he[1]), f(k, he[2]));
                if let Some(q) = inside_occupied(map, &p) {
                    return Err(format!("trunk overlaps occupied cell {q}"));
                }
            }
        }
    }
    for leg in 0..4 {
        let [(a, knee), (_, paw)] = leg_segments(state, config, leg);
        let samples = (0..=10)
            .map(|t| a + (knee - a) * (t as f64 / 10.0))
            .chain((0..=7).map(|t| knee + (paw - knee) * (t as f64 / 10.0)));
        for p in samples {
            if let Some(q) = inside_occupied(map, &p) {
                return Err(format!("leg {leg} passes through occupied cell {q}"));
            }
        }
    }

    let res = map.resolution();
    let tol = config.foot_contact_tol;
    let origin = map.origin();
    let supported = paws
        .iter()
        .filter(|p| {
            (0..map.dims()[2] as i32).any(|z| {
                let top = origin.z + (z + 1) as f64 * res;
                if (p.z - top).abs() > tol {
                    return false;
                }
                let probe = Vector3::new(p.x, p.y, top - 0.5 * res);
                inside_occupied(map, &probe).is_some()
            })
        })
        .count();
    if supported < 3 {
        return Err(format!("only {supported} paws supported"));
    }
    Ok(())
}

pub fn bundled(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn bundled_scenario(name: &str) -> stairwise::world::Scenario {
    stairwise::world::Scenario::from_json(&std::fs::read_to_string(bundled(name)).unwrap()).unwrap()
}

pub fn guided_script() -> stairwise::orchestrator::EditScript {
    stairwise::orchestrator::EditScript::from_json(
        &std::fs::read_to_string(bundled("stairs_guided_edits.json")).unwrap(),
    )
    .unwrap()
}

/// Runs the learning loop and returns the report plus the map the final
/// iteration planned on.
pub fn run_with_map(
    scenario: stairwise::world::Scenario,
    max_iterations: usize,
    edits: &mut dyn stairwise::orchestrator::EditSource,
) -> (stairwise::orchestrator::RunReport, VoxelMap) {
    use stairwise::orchestrator::{NullObserver, Orchestrator, RunOptions};
    let mut orch = Orchestrator::new(scenario);
    let options = RunOptions {
        max_iterations,
        record_timing: false,
    };
    let report = orch.run(&options, edits, &mut NullObserver).unwrap();
    let map = orch.world.voxelize().unwrap();
    (report, map)
}

/// Every state re-validated from scratch, plus the step-norm audit.
pub fn audit_states(
    states: &[RobotState],
    map: &VoxelMap,
    config: &RobotConfig,
    p_max: f64,
    r_max: f64,
) -> Result<(), String> {
    for (i, s) in states.iter().enumerate() {
        oracle_state_ok(s, map, config).map_err(|e| format!("state {i}: {e}"))?;
    }
    let (dp, dr) = max_steps(states);
    if dp > p_max + 1e-12 {
        return Err(format!("translation step {dp} exceeds {p_max}"));
    }
    if dr > r_max + 1e-9 {
        return Err(format!("rotation step {dr} exceeds {r_max}"));
    }
    Ok(())
}
