//! A planning session driven by client messages: one worker owns the world,
//! the weights and at most one running learning loop, and every attached
//! client receives the loop's progress as a stream of events.

mod hub;
mod protocol;

pub use hub::{Hub, Subscription, DEFAULT_CLIENT_CAPACITY};
pub use protocol::{
    chunk_states, decode_client, encode_client, encode_server, AckError, ClientFrame,
    ClientMessage, DecodeError, ErrorCode, MapInfo, ServerEvent, ServerFrame, UserObstacle,
    VoxelRecord, WeightRecord, WorldSnapshot, DEFAULT_CHUNK_STATES, PROTOCOL_VERSION,
};

use crate::global::{height_threshold_cells, valid_discrete_state, GlobalPath};
use crate::kinematics::{standing_height_max, RobotState};
use crate::maps::{VoxelMap, WeightMaps, WeightUpdate};
use crate::orchestrator::{
    EditError, EditScript, EditSource, IterationMetrics, Observer, ObstacleEdit, Orchestrator,
    RunError, RunOptions, RunReport, World, DEFAULT_MAX_ITERATIONS,
};
use crate::world::{BoxObstacle, Pose, Scenario};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionOptions {
    pub chunk_states: usize,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            chunk_states: DEFAULT_CHUNK_STATES,
        }
    }
}

enum Control {
    Message(ClientFrame, Sender<Vec<ServerFrame>>),
    Finished(Box<Orchestrator>, Result<RunReport, RunError>),
    Shutdown(Sender<Option<LastRun>>),
}

/// Cloneable handle to a session worker.
#[derive(Clone)]
pub struct SessionHandle {
    tx: Sender<Control>,
    hub: Arc<Hub>,
}

/// The report of the most recent run and the world it ended in.
#[derive(Debug, Clone)]
pub struct LastRun {
    pub report: RunReport,
    pub world: World,
}

/// Owns the worker thread; dropping it shuts the session down.
pub struct Session {
    handle: SessionHandle,
    worker: Option<JoinHandle<()>>,
}

impl Session {
    pub fn spawn(scenario: Option<Scenario>, options: SessionOptions) -> Self {
        let hub = Hub::new();
        let (tx, rx) = mpsc::channel();
        let mut worker = Worker {
            hub: hub.clone(),
            tx: tx.clone(),
            orchestrator: None,
            running: None,
            last_run: None,
            chunk: options.chunk_states.max(1),
        };
        if let Some(s) = scenario {
            worker.load(s);
        }
        let join = thread::Builder::new()
            .name("session".into())
            .spawn(move || worker.serve(rx))
            .expect("spawn session worker");
        Self {
            handle: SessionHandle { tx, hub },
            worker: Some(join),
        }
    }

    pub fn handle(&self) -> SessionHandle {
        self.handle.clone()
    }

    /// Stops any run at its next iteration boundary, waits for it and ends
    /// the worker. Returns the last run, if there was one; a run cut short
    /// here is reported as interrupted.
    pub fn shutdown(mut self) -> Option<LastRun> {
        self.stop()
    }

    fn stop(&mut self) -> Option<LastRun> {
        let worker = self.worker.take()?;
        let (tx, rx) = mpsc::channel();
        let report = match self.handle.tx.send(Control::Shutdown(tx)) {
            Ok(()) => rx.recv().ok().flatten(),
            Err(_) => None,
        };
        let _ = worker.join();
        report
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.stop();
    }
}

impl SessionHandle {
    /// Handles one request and returns the replies meant for its sender:
    /// the acknowledgment, then a snapshot for `request_snapshot`.
    pub fn request(&self, frame: ClientFrame) -> Vec<ServerFrame> {
        let seq = frame.seq;
        let (tx, rx) = mpsc::channel();
        if self.tx.send(Control::Message(frame, tx)).is_err() {
            return vec![ServerEvent::nack(
                seq,
                ErrorCode::InvalidRequest,
                "session has shut down",
            )
            .into()];
        }
        rx.recv().unwrap_or_else(|_| {
            vec![ServerEvent::nack(seq, ErrorCode::InvalidRequest, "session has shut down").into()]
        })
    }

    /// Decodes a text frame and handles it; malformed frames get an error
    /// reply without reaching the worker.
    pub fn request_text(&self, text: &str) -> Vec<ServerFrame> {
        match decode_client(text) {
            Ok(frame) => self.request(frame),
            Err(e) => vec![e.reply()],
        }
    }

    pub fn subscribe(&self, capacity: usize) -> Subscription {
        self.hub.subscribe(capacity)
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }
}

struct Running {
    stop: Arc<AtomicBool>,
    edits: Sender<ObstacleEdit>,
    /// User obstacle ids as they will be once every forwarded edit applies.
    ids: BTreeSet<String>,
}

struct Worker {
    hub: Arc<Hub>,
    tx: Sender<Control>,
    /// `None` before a scenario is loaded and while a run owns it.
    orchestrator: Option<Orchestrator>,
    running: Option<Running>,
    last_run: Option<LastRun>,
    chunk: usize,
}

type Reply = Result<(), (ErrorCode, String)>;

fn err<T>(code: ErrorCode, message: impl Into<String>) -> Result<T, (ErrorCode, String)> {
    Err((code, message.into()))
}

impl Worker {
    fn serve(&mut self, rx: Receiver<Control>) {
        while let Ok(msg) = rx.recv() {
            match msg {
                Control::Message(frame, reply) => {
                    let _ = reply.send(self.handle(frame));
                }
                Control::Finished(orch, result) => self.finish(*orch, result),
                Control::Shutdown(reply) => {
                    if let Some(r) = &self.running {
                        r.stop.store(true, Ordering::SeqCst);
                        while let Ok(msg) = rx.recv() {
                            match msg {
                                Control::Finished(orch, result) => {
                                    self.finish(*orch, result);
                                    break;
                                }
                                Control::Message(frame, reply) => {
                                    let _ = reply.send(vec![ServerEvent::nack(
                                        frame.seq,
                                        ErrorCode::InvalidRequest,
                                        "session is shutting down",
                                    )
                                    .into()]);
                                }
                                Control::Shutdown(_) => {}
                            }
                        }
                    }
                    let _ = reply.send(self.last_run.take());
                    return;
                }
            }
        }
    }

    fn handle(&mut self, frame: ClientFrame) -> Vec<ServerFrame> {
        let seq = frame.seq;
        let snapshot = matches!(frame.message, ClientMessage::RequestSnapshot);
        let result = self.dispatch(frame.message);
        let mut out = vec![match result {
            Ok(()) => ServerEvent::ack(seq),
            Err((code, message)) => ServerEvent::nack(seq, code, message),
        }
        .into()];
        if snapshot {
            out.push(ServerEvent::WorldSnapshot(Box::new(self.hub.snapshot())).into());
        }
        out
    }

    fn idle(&mut self) -> Result<&mut Orchestrator, (ErrorCode, String)> {
        if self.running.is_some() {
            return err(ErrorCode::RunInProgress, "a run is in progress");
        }
        self.orchestrator
            .as_mut()
            .ok_or((ErrorCode::NoScenario, "no scenario loaded".into()))
    }

    fn dispatch(&mut self, message: ClientMessage) -> Reply {
        match message {
            ClientMessage::LoadScenario { scenario } => {
                if self.running.is_some() {
                    return err(
                        ErrorCode::RunInProgress,
                        "cannot load a scenario during a run",
                    );
                }
                let s = Scenario::from_json(&scenario.to_string())
                    .map_err(|e| (ErrorCode::InvalidScenario, e.to_string()))?;
                crate::world::voxelize(&s)
                    .map_err(|e| (ErrorCode::InvalidScenario, e.to_string()))?;
                self.load(s);
                Ok(())
            }
            ClientMessage::SetStart { pose } => self.set_pose(pose, true),
            ClientMessage::SetGoal { pose } => self.set_pose(pose, false),
            ClientMessage::AddObstacle { .. } | ClientMessage::RemoveObstacle { .. } => {
                let edit = match message {
                    ClientMessage::AddObstacle { id, obstacle } => {
                        ObstacleEdit::Add { id, obstacle }
                    }
                    ClientMessage::RemoveObstacle { id } => ObstacleEdit::Remove { id },
                    _ => unreachable!(),
                };
                self.edit(edit)
            }
            ClientMessage::StartRun {
                max_iterations,
                timing,
                edits,
            } => self.start(
                max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
                timing,
                edits,
            ),
            ClientMessage::PauseRun => match &self.running {
                Some(r) => {
                    r.stop.store(true, Ordering::SeqCst);
                    Ok(())
                }
                None => err(ErrorCode::NoRunInProgress, "no run in progress"),
            },
            ClientMessage::ResetWeights => {
                let orch = self.idle()?;
                orch.weights.reset();
                let weights = orch.weights.clone();
                self.hub.publish_snapshot(|s| s.set_weights(&weights));
                Ok(())
            }
            ClientMessage::RequestSnapshot => Ok(()),
        }
    }

    fn load(&mut self, scenario: Scenario) {
        let orch = Orchestrator::new(scenario);
        let map = orch.world.voxelize().ok();
        self.hub.publish_snapshot(|s| {
            *s = WorldSnapshot::empty();
            s.scenario = Some(orch.world.scenario.clone());
            if let Some(m) = &map {
                s.set_map(m);
            }
        });
        self.orchestrator = Some(orch);
    }

    fn set_pose(&mut self, pose: Pose, start: bool) -> Reply {
        let name = if start { "start" } else { "goal" };
        let orch = self.idle()?;
        let mut world = orch.world.clone();
        if start {
            world.scenario.start = pose;
        } else {
            world.scenario.goal = pose;
        }
        world
            .scenario
            .validate()
            .map_err(|e| (ErrorCode::InvalidPose, format!("{name} invalid: {e}")))?;
        let map = world
            .voxelize()
            .map_err(|e| (ErrorCode::InvalidPose, format!("{name} invalid: {e}")))?;
        let p = if start {
            &world.scenario.start
        } else {
            &world.scenario.goal
        };
        check_pose_cell(&map, &world, &p.position(), name)?;
        orch.world = world;
        let scenario = orch.world.scenario.clone();
        self.hub.publish_snapshot(|s| {
            s.scenario = Some(scenario);
            s.set_map(&map);
        });
        Ok(())
    }

    fn edit(&mut self, edit: ObstacleEdit) -> Reply {
        let rejected = |e: EditError| (ErrorCode::EditRejected, e.to_string());
        if let Some(r) = &mut self.running {
            // Checked here, with the same rules the world applies, so the run
            // never meets an edit it cannot apply.
            match &edit {
                ObstacleEdit::Add { id, obstacle } => {
                    if r.ids.contains(id) {
                        return Err(rejected(EditError::DuplicateId(id.clone())));
                    }
                    obstacle.validate().map_err(|e| {
                        rejected(EditError::InvalidBox {
                            id: id.clone(),
                            reason: e.to_string(),
                        })
                    })?;
                    r.ids.insert(id.clone());
                }
                ObstacleEdit::Remove { id } => {
                    if !r.ids.remove(id) {
                        return Err(rejected(EditError::UnknownId(id.clone())));
                    }
                }
            }
            let _ = r.edits.send(edit);
            return Ok(());
        }
        let orch = self.idle()?;
        // No iteration is in flight, so the boundary is now.
        let mut world = orch.world.clone();
        world.queue(edit).map_err(rejected)?;
        world.apply_pending();
        let map = world
            .voxelize()
            .map_err(|e| (ErrorCode::EditRejected, e.to_string()))?;
        orch.world = world;
        let boxes = orch.world.user_boxes().clone();
        self.hub.publish_snapshot(|s| {
            s.set_user_obstacles(&boxes);
            s.set_map(&map);
        });
        Ok(())
    }

    fn start(&mut self, max_iterations: usize, timing: bool, script: EditScript) -> Reply {
        if max_iterations == 0 {
            return err(
                ErrorCode::InvalidRequest,
                "max_iterations must be at least 1",
            );
        }
        let orch = self.idle()?;
        let mut check = orch.world.clone();
        let mut entries = script.0.clone();
        entries.sort_by_key(|e| e.iteration);
        for e in entries {
            check
                .queue(e.edit)
                .map(|_| check.apply_pending())
                .map_err(|e| (ErrorCode::EditRejected, format!("edit script: {e}")))?;
        }
        let mut orch = self.orchestrator.take().expect("idle session has a world");
        let ids = orch.world.user_boxes().keys().cloned().collect();
        let stop = Arc::new(AtomicBool::new(false));
        let (edits_tx, edits_rx) = mpsc::channel();
        let mut observer = Broadcaster {
            hub: self.hub.clone(),
            stop: stop.clone(),
            chunk: self.chunk,
            boxes: orch.world.user_boxes().clone(),
            weights: orch.weights.clone(),
        };
        let mut edits = RunEdits {
            script,
            live: edits_rx,
        };
        let done = self.tx.clone();
        let options = RunOptions {
            max_iterations,
            record_timing: timing,
        };
        self.hub.publish_snapshot(|s| s.running = true);
        thread::Builder::new()
            .name("learning-run".into())
            .spawn(move || {
                let result = orch.run(&options, &mut edits, &mut observer);
                let _ = done.send(Control::Finished(Box::new(orch), result));
            })
            .expect("spawn run thread");
        self.running = Some(Running {
            stop,
            edits: edits_tx,
            ids,
        });
        Ok(())
    }

    fn finish(&mut self, orch: Orchestrator, result: Result<RunReport, RunError>) {
        self.running = None;
        let weights = orch.weights.clone();
        let boxes = orch.world.user_boxes().clone();
        let states = orch.last_states.clone();
        let map = orch.world.voxelize().ok();
        let world = orch.world.clone();
        self.orchestrator = Some(orch);
        self.hub.update_snapshot(|s| {
            s.running = false;
            s.set_weights(&weights);
            s.set_user_obstacles(&boxes);
            s.set_last_path(&states);
            if let Some(m) = &map {
                s.set_map(m);
            }
        });
        match result {
            Ok(report) => {
                self.hub.broadcast(ServerEvent::RunFinished {
                    report: report.clone(),
                });
                self.last_run = Some(LastRun { report, world });
            }
            Err(e) => self.hub.broadcast(ServerEvent::Error {
                message: format!("run failed: {e}"),
            }),
        }
    }
}

/// The pose's cell must be free and close enough above a surface for the
/// trunk to stand there.
fn check_pose_cell(map: &VoxelMap, world: &World, p: &crate::geometry::Vec3, name: &str) -> Reply {
    let q = map
        .world_to_discrete(p)
        .map_err(|e| (ErrorCode::InvalidPose, format!("{name} invalid: {e}")))?;
    if map.is_occupied(q) {
        return err(
            ErrorCode::InvalidPose,
            format!("{name} invalid: cell {q} is occupied"),
        );
    }
    let h = height_threshold_cells(standing_height_max(&world.scenario.robot), map.resolution());
    if !valid_discrete_state(q, map, h) {
        return err(
            ErrorCode::InvalidPose,
            format!("{name} invalid: cell {q} is not within standing height of a surface"),
        );
    }
    Ok(())
}

struct RunEdits {
    script: EditScript,
    live: Receiver<ObstacleEdit>,
}

impl EditSource for RunEdits {
    fn edits_before(&mut self, iteration: usize) -> Vec<ObstacleEdit> {
        let mut out = self.script.edits_before(iteration);
        out.extend(self.live.try_iter());
        out
    }
}

/// Turns learning-loop progress into broadcast events.
struct Broadcaster {
    hub: Arc<Hub>,
    stop: Arc<AtomicBool>,
    chunk: usize,
    boxes: BTreeMap<String, BoxObstacle>,
    /// Mirror of the run's weights, kept for late-join snapshots.
    weights: WeightMaps,
}

impl Observer for Broadcaster {
    fn map_ready(&mut self, _iteration: usize, world: &World, map: &VoxelMap) {
        if world.user_boxes() != &self.boxes {
            self.boxes = world.user_boxes().clone();
            let boxes = &self.boxes;
            self.hub.publish_snapshot(|s| {
                s.set_user_obstacles(boxes);
                s.set_map(map);
            });
        }
    }

    fn global_path(&mut self, iteration: usize, path: &GlobalPath) {
        self.hub.broadcast(ServerEvent::GlobalPath {
            iteration,
            cells: path.states.iter().map(|&q| protocol::cell(q)).collect(),
            cost: path.total_cost,
            expansions: path.expansions,
        });
    }

    fn weight_updates(&mut self, iteration: usize, updates: &[WeightUpdate]) {
        for u in updates {
            let _ = self.weights.apply(u);
        }
        let weights = &self.weights;
        self.hub.update_snapshot(|s| s.set_weights(weights));
        self.hub.broadcast(ServerEvent::WeightUpdate {
            iteration,
            updates: updates.iter().map(WeightRecord::from).collect(),
        });
    }

    fn local_states(&mut self, iteration: usize, states: &[RobotState]) {
        self.hub.update_snapshot(|s| s.set_last_path(states));
        for e in chunk_states(iteration, states, self.chunk) {
            self.hub.broadcast(e);
        }
    }

    fn iteration_done(&mut self, metrics: &IterationMetrics) {
        self.hub.broadcast(ServerEvent::IterationMetrics {
            metrics: metrics.clone(),
        });
    }

    fn should_stop(&mut self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }
}
