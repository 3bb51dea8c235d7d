//! Discrete-event multi-robot simulator with range-limited communication.
//!
//! Time advances from one robot decision to the next. At every event the
//! simulator applies the arrival, expires deadlines, lets robots within
//! communication range merge beliefs, then asks the triggering robot for its
//! next destination.

mod belief;
mod event;
mod trace;

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::sync::Arc;

use ndarray::Array2;
use thiserror::Error;

pub use belief::{message_bytes, Belief, RobotRecord};
pub use event::{Event, EventKind};
pub use trace::{replay, EventLog, Leg};

use crate::scenario::{normalize_features, NormalizationTable, Point, Scenario};

/// Slack on range checks to absorb rounding in accumulated distances.
pub const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("robot {robot} has no pending decision (pending: {pending:?})")]
    NotPending { robot: usize, pending: Option<usize> },
    #[error("action {action} is infeasible for robot {robot} at t={time}")]
    InfeasibleAction { robot: usize, action: usize, time: f64 },
    #[error("reward requested before the episode terminated")]
    NotTerminal,
    #[error("replay failed: {0}")]
    Replay(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskStatus {
    Active,
    Done,
    Missed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskState {
    pub remaining: f64,
    pub delivered: f64,
    pub status: TaskStatus,
    pub completed_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    /// Node the robot is at, or is heading to while in transit.
    pub node: usize,
    pub origin: Point,
    pub dest: Point,
    pub depart: f64,
    pub arrive: f64,
    pub in_transit: bool,
    pub range: f64,
    pub payload: f64,
    /// Parked at the depot with nothing left to wait for.
    pub docked: bool,
}

impl RobotState {
    pub fn position_at(&self, t: f64) -> Point {
        if !self.in_transit || self.arrive <= self.depart {
            return if self.in_transit { self.dest } else { self.origin };
        }
        let frac = ((t - self.depart) / (self.arrive - self.depart)).clamp(0.0, 1.0);
        self.origin.lerp(&self.dest, frac)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommStats {
    /// Directed belief messages sent.
    pub messages: u64,
    pub bytes: u64,
}

/// Normalization constants for robot-level context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationScales {
    pub arena_width: f64,
    pub arena_height: f64,
    pub range: f64,
    pub capacity: f64,
    pub horizon: f64,
}

/// What a deciding robot knows.
#[derive(Debug, Clone)]
pub struct Observation {
    pub robot: usize,
    pub time: f64,
    /// `N x 4` normalized task features from the robot's belief.
    pub task_features: Array2<f64>,
    /// `N + 1` entries, depot first.
    pub mask: Vec<bool>,
    pub own: RobotRecord,
    pub own_position: Point,
    /// Believed records of every other robot, in robot order.
    pub peers: Vec<RobotRecord>,
    pub scales: ObservationScales,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Terminal reward, zero until the episode ends.
    pub reward: f64,
    pub done: bool,
    pub next_robot: Option<usize>,
    pub time: f64,
    pub events: Vec<Event>,
}

/// One episode of the collective transport problem.
#[derive(Debug, Clone)]
pub struct World {
    scenario: Arc<Scenario>,
    norm: NormalizationTable,
    seed: u64,
    time: f64,
    robots: Vec<RobotState>,
    tasks: Vec<TaskState>,
    beliefs: Vec<Belief>,
    truth: Vec<RobotRecord>,
    queue: BinaryHeap<Reverse<Event>>,
    pending: Option<usize>,
    log: EventLog,
    open_leg: Vec<Option<usize>>,
    decisions: usize,
    comm: CommStats,
    history: Option<Vec<Vec<RobotRecord>>>,
}

impl World {
    /// Starts an episode with every robot at the depot at `t = 0`. The
    /// dynamics are deterministic; `seed` is recorded for bookkeeping.
    pub fn reset(scenario: Arc<Scenario>, seed: u64) -> World {
        Self::build(scenario, seed, false)
    }

    /// Like [`World::reset`] but keeps every record each robot publishes,
    /// for staleness checks.
    pub fn reset_with_history(scenario: Arc<Scenario>, seed: u64) -> World {
        Self::build(scenario, seed, true)
    }

    fn build(scenario: Arc<Scenario>, seed: u64, history: bool) -> World {
        let m = scenario.num_robots();
        let n = scenario.num_tasks();
        let f = &scenario.fleet;
        let depot = scenario.depot;
        let robot = RobotState {
            node: 0,
            origin: depot,
            dest: depot,
            depart: 0.0,
            arrive: 0.0,
            in_transit: false,
            range: f.range,
            payload: f.capacity,
            docked: false,
        };
        let rec = RobotRecord {
            dest_x: depot.x,
            dest_y: depot.y,
            range: f.range,
            payload: f.capacity,
            next_decision: 0.0,
            timestamp: 0.0,
            seq: 0,
        };
        let tasks = scenario
            .tasks
            .iter()
            .map(|t| TaskState { remaining: t.demand, delivered: 0.0, status: TaskStatus::Active, completed_at: None })
            .collect();
        let mut queue = BinaryHeap::new();
        for r in 0..m {
            queue.push(Reverse(Event { time: 0.0, robot: r, kind: EventKind::EpisodeStart }));
        }
        let mut w = World {
            norm: normalize_features(&scenario),
            seed,
            time: 0.0,
            robots: vec![robot; m],
            tasks,
            beliefs: vec![Belief::new(vec![rec; m], n); m],
            truth: vec![rec; m],
            queue,
            pending: None,
            log: EventLog::default(),
            open_leg: vec![None; m],
            decisions: 0,
            comm: CommStats::default(),
            history: history.then(|| vec![vec![rec]; m]),
            scenario,
        };
        w.advance();
        w
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn normalization(&self) -> &NormalizationTable {
        &self.norm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn pending_robot(&self) -> Option<usize> {
        self.pending
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn tasks(&self) -> &[TaskState] {
        &self.tasks
    }

    pub fn beliefs(&self) -> &[Belief] {
        &self.beliefs
    }

    /// The record robot `k` most recently published about itself.
    pub fn true_record(&self, k: usize) -> RobotRecord {
        self.truth[k]
    }

    /// Every record robot `k` has published, oldest first. Empty unless the
    /// world was created with [`World::reset_with_history`].
    pub fn record_history(&self, k: usize) -> &[RobotRecord] {
        self.history.as_ref().map(|h| h[k].as_slice()).unwrap_or(&[])
    }

    pub fn trace(&self) -> &EventLog {
        &self.log
    }

    pub fn decisions(&self) -> usize {
        self.decisions
    }

    pub fn comm_stats(&self) -> CommStats {
        self.comm
    }

    pub fn n_success(&self) -> usize {
        self.tasks.iter().filter(|t| t.status == TaskStatus::Done).count()
    }

    /// Ground-truth completion fraction of each task.
    pub fn true_completion(&self) -> Vec<f64> {
        self.scenario.tasks.iter().zip(&self.tasks).map(|(spec, st)| st.delivered / spec.demand).collect()
    }

    pub fn is_terminal(&self) -> bool {
        self.tasks.iter().all(|t| t.status != TaskStatus::Active)
            && self.robots.iter().all(|r| !r.in_transit && r.node == 0)
    }

    /// `-(N - N_success) / N`, available only once the episode is over.
    pub fn compute_reward(&self) -> Result<f64, SimError> {
        if !self.is_terminal() {
            return Err(SimError::NotTerminal);
        }
        let n = self.scenario.num_tasks() as f64;
        Ok(-(n - self.n_success() as f64) / n)
    }

    /// Whether robot `r` believes task `i` (1-based) is still open.
    pub fn believes_active(&self, r: usize, task: usize) -> bool {
        !self.beliefs[r].visited[task - 1] && self.scenario.tasks[task - 1].deadline >= self.time
    }

    /// Feasible destinations for robot `r`, depot first. A task is feasible
    /// when believed open, the robot carries payload, and it can reach the
    /// task and return to the depot on its remaining range.
    pub fn feasible_mask(&self, r: usize) -> Vec<bool> {
        let s = &self.scenario;
        let robot = &self.robots[r];
        let here = robot.position_at(self.time);
        let mut mask = Vec::with_capacity(s.num_tasks() + 1);
        mask.push(true);
        for (i, task) in s.tasks.iter().enumerate() {
            let p = task.position();
            let ok = robot.payload > 0.0
                && self.believes_active(r, i + 1)
                && robot.range + RANGE_EPS >= here.distance(&p) + p.distance(&s.depot);
            mask.push(ok);
        }
        mask
    }

    pub fn observation_scales(&self) -> ObservationScales {
        let s = &self.scenario;
        ObservationScales {
            arena_width: s.arena.width,
            arena_height: s.arena.height,
            range: s.fleet.range,
            capacity: s.fleet.capacity,
            horizon: s.max_deadline(),
        }
    }

    /// Normalized task features as seen by robot `r`.
    pub fn belief_features(&self, r: usize) -> Array2<f64> {
        let s = &self.scenario;
        let b = &self.beliefs[r];
        let mut out = Array2::zeros((s.num_tasks(), 4));
        for (i, task) in s.tasks.iter().enumerate() {
            let remaining = if b.visited[i] { 0.0 } else { task.demand * (1.0 - b.completion[i]) };
            let row = self.norm.features(task, remaining);
            for (j, v) in row.iter().enumerate() {
                out[[i, j]] = *v;
            }
        }
        out
    }

    pub fn observe(&self, r: usize) -> Observation {
        let b = &self.beliefs[r];
        Observation {
            robot: r,
            time: self.time,
            task_features: self.belief_features(r),
            mask: self.feasible_mask(r),
            own: self.truth[r],
            own_position: self.robots[r].position_at(self.time),
            peers: (0..self.robots.len()).filter(|&k| k != r).map(|k| b.records[k]).collect(),
            scales: self.observation_scales(),
        }
    }

    /// Applies robot `r`'s choice of `action` (0 depot, `i` task `i`) and
    /// advances to the next decision.
    pub fn step(&mut self, r: usize, action: usize) -> Result<StepOutcome, SimError> {
        if self.pending != Some(r) {
            return Err(SimError::NotPending { robot: r, pending: self.pending });
        }
        let mask = self.feasible_mask(r);
        if action >= mask.len() || !mask[action] {
            return Err(SimError::InfeasibleAction { robot: r, action, time: self.time });
        }
        self.decisions += 1;
        let t = self.time;
        let from = self.robots[r].node;
        let target = self.scenario.node_position(action);
        let next_decision;
        if action == 0 && from == 0 {
            let wake = self.next_wake_time();
            let robot = &mut self.robots[r];
            match wake {
                Some(w) => {
                    self.queue.push(Reverse(Event { time: w, robot: r, kind: EventKind::Wake }));
                    next_decision = w;
                }
                None => {
                    robot.docked = true;
                    next_decision = f64::INFINITY;
                }
            }
            self.log.legs.push(Leg {
                robot: r,
                from_node: 0,
                to_node: 0,
                t_depart: t,
                t_arrive: if next_decision.is_finite() { next_decision } else { t },
                kg_delivered: 0.0,
            });
        } else {
            let robot = &mut self.robots[r];
            let here = robot.origin;
            let arrive = t + self.scenario.fleet.travel_time(here.distance(&target));
            robot.node = action;
            robot.dest = target;
            robot.depart = t;
            robot.arrive = arrive;
            robot.in_transit = true;
            let kind = if action == 0 { EventKind::ArrivalAtDepot } else { EventKind::ArrivalAtTask };
            self.queue.push(Reverse(Event { time: arrive, robot: r, kind }));
            self.open_leg[r] = Some(self.log.legs.len());
            self.log.legs.push(Leg { robot: r, from_node: from, to_node: action, t_depart: t, t_arrive: arrive, kg_delivered: 0.0 });
            next_decision = arrive;
        }
        self.publish(r, target, next_decision);
        self.pending = None;
        let events = self.advance();
        let done = self.is_terminal();
        Ok(StepOutcome {
            reward: if done { self.compute_reward()? } else { 0.0 },
            done,
            next_robot: self.pending,
            time: self.time,
            events,
        })
    }

    /// Earliest wake-up for an idle robot: the next queued event after now, or
    /// just past the nearest open deadline, whichever comes first.
    fn next_wake_time(&self) -> Option<f64> {
        let t = self.time;
        let next_event = self.queue.iter().map(|Reverse(e)| e.time).filter(|&et| et > t).min_by(f64::total_cmp);
        let next_deadline = self
            .scenario
            .tasks
            .iter()
            .zip(&self.tasks)
            .filter(|(spec, st)| st.status == TaskStatus::Active && spec.deadline >= t)
            .map(|(spec, _)| spec.deadline.next_up())
            .min_by(f64::total_cmp);
        match (next_event, next_deadline) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn publish(&mut self, r: usize, dest: Point, next_decision: f64) {
        let robot = &self.robots[r];
        let prev = self.truth[r];
        let rec = RobotRecord {
            dest_x: dest.x,
            dest_y: dest.y,
            range: robot.range,
            payload: robot.payload,
            next_decision,
            timestamp: self.time,
            seq: prev.seq + 1,
        };
        self.truth[r] = rec;
        self.beliefs[r].records[r] = rec;
        if let Some(h) = self.history.as_mut() {
            h[r].push(rec);
        }
    }

    /// Pops events until some robot needs a decision or the episode ends.
    /// Returns the events processed.
    fn advance(&mut self) -> Vec<Event> {
        let mut processed = Vec::new();
        while let Some(Reverse(ev)) = self.queue.pop() {
            self.time = ev.time;
            processed.push(ev);
            match ev.kind {
                EventKind::ArrivalAtTask | EventKind::ArrivalAtDepot => self.arrive(ev.robot),
                EventKind::EpisodeStart | EventKind::Wake => {}
            }
            self.expire_deadlines();
            self.exchange_information();
            if self.is_terminal() {
                self.queue.clear();
                self.pending = None;
                return processed;
            }
            self.pending = Some(ev.robot);
            return processed;
        }
        self.pending = None;
        processed
    }

    fn arrive(&mut self, r: usize) {
        let t = self.time;
        let fleet = self.scenario.fleet.clone();
        let robot = &mut self.robots[r];
        let travelled = robot.origin.distance(&robot.dest);
        robot.range = (robot.range - travelled).max(0.0);
        robot.origin = robot.dest;
        robot.in_transit = false;
        let node = robot.node;
        let mut delivered = 0.0;
        if node == 0 {
            robot.range = fleet.range;
            robot.payload = fleet.capacity;
        } else {
            let i = node - 1;
            let task = &mut self.tasks[i];
            let on_time = self.scenario.tasks[i].deadline >= t;
            if task.status == TaskStatus::Active && on_time {
                delivered = task.remaining.min(robot.payload);
                task.remaining -= delivered;
                task.delivered += delivered;
                robot.payload -= delivered;
                if task.remaining <= 0.0 {
                    task.remaining = 0.0;
                    task.status = TaskStatus::Done;
                    task.completed_at = Some(t);
                }
            }
            let b = &mut self.beliefs[r];
            b.completion[i] = b.completion[i].max(task.delivered / self.scenario.tasks[i].demand);
            b.visited[i] |= task.status == TaskStatus::Done;
        }
        if let Some(idx) = self.open_leg[r].take() {
            self.log.legs[idx].kg_delivered = delivered;
        }
        let dest = self.robots[r].dest;
        self.publish(r, dest, t);
    }

    fn expire_deadlines(&mut self) {
        let t = self.time;
        for (spec, st) in self.scenario.tasks.iter().zip(self.tasks.iter_mut()) {
            if st.status == TaskStatus::Active && spec.deadline < t {
                st.status = TaskStatus::Missed;
            }
        }
    }

    /// Every pair of robots within communication range swaps beliefs. Merges
    /// read from a snapshot so information travels one hop per event.
    pub fn exchange_information(&mut self) {
        let m = self.robots.len();
        let range = self.scenario.fleet.comm_range_km();
        let pos: Vec<Point> = self.robots.iter().map(|r| r.position_at(self.time)).collect();
        let mut pairs = Vec::new();
        for a in 0..m {
            for b in (a + 1)..m {
                if pos[a].distance(&pos[b]) < range {
                    pairs.push((a, b));
                }
            }
        }
        if pairs.is_empty() {
            return;
        }
        let snapshot = self.beliefs.clone();
        for (a, b) in pairs {
            self.beliefs[a].merge_from(&snapshot[b]);
            self.beliefs[b].merge_from(&snapshot[a]);
            self.comm.messages += 2;
        }
        self.comm.bytes = self.comm.messages * message_bytes(m, self.scenario.num_tasks()) as u64;
    }
}

/// A decision rule driven by the simulator.
pub trait Planner {
    fn name(&self) -> &str;

    /// Called once before an episode.
    fn begin_episode(&mut self, _world: &World) {}

    /// Chooses a feasible action for the pending robot.
    fn decide(&mut self, world: &World, robot: usize) -> Result<usize, crate::Error>;
}

/// Summary of a finished episode.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub n_success: usize,
    pub reward: f64,
    pub success_rate: f64,
    pub decisions: usize,
    pub comm: CommStats,
    pub end_time: f64,
    pub trace: EventLog,
}

/// Runs `planner` to completion, calling `on_step` after every environment
/// step with the wall-clock-relevant step boundary.
pub fn run_episode_with<P: Planner + ?Sized>(
    scenario: Arc<Scenario>,
    seed: u64,
    planner: &mut P,
    mut on_step: impl FnMut(&World),
) -> Result<EpisodeResult, crate::Error> {
    let mut world = World::reset(scenario, seed);
    planner.begin_episode(&world);
    while let Some(r) = world.pending_robot() {
        let a = planner.decide(&world, r)?;
        world.step(r, a)?;
        on_step(&world);
    }
    Ok(episode_result(&world)?)
}

pub fn run_episode<P: Planner + ?Sized>(scenario: Arc<Scenario>, seed: u64, planner: &mut P) -> Result<EpisodeResult, crate::Error> {
    run_episode_with(scenario, seed, planner, |_| {})
}

pub fn episode_result(world: &World) -> Result<EpisodeResult, SimError> {
    let reward = world.compute_reward()?;
    Ok(EpisodeResult {
        n_success: world.n_success(),
        reward,
        success_rate: world.n_success() as f64 / world.scenario().num_tasks() as f64,
        decisions: world.decisions(),
        comm: world.comm_stats(),
        end_time: world.time(),
        trace: world.trace().clone(),
    })
}
