//! Exhaustive search over interleaved robot decisions for tiny instances.

use std::collections::HashMap;
use std::sync::Arc;

use crate::scenario::Scenario;
use crate::simenv::{EventLog, TaskStatus, World};
use crate::{Error, Result};

pub const MAX_EXACT_TASKS: usize = 6;
pub const MAX_EXACT_ROBOTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactCaps {
    pub max_nodes: usize,
    pub max_depth: usize,
    /// Skip states dominated by an already explored one.
    pub dominance: bool,
}

impl Default for ExactCaps {
    fn default() -> Self {
        ExactCaps { max_nodes: 20_000_000, max_depth: 200, dominance: true }
    }
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub n_success: usize,
    pub schedule: EventLog,
    /// True when no cap was hit, so `n_success` is the optimum.
    pub exhaustive: bool,
    pub nodes: usize,
}

type StateKey = (Vec<u64>, Vec<u8>, Vec<(usize, bool)>, Option<usize>);

struct Search {
    caps: ExactCaps,
    nodes: usize,
    capped: bool,
    best: usize,
    best_log: Option<EventLog>,
    seen: HashMap<StateKey, Vec<Vec<f64>>>,
}

fn key_of(w: &World) -> (StateKey, Vec<f64>) {
    let tasks = w.tasks();
    let remaining = tasks.iter().map(|t| t.remaining.to_bits()).collect();
    let status = tasks
        .iter()
        .map(|t| match t.status {
            TaskStatus::Active => 0,
            TaskStatus::Done => 1,
            TaskStatus::Missed => 2,
        })
        .collect();
    let robots = w.robots().iter().map(|r| (r.node, r.in_transit)).collect();
    let mut score = vec![w.time()];
    for r in w.robots() {
        score.push(if r.in_transit { r.arrive } else { w.time() });
        score.push(-r.range);
        score.push(-r.payload);
        score.push(if r.docked { 1.0 } else { 0.0 });
    }
    ((remaining, status, robots, w.pending_robot()), score)
}

impl Search {
    /// Records `score` unless an explored state with the same key is at
    /// least as good in every coordinate. Returns true if dominated.
    fn dominated(&mut self, key: StateKey, score: Vec<f64>) -> bool {
        let entry = self.seen.entry(key).or_default();
        if entry.iter().any(|old| old.iter().zip(&score).all(|(o, n)| o <= n)) {
            return true;
        }
        entry.retain(|old| !old.iter().zip(&score).all(|(o, n)| n <= o));
        entry.push(score);
        false
    }

    fn candidates(w: &World, r: usize) -> Vec<usize> {
        let s = w.scenario();
        let t = w.time();
        let robot = &w.robots()[r];
        let here = robot.position_at(t);
        let mask = w.feasible_mask(r);
        let mut out: Vec<usize> = (1..mask.len())
            .filter(|&i| {
                let spec = &s.tasks[i - 1];
                mask[i]
                    && w.tasks()[i - 1].status == TaskStatus::Active
                    && t + s.fleet.travel_time(here.distance(&spec.position())) <= spec.deadline
            })
            .collect();
        let at_depot = robot.node == 0 && !robot.in_transit;
        let others_live = w
            .robots()
            .iter()
            .enumerate()
            .any(|(k, o)| k != r && !o.docked && (o.in_transit || w.true_record(k).next_decision <= t));
        if !at_depot || others_live || out.is_empty() {
            out.push(0);
        }
        out
    }

    fn upper_bound(w: &World) -> usize {
        let t = w.time();
        w.n_success()
            + w.scenario().tasks.iter().zip(w.tasks()).filter(|(s, st)| st.status == TaskStatus::Active && s.deadline >= t).count()
    }

    fn dfs(&mut self, w: World, depth: usize) {
        self.nodes += 1;
        if w.is_terminal() || w.pending_robot().is_none() {
            let n = w.n_success();
            if n > self.best || self.best_log.is_none() {
                self.best = n;
                self.best_log = Some(w.trace().clone());
            }
            return;
        }
        if self.nodes >= self.caps.max_nodes || depth >= self.caps.max_depth {
            self.capped = true;
            return;
        }
        if Self::upper_bound(&w) <= self.best && self.best_log.is_some() {
            return;
        }
        if self.caps.dominance {
            let (k, s) = key_of(&w);
            if self.dominated(k, s) {
                return;
            }
        }
        let r = w.pending_robot().unwrap();
        for a in Self::candidates(&w, r) {
            let mut next = w.clone();
            if next.step(r, a).is_err() {
                continue;
            }
            self.dfs(next, depth + 1);
        }
    }
}

/// Maximum task completions under full communication, by depth-first
/// search over every robot decision with range, deadline, bound and
/// dominance pruning.
pub fn brute_force_optimal(scenario: &Scenario, caps: ExactCaps) -> Result<ExactSolution> {
    if scenario.num_tasks() > MAX_EXACT_TASKS || scenario.num_robots() > MAX_EXACT_ROBOTS {
        return Err(Error::Other(format!(
            "exact search supports at most {MAX_EXACT_TASKS} tasks and {MAX_EXACT_ROBOTS} robots, got {} and {}",
            scenario.num_tasks(),
            scenario.num_robots()
        )));
    }
    let mut full = scenario.clone();
    full.fleet.comm_range = f64::INFINITY;
    let mut search = Search { caps, nodes: 0, capped: false, best: 0, best_log: None, seen: HashMap::new() };
    search.dfs(World::reset(Arc::new(full), 0), 0);
    Ok(ExactSolution {
        n_success: search.best,
        schedule: search.best_log.unwrap_or_default(),
        exhaustive: !search.capped,
        nodes: search.nodes,
    })
}
