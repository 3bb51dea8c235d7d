//! Append-only leg log and deterministic replay.

use std::collections::VecDeque;
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{SimError, World};
use crate::scenario::Scenario;

/// One robot transition. Node 0 is the depot; a `0 -> 0` leg is an idle wait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub robot: usize,
    pub from_node: usize,
    pub to_node: usize,
    pub t_depart: f64,
    pub t_arrive: f64,
    pub kg_delivered: f64,
}

impl Leg {
    pub fn is_wait(&self) -> bool {
        self.from_node == 0 && self.to_node == 0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub legs: Vec<Leg>,
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    pub fn robot_legs(&self, robot: usize) -> impl Iterator<Item = &Leg> {
        self.legs.iter().filter(move |l| l.robot == robot)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        let file = File::create(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(file);
        for leg in &self.legs {
            w.serialize(leg).map_err(|e| SimError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| SimError::Io(e.to_string()))
    }

    pub fn read_csv(path: &Path) -> Result<Self, SimError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let legs = r
            .deserialize()
            .collect::<Result<Vec<Leg>, _>>()
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Ok(EventLog { legs })
    }
}

/// Re-drives a fresh episode with the actions recorded in `log`.
pub fn replay(scenario: Arc<Scenario>, log: &EventLog) -> Result<World, SimError> {
    let m = scenario.num_robots();
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); m];
    for leg in &log.legs {
        if leg.robot >= m {
            return Err(SimError::Replay(format!("leg for unknown robot {}", leg.robot)));
        }
        queues[leg.robot].push_back(leg.to_node);
    }
    let mut world = World::reset(scenario, 0);
    while let Some(r) = world.pending_robot() {
        let action = queues[r]
            .pop_front()
            .ok_or_else(|| SimError::Replay(format!("log exhausted for robot {r} at t={}", world.time())))?;
        world.step(r, action)?;
    }
    if let Some(r) = queues.iter().position(|q| !q.is_empty()) {
        return Err(SimError::Replay(format!("episode ended with unreplayed legs for robot {r}")));
    }
    Ok(world)
}
