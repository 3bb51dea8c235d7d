use serde::{Deserialize, Serialize};

/// State a robot publishes about itself: destination, remaining range and
/// payload, next decision time and the time the record was generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotRecord {
    pub dest_x: f64,
    pub dest_y: f64,
    pub range: f64,
    pub payload: f64,
    pub next_decision: f64,
    pub timestamp: f64,
    /// Per-robot generation counter; orders records sharing a timestamp.
    pub seq: u64,
}

impl RobotRecord {
    /// Number of `f64` fields carried over the wire.
    pub const WIRE_FIELDS: usize = 6;

    pub fn is_newer_than(&self, other: &RobotRecord) -> bool {
        (self.timestamp, self.seq) > (other.timestamp, other.seq)
    }
}

/// One robot's local view of the team and of task progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub records: Vec<RobotRecord>,
    /// Fraction of each task's demand known to be met.
    pub completion: Vec<f64>,
    /// Tasks known to be done.
    pub visited: Vec<bool>,
}

impl Belief {
    pub fn new(records: Vec<RobotRecord>, tasks: usize) -> Self {
        Belief { records, completion: vec![0.0; tasks], visited: vec![false; tasks] }
    }

    /// Pulls newer information from `other`: records by timestamp, completion
    /// by elementwise max, visited by logical or.
    pub fn merge_from(&mut self, other: &Belief) {
        for (mine, theirs) in self.records.iter_mut().zip(&other.records) {
            if theirs.is_newer_than(mine) {
                *mine = *theirs;
            }
        }
        for (mine, theirs) in self.completion.iter_mut().zip(&other.completion) {
            *mine = mine.max(*theirs);
        }
        for (mine, theirs) in self.visited.iter_mut().zip(&other.visited) {
            *mine |= *theirs;
        }
    }
}

/// Bytes in one exchange message: six doubles per robot plus one per task.
pub fn message_bytes(robots: usize, tasks: usize) -> usize {
    (RobotRecord::WIRE_FIELDS * robots + tasks) * 8
}
