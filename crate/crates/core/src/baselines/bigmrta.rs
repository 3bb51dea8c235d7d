use crate::assignment::min_cost_assignment;
use crate::scenario::Point;
use crate::simenv::{Planner, World, RANGE_EPS};

/// Robot-task pairing suitabilities; `None` marks an infeasible pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IncentiveMatrix {
    /// Robot ids, row order.
    pub robots: Vec<usize>,
    /// Task actions (1-based), column order.
    pub tasks: Vec<usize>,
    pub weights: Vec<Vec<Option<f64>>>,
}

impl IncentiveMatrix {
    pub fn get(&self, robot: usize, task: usize) -> Option<f64> {
        let r = self.robots.iter().position(|&x| x == robot)?;
        let c = self.tasks.iter().position(|&x| x == task)?;
        self.weights[r][c]
    }
}

struct RobotView {
    pos: Point,
    available: f64,
    range: f64,
    payload: f64,
}

/// Incentives computed from `robot`'s belief: own state exactly, peers from
/// their last known records (position and availability at their stated
/// destination).
pub fn bigmrta_incentives(world: &World, robot: usize) -> IncentiveMatrix {
    let s = world.scenario();
    let t = world.time();
    let belief = &world.beliefs()[robot];
    let m = s.num_robots();
    let views: Vec<RobotView> = (0..m)
        .map(|k| {
            if k == robot {
                let st = &world.robots()[k];
                RobotView { pos: st.position_at(t), available: t, range: st.range, payload: st.payload }
            } else {
                let rec = &belief.records[k];
                let pos = Point::new(rec.dest_x, rec.dest_y);
                let at_depot = pos == s.depot;
                RobotView {
                    pos,
                    available: rec.next_decision.max(t),
                    range: if at_depot { s.fleet.range } else { rec.range },
                    payload: if at_depot { s.fleet.capacity } else { rec.payload },
                }
            }
        })
        .collect();
    let tasks: Vec<usize> = (1..=s.num_tasks()).filter(|&i| world.believes_active(robot, i)).collect();
    let weights = views
        .iter()
        .map(|v| {
            tasks
                .iter()
                .map(|&i| {
                    let spec = &s.tasks[i - 1];
                    let p = spec.position();
                    let remaining = spec.demand * (1.0 - belief.completion[i - 1]);
                    if v.payload <= 0.0 || remaining <= 0.0 {
                        return None;
                    }
                    if v.range + RANGE_EPS < v.pos.distance(&p) + p.distance(&s.depot) {
                        return None;
                    }
                    let arrival = v.available + s.fleet.travel_time(v.pos.distance(&p));
                    if arrival > spec.deadline {
                        return None;
                    }
                    let window = spec.deadline - t;
                    let urgency = if window > 0.0 { ((spec.deadline - arrival) / window).max(0.0) } else { 0.0 };
                    let fit = remaining.min(v.payload) / remaining;
                    Some(urgency * fit)
                })
                .collect()
        })
        .collect();
    IncentiveMatrix { robots: (0..m).collect(), tasks, weights }
}

/// Maximum-weight bipartite matching over present pairs. Returns
/// `(row, column)` index pairs into the matrix.
pub fn max_weight_matching(m: &IncentiveMatrix) -> Vec<(usize, usize)> {
    let rows = m.weights.len();
    let cols = m.tasks.len();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let w = |r: usize, c: usize| m.weights[r][c];
    let pairs: Vec<(usize, usize)> = if rows <= cols {
        let cost: Vec<Vec<f64>> = (0..rows).map(|r| (0..cols).map(|c| -w(r, c).unwrap_or(0.0)).collect()).collect();
        let (_, assign) = min_cost_assignment(&cost);
        assign.into_iter().enumerate().collect()
    } else {
        let cost: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| -w(r, c).unwrap_or(0.0)).collect()).collect();
        let (_, assign) = min_cost_assignment(&cost);
        let mut p: Vec<(usize, usize)> = assign.into_iter().enumerate().map(|(c, r)| (r, c)).collect();
        p.sort_unstable();
        p
    };
    pairs.into_iter().filter(|&(r, c)| w(r, c).is_some()).collect()
}

/// The task matched to `robot` in its own view of the team, or the depot.
pub fn bigmrta_action(world: &World, robot: usize) -> usize {
    let m = bigmrta_incentives(world, robot);
    let row = m.robots.iter().position(|&r| r == robot).expect("robot row");
    if m.weights[row].iter().all(Option::is_none) {
        return 0;
    }
    max_weight_matching(&m).into_iter().find(|&(r, _)| r == row).map(|(_, c)| m.tasks[c]).unwrap_or(0)
}

pub struct Bigmrta;

impl Planner for Bigmrta {
    fn name(&self) -> &str {
        "bigmrta"
    }

    fn decide(&mut self, world: &World, robot: usize) -> Result<usize, crate::Error> {
        Ok(bigmrta_action(world, robot))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Arena, FleetSpec, Scenario, TaskSpec};
    use std::sync::Arc;

    fn mat(w: Vec<Vec<Option<f64>>>) -> IncentiveMatrix {
        IncentiveMatrix { robots: (0..w.len()).collect(), tasks: (1..=w[0].len()).collect(), weights: w }
    }

    #[test]
    fn trivial_matchings() {
        assert_eq!(max_weight_matching(&mat(vec![vec![Some(0.4)]])), vec![(0, 0)]);
        let d = mat(vec![
            vec![Some(5.0), Some(1.0), Some(1.0)],
            vec![Some(1.0), Some(5.0), Some(1.0)],
            vec![Some(1.0), Some(1.0), Some(5.0)],
        ]);
        assert_eq!(max_weight_matching(&d), vec![(0, 0), (1, 1), (2, 2)]);
        assert!(max_weight_matching(&mat(vec![vec![None, None]])).is_empty());
        let empty = IncentiveMatrix { robots: vec![0], tasks: vec![], weights: vec![vec![]] };
        assert!(max_weight_matching(&empty).is_empty());
    }

    fn two_by_two(robots: usize) -> Arc<Scenario> {
        Arc::new(Scenario {
            seed: 0,
            arena: Arena { width: 1.0, height: 1.0 },
            depot: Point::new(0.5, 0.5),
            fleet: FleetSpec { robots, comm_range: f64::INFINITY, ..FleetSpec::default() },
            tasks: vec![
                TaskSpec { id: 1, x: 0.3, y: 0.5, deadline: 200.0, demand: 4.0 },
                TaskSpec { id: 2, x: 0.7, y: 0.5, deadline: 200.0, demand: 4.0 },
            ],
        })
    }

    #[test]
    fn hand_computed_incentives() {
        let w = World::reset(two_by_two(2), 0);
        let m = bigmrta_incentives(&w, 0);
        // 0.2 km at 10 m/s: 20 s of a 200 s window; payload 5 covers demand 4.
        let expect = (200.0 - 20.0) / 200.0;
        for r in 0..2 {
            for task in 1..=2 {
                assert!((m.get(r, task).unwrap() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unreachable_before_deadline_is_absent_and_partial_fit() {
        let mut s = (*two_by_two(1)).clone();
        s.tasks[0].deadline = 10.0;
        s.tasks[1].demand = 10.0;
        let w = World::reset(Arc::new(s), 0);
        let m = bigmrta_incentives(&w, 0);
        assert_eq!(m.get(0, 1), None);
        let v = m.get(0, 2).unwrap();
        assert!((v - 0.9 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_robots_pick_distinct_tasks() {
        let mut w = World::reset(two_by_two(2), 0);
        let a0 = bigmrta_action(&w, 0);
        w.step(0, a0).unwrap();
        assert_eq!(w.pending_robot(), Some(1));
        let a1 = bigmrta_action(&w, 1);
        assert_ne!(a0, 0);
        assert_ne!(a1, 0);
        assert_ne!(a0, a1);
    }

    #[test]
    fn single_robot_takes_best_task() {
        let mut s = (*two_by_two(1)).clone();
        s.tasks[1].deadline = 500.0;
        let w = World::reset(Arc::new(s), 0);
        assert_eq!(bigmrta_action(&w, 0), 2);
    }
}
