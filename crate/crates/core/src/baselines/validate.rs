//! Checks a simulated trace against the algebraic model.
//!
//! The trace is mapped onto the model variables (tours split at depot
//! arrivals, waits dropped, unused decisions padded with depot self-loops)
//! and every exported constraint and variable domain is evaluated at that
//! point. Clock-based rules that the model does not carry (leg durations,
//! chronology, delivery by the deadline, completion) are checked directly
//! from the trace. The model's completion time sums transition times rather
//! than reading the clock, so its deadline row is replaced by the clock
//! check.

use std::collections::HashMap;

use super::minlp::{export_minlp, Sense};
use crate::scenario::Scenario;
use crate::simenv::{EventLog, Leg};

const TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub family: String,
    /// Constraint or variable name, or a leg reference.
    pub indices: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub n_success: usize,
    pub mappable: bool,
    pub reason: Option<String>,
    pub tours_per_robot: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.mappable && self.violations.is_empty()
    }

    pub fn families(&self) -> Vec<&str> {
        let mut f: Vec<&str> = self.violations.iter().map(|v| v.family.as_str()).collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

fn split_tours(log: &EventLog, robot: usize) -> Vec<Vec<Leg>> {
    let mut tours = Vec::new();
    let mut cur: Vec<Leg> = Vec::new();
    for leg in log.robot_legs(robot).filter(|l| !l.is_wait()) {
        cur.push(*leg);
        if leg.to_node == 0 {
            tours.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tours.push(cur);
    }
    tours
}

/// Number of depot-to-depot tours `robot` flies in `log`, waits excluded.
pub fn tours_needed(log: &EventLog, robot: usize) -> usize {
    split_tours(log, robot).len()
}

fn violation(family: &str, indices: String, detail: String) -> Violation {
    Violation { family: family.to_string(), indices, detail }
}

pub fn trace_validate(log: &EventLog, scenario: &Scenario, tours: usize, decisions: usize) -> ValidationReport {
    let n = scenario.num_tasks();
    let m = scenario.num_robots();
    let mut report = ValidationReport { violations: Vec::new(), n_success: 0, mappable: true, reason: None, tours_per_robot: Vec::new() };
    if let Some(l) = log.legs.iter().find(|l| l.robot >= m || l.from_node > n || l.to_node > n) {
        report.mappable = false;
        report.reason = Some(format!("leg references unknown robot or node: {l:?}"));
        return report;
    }
    let per_robot: Vec<Vec<Vec<Leg>>> = (0..m).map(|r| split_tours(log, r)).collect();
    report.tours_per_robot = per_robot.iter().map(Vec::len).collect();
    for (r, ts) in per_robot.iter().enumerate() {
        if ts.len() > tours {
            report.mappable = false;
            report.reason = Some(format!("robot {r} flies {} tours, bound S = {tours}", ts.len()));
            return report;
        }
        if let Some((s, t)) = ts.iter().enumerate().find(|(_, t)| t.len() > decisions) {
            report.mappable = false;
            report.reason = Some(format!("robot {r} tour {} has {} decisions, bound H = {decisions}", s + 1, t.len()));
            return report;
        }
    }
    let model = match export_minlp(scenario, tours, decisions) {
        Ok(m) => m,
        Err(e) => {
            report.mappable = false;
            report.reason = Some(e.to_string());
            return report;
        }
    };

    // Clock checks and per-task completion from the raw trace.
    let v = &mut report.violations;
    let fleet = &scenario.fleet;
    for r in 0..m {
        let legs: Vec<&Leg> = log.robot_legs(r).collect();
        for (k, l) in legs.iter().enumerate() {
            let want = fleet.travel_time(scenario.node_distance(l.from_node, l.to_node));
            if !l.is_wait() && ((l.t_arrive - l.t_depart) - want).abs() > TOL {
                v.push(violation("transition_duration", format!("robot={r},leg={k}"), format!("took {} s, travel time {want} s", l.t_arrive - l.t_depart)));
            }
            if l.t_arrive < l.t_depart - TOL {
                v.push(violation("chronology", format!("robot={r},leg={k}"), "arrives before departing".into()));
            }
            if k > 0 {
                let prev = legs[k - 1];
                if l.t_depart < prev.t_arrive - TOL {
                    v.push(violation("chronology", format!("robot={r},leg={k}"), format!("departs {} before previous arrival {}", l.t_depart, prev.t_arrive)));
                }
                if l.from_node != prev.to_node {
                    v.push(violation("continuity", format!("robot={r},leg={k}"), format!("departs node {} after arriving at {}", l.from_node, prev.to_node)));
                }
            } else if l.from_node != 0 {
                v.push(violation("continuity", format!("robot={r},leg=0"), "first leg does not leave the depot".into()));
            }
            if l.kg_delivered < -TOL {
                v.push(violation("work_domain", format!("robot={r},leg={k}"), format!("negative delivery {}", l.kg_delivered)));
            }
            if l.to_node == 0 && l.kg_delivered.abs() > TOL {
                v.push(violation("depot_delivery", format!("robot={r},leg={k}"), format!("{} kg delivered at the depot", l.kg_delivered)));
            }
            if l.to_node > 0 && l.kg_delivered > TOL && l.t_arrive > scenario.tasks[l.to_node - 1].deadline + TOL {
                v.push(violation(
                    "deadline_delivery",
                    format!("robot={r},leg={k},task={}", l.to_node),
                    format!("delivered at {} after deadline {}", l.t_arrive, scenario.tasks[l.to_node - 1].deadline),
                ));
            }
        }
        if let Some(last) = per_robot[r].last().and_then(|t| t.last()) {
            if last.to_node != 0 {
                v.push(violation("tour_end", format!("robot={r}"), "trace ends away from the depot".into()));
            }
        }
    }
    let mut order: Vec<&Leg> = log.legs.iter().filter(|l| l.to_node > 0 && l.kg_delivered > 0.0).collect();
    order.sort_by(|a, b| a.t_arrive.total_cmp(&b.t_arrive).then(a.robot.cmp(&b.robot)));
    let mut met = vec![0.0; n];
    let mut last_delivery = vec![f64::NEG_INFINITY; n];
    for l in order {
        let j = l.to_node - 1;
        met[j] += l.kg_delivered;
        last_delivery[j] = last_delivery[j].max(l.t_arrive);
        if met[j] > scenario.tasks[j].demand + TOL {
            v.push(violation("work_demand_clock", format!("task={}", j + 1), format!("{} kg met of {} by t = {}", met[j], scenario.tasks[j].demand, l.t_arrive)));
        }
    }
    let done: Vec<bool> = (0..n)
        .map(|j| met[j] >= scenario.tasks[j].demand - TOL && last_delivery[j] <= scenario.tasks[j].deadline + TOL)
        .collect();
    report.n_success = done.iter().filter(|&&d| d).count();

    // Map onto model variables.
    let mut val: HashMap<String, f64> = HashMap::new();
    let mut met_index = vec![vec![vec![0.0; decisions + 1]; tours + 1]; n + 1];
    for (r, ts) in per_robot.iter().enumerate() {
        let r1 = r + 1;
        for s in 1..=tours {
            let tour = ts.get(s - 1);
            let mut dist = 0.0;
            let mut load = 0.0;
            for h in 1..=decisions {
                let (i, j, kg) = match tour.and_then(|t| t.get(h - 1)) {
                    Some(l) => (l.from_node, l.to_node, l.kg_delivered),
                    None => (0, 0, 0.0),
                };
                val.insert(format!("x[{i},{j},{h},{s},{r1}]"), 1.0);
                val.insert(format!("e[{i},{j},{h},{s},{r1}]"), kg);
                val.insert(format!("time[{i},{j},{h},{s},{r1}]"), fleet.travel_time(scenario.node_distance(i, j)));
                dist += scenario.node_distance(i, j);
                load += kg;
                val.insert(format!("range[{h},{s},{r1}]"), fleet.range - dist);
                val.insert(format!("c[{h},{s},{r1}]"), fleet.capacity - load);
                met_index[j][s][h] += kg;
            }
        }
    }
    for j in 0..=n {
        let mut acc = 0.0;
        for s in 1..=tours {
            for h in 1..=decisions {
                acc += met_index[j][s][h];
                val.insert(format!("w[{j},{h},{s}]"), acc);
            }
        }
    }
    for j in 1..=n {
        let tc: f64 = model
            .constraints
            .iter()
            .find(|c| c.name == format!("completion_time[j={j}]"))
            .map(|c| c.terms.iter().skip(1).map(|t| -t.coef * val.get(&t.vars[0]).copied().unwrap_or(0.0)).sum())
            .unwrap_or(0.0);
        val.insert(format!("tc[{j}]"), tc);
        val.insert(format!("done[{j}]"), if done[j - 1] { 1.0 } else { 0.0 });
    }
    val.insert("nsuccess".into(), report.n_success as f64);

    for var in &model.variables {
        let x = val.get(&var.name).copied().unwrap_or(0.0);
        let tol = TOL * var.upper.abs().max(1.0);
        if x < var.lower - tol || x > var.upper + tol {
            let base = var.name.split('[').next().unwrap_or(&var.name);
            v.push(violation(&format!("{base}_domain"), var.name.clone(), format!("value {x} outside [{}, {}]", var.lower, var.upper)));
        }
    }
    for c in &model.constraints {
        if c.family() == "done_on_time" {
            continue;
        }
        let lhs: f64 = c.terms.iter().map(|t| t.coef * t.vars.iter().map(|n| val.get(n).copied().unwrap_or(0.0)).product::<f64>()).sum();
        let tol = TOL * c.rhs.abs().max(1.0);
        let ok = match c.sense {
            Sense::Le => lhs <= c.rhs + tol,
            Sense::Ge => lhs >= c.rhs - tol,
            Sense::Eq => (lhs - c.rhs).abs() <= tol,
        };
        if !ok {
            v.push(violation(c.family(), c.name.clone(), format!("lhs {lhs} vs rhs {}", c.rhs)));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::default_bounds;
    use crate::scenario::{Arena, FleetSpec, Point, TaskSpec};

    fn scen() -> Scenario {
        Scenario {
            seed: 0,
            arena: Arena { width: 1.0, height: 1.0 },
            depot: Point::new(0.5, 0.5),
            fleet: FleetSpec { robots: 1, ..FleetSpec::default() },
            tasks: vec![TaskSpec { id: 1, x: 0.8, y: 0.5, deadline: 100.0, demand: 3.0 }],
        }
    }

    fn leg(from: usize, to: usize, t0: f64, t1: f64, kg: f64) -> Leg {
        Leg { robot: 0, from_node: from, to_node: to, t_depart: t0, t_arrive: t1, kg_delivered: kg }
    }

    #[test]
    fn hand_trace_is_valid() {
        let s = scen();
        let log = EventLog { legs: vec![leg(0, 1, 0.0, 30.0, 3.0), leg(1, 0, 30.0, 60.0, 0.0)] };
        let (bs, bh) = default_bounds(&s);
        let r = trace_validate(&log, &s, bs, bh);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(r.n_success, 1);
        assert_eq!(r.tours_per_robot, vec![1]);
    }

    #[test]
    fn overdelivery_and_late_delivery_are_flagged() {
        let s = scen();
        let log = EventLog { legs: vec![leg(0, 1, 0.0, 30.0, 6.0), leg(1, 0, 30.0, 60.0, 0.0)] };
        let r = trace_validate(&log, &s, 2, 2);
        assert!(r.families().contains(&"capacity_init") || r.families().contains(&"c_domain"));
        assert!(r.families().contains(&"demand_cap"));
        let log = EventLog { legs: vec![leg(0, 1, 80.0, 110.0, 3.0), leg(1, 0, 110.0, 140.0, 0.0)] };
        let r = trace_validate(&log, &s, 2, 2);
        assert!(r.families().contains(&"deadline_delivery"));
        assert_eq!(r.n_success, 0);
    }

    #[test]
    fn too_many_decisions_is_unmappable() {
        let s = scen();
        let log = EventLog { legs: vec![leg(0, 1, 0.0, 30.0, 3.0), leg(1, 0, 30.0, 60.0, 0.0)] };
        let r = trace_validate(&log, &s, 1, 1);
        assert!(!r.mappable);
        assert!(r.reason.unwrap().contains("H = 1"));
    }
}
