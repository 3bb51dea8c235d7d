mod common;

use std::sync::Arc;

use common::checks;
use ct_planner::baselines::{
    brute_force_optimal, default_bounds, export_minlp, max_weight_matching, parse_model, tours_needed, trace_validate, write_model,
    Bigmrta, ExactCaps, FeasRnd, IncentiveMatrix,
};
use ct_planner::policy::{EncoderKind, PolicyPlanner};
use ct_planner::simenv::{run_episode, EventLog};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, cells: &[Option<f64>]) -> IncentiveMatrix {
    IncentiveMatrix {
        robots: (0..rows).collect(),
        tasks: (1..=cols).collect(),
        weights: (0..rows).map(|r| cells[r * cols..(r + 1) * cols].to_vec()).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matching_equals_enumeration(
        rows in 1usize..=6,
        cols in 1usize..=6,
        cells in prop::collection::vec(prop::option::weighted(0.8, 0.0f64..1.0), 36),
    ) {
        let m = matrix(rows, cols, &cells[..rows * cols]);
        let pairs = max_weight_matching(&m);
        let total: f64 = pairs.iter().map(|&(r, c)| m.weights[r][c].unwrap()).sum();
        prop_assert!((total - common::matching_brute(&m.weights)).abs() < 1e-9);
        let mut rs: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut cs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        rs.dedup();
        cs.sort_unstable();
        cs.dedup();
        prop_assert_eq!(rs.len(), pairs.len());
        prop_assert_eq!(cs.len(), pairs.len());
    }
}

fn validate(log: &EventLog, s: &ct_planner::scenario::Scenario) -> ct_planner::baselines::ValidationReport {
    let (bs, bh) = default_bounds(s);
    let need = (0..s.num_robots()).map(|r| tours_needed(log, r)).max().unwrap_or(0);
    trace_validate(log, s, bs.max(need), bh.max(log.len()))
}

#[test]
fn injected_faults_are_caught() {
    for seed in 0..10 {
        let s = checks::scenario(0.2, 1.0, seed);
        let r = run_episode(Arc::new(s.clone()), 0, &mut FeasRnd::new(seed)).unwrap();
        assert!(validate(&r.trace, &s).is_valid());

        let bad = checks::inject_range_fault(&r.trace, &s, 0).unwrap();
        let fam = validate(&bad, &s).families().iter().map(|f| f.to_string()).collect::<Vec<_>>();
        assert!(fam.iter().any(|f| f.starts_with("range")), "seed {seed}: {fam:?}");

        let bad = checks::inject_capacity_fault(&r.trace, &s, 0).unwrap();
        let fam = validate(&bad, &s).families().iter().map(|f| f.to_string()).collect::<Vec<_>>();
        assert!(fam.iter().any(|f| f == "work_bounds" || f.starts_with("capacity") || f == "c_domain"), "seed {seed}: {fam:?}");

        let bad = checks::inject_deadline_fault(&r.trace, &s, 0).unwrap();
        let rep = validate(&bad, &s);
        assert!(rep.families().contains(&"deadline_delivery"), "seed {seed}: {:?}", rep.families());
    }
}

#[test]
fn exact_dominates_heuristics_on_tiny_instances() {
    let untrained = Arc::new(checks::small_policy(EncoderKind::CapsuleTd, 1));
    let mut ties = 0;
    for seed in 0..12 {
        let s = checks::full_comm(checks::scenario(0.1, 2.0, seed));
        let opt = brute_force_optimal(&s, ExactCaps::default()).unwrap();
        assert!(opt.exhaustive);
        let f = run_episode(s.clone(), 0, &mut FeasRnd::new(seed)).unwrap().n_success;
        let b = run_episode(s.clone(), 0, &mut Bigmrta).unwrap().n_success;
        let p = run_episode(s.clone(), 0, &mut PolicyPlanner::greedy(untrained.clone())).unwrap().n_success;
        assert!(opt.n_success >= f.max(b).max(p), "seed {seed}: opt {} f {f} b {b} p {p}", opt.n_success);
        ties += usize::from(opt.n_success == b);
        // The optimal schedule replays to the same count.
        assert_eq!(validate(&opt.schedule, &s).n_success, opt.n_success);
    }
    assert!(ties >= 1);
}

#[test]
fn model_file_round_trip_at_desk_scale() {
    let s = checks::scenario(0.2, 1.0, 2);
    let (bs, bh) = default_bounds(&s);
    let model = export_minlp(&s, bs, bh).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.txt");
    std::fs::write(&path, write_model(&model)).unwrap();
    let back = parse_model(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, model);
}
