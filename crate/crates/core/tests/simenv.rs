mod common;

use std::sync::Arc;

use common::checks;
use ct_planner::baselines::{default_bounds, tours_needed, trace_validate, Bigmrta, FeasRnd};
use ct_planner::simenv::{replay, run_episode, Planner, World};
use proptest::prelude::*;

fn planner(kind: u8, seed: u64) -> Box<dyn Planner> {
    if kind == 0 {
        Box::new(FeasRnd::new(seed))
    } else {
        Box::new(Bigmrta)
    }
}

fn check_invariants(w: &World, last_time: &mut f64) -> Result<(), TestCaseError> {
    let s = w.scenario();
    prop_assert!(w.time() >= *last_time);
    *last_time = w.time();
    for r in w.robots() {
        prop_assert!(r.range >= 0.0 && r.range <= s.fleet.range + 1e-12);
        prop_assert!(r.payload >= 0.0 && r.payload <= s.fleet.capacity + 1e-12);
    }
    for (spec, t) in s.tasks.iter().zip(w.tasks()) {
        prop_assert!((t.delivered - (spec.demand - t.remaining)).abs() < 1e-9);
        prop_assert!(t.delivered <= spec.demand + 1e-9);
    }
    let m = s.num_robots();
    for r in 0..m {
        for k in 0..m {
            let rec = w.beliefs()[r].records[k];
            prop_assert!(w.record_history(k).contains(&rec), "robot {r} holds a record of {k} never published");
        }
    }
    let c = w.comm_stats();
    prop_assert_eq!(c.bytes, c.messages * ((6 * m + s.num_tasks()) * 8) as u64);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn episode_invariants(seed in 0u64..10_000, lt in 0.06f64..0.3, lr in 0.5f64..3.0, kind in 0u8..2) {
        let s = Arc::new(checks::scenario(lt, lr, seed));
        let mut p = planner(kind, seed);
        let mut w = World::reset_with_history(s.clone(), seed);
        p.begin_episode(&w);
        let mut last = 0.0;
        while let Some(r) = w.pending_robot() {
            check_invariants(&w, &mut last)?;
            let a = p.decide(&w, r).unwrap();
            w.step(r, a).unwrap();
        }
        check_invariants(&w, &mut last)?;
        prop_assert!(w.is_terminal());
        prop_assert!(w.trace().len() >= w.decisions());
        let reward = w.compute_reward().unwrap();
        let again = replay(s.clone(), w.trace()).unwrap();
        prop_assert_eq!(again.compute_reward().unwrap(), reward);

        let (bs, bh) = default_bounds(&s);
        let need = (0..s.num_robots()).map(|r| tours_needed(w.trace(), r)).max().unwrap_or(0);
        let report = trace_validate(w.trace(), &s, bs.max(need), bh);
        prop_assert!(report.is_valid(), "{:?}", report.violations.first());
        prop_assert_eq!(report.n_success, w.n_success());
    }

    #[test]
    fn full_communication_beliefs_are_exact(seed in 0u64..10_000, kind in 0u8..2) {
        let s = checks::full_comm(checks::scenario(0.2, 1.0, seed));
        let mut p = planner(kind, seed);
        let (bad, total) = checks::count_failures(s, p.as_mut(), checks::beliefs_match_truth);
        prop_assert!(total > 0);
        prop_assert_eq!(bad, 0);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let s = Arc::new(checks::scenario(0.2, 1.0, 9));
    let a = run_episode(s.clone(), 0, &mut FeasRnd::new(3)).unwrap();
    let b = run_episode(s, 0, &mut FeasRnd::new(3)).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.reward, b.reward);
}
