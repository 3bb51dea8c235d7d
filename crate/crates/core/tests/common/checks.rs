//! Measurements shared by the integration tests and the acceptance runner.

use std::sync::Arc;

use ct_planner::policy::{EncoderKind, Policy, PolicyConfig, Tape};
use ct_planner::scenario::{generate_scenario, GenerationConfig, Scenario};
use ct_planner::simenv::{Planner, World};
use ct_planner::taskgraph::build_task_graph;
use ct_planner::topology::{td_laplacian, TdCache};
use ct_planner::training::{collect_rollouts, compute_advantages, evaluate_loss, minibatch_gradient, PpoConfig, ScenarioStream, Step};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_policy(kind: EncoderKind, seed: u64) -> Policy {
    let cfg = PolicyConfig { hidden: 16, heads: 4, context_hidden: 16, critic_hidden: 16, mlp_hidden: 16, ..PolicyConfig::default() }
        .with_encoder(kind);
    Policy::new(cfg, seed).unwrap()
}

pub fn random_features(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, 4), |_| rng.random::<f64>())
}

pub fn laplacian_for(policy: &Policy, features: &Array2<f64>) -> Option<Array2<f64>> {
    match policy.config.encoder {
        EncoderKind::CapsuleTd => Some(td_laplacian(features.view(), &policy.config.td, &mut TdCache::new()).unwrap()),
        EncoderKind::CapsulePlain => Some(build_task_graph(features.clone()).unwrap().laplacian),
        EncoderKind::Mlp => None,
    }
}

fn embed(policy: &Policy, features: &Array2<f64>) -> Array2<f64> {
    let lap = laplacian_for(policy, features);
    let mut t = Tape::new();
    let e = policy.encode(&mut t, features, lap.as_ref()).unwrap();
    t.value(e).clone()
}

/// Largest deviation between encoding permuted nodes and permuting the
/// encoding, over `graphs` random graphs with up to `max_n` nodes.
pub fn equivariance_deviation(kind: EncoderKind, graphs: usize, max_n: usize, seed: u64) -> f64 {
    let policy = small_policy(kind, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..graphs {
        let n = rng.random_range(1..=max_n);
        let x = random_features(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let px = Array2::from_shape_fn((n, 4), |(i, j)| x[[perm[i], j]]);
        let e = embed(&policy, &x);
        let pe = embed(&policy, &px);
        for i in 0..n {
            for j in 0..e.ncols() {
                worst = worst.max((pe[[i, j]] - e[[perm[i], j]]).abs());
            }
        }
    }
    worst
}

/// Largest probability assigned to a masked action over random graphs and
/// masks.
pub fn masked_probability(kind: EncoderKind, graphs: usize, max_n: usize, seed: u64) -> f64 {
    let policy = small_policy(kind, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5);
    let mut worst = 0.0f64;
    for _ in 0..graphs {
        let n = rng.random_range(1..=max_n);
        let x = random_features(&mut rng, n);
        let lap = laplacian_for(&policy, &x);
        let mut mask: Vec<bool> = (0..=n).map(|_| rng.random_bool(0.5)).collect();
        mask[0] = true;
        let ctx = Array2::from_shape_fn((1, 9), |_| rng.random::<f64>());
        let mut t = Tape::new();
        let e = policy.encode(&mut t, &x, lap.as_ref()).unwrap();
        let q = policy.query(&mut t, &ctx);
        let (_, p) = policy.decode(&mut t, e, q, &mask).unwrap();
        let p = t.value(p);
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                worst = worst.max(p[[0, i]].abs());
            }
        }
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    worst
}

pub fn rollout_steps(policy: &Policy, steps: usize, seed: u64) -> (Vec<Step>, PpoConfig) {
    let cfg = PpoConfig { rollout: steps, batch: steps, ..PpoConfig::desk() };
    let mut stream = ScenarioStream::new(GenerationConfig::with_scales(0.12, 2.0), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = collect_rollouts(policy, &mut stream, &mut rng, &cfg).unwrap();
    compute_advantages(&mut buf, &cfg);
    (buf.steps, cfg)
}

fn total_loss(policy: &Policy, steps: &[Step], cfg: &PpoConfig) -> f64 {
    let s = evaluate_loss(policy, steps, cfg).unwrap();
    s.policy_loss + cfg.value_coef * s.value_loss - cfg.entropy_coef * s.entropy
}

#[derive(Debug, Clone)]
pub struct GradGroup {
    pub group: String,
    pub checked: usize,
    /// Scalars replaced because the difference stencil crossed a ReLU kink.
    pub kinks: usize,
    pub max_rel_err: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central-difference check of the PPO loss gradient on up to
/// `per_group` scalars of every layer group, step 1e-5. A scalar whose
/// difference at half the step disagrees with the full step sits within one
/// step of a kink; it is replaced by another draw and counted.
pub fn gradient_check(kind: EncoderKind, per_group: usize, seed: u64) -> Vec<GradGroup> {
    let mut policy = small_policy(kind, seed);
    let (steps, cfg) = rollout_steps(&policy, 8, seed);
    let refs: Vec<&Step> = steps.iter().collect();
    let (grad, _) = minibatch_gradient(&policy, &refs, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9d);
    let eps = 1e-5;
    let mut out = Vec::new();
    for (group, ids) in policy.layer_groups() {
        let mut scalars: Vec<(usize, usize, usize)> = ids
            .iter()
            .flat_map(|&id| {
                let (r, c) = policy.params.tensor(id).dim();
                (0..r).flat_map(move |i| (0..c).map(move |j| (id, i, j)))
            })
            .collect();
        for i in (1..scalars.len()).rev() {
            scalars.swap(i, rng.random_range(0..=i));
        }
        let (mut checked, mut kinks, mut worst) = (0, 0, 0.0f64);
        for &(id, i, j) in &scalars {
            if checked == per_group {
                break;
            }
            let orig = policy.params.tensor(id)[[i, j]];
            let mut central = |h: f64| {
                policy.params.tensor_mut(id)[[i, j]] = orig + h;
                let up = total_loss(&policy, &steps, &cfg);
                policy.params.tensor_mut(id)[[i, j]] = orig - h;
                let down = total_loss(&policy, &steps, &cfg);
                policy.params.tensor_mut(id)[[i, j]] = orig;
                (up - down) / (2.0 * h)
            };
            let fd = central(eps);
            let half = central(eps / 2.0);
            if rel(fd, half) > 1e-5 {
                kinks += 1;
                continue;
            }
            checked += 1;
            worst = worst.max(rel(fd, grad.grads[id][[i, j]]));
        }
        out.push(GradGroup { group, checked, kinks, max_rel_err: worst });
    }
    out
}

/// Snapshot of what each robot believes versus the truth at one decision.
pub fn beliefs_match_truth(w: &World) -> bool {
    let m = w.scenario().num_robots();
    let truth_completion = w.true_completion();
    let truth_visited: Vec<bool> = w.tasks().iter().map(|t| t.status == ct_planner::simenv::TaskStatus::Done).collect();
    (0..m).all(|r| {
        let b = &w.beliefs()[r];
        (0..m).all(|k| b.records[k] == w.true_record(k)) && b.completion == truth_completion && b.visited == truth_visited
    })
}

pub fn full_comm(mut s: Scenario) -> Arc<Scenario> {
    s.fleet.comm_range = f64::INFINITY;
    Arc::new(s)
}

pub fn scenario(lambda_t: f64, lambda_r: f64, seed: u64) -> Scenario {
    generate_scenario(&GenerationConfig::with_scales(lambda_t, lambda_r), seed).unwrap()
}

/// Runs `planner` and checks `check` before every decision; returns the
/// number of decisions where it failed.
pub fn count_failures<P: Planner + ?Sized>(s: Arc<Scenario>, planner: &mut P, mut check: impl FnMut(&World) -> bool) -> (usize, usize) {
    let mut w = World::reset_with_history(s, 0);
    planner.begin_episode(&w);
    let (mut bad, mut total) = (0, 0);
    while let Some(r) = w.pending_robot() {
        total += 1;
        if !check(&w) {
            bad += 1;
        }
        let a = planner.decide(&w, r).unwrap();
        w.step(r, a).unwrap();
    }
    (bad, total)
}

use ct_planner::simenv::{EventLog, Leg};

fn shift_after(log: &mut EventLog, robot: usize, from: usize, dt: f64) {
    for l in log.legs.iter_mut().skip(from).filter(|l| l.robot == robot) {
        l.t_depart += dt;
        l.t_arrive += dt;
    }
}

/// Adds a zero-delivery shuttle between two tasks inside `robot`'s first
/// tour, long enough to exceed the range budget. Times stay consistent.
pub fn inject_range_fault(log: &EventLog, s: &Scenario, robot: usize) -> Option<EventLog> {
    let k = log.legs.iter().position(|l| l.robot == robot && l.to_node != 0)?;
    let a = log.legs[k].to_node;
    let b = (1..=s.num_tasks()).filter(|&b| b != a).max_by(|&x, &y| s.node_distance(a, x).total_cmp(&s.node_distance(a, y)))?;
    let d = s.node_distance(a, b);
    let dt = s.fleet.travel_time(d);
    let mut inserted = Vec::new();
    let mut t = log.legs[k].t_arrive;
    let mut travelled = 0.0;
    while travelled <= s.fleet.range {
        for (from, to) in [(a, b), (b, a)] {
            inserted.push(Leg { robot, from_node: from, to_node: to, t_depart: t, t_arrive: t + dt, kg_delivered: 0.0 });
            t += dt;
            travelled += d;
        }
    }
    let mut out = log.clone();
    shift_after(&mut out, robot, k + 1, t - log.legs[k].t_arrive);
    out.legs.splice(k + 1..k + 1, inserted);
    Some(out)
}

/// Inflates the first delivery of `robot` beyond the payload capacity.
pub fn inject_capacity_fault(log: &EventLog, s: &Scenario, robot: usize) -> Option<EventLog> {
    let mut out = log.clone();
    let leg = out.legs.iter_mut().find(|l| l.robot == robot && l.kg_delivered > 0.0)?;
    leg.kg_delivered = s.fleet.capacity + 1.0;
    Some(out)
}

/// Delays `robot`'s first delivery until after that task's deadline.
pub fn inject_deadline_fault(log: &EventLog, s: &Scenario, robot: usize) -> Option<EventLog> {
    let k = log.legs.iter().position(|l| l.robot == robot && l.kg_delivered > 0.0)?;
    let leg = log.legs[k];
    let dt = s.tasks[leg.to_node - 1].deadline - leg.t_arrive + 1.0;
    let mut out = log.clone();
    shift_after(&mut out, robot, k, dt);
    Some(out)
}
