//! PPO over the event-driven environment with one policy shared by all
//! robots.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::policy::{
    sample_action, Adam, AdamConfig, Checkpoint, GradBuffer, Policy, PolicyConfig, PolicyError, PolicyPlanner,
    PreparedObs, Tape,
};
use crate::scenario::{generate_scenario, GenerationConfig, Scenario};
use crate::simenv::{run_episode, World};
use crate::topology::TdCache;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub total_steps: usize,
    pub rollout: usize,
    pub batch: usize,
    pub lr: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub clip: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            total_steps: 4_000_000,
            rollout: 40_000,
            batch: 4_000,
            lr: 1e-6,
            entropy_coef: 0.01,
            value_coef: 0.5,
            clip: 0.2,
            gamma: 1.0,
            gae_lambda: 0.95,
            epochs: 10,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    /// Single-workstation profile for `N = 10, M = 2`.
    pub fn desk() -> Self {
        PpoConfig { total_steps: 200_000, rollout: 2048, batch: 256, lr: 3e-4, epochs: 4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Other(format!("invalid PPO config: {m}")));
        if self.rollout == 0 || self.batch == 0 || self.rollout % self.batch != 0 {
            return bad("rollout size must be a positive multiple of batch size");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if !(self.clip > 0.0) || !(self.lr > 0.0) || self.epochs == 0 {
            return bad("clip, lr and epochs must be positive");
        }
        Ok(())
    }
}

/// One robot decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: PreparedObs,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    /// Reward received after this step (terminal reward on the last step).
    pub reward: f64,
    /// Last step of a finished episode.
    pub done: bool,
    /// Undiscounted reward-to-come; a critic estimate for a truncated tail.
    pub ret: f64,
    pub advantage: f64,
    /// GAE value target.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub steps: Vec<Step>,
    /// Critic value at the state following the last step when the final
    /// episode was cut short.
    pub bootstrap: Option<f64>,
    pub episodes: Vec<EpisodeStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub reward: f64,
    pub completion: f64,
    pub decisions: usize,
}

/// Seeded stream of training scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStream {
    pub config: GenerationConfig,
    pub rng: ChaCha8Rng,
}

impl ScenarioStream {
    pub fn new(config: GenerationConfig, seed: u64) -> Self {
        ScenarioStream { config, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn next_scenario(&mut self) -> Result<Arc<Scenario>> {
        use rand::Rng;
        let seed: u64 = self.rng.random();
        Ok(Arc::new(generate_scenario(&self.config, seed)?))
    }
}

/// Runs episodes with the behavior policy until exactly `cfg.rollout` steps
/// are stored. The policy is borrowed immutably for the whole phase.
pub fn collect_rollouts(
    policy: &Policy,
    scenarios: &mut ScenarioStream,
    rng: &mut ChaCha8Rng,
    cfg: &PpoConfig,
) -> Result<RolloutBuffer> {
    let mut buf = RolloutBuffer::default();
    let mut cache = TdCache::new();
    'episodes: loop {
        let scenario = scenarios.next_scenario()?;
        let mut world = World::reset(scenario, 0);
        cache.clear();
        let start = buf.steps.len();
        while let Some(r) = world.pending_robot() {
            let obs = policy.prepare(&world.observe(r), &mut cache)?;
            let (probs, value) = policy.forward(&obs)?;
            if buf.steps.len() == cfg.rollout {
                buf.bootstrap = Some(value);
                for s in &mut buf.steps[start..] {
                    s.ret = value;
                }
                break 'episodes;
            }
            let action = sample_action(&probs, rng);
            let log_prob = probs[action].ln();
            if !log_prob.is_finite() {
                return Err(Error::Other(format!("sampled action {action} has zero probability")));
            }
            let out = world.step(r, action)?;
            buf.steps.push(Step {
                obs,
                action,
                log_prob,
                value,
                reward: out.reward,
                done: out.done,
                ret: 0.0,
                advantage: 0.0,
                target: 0.0,
            });
        }
        let reward = world.compute_reward()?;
        for s in &mut buf.steps[start..] {
            s.ret = reward;
        }
        buf.episodes.push(EpisodeStats {
            reward,
            completion: world.n_success() as f64 / world.scenario().num_tasks() as f64,
            decisions: world.decisions(),
        });
        if buf.steps.len() == cfg.rollout {
            break;
        }
    }
    Ok(buf)
}

/// GAE over the buffer in decision order, then per-buffer normalization.
pub fn compute_advantages(buf: &mut RolloutBuffer, cfg: &PpoConfig) {
    compute_gae(buf, cfg);
    let n = buf.steps.len() as f64;
    if n == 0.0 {
        return;
    }
    let mean = buf.steps.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = buf.steps.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        log::warn!("advantages have zero variance; skipping normalization");
        return;
    }
    for s in &mut buf.steps {
        s.advantage = (s.advantage - mean) / std;
    }
}

/// Unnormalized GAE advantages and value targets.
pub fn compute_gae(buf: &mut RolloutBuffer, cfg: &PpoConfig) {
    let mut next_value = buf.bootstrap.unwrap_or(0.0);
    let mut next_adv = 0.0;
    for s in buf.steps.iter_mut().rev() {
        let cont = if s.done { 0.0 } else { 1.0 };
        let delta = s.reward + cfg.gamma * next_value * cont - s.value;
        s.advantage = delta + cfg.gamma * cfg.gae_lambda * cont * next_adv;
        s.target = s.advantage + s.value;
        next_value = s.value;
        next_adv = s.advantage;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

impl LossStats {
    fn add(&mut self, o: &LossStats) {
        self.policy_loss += o.policy_loss;
        self.value_loss += o.value_loss;
        self.entropy += o.entropy;
        self.approx_kl += o.approx_kl;
        self.clip_fraction += o.clip_fraction;
    }

    fn scale(&mut self, s: f64) {
        self.policy_loss *= s;
        self.value_loss *= s;
        self.entropy *= s;
        self.approx_kl *= s;
        self.clip_fraction *= s;
    }
}

/// Per-sample PPO loss `-surrogate + c_v (V - target)^2 - c_e H`, recorded
/// on `t` and scaled by `weight`. Returns the loss variable and its parts.
fn sample_loss(policy: &Policy, t: &mut Tape, s: &Step, cfg: &PpoConfig, weight: f64) -> Result<(crate::policy::Var, LossStats), PolicyError> {
    let out = policy.forward_tape(t, &s.obs)?;
    let logp = t.pick(out.log_probs, 0, s.action);
    let lp = t.scalar(logp);
    let ratio_v = (lp - s.log_prob).exp();
    let clipped_ratio = ratio_v.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
    let a = s.advantage;
    let use_unclipped = ratio_v * a <= clipped_ratio * a;
    let shifted = t.add_scalar(logp, -s.log_prob);
    let ratio = t.exp(shifted);
    let surrogate = if use_unclipped { t.scale(ratio, a) } else { t.constant(Array2::from_elem((1, 1), clipped_ratio * a)) };
    let target = t.constant(Array2::from_elem((1, 1), s.target));
    let diff = t.sub(out.value, target);
    let sq = t.mul(diff, diff);
    let plogp = t.mul(out.probs, out.log_probs);
    let neg_entropy = t.sum(plogp);
    let vl = t.scale(sq, cfg.value_coef);
    let el = t.scale(neg_entropy, cfg.entropy_coef);
    let pl = t.scale(surrogate, -1.0);
    let total = t.add(pl, vl);
    let total = t.add(total, el);
    let loss = t.scale(total, weight);
    let stats = LossStats {
        policy_loss: -t.scalar(surrogate),
        value_loss: t.scalar(sq),
        entropy: -t.scalar(neg_entropy),
        approx_kl: s.log_prob - lp,
        clip_fraction: if use_unclipped { 0.0 } else { 1.0 },
    };
    Ok((loss, stats))
}

/// Mean loss statistics over a set of steps without updating anything.
pub fn evaluate_loss(policy: &Policy, steps: &[Step], cfg: &PpoConfig) -> Result<LossStats> {
    let mut acc = LossStats::default();
    for s in steps {
        let mut t = Tape::new();
        acc.add(&sample_loss(policy, &mut t, s, cfg, 1.0)?.1);
    }
    acc.scale(1.0 / steps.len().max(1) as f64);
    Ok(acc)
}

/// Gradient of the mean minibatch loss. Samples are processed in parallel
/// chunks whose results are reduced in a fixed order.
pub fn minibatch_gradient(policy: &Policy, steps: &[&Step], cfg: &PpoConfig) -> Result<(GradBuffer, LossStats)> {
    let weight = 1.0 / steps.len() as f64;
    let chunk = steps.len().div_ceil(rayon::current_num_threads().max(1) * 2).max(1);
    let parts: Vec<std::result::Result<(GradBuffer, LossStats), PolicyError>> = steps
        .par_chunks(chunk)
        .map(|chunk| {
            let mut g = GradBuffer::zeros_like(&policy.params);
            let mut stats = LossStats::default();
            for s in chunk {
                let mut t = Tape::new();
                let (loss, st) = sample_loss(policy, &mut t, s, cfg, weight)?;
                g.add(&t.backward(loss));
                stats.add(&st);
            }
            Ok((g, stats))
        })
        .collect();
    let mut total = GradBuffer::zeros_like(&policy.params);
    let mut stats = LossStats::default();
    for p in parts {
        let (g, s) = p?;
        total.merge(&g);
        stats.add(&s);
    }
    stats.scale(weight);
    total.check_finite(&policy.params)?;
    Ok((total, stats))
}

/// Clipped-surrogate minibatch epochs over the buffer.
pub fn ppo_update(policy: &mut Policy, opt: &mut Adam, buf: &RolloutBuffer, cfg: &PpoConfig, rng: &mut ChaCha8Rng) -> Result<LossStats> {
    let mut idx: Vec<usize> = (0..buf.steps.len()).collect();
    let mut acc = LossStats::default();
    let mut batches = 0;
    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(cfg.batch) {
            let steps: Vec<&Step> = chunk.iter().map(|&i| &buf.steps[i]).collect();
            let (g, stats) = minibatch_gradient(policy, &steps, cfg)?;
            if !stats.policy_loss.is_finite() || !stats.value_loss.is_finite() {
                return Err(Error::Other("non-finite PPO loss".into()));
            }
            opt.update(&mut policy.params, &g);
            acc.add(&stats);
            batches += 1;
        }
    }
    acc.scale(1.0 / batches.max(1) as f64);
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_completion: f64,
}

/// Training state that survives checkpointing. Everything needed to
/// continue bit-exactly is here or in the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub seed: u64,
    pub ppo: PpoConfig,
    pub steps: usize,
    pub iterations: usize,
    pub scenarios: ScenarioStream,
    pub action_rng: ChaCha8Rng,
    pub update_rng: ChaCha8Rng,
    pub curve: Vec<CurvePoint>,
    pub last_loss: LossStats,
    pub adam_step: u64,
    pub adam: AdamConfig,
}

pub struct TrainingRun {
    pub policy: Policy,
    pub opt: Adam,
    pub state: TrainState,
}

impl TrainingRun {
    pub fn new(policy_cfg: PolicyConfig, ppo: PpoConfig, scenarios: GenerationConfig, seed: u64) -> Result<Self> {
        ppo.validate()?;
        let policy = Policy::new(policy_cfg, seed)?;
        let adam = AdamConfig { lr: ppo.lr, max_grad_norm: ppo.max_grad_norm, ..AdamConfig::default() };
        let opt = Adam::new(adam, &policy.params);
        let state = TrainState {
            seed,
            steps: 0,
            iterations: 0,
            scenarios: ScenarioStream::new(scenarios, seed ^ 0x5eed_0001),
            action_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0002),
            update_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0003),
            curve: Vec::new(),
            last_loss: LossStats::default(),
            adam_step: 0,
            adam,
            ppo,
        };
        Ok(TrainingRun { policy, opt, state })
    }

    pub fn is_finished(&self) -> bool {
        self.state.steps >= self.state.ppo.total_steps
    }

    /// One collect/update cycle.
    pub fn iterate(&mut self) -> Result<CurvePoint> {
        let cfg = self.state.ppo.clone();
        let mut buf = collect_rollouts(&self.policy, &mut self.state.scenarios, &mut self.state.action_rng, &cfg)?;
        compute_advantages(&mut buf, &cfg);
        let loss = ppo_update(&mut self.policy, &mut self.opt, &buf, &cfg, &mut self.state.update_rng)?;
        self.state.steps += buf.steps.len();
        self.state.iterations += 1;
        self.state.last_loss = loss;
        self.state.adam_step = self.opt.step;
        let k = buf.episodes.len().max(1) as f64;
        let point = CurvePoint {
            step: self.state.steps,
            mean_reward: buf.episodes.iter().map(|e| e.reward).sum::<f64>() / k,
            mean_completion: buf.episodes.iter().map(|e| e.completion).sum::<f64>() / k,
        };
        self.state.curve.push(point);
        log::info!(
            "iter {} step {} reward {:.4} completion {:.4} entropy {:.4} kl {:.5}",
            self.state.iterations, point.step, point.mean_reward, point.mean_completion, loss.entropy, loss.approx_kl
        );
        Ok(point)
    }

    /// Iterates until `total_steps`, checkpointing into `out_dir` every
    /// `checkpoint_every` iterations when given.
    pub fn run(&mut self, out_dir: Option<&Path>, checkpoint_every: usize) -> Result<()> {
        while !self.is_finished() {
            self.iterate()?;
            if let Some(dir) = out_dir {
                if checkpoint_every > 0 && self.state.iterations % checkpoint_every == 0 {
                    self.save(&dir.join(format!("checkpoint-{:06}.ckpt", self.state.iterations)))?;
                }
            }
        }
        if let Some(dir) = out_dir {
            self.save(&dir.join("final.ckpt"))?;
            write_curve(&dir.join("learning_curve.csv"), &self.state.curve)?;
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let extra = serde_json::to_value(&self.state).map_err(|e| Error::Other(e.to_string()))?;
        let mut extra_tensors = Vec::new();
        for (i, (m, v)) in self.opt.m.iter().zip(&self.opt.v).enumerate() {
            extra_tensors.push((format!("adam.m.{i}"), m.clone()));
            extra_tensors.push((format!("adam.v.{i}"), v.clone()));
        }
        Ok(Checkpoint { policy: self.policy.clone(), extra, extra_tensors })
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let state: TrainState =
            serde_json::from_value(ck.extra).map_err(|e| Error::Other(format!("checkpoint has no training state: {e}")))?;
        let mut opt = Adam::new(state.adam, &ck.policy.params);
        opt.step = state.adam_step;
        for (name, t) in ck.extra_tensors {
            let mut parts = name.split('.');
            let kind = (parts.next(), parts.next(), parts.next().and_then(|i| i.parse::<usize>().ok()));
            match kind {
                (Some("adam"), Some("m"), Some(i)) if i < opt.m.len() => opt.m[i] = t,
                (Some("adam"), Some("v"), Some(i)) if i < opt.v.len() => opt.v[i] = t,
                _ => return Err(Error::Other(format!("unexpected checkpoint tensor {name}"))),
            }
        }
        Ok(TrainingRun { policy: ck.policy, opt, state })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::Other(format!("{}: {e}", dir.display())))?;
        }
        Ok(crate::policy::save_checkpoint(path, &self.to_checkpoint()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(crate::policy::load_checkpoint(path)?)
    }
}

pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Other(format!("{}: {e}", path.display())))?;
    for p in curve {
        w.serialize(p).map_err(|e| Error::Other(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Other(e.to_string()))
}

/// Greedy completion fraction of `policy` on each scenario.
pub fn evaluate_policy(policy: &Arc<Policy>, scenarios: &[Arc<Scenario>]) -> Result<Vec<f64>> {
    scenarios
        .iter()
        .map(|s| {
            let mut planner = PolicyPlanner::greedy(Arc::clone(policy));
            Ok(run_episode(Arc::clone(s), 0, &mut planner)?.success_rate)
        })
        .collect()
}

/// Held-out scenarios drawn from seeds disjoint from the training stream.
pub fn held_out_scenarios(cfg: &GenerationConfig, count: usize, base_seed: u64) -> Result<Vec<Arc<Scenario>>> {
    (0..count as u64).map(|i| Ok(Arc::new(generate_scenario(cfg, base_seed.wrapping_add(i))?))).collect()
}

/// Default location of training artifacts inside `out_dir`.
pub fn final_checkpoint_path(out_dir: &Path) -> PathBuf {
    out_dir.join("final.ckpt")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::EncoderKind;

    fn small_policy() -> PolicyConfig {
        PolicyConfig { hidden: 16, context_hidden: 8, critic_hidden: 8, heads: 4, layers: 1, ..PolicyConfig::default() }
            .with_encoder(EncoderKind::CapsulePlain)
    }

    fn step(value: f64, reward: f64, done: bool) -> Step {
        Step {
            obs: PreparedObs { features: Array2::zeros((1, 4)), laplacian: None, mask: vec![true], context: Array2::zeros((1, 9)) },
            action: 0,
            log_prob: 0.0,
            value,
            reward,
            done,
            ret: 0.0,
            advantage: 0.0,
            target: 0.0,
        }
    }

    #[test]
    fn hand_built_episode_gae() {
        let cfg = PpoConfig { gamma: 1.0, gae_lambda: 0.5, ..PpoConfig::default() };
        let mut buf = RolloutBuffer { steps: vec![step(-0.5, 0.0, false), step(-0.4, 0.0, false), step(-0.1, -0.2, true)], ..Default::default() };
        compute_gae(&mut buf, &cfg);
        // deltas: 0.1, 0.3, -0.1; A3 = -0.1, A2 = 0.3 - 0.05, A1 = 0.1 + 0.125
        let a: Vec<f64> = buf.steps.iter().map(|s| s.advantage).collect();
        for (x, y) in a.iter().zip([0.225, 0.25, -0.1]) {
            assert!((x - y).abs() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn lambda_one_gives_return_minus_value() {
        let cfg = PpoConfig { gamma: 1.0, gae_lambda: 1.0, ..PpoConfig::default() };
        let mut buf = RolloutBuffer { steps: vec![step(-0.7, 0.0, false), step(0.3, 0.0, false), step(0.1, -0.6, true), step(0.2, 0.0, false)], bootstrap: Some(-0.3), ..Default::default() };
        compute_gae(&mut buf, &cfg);
        let expect = [-0.6 + 0.7, -0.6 - 0.3, -0.6 - 0.1, -0.3 - 0.2];
        for (s, e) in buf.steps.iter().zip(expect) {
            assert!((s.advantage - e).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_critic_gives_zero_advantages() {
        let cfg = PpoConfig::default();
        let mut buf = RolloutBuffer { steps: vec![step(-0.2, 0.0, false), step(-0.2, 0.0, false), step(-0.2, -0.2, true)], ..Default::default() };
        compute_advantages(&mut buf, &cfg);
        assert!(buf.steps.iter().all(|s| s.advantage.abs() < 1e-12));
    }

    #[test]
    fn rollout_has_exact_size_and_terminal_returns() {
        let policy = Policy::new(small_policy(), 1).unwrap();
        let cfg = PpoConfig { rollout: 64, batch: 32, ..PpoConfig::desk() };
        let mut stream = ScenarioStream::new(GenerationConfig::with_scales(0.2, 1.0), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let before = policy.clone();
        let buf = collect_rollouts(&policy, &mut stream, &mut rng, &cfg).unwrap();
        assert_eq!(policy, before);
        assert_eq!(buf.steps.len(), 64);
        assert!(buf.bootstrap.is_some());
        assert!(buf.steps.iter().all(|s| s.log_prob.is_finite()));
        let first_done = buf.steps.iter().position(|s| s.done).unwrap();
        let r = buf.episodes[0].reward;
        assert!(buf.steps[..=first_done].iter().all(|s| s.ret == r));
        let mut stream2 = ScenarioStream::new(GenerationConfig::with_scales(0.2, 1.0), 3);
        let mut rng2 = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(collect_rollouts(&policy, &mut stream2, &mut rng2, &cfg).unwrap(), buf);
    }

    #[test]
    fn zero_advantage_leaves_only_value_and_entropy() {
        let policy = Policy::new(small_policy(), 1).unwrap();
        let cfg = PpoConfig { rollout: 32, batch: 32, ..PpoConfig::desk() };
        let mut stream = ScenarioStream::new(GenerationConfig::with_scales(0.2, 1.0), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut buf = collect_rollouts(&policy, &mut stream, &mut rng, &cfg).unwrap();
        for s in &mut buf.steps {
            s.advantage = 0.0;
        }
        let stats = evaluate_loss(&policy, &buf.steps, &cfg).unwrap();
        assert_eq!(stats.policy_loss, 0.0);
        assert!(stats.approx_kl.abs() < 1e-12);
    }

    #[test]
    fn rejects_indivisible_buffer() {
        let cfg = PpoConfig { rollout: 100, batch: 30, ..PpoConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
