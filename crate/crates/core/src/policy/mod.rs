//! Graph-capsule encoder, context query, attention decoder and critic.

mod checkpoint;
mod params;
mod tape;

use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use params::{Adam, AdamConfig, GradBuffer, ParamStore};
pub use tape::{Gradients, Tape, Var};

use crate::simenv::{Observation, Planner, World};
use crate::taskgraph::{build_task_graph, NODE_FEATURES};
use crate::topology::{td_laplacian, TdCache, TdConfig, TopologyError};

/// Width of the robot context vector.
pub const CONTEXT_FEATURES: usize = 9;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient in {param} at flat index {index}")]
    NonFiniteGradient { param: String, index: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("task graph: {0}")]
    Graph(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// Capsule layers over the topological-descriptor Laplacian.
    CapsuleTd,
    /// Capsule layers over the plain graph Laplacian.
    CapsulePlain,
    /// Node-wise perceptron with no graph mixing.
    Mlp,
}

impl EncoderKind {
    pub fn method_name(self) -> &'static str {
        match self {
            EncoderKind::CapsuleTd => "capam-td",
            EncoderKind::CapsulePlain => "capam",
            EncoderKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub encoder: EncoderKind,
    /// Embedding width `h_l`, shared by every layer.
    pub hidden: usize,
    pub layers: usize,
    /// Element-wise moments `P`.
    pub moments: usize,
    /// Laplacian powers `K` (terms `k = 0..=K`).
    pub powers: usize,
    pub heads: usize,
    pub context_hidden: usize,
    pub critic_hidden: usize,
    pub mlp_hidden: usize,
    /// Scores are squashed to `logit_clip * tanh(.)`.
    pub logit_clip: f64,
    pub td: TdConfig,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            encoder: EncoderKind::CapsuleTd,
            hidden: 128,
            layers: 3,
            moments: 3,
            powers: 3,
            heads: 8,
            context_hidden: 128,
            critic_hidden: 128,
            mlp_hidden: 512,
            logit_clip: 10.0,
            td: TdConfig::default(),
        }
    }
}

impl PolicyConfig {
    /// Narrow profile for single-core training runs.
    pub fn desk() -> Self {
        PolicyConfig {
            hidden: 32,
            context_hidden: 32,
            critic_hidden: 64,
            mlp_hidden: 64,
            ..Self::default()
        }
    }

    pub fn with_encoder(mut self, encoder: EncoderKind) -> Self {
        self.encoder = encoder;
        self
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.hidden == 0 || self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(PolicyError::Shape(format!("hidden {} not divisible by heads {}", self.hidden, self.heads)));
        }
        if self.layers == 0 || self.moments == 0 {
            return Err(PolicyError::Shape("need at least one layer and one moment".into()));
        }
        self.td.validate()?;
        Ok(())
    }
}

/// Tensor-ready form of an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedObs {
    pub features: Array2<f64>,
    /// Graph operator for capsule encoders; `None` for the perceptron.
    pub laplacian: Option<Array2<f64>>,
    /// `N + 1` entries, depot first.
    pub mask: Vec<bool>,
    pub context: Array2<f64>,
}

/// Robot context: elapsed time, own range, payload and location, and the
/// mean of peers' believed destinations, ranges and payloads.
pub fn context_features(obs: &Observation) -> [f64; CONTEXT_FEATURES] {
    let s = &obs.scales;
    let horizon = if s.horizon > 0.0 { s.horizon } else { 1.0 };
    let mut peer = [0.0; 4];
    if !obs.peers.is_empty() {
        for p in &obs.peers {
            peer[0] += p.dest_x;
            peer[1] += p.dest_y;
            peer[2] += p.range;
            peer[3] += p.payload;
        }
        let k = obs.peers.len() as f64;
        for v in &mut peer {
            *v /= k;
        }
    }
    [
        obs.time / horizon,
        obs.own.range / s.range,
        obs.own.payload / s.capacity,
        obs.own_position.x / s.arena_width,
        obs.own_position.y / s.arena_height,
        peer[0] / s.arena_width,
        peer[1] / s.arena_height,
        peer[2] / s.range,
        peer[3] / s.capacity,
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct TapeOutputs {
    pub log_probs: Var,
    pub probs: Var,
    pub value: Var,
}

/// Policy and critic parameters with their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub config: PolicyConfig,
    pub params: ParamStore,
}

impl Policy {
    pub fn new(config: PolicyConfig, seed: u64) -> Result<Self, PolicyError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let h = config.hidden;
        match config.encoder {
            EncoderKind::CapsuleTd | EncoderKind::CapsulePlain => {
                p.glorot("enc.in.w", NODE_FEATURES, h, &mut rng);
                p.zeros("enc.in.b", 1, h);
                for l in 1..=config.layers {
                    for m in 1..=config.moments {
                        p.glorot(&format!("enc.l{l}.p{m}.w"), (config.powers + 1) * h, h, &mut rng);
                        p.zeros(&format!("enc.l{l}.p{m}.b"), 1, h);
                    }
                    p.glorot(&format!("enc.l{l}.proj.w"), config.moments * h, h, &mut rng);
                    p.zeros(&format!("enc.l{l}.proj.b"), 1, h);
                }
            }
            EncoderKind::Mlp => {
                let m = config.mlp_hidden;
                p.glorot("mlp.w1", NODE_FEATURES, m, &mut rng);
                p.zeros("mlp.b1", 1, m);
                p.glorot("mlp.w2", m, m, &mut rng);
                p.zeros("mlp.b2", 1, m);
                p.glorot("mlp.w3", m, h, &mut rng);
                p.zeros("mlp.b3", 1, h);
            }
        }
        p.glorot("ctx.w1", CONTEXT_FEATURES, config.context_hidden, &mut rng);
        p.zeros("ctx.b1", 1, config.context_hidden);
        p.glorot("ctx.w2", config.context_hidden, h, &mut rng);
        p.zeros("ctx.b2", 1, h);
        let depot: Array2<f64> = Array2::from_shape_simple_fn((1, h), || rng.random_range(-0.5..0.5));
        p.insert("dec.depot", depot);
        p.glorot("dec.wk", h, h, &mut rng);
        p.glorot("dec.wv", h, h, &mut rng);
        p.glorot("dec.wo", h, h, &mut rng);
        p.zeros("dec.bo", 1, h);
        p.glorot("dec.wc", h, h, &mut rng);
        p.glorot("critic.w1", 2 * h, config.critic_hidden, &mut rng);
        p.zeros("critic.b1", 1, config.critic_hidden);
        let w2 = p.glorot("critic.w2", config.critic_hidden, 1, &mut rng);
        *p.tensor_mut(w2) *= 0.1;
        p.zeros("critic.b2", 1, 1);
        Ok(Policy { config, params: p })
    }

    fn pid(&self, name: &str) -> usize {
        self.params.id(name).unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    fn linear(&self, t: &mut Tape, x: Var, w: &str, b: &str) -> Var {
        let wv = t.param(&self.params, self.pid(w));
        let bv = t.param(&self.params, self.pid(b));
        let y = t.matmul(x, wv);
        t.add_row(y, bv)
    }

    /// Builds the encoder input for an observation.
    pub fn prepare(&self, obs: &Observation, cache: &mut TdCache) -> Result<PreparedObs, PolicyError> {
        let features = obs.task_features.clone();
        let laplacian = match self.config.encoder {
            EncoderKind::CapsuleTd => Some(td_laplacian(features.view(), &self.config.td, cache)?),
            EncoderKind::CapsulePlain => {
                Some(build_task_graph(features.clone()).map_err(|e| PolicyError::Graph(e.to_string()))?.laplacian)
            }
            EncoderKind::Mlp => None,
        };
        let ctx = context_features(obs);
        Ok(PreparedObs {
            features,
            laplacian,
            mask: obs.mask.clone(),
            context: Array2::from_shape_vec((1, CONTEXT_FEATURES), ctx.to_vec()).unwrap(),
        })
    }

    /// Node embeddings `N x h` recorded on `t`.
    pub fn encode(&self, t: &mut Tape, features: &Array2<f64>, laplacian: Option<&Array2<f64>>) -> Result<Var, PolicyError> {
        let n = features.nrows();
        if features.ncols() != NODE_FEATURES {
            return Err(PolicyError::Shape(format!("expected {NODE_FEATURES} feature columns, got {}", features.ncols())));
        }
        let x = t.constant(features.clone());
        let cfg = &self.config;
        if cfg.encoder == EncoderKind::Mlp {
            let h1 = self.linear(t, x, "mlp.w1", "mlp.b1");
            let h1 = t.relu(h1);
            let h2 = self.linear(t, h1, "mlp.w2", "mlp.b2");
            let h2 = t.relu(h2);
            return Ok(self.linear(t, h2, "mlp.w3", "mlp.b3"));
        }
        let lap = laplacian.ok_or_else(|| PolicyError::Shape("capsule encoder needs a Laplacian".into()))?;
        if lap.dim() != (n, n) {
            return Err(PolicyError::Shape(format!("Laplacian {:?} for {n} nodes", lap.dim())));
        }
        let lv = t.constant(lap.clone());
        let mut f = self.linear(t, x, "enc.in.w", "enc.in.b");
        for l in 1..=cfg.layers {
            let mut moments = Vec::with_capacity(cfg.moments);
            for m in 1..=cfg.moments {
                let fp = t.powi(f, m as i32);
                let mut terms = vec![fp];
                for _ in 0..cfg.powers {
                    let prev = *terms.last().unwrap();
                    terms.push(t.matmul(lv, prev));
                }
                let stacked = t.concat_cols(&terms);
                let z = self.linear(t, stacked, &format!("enc.l{l}.p{m}.w"), &format!("enc.l{l}.p{m}.b"));
                moments.push(t.relu(z));
            }
            let cat = t.concat_cols(&moments);
            f = self.linear(t, cat, &format!("enc.l{l}.proj.w"), &format!("enc.l{l}.proj.b"));
        }
        Ok(f)
    }

    /// Query vector `1 x h` from the context row.
    pub fn query(&self, t: &mut Tape, context: &Array2<f64>) -> Var {
        let c = t.constant(context.clone());
        let h = self.linear(t, c, "ctx.w1", "ctx.b1");
        let h = t.relu(h);
        self.linear(t, h, "ctx.w2", "ctx.b2")
    }

    /// Masked action log-probabilities and probabilities over depot plus
    /// tasks.
    pub fn decode(&self, t: &mut Tape, emb: Var, q: Var, mask: &[bool]) -> Result<(Var, Var), PolicyError> {
        let n = t.value(emb).nrows();
        if mask.len() != n + 1 {
            return Err(PolicyError::Shape(format!("mask length {} for {n} tasks", mask.len())));
        }
        assert!(mask.iter().any(|&m| m), "all actions masked");
        let h = self.config.hidden;
        let heads = self.config.heads;
        let d = h / heads;
        let scale = 1.0 / (h as f64).sqrt();
        let depot = t.param(&self.params, self.pid("dec.depot"));
        let nodes = t.concat_rows(&[depot, emb]);
        let wk = t.param(&self.params, self.pid("dec.wk"));
        let wv = t.param(&self.params, self.pid("dec.wv"));
        let keys = t.matmul(nodes, wk);
        let vals = t.matmul(nodes, wv);
        let keys_t = t.transpose(keys);
        let mut outs = Vec::with_capacity(heads);
        for j in 0..heads {
            let qj = t.slice_cols(q, j * d, d);
            let vj = t.slice_cols(vals, j * d, d);
            let kj = if heads == 1 { keys_t } else {
                let kj = t.slice_cols(keys, j * d, d);
                t.transpose(kj)
            };
            let s = t.matmul(qj, kj);
            let s = t.scale(s, scale);
            let a = t.softmax_masked(s, mask);
            outs.push(t.matmul(a, vj));
        }
        let cat = t.concat_cols(&outs);
        let glimpse = self.linear(t, cat, "dec.wo", "dec.bo");
        let wc = t.param(&self.params, self.pid("dec.wc"));
        let ck = t.matmul(nodes, wc);
        let ckt = t.transpose(ck);
        let u = t.matmul(glimpse, ckt);
        let u = t.scale(u, scale);
        let u = t.tanh(u);
        let u = t.scale(u, self.config.logit_clip);
        let logp = t.log_softmax_masked(u, mask);
        let p = t.softmax_masked(u, mask);
        Ok((logp, p))
    }

    pub fn critic(&self, t: &mut Tape, emb: Var, q: Var) -> Var {
        let pooled = t.mean_rows(emb);
        let x = t.concat_cols(&[q, pooled]);
        let h = self.linear(t, x, "critic.w1", "critic.b1");
        let h = t.relu(h);
        self.linear(t, h, "critic.w2", "critic.b2")
    }

    /// Records the full actor-critic forward pass on `t`.
    pub fn forward_tape(&self, t: &mut Tape, obs: &PreparedObs) -> Result<TapeOutputs, PolicyError> {
        let emb = self.encode(t, &obs.features, obs.laplacian.as_ref())?;
        let q = self.query(t, &obs.context);
        let (log_probs, probs) = self.decode(t, emb, q, &obs.mask)?;
        let value = self.critic(t, emb, q);
        Ok(TapeOutputs { log_probs, probs, value })
    }

    /// Action distribution and value estimate.
    pub fn forward(&self, obs: &PreparedObs) -> Result<(Vec<f64>, f64), PolicyError> {
        let mut t = Tape::new();
        let out = self.forward_tape(&mut t, obs)?;
        Ok((t.value(out.probs).row(0).to_vec(), t.scalar(out.value)))
    }

    pub fn forward_observation(&self, obs: &Observation, cache: &mut TdCache) -> Result<(Vec<f64>, f64), PolicyError> {
        self.forward(&self.prepare(obs, cache)?)
    }

    /// Parameter names grouped by layer type, for gradient checks.
    pub fn layer_groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (id, name) in self.params.names().iter().enumerate() {
            let parts: Vec<&str> = name.split('.').collect();
            let key = match parts[0] {
                "enc" if parts[1] == "in" => "encoder-input".to_string(),
                "enc" if parts[2] == "proj" => "capsule-projection".to_string(),
                "enc" => "capsule".to_string(),
                "dec" if parts[1] == "depot" || parts[1] == "wc" => "decoder-score".to_string(),
                "dec" => "decoder-attention".to_string(),
                other => other.to_string(),
            };
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, ids)) => ids.push(id),
                None => groups.push((key, vec![id])),
            }
        }
        groups
    }
}

/// Index of the largest probability, lowest index on ties.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_action(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Runs a policy inside the simulator.
pub struct PolicyPlanner {
    policy: Arc<Policy>,
    cache: TdCache,
    greedy: bool,
    rng: ChaCha8Rng,
    name: String,
}

impl PolicyPlanner {
    /// Greedy (argmax) execution.
    pub fn greedy(policy: Arc<Policy>) -> Self {
        let name = policy.config.encoder.method_name().to_string();
        PolicyPlanner { policy, cache: TdCache::new(), greedy: true, rng: ChaCha8Rng::seed_from_u64(0), name }
    }

    pub fn sampling(policy: Arc<Policy>, seed: u64) -> Self {
        PolicyPlanner { greedy: false, rng: ChaCha8Rng::seed_from_u64(seed), ..Self::greedy(policy) }
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn cache(&self) -> &TdCache {
        &self.cache
    }
}

impl Planner for PolicyPlanner {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_episode(&mut self, _world: &World) {
        self.cache.clear();
    }

    fn decide(&mut self, world: &World, robot: usize) -> Result<usize, crate::Error> {
        let obs = world.observe(robot);
        let (probs, _) = self.policy.forward_observation(&obs, &mut self.cache)?;
        Ok(if self.greedy { argmax(&probs) } else { sample_action(&probs, &mut self.rng) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, GenerationConfig};
    use crate::taskgraph::graph_laplacian;
    use ndarray::Array2;

    fn tiny_cfg(kind: EncoderKind) -> PolicyConfig {
        PolicyConfig { hidden: 16, context_hidden: 8, critic_hidden: 8, mlp_hidden: 8, heads: 4, ..PolicyConfig::default() }.with_encoder(kind)
    }

    fn prepared(n: usize, seed: u64) -> PreparedObs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = Array2::from_shape_simple_fn((n, 4), || rng.random_range(0.0..1.0));
        let lap = build_task_graph(features.clone()).unwrap().laplacian;
        let mut mask = vec![true; n + 1];
        mask[1] = false;
        let context = Array2::from_shape_simple_fn((1, CONTEXT_FEATURES), || rng.random_range(0.0..1.0));
        PreparedObs { features, laplacian: Some(lap), mask, context }
    }

    #[test]
    fn distribution_is_normalized_and_masked() {
        for kind in [EncoderKind::CapsuleTd, EncoderKind::CapsulePlain, EncoderKind::Mlp] {
            let p = Policy::new(tiny_cfg(kind), 1).unwrap();
            let obs = prepared(6, 2);
            let (probs, v) = p.forward(&obs).unwrap();
            assert_eq!(probs.len(), 7);
            assert_eq!(probs[1], 0.0);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(v.is_finite());
            assert_eq!(p.forward(&obs).unwrap().0, probs);
        }
    }

    #[test]
    fn single_unmasked_action_has_probability_one() {
        let p = Policy::new(tiny_cfg(EncoderKind::CapsuleTd), 1).unwrap();
        let mut obs = prepared(4, 3);
        obs.mask = vec![false, false, false, true, false];
        assert_eq!(p.forward(&obs).unwrap().0, vec![0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_features_zero_bias_give_zero_embeddings() {
        let p = Policy::new(tiny_cfg(EncoderKind::CapsulePlain), 4).unwrap();
        let f = Array2::zeros((3, 4));
        let lap = graph_laplacian(Array2::from_elem((3, 3), 1.0).view()).unwrap();
        let mut t = Tape::new();
        let e = p.encode(&mut t, &f, Some(&lap)).unwrap();
        assert!(t.value(e).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_node_matches_hand_forward() {
        let cfg = PolicyConfig { layers: 1, ..tiny_cfg(EncoderKind::CapsulePlain) };
        let p = Policy::new(cfg.clone(), 5).unwrap();
        let f = Array2::from_shape_vec((1, 4), vec![0.2, 0.7, 0.4, 0.9]).unwrap();
        let lap = Array2::zeros((1, 1));
        let mut t = Tape::new();
        let e = p.encode(&mut t, &f, Some(&lap)).unwrap();
        let g = |n: &str| p.params.tensor(p.params.id(n).unwrap()).clone();
        let f0 = f.dot(&g("enc.in.w")) + g("enc.in.b");
        let h = cfg.hidden;
        let mut parts = Vec::new();
        for m in 1..=cfg.moments {
            let w = g(&format!("enc.l1.p{m}.w"));
            let w0 = w.slice(ndarray::s![0..h, ..]);
            let z = f0.mapv(|v| v.powi(m as i32)).dot(&w0) + g(&format!("enc.l1.p{m}.b"));
            parts.push(z.mapv(|v| v.max(0.0)));
        }
        let views: Vec<_> = parts.iter().map(|a| a.view()).collect();
        let expect = ndarray::concatenate(ndarray::Axis(1), &views).unwrap().dot(&g("enc.l1.proj.w")) + g("enc.l1.proj.b");
        for (a, b) in t.value(e).iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn no_mixing_with_identity_operator_and_k0() {
        let cfg = PolicyConfig { powers: 0, ..tiny_cfg(EncoderKind::CapsulePlain) };
        let p = Policy::new(cfg, 6).unwrap();
        let obs = prepared(5, 7);
        let lap = Array2::eye(5);
        let run = |f: &Array2<f64>| {
            let mut t = Tape::new();
            let e = p.encode(&mut t, f, Some(&lap)).unwrap();
            t.value(e).clone()
        };
        let base = run(&obs.features);
        let mut f2 = obs.features.clone();
        f2[[2, 0]] += 0.3;
        let moved = run(&f2);
        for r in [0, 1, 3, 4] {
            assert_eq!(base.row(r), moved.row(r));
        }
        assert_ne!(base.row(2), moved.row(2));
    }

    #[test]
    fn context_is_peer_order_invariant_and_time_sensitive() {
        let s = Arc::new(generate_scenario(&GenerationConfig::with_scales(0.2, 2.0), 3).unwrap());
        let w = World::reset(s, 0);
        let obs = w.observe(0);
        let mut rev = obs.clone();
        rev.peers.reverse();
        let p = Policy::new(tiny_cfg(EncoderKind::Mlp), 1).unwrap();
        let mut t = Tape::new();
        let a = context_features(&obs);
        let b = context_features(&rev);
        let qa = p.query(&mut t, &Array2::from_shape_vec((1, 9), a.to_vec()).unwrap());
        let qb = p.query(&mut t, &Array2::from_shape_vec((1, 9), b.to_vec()).unwrap());
        for (x, y) in t.value(qa).iter().zip(t.value(qb).iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut later = obs.clone();
        later.time += 10.0;
        assert_ne!(context_features(&later), a);
    }

    #[test]
    fn no_peers_gives_zero_aggregates() {
        let cfg = GenerationConfig::with_scales(0.1, 1.0);
        assert_eq!(cfg.num_robots(), 1);
        let s = Arc::new(generate_scenario(&cfg, 3).unwrap());
        let w = World::reset(s, 0);
        let c = context_features(&w.observe(0));
        assert_eq!(&c[5..], &[0.0; 4]);
    }

    #[test]
    fn sampling_respects_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probs = [0.0, 0.5, 0.0, 0.5];
        for _ in 0..200 {
            let a = sample_action(&probs, &mut rng);
            assert!(a == 1 || a == 3);
        }
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }
}
