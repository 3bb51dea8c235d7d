//! Experiment harness: shared scenario samples per grid cell, timed
//! decisions, per-cell summaries and pairwise Welch tests.
//!
//! Output layout written by [`emit_results`]:
//!
//! ```text
//! <out>/manifest.json        schema version and file list
//! <out>/cells/<method>__lt<λt>__lr<λr>.csv   one row per sample
//! <out>/quantiles.csv        min/q1/median/q3/max completion per cell
//! <out>/pvalues.csv          Welch p-value for every method pair per grid point
//! <out>/summary.txt          human-readable table
//! ```

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baselines::{brute_force_optimal, Bigmrta, ExactCaps, FeasRnd};
use crate::policy::{load_checkpoint, EncoderKind, Policy, PolicyPlanner};
use crate::scenario::{generate_scenario, GenerationConfig, Scenario};
use crate::simenv::{run_episode_with, Planner, World};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CapamTd,
    Capam,
    Mlp,
    Feasrnd,
    Bigmrta,
    Exact,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::CapamTd, Method::Capam, Method::Mlp, Method::Feasrnd, Method::Bigmrta, Method::Exact];

    pub fn name(self) -> &'static str {
        match self {
            Method::CapamTd => "capam-td",
            Method::Capam => "capam",
            Method::Mlp => "mlp",
            Method::Feasrnd => "feasrnd",
            Method::Bigmrta => "bigmrta",
            Method::Exact => "exact",
        }
    }

    pub fn encoder(self) -> Option<EncoderKind> {
        match self {
            Method::CapamTd => Some(EncoderKind::CapsuleTd),
            Method::Capam => Some(EncoderKind::CapsulePlain),
            Method::Mlp => Some(EncoderKind::Mlp),
            _ => None,
        }
    }

    pub fn is_learned(self) -> bool {
        self.encoder().is_some()
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Other(format!("unknown method '{s}', expected one of capam-td, capam, mlp, feasrnd, bigmrta, exact")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    /// Grid points `(λ_t, λ_r)`.
    pub cells: Vec<(f64, f64)>,
    pub samples: usize,
    pub base_seed: u64,
    /// Template for generation; the scales are overwritten per cell.
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub checkpoints: BTreeMap<Method, PathBuf>,
    /// Run samples one at a time so latencies are not inflated by siblings.
    #[serde(default = "default_true")]
    pub serial_timing: bool,
    #[serde(default)]
    pub exact_caps: Option<ExactCapsSpec>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactCapsSpec {
    pub max_nodes: usize,
    pub max_depth: usize,
}

impl ExperimentSpec {
    pub fn new(methods: Vec<Method>, cells: Vec<(f64, f64)>, samples: usize, base_seed: u64) -> Self {
        ExperimentSpec {
            methods,
            cells,
            samples,
            base_seed,
            generation: GenerationConfig::default(),
            checkpoints: BTreeMap::new(),
            serial_timing: true,
            exact_caps: None,
        }
    }

    /// Scenario seed of sample `i` in cell `c`; independent of the method.
    pub fn scenario_seed(&self, cell: usize, sample: usize) -> u64 {
        self.base_seed.wrapping_add((cell as u64) << 32).wrapping_add(sample as u64)
    }

    pub fn cell_config(&self, cell: usize) -> GenerationConfig {
        let (lt, lr) = self.cells[cell];
        GenerationConfig { lambda_t: lt, lambda_r: lr, ..self.generation.clone() }
    }

    fn caps(&self) -> ExactCaps {
        match self.exact_caps {
            Some(c) => ExactCaps { max_nodes: c.max_nodes, max_depth: c.max_depth, ..ExactCaps::default() },
            None => ExactCaps::default(),
        }
    }
}

/// Monotonic seconds source for decision timing.
pub trait Clock: Sync {
    fn now(&self) -> f64;
}

pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock { origin: Instant::now() }
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Advances by a fixed tick on every reading.
pub struct FakeClock {
    tick: f64,
    calls: std::sync::atomic::AtomicU64,
}

impl FakeClock {
    pub fn new(tick: f64) -> Self {
        FakeClock { tick, calls: std::sync::atomic::AtomicU64::new(0) }
    }
}

impl Clock for FakeClock {
    fn now(&self) -> f64 {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) as f64 * self.tick
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub method: Method,
    pub lambda_t: f64,
    pub lambda_r: f64,
    pub n_tasks: usize,
    pub n_robots: usize,
    pub sample: usize,
    pub seed: u64,
    pub scenario_hash: u64,
    /// `100 * N_success / N`.
    pub completion: f64,
    pub n_success: usize,
    pub decisions: usize,
    /// Seconds spent inside planner calls only.
    pub decision_time: f64,
    pub latency_median: f64,
    pub latency_max: f64,
    pub comm_bytes: u64,
    pub failed: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolated quantiles of a non-empty sample.
pub fn quantiles(values: &[f64]) -> Option<Quantiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let x = p * (v.len() - 1) as f64;
        let lo = x.floor() as usize;
        let hi = x.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (x - lo as f64)
    };
    Some(Quantiles { min: v[0], q1: q(0.25), median: q(0.5), q3: q(0.75), max: v[v.len() - 1] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub lambda_t: f64,
    pub lambda_r: f64,
    pub n_tasks: usize,
    pub n_robots: usize,
    pub n: usize,
    pub failed: usize,
    pub seeds: Vec<u64>,
    pub mean_completion: f64,
    pub completion: Option<Quantiles>,
    pub mean_decision_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub lambda_t: f64,
    pub lambda_r: f64,
    pub a: Method,
    pub b: Method,
    pub test: Option<WelchTest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub samples: Vec<SampleResult>,
    pub cells: Vec<CellSummary>,
    pub tests: Vec<PairTest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Both samples had zero variance; `p` is set by convention.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Two-sided Welch two-sample t-test.
///
/// With zero variance in both samples the statistic is undefined: equal means
/// give `p = 1`, different means `p = 0`, both flagged as degenerate.
pub fn significance_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Other(format!("Welch test needs at least 2 samples each, got {} and {}", a.len(), b.len())));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    if sa + sb == 0.0 {
        let same = ma == mb;
        return Ok(WelchTest {
            t: if same { 0.0 } else { f64::INFINITY.copysign(ma - mb) },
            df: na + nb - 2.0,
            p: if same { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Other(format!("t distribution: {e}")))?;
    Ok(WelchTest { t, df, p: (2.0 * dist.sf(t.abs())).min(1.0), degenerate: false })
}

pub fn scenario_hash(s: &Scenario) -> u64 {
    let mut h = DefaultHasher::new();
    serde_json::to_string(s).expect("scenario serializes").hash(&mut h);
    h.finish()
}

struct Timed<'a, P: ?Sized> {
    inner: &'a mut P,
    clock: &'a dyn Clock,
    latencies: Vec<f64>,
}

impl<P: Planner + ?Sized> Planner for Timed<'_, P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn begin_episode(&mut self, world: &World) {
        self.inner.begin_episode(world)
    }

    fn decide(&mut self, world: &World, robot: usize) -> Result<usize> {
        let t0 = self.clock.now();
        let a = self.inner.decide(world, robot);
        self.latencies.push(self.clock.now() - t0);
        a
    }
}

fn blank(method: Method, s: &Scenario, cell: (f64, f64), sample: usize) -> SampleResult {
    SampleResult {
        method,
        lambda_t: cell.0,
        lambda_r: cell.1,
        n_tasks: s.num_tasks(),
        n_robots: s.num_robots(),
        sample,
        seed: s.seed,
        scenario_hash: scenario_hash(s),
        completion: 0.0,
        n_success: 0,
        decisions: 0,
        decision_time: 0.0,
        latency_median: 0.0,
        latency_max: 0.0,
        comm_bytes: 0,
        failed: None,
    }
}

/// Runs one planner on one scenario. Only planner calls are timed;
/// `on_step` runs between decisions, outside the timer.
pub fn run_sample<P: Planner + ?Sized>(
    planner: &mut P,
    method: Method,
    scenario: Arc<Scenario>,
    cell: (f64, f64),
    sample: usize,
    clock: &dyn Clock,
    on_step: impl FnMut(&World),
) -> SampleResult {
    let mut out = blank(method, &scenario, cell, sample);
    let seed = scenario.seed;
    let mut timed = Timed { inner: planner, clock, latencies: Vec::new() };
    match run_episode_with(scenario, seed, &mut timed, on_step) {
        Ok(r) => {
            out.completion = 100.0 * r.success_rate;
            out.n_success = r.n_success;
            out.decisions = r.decisions;
            out.comm_bytes = r.comm.bytes;
        }
        Err(e) => out.failed = Some(e.to_string()),
    }
    out.decision_time = timed.latencies.iter().sum();
    if let Some(q) = quantiles(&timed.latencies) {
        out.latency_median = q.median;
        out.latency_max = q.max;
    }
    out
}

fn run_exact(s: &Scenario, cell: (f64, f64), sample: usize, caps: ExactCaps, clock: &dyn Clock) -> SampleResult {
    let mut out = blank(Method::Exact, s, cell, sample);
    let t0 = clock.now();
    let res = brute_force_optimal(s, caps);
    out.decision_time = clock.now() - t0;
    match res {
        Ok(sol) if sol.exhaustive => {
            out.n_success = sol.n_success;
            out.completion = 100.0 * sol.n_success as f64 / s.num_tasks() as f64;
            out.decisions = sol.schedule.len();
        }
        Ok(sol) => out.failed = Some(format!("search capped after {} nodes", sol.nodes)),
        Err(e) => out.failed = Some(e.to_string()),
    }
    out
}

fn run_method(
    method: Method,
    policies: &HashMap<Method, Arc<Policy>>,
    s: Arc<Scenario>,
    cell: (f64, f64),
    sample: usize,
    caps: ExactCaps,
    clock: &dyn Clock,
) -> SampleResult {
    match method {
        Method::Exact => run_exact(&s, cell, sample, caps, clock),
        Method::Feasrnd => {
            let seed = s.seed ^ 0xfea5_0000;
            run_sample(&mut FeasRnd::new(seed), method, s, cell, sample, clock, |_| {})
        }
        Method::Bigmrta => run_sample(&mut Bigmrta, method, s, cell, sample, clock, |_| {}),
        _ => match policies.get(&method) {
            Some(p) => {
                let mut planner = PolicyPlanner::greedy(p.clone()).with_name(method.name());
                run_sample(&mut planner, method, s, cell, sample, clock, |_| {})
            }
            None => {
                let mut out = blank(method, &s, cell, sample);
                out.failed = Some(format!("no policy for {method}"));
                out
            }
        },
    }
}

/// Loads a checkpoint for every learned method and runs the grid with the
/// monotonic clock.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultsTable> {
    let mut policies = HashMap::new();
    for &m in spec.methods.iter().filter(|m| m.is_learned()) {
        let path = spec
            .checkpoints
            .get(&m)
            .ok_or_else(|| Error::Other(format!("method {m} needs a checkpoint path")))?;
        let ck = load_checkpoint(path)?;
        policies.insert(m, Arc::new(ck.policy));
    }
    run_experiment_with(spec, &policies, &MonotonicClock::default())
}

pub fn run_experiment_with(spec: &ExperimentSpec, policies: &HashMap<Method, Arc<Policy>>, clock: &dyn Clock) -> Result<ResultsTable> {
    for (&m, p) in policies {
        if m.encoder() != Some(p.config.encoder) {
            return Err(Error::Other(format!("policy for {m} uses encoder {}", p.config.encoder.method_name())));
        }
    }
    let caps = spec.caps();
    let mut samples = Vec::new();
    for (c, &cell) in spec.cells.iter().enumerate() {
        let cfg = spec.cell_config(c);
        let scenarios: Vec<Arc<Scenario>> =
            (0..spec.samples).map(|i| generate_scenario(&cfg, spec.scenario_seed(c, i)).map(Arc::new)).collect::<Result<_, _>>()?;
        for &m in &spec.methods {
            let run = |(i, s): (usize, &Arc<Scenario>)| run_method(m, policies, s.clone(), cell, i, caps, clock);
            if spec.serial_timing {
                samples.extend(scenarios.iter().enumerate().map(run));
            } else {
                let part: Vec<SampleResult> = scenarios.par_iter().enumerate().map(run).collect();
                samples.extend(part);
            }
        }
    }
    Ok(summarize(samples))
}

fn cell_key(s: &SampleResult) -> (Method, u64, u64) {
    (s.method, s.lambda_t.to_bits(), s.lambda_r.to_bits())
}

/// Per-cell summaries and pairwise tests from sample rows.
pub fn summarize(samples: Vec<SampleResult>) -> ResultsTable {
    let mut order: Vec<(Method, u64, u64)> = Vec::new();
    let mut groups: HashMap<(Method, u64, u64), Vec<&SampleResult>> = HashMap::new();
    for s in &samples {
        let k = cell_key(s);
        if !groups.contains_key(&k) {
            order.push(k);
        }
        groups.entry(k).or_default().push(s);
    }
    let cells: Vec<CellSummary> = order
        .iter()
        .map(|k| {
            let g = &groups[k];
            let ok: Vec<f64> = g.iter().filter(|s| s.failed.is_none()).map(|s| s.completion).collect();
            let times: Vec<f64> = g.iter().filter(|s| s.failed.is_none()).map(|s| s.decision_time).collect();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            CellSummary {
                method: g[0].method,
                lambda_t: g[0].lambda_t,
                lambda_r: g[0].lambda_r,
                n_tasks: g[0].n_tasks,
                n_robots: g[0].n_robots,
                n: g.len(),
                failed: g.len() - ok.len(),
                seeds: g.iter().map(|s| s.seed).collect(),
                mean_completion: mean(&ok),
                completion: quantiles(&ok),
                mean_decision_time: mean(&times),
            }
        })
        .collect();
    let mut tests = Vec::new();
    let mut points: Vec<(u64, u64)> = Vec::new();
    for k in &order {
        if !points.contains(&(k.1, k.2)) {
            points.push((k.1, k.2));
        }
    }
    for &(lt, lr) in &points {
        let here: Vec<&(Method, u64, u64)> = order.iter().filter(|k| k.1 == lt && k.2 == lr).collect();
        for (i, a) in here.iter().enumerate() {
            for b in &here[i + 1..] {
                let va: Vec<f64> = groups[*a].iter().filter(|s| s.failed.is_none()).map(|s| s.completion).collect();
                let vb: Vec<f64> = groups[*b].iter().filter(|s| s.failed.is_none()).map(|s| s.completion).collect();
                tests.push(PairTest {
                    lambda_t: f64::from_bits(lt),
                    lambda_r: f64::from_bits(lr),
                    a: a.0,
                    b: b.0,
                    test: significance_test(&va, &vb).ok(),
                });
            }
        }
    }
    ResultsTable { samples, cells, tests }
}

/// Mean paired completion difference `a - b` per grid point over samples
/// both methods finished.
pub fn paired_gap(table: &ResultsTable, a: Method, b: Method) -> Vec<(f64, f64, f64, usize)> {
    let mut out = Vec::new();
    for c in table.cells.iter().filter(|c| c.method == a) {
        let pick = |m: Method| -> HashMap<usize, f64> {
            table
                .samples
                .iter()
                .filter(|s| s.method == m && s.lambda_t == c.lambda_t && s.lambda_r == c.lambda_r && s.failed.is_none())
                .map(|s| (s.sample, s.completion))
                .collect()
        };
        let (ma, mb) = (pick(a), pick(b));
        let diffs: Vec<f64> = ma.iter().filter_map(|(i, x)| mb.get(i).map(|y| x - y)).collect();
        if !diffs.is_empty() {
            out.push((c.lambda_t, c.lambda_r, diffs.iter().sum::<f64>() / diffs.len() as f64, diffs.len()));
        }
    }
    out
}

/// True when every method saw the same scenario for each sample of a cell.
pub fn scenarios_shared(table: &ResultsTable) -> bool {
    let mut seen: HashMap<(u64, u64, usize), u64> = HashMap::new();
    table.samples.iter().all(|s| *seen.entry((s.lambda_t.to_bits(), s.lambda_r.to_bits(), s.sample)).or_insert(s.scenario_hash) == s.scenario_hash)
}

fn io(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Other(format!("{}: {e}", path.display()))
}

fn cell_file(c: &CellSummary) -> String {
    format!("{}__lt{}__lr{}.csv", c.method.name(), c.lambda_t, c.lambda_r)
}

pub fn emit_results(table: &ResultsTable, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let cells_dir = out_dir.join("cells");
    fs::create_dir_all(&cells_dir).map_err(|e| io(&cells_dir, e))?;
    let mut files = Vec::new();
    for c in &table.cells {
        let path = cells_dir.join(cell_file(c));
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        for s in table.samples.iter().filter(|s| cell_key(s) == (c.method, c.lambda_t.to_bits(), c.lambda_r.to_bits())) {
            w.serialize(s).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        files.push(path);
    }

    let qpath = out_dir.join("quantiles.csv");
    let mut w = csv::Writer::from_path(&qpath).map_err(|e| io(&qpath, e))?;
    w.write_record(["method", "lambda_t", "lambda_r", "n_tasks", "n_robots", "n", "failed", "min", "q1", "median", "q3", "max", "mean", "mean_decision_time"])
        .map_err(|e| io(&qpath, e))?;
    for c in &table.cells {
        let q = c.completion.unwrap_or(Quantiles { min: f64::NAN, q1: f64::NAN, median: f64::NAN, q3: f64::NAN, max: f64::NAN });
        let row = [
            c.method.name().to_string(),
            c.lambda_t.to_string(),
            c.lambda_r.to_string(),
            c.n_tasks.to_string(),
            c.n_robots.to_string(),
            c.n.to_string(),
            c.failed.to_string(),
            q.min.to_string(),
            q.q1.to_string(),
            q.median.to_string(),
            q.q3.to_string(),
            q.max.to_string(),
            c.mean_completion.to_string(),
            c.mean_decision_time.to_string(),
        ];
        w.write_record(&row).map_err(|e| io(&qpath, e))?;
    }
    w.flush().map_err(|e| io(&qpath, e))?;
    files.push(qpath);

    let ppath = out_dir.join("pvalues.csv");
    let mut w = csv::Writer::from_path(&ppath).map_err(|e| io(&ppath, e))?;
    w.write_record(["lambda_t", "lambda_r", "a", "b", "t", "df", "p", "degenerate"]).map_err(|e| io(&ppath, e))?;
    for t in &table.tests {
        let (ts, df, p, d) = match t.test {
            Some(x) => (x.t.to_string(), x.df.to_string(), x.p.to_string(), x.degenerate.to_string()),
            None => ("".into(), "".into(), "".into(), "".into()),
        };
        w.write_record([t.lambda_t.to_string(), t.lambda_r.to_string(), t.a.name().into(), t.b.name().into(), ts, df, p, d])
            .map_err(|e| io(&ppath, e))?;
    }
    w.flush().map_err(|e| io(&ppath, e))?;
    files.push(ppath);

    let spath = out_dir.join("summary.txt");
    fs::write(&spath, summary_text(table)).map_err(|e| io(&spath, e))?;
    files.push(spath);

    let mpath = out_dir.join("manifest.json");
    let rel: Vec<String> = files.iter().map(|f| f.strip_prefix(out_dir).unwrap_or(f).display().to_string()).collect();
    let manifest = serde_json::json!({ "schema_version": SCHEMA_VERSION, "files": rel });
    fs::write(&mpath, serde_json::to_string_pretty(&manifest).expect("json")).map_err(|e| io(&mpath, e))?;
    files.push(mpath);
    Ok(files)
}

/// Reads the per-cell CSVs written by [`emit_results`] and rebuilds the
/// table.
pub fn read_results(out_dir: &Path) -> Result<ResultsTable> {
    let mpath = out_dir.join("manifest.json");
    let text = fs::read_to_string(&mpath).map_err(|e| io(&mpath, e))?;
    let manifest: serde_json::Value = serde_json::from_str(&text).map_err(|e| io(&mpath, e))?;
    if manifest["schema_version"] != SCHEMA_VERSION {
        return Err(io(&mpath, format!("unsupported schema version {}", manifest["schema_version"])));
    }
    let mut samples = Vec::new();
    for f in manifest["files"].as_array().into_iter().flatten().filter_map(|v| v.as_str()).filter(|f| f.starts_with("cells")) {
        let path = out_dir.join(f);
        let mut r = csv::Reader::from_path(&path).map_err(|e| io(&path, e))?;
        for row in r.deserialize() {
            samples.push(row.map_err(|e| io(&path, e))?);
        }
    }
    Ok(summarize(samples))
}

pub fn summary_text(table: &ResultsTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<9} {:>6} {:>6} {:>4} {:>3} {:>4} {:>4} {:>8} {:>8} {:>12}", "method", "lt", "lr", "N", "M", "n", "fail", "mean%", "median%", "time/ep s");
    for c in &table.cells {
        let _ = writeln!(
            out,
            "{:<9} {:>6} {:>6} {:>4} {:>3} {:>4} {:>4} {:>8.2} {:>8.2} {:>12.6}",
            c.method.name(),
            c.lambda_t,
            c.lambda_r,
            c.n_tasks,
            c.n_robots,
            c.n,
            c.failed,
            c.mean_completion,
            c.completion.map(|q| q.median).unwrap_or(f64::NAN),
            c.mean_decision_time
        );
    }
    let _ = writeln!(out, "\ndecision time relative to the first method per grid point");
    for c in &table.cells {
        if let Some(base) = table.cells.iter().find(|b| b.lambda_t == c.lambda_t && b.lambda_r == c.lambda_r) {
            let _ = writeln!(out, "  lt={} lr={} {}: {:.3}x", c.lambda_t, c.lambda_r, c.method.name(), c.mean_decision_time / base.mean_decision_time);
        }
    }
    let _ = writeln!(out, "\nWelch t-test p-values");
    for t in &table.tests {
        match t.test {
            Some(w) => {
                let _ = writeln!(
                    out,
                    "  lt={} lr={} {} vs {}: p={:.3e}{}",
                    t.lambda_t,
                    t.lambda_r,
                    t.a.name(),
                    t.b.name(),
                    w.p,
                    if w.degenerate { " (zero variance)" } else { "" }
                );
            }
            None => {
                let _ = writeln!(out, "  lt={} lr={} {} vs {}: too few samples", t.lambda_t, t.lambda_r, t.a.name(), t.b.name());
            }
        }
    }
    let gaps = paired_gap(table, Method::CapamTd, Method::Capam);
    if !gaps.is_empty() {
        let _ = writeln!(out, "\npaired completion gap capam-td minus capam");
        for (lt, lr, g, n) in gaps {
            let _ = writeln!(out, "  lt={lt} lr={lr}: {g:+.2} points over {n} samples");
        }
    }
    out
}
