//! Problem instances: tasks, fleet parameters, random generation and the
//! versioned scenario file format.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Current scenario file format version.
pub const SCENARIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unsupported scenario format version {0}")]
    Version(u32),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A point in the arena, kilometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Point, frac: f64) -> Point {
        Point {
            x: self.x + (other.x - self.x) * frac,
            y: self.y + (other.y - self.y) * frac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// 1-based task index; action `id` selects this task.
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Seconds since mission start.
    pub deadline: f64,
    /// Kilograms.
    pub demand: f64,
}

impl TaskSpec {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSpec {
    pub robots: usize,
    /// Payload capacity, kilograms.
    pub capacity: f64,
    /// Per-tour range, kilometers.
    pub range: f64,
    /// Meters per second.
    pub speed: f64,
    /// Communication range, meters. May be `inf` for full communication.
    pub comm_range: f64,
}

impl FleetSpec {
    /// Travel speed in kilometers per second.
    pub fn speed_km_s(&self) -> f64 {
        self.speed / 1000.0
    }

    pub fn comm_range_km(&self) -> f64 {
        self.comm_range / 1000.0
    }

    pub fn travel_time(&self, distance_km: f64) -> f64 {
        distance_km / self.speed_km_s()
    }
}

impl Default for FleetSpec {
    fn default() -> Self {
        FleetSpec {
            robots: 7,
            capacity: 5.0,
            range: 4.0,
            speed: 10.0,
            comm_range: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Arena {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }
}

/// Immutable problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub arena: Arena,
    pub depot: Point,
    pub fleet: FleetSpec,
    pub tasks: Vec<TaskSpec>,
}

impl Scenario {
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_robots(&self) -> usize {
        self.fleet.robots
    }

    /// Node position by action index: 0 is the depot, `i` is task `i`.
    pub fn node_position(&self, node: usize) -> Point {
        if node == 0 {
            self.depot
        } else {
            self.tasks[node - 1].position()
        }
    }

    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        self.node_position(a).distance(&self.node_position(b))
    }

    pub fn total_demand(&self) -> f64 {
        self.tasks.iter().map(|t| t.demand).sum()
    }

    pub fn max_deadline(&self) -> f64 {
        self.tasks.iter().map(|t| t.deadline).fold(0.0, f64::max)
    }

    /// Returns tasks sorted by id, as expected by the simulator.
    fn canonicalize(mut self) -> Self {
        self.tasks.sort_by_key(|t| t.id);
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.tasks.is_empty() {
            return bad("empty task list".into());
        }
        let f = &self.fleet;
        if f.robots < 1 {
            return bad("fleet must contain at least one robot".into());
        }
        for (name, v) in [
            ("capacity", f.capacity),
            ("range", f.range),
            ("speed", f.speed),
            ("comm_range", f.comm_range),
        ] {
            if !(v > 0.0) {
                return bad(format!("fleet {name} must be strictly positive, got {v}"));
            }
        }
        if !(self.arena.width > 0.0 && self.arena.height > 0.0) {
            return bad("arena dimensions must be positive".into());
        }
        if !self.arena.contains(&self.depot) {
            return bad("depot lies outside the arena".into());
        }
        let mut seen = vec![false; self.tasks.len()];
        for t in &self.tasks {
            if t.id == 0 || t.id > self.tasks.len() || seen[t.id - 1] {
                return bad(format!("task ids must be a permutation of 1..={}", self.tasks.len()));
            }
            seen[t.id - 1] = true;
            if !self.arena.contains(&t.position()) {
                return bad(format!("task {} lies outside the arena", t.id));
            }
            if !(t.deadline > 0.0) || !t.deadline.is_finite() {
                return bad(format!("task {} deadline must be positive", t.id));
            }
            if !(t.demand > 0.0) || !t.demand.is_finite() {
                return bad(format!("task {} demand must be positive", t.id));
            }
        }
        Ok(())
    }
}

/// Random instance distribution, parameterised by the task and robot scale
/// factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub lambda_t: f64,
    pub lambda_r: f64,
    pub base_tasks: usize,
    pub base_robots: usize,
    pub demand_range: (f64, f64),
    pub deadline_range: (f64, f64),
    pub arena: Arena,
    pub depot: Point,
    pub fleet: FleetSpec,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            lambda_t: 1.0,
            lambda_r: 1.0,
            base_tasks: 50,
            base_robots: 6,
            demand_range: (1.0, 10.0),
            deadline_range: (150.0, 600.0),
            arena: Arena { width: 1.0, height: 1.0 },
            depot: Point::new(0.5, 0.5),
            fleet: FleetSpec::default(),
        }
    }
}

impl GenerationConfig {
    pub fn with_scales(lambda_t: f64, lambda_r: f64) -> Self {
        GenerationConfig { lambda_t, lambda_r, ..Default::default() }
    }

    /// `int(lambda_t * base_N)`, truncating like the reference protocol.
    pub fn num_tasks(&self) -> usize {
        (self.lambda_t * self.base_tasks as f64) as usize
    }

    /// `int(base_M * lambda_t * lambda_r) + 1`.
    pub fn num_robots(&self) -> usize {
        (self.base_robots as f64 * self.lambda_t * self.lambda_r) as usize + 1
    }

    fn check(&self) -> Result<(), ScenarioError> {
        for (name, v) in [("lambda_t", self.lambda_t), ("lambda_r", self.lambda_r)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ScenarioError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let (dlo, dhi) = self.demand_range;
        let (tlo, thi) = self.deadline_range;
        if !(dlo > 0.0 && dhi >= dlo) {
            return Err(ScenarioError::InvalidConfig("bad demand range".into()));
        }
        if !(tlo > 0.0 && thi >= tlo) {
            return Err(ScenarioError::InvalidConfig("bad deadline range".into()));
        }
        if self.num_tasks() == 0 {
            return Err(ScenarioError::InvalidConfig("scale factors yield zero tasks".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

pub fn generate_scenario(cfg: &GenerationConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.num_tasks();
    let tasks = (1..=n)
        .map(|id| {
            let x = uniform(&mut rng, 0.0, cfg.arena.width);
            let y = uniform(&mut rng, 0.0, cfg.arena.height);
            let deadline = uniform(&mut rng, cfg.deadline_range.0, cfg.deadline_range.1);
            let demand = uniform(&mut rng, cfg.demand_range.0, cfg.demand_range.1);
            TaskSpec { id, x, y, deadline, demand }
        })
        .collect();
    let fleet = FleetSpec { robots: cfg.num_robots(), ..cfg.fleet.clone() };
    let s = Scenario { seed, arena: cfg.arena, depot: cfg.depot, fleet, tasks };
    s.validate()?;
    Ok(s)
}

// On-disk layout. Kept separate from `Scenario` so the header can carry the
// redundant counts that make hand-edited files easy to sanity-check.

#[derive(Serialize, Deserialize)]
struct FileHeader {
    version: u32,
    seed: i64,
    tasks: usize,
    robots: usize,
    arena: Arena,
    depot: Point,
    fleet: FileFleet,
}

#[derive(Serialize, Deserialize)]
struct FileFleet {
    capacity: f64,
    range: f64,
    speed: f64,
    comm_range: f64,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    header: FileHeader,
    #[serde(default)]
    task: Vec<TaskSpec>,
}

pub fn scenario_to_string(s: &Scenario) -> Result<String, ScenarioError> {
    s.validate()?;
    let seed = i64::try_from(s.seed)
        .map_err(|_| ScenarioError::Invalid(format!("seed {} does not fit the file format", s.seed)))?;
    let file = ScenarioFile {
        header: FileHeader {
            version: SCENARIO_FORMAT_VERSION,
            seed,
            tasks: s.tasks.len(),
            robots: s.fleet.robots,
            arena: s.arena,
            depot: s.depot,
            fleet: FileFleet {
                capacity: s.fleet.capacity,
                range: s.fleet.range,
                speed: s.fleet.speed,
                comm_range: s.fleet.comm_range,
            },
        },
        task: s.tasks.clone(),
    };
    toml::to_string(&file).map_err(|e| ScenarioError::Invalid(e.to_string()))
}

fn line_col(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    format!("line {line}, column {col}")
}

pub fn scenario_from_str(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        location: e.span().map_or_else(|| "unknown".to_string(), |sp| line_col(text, sp.start)),
        message: e.message().to_string(),
    })?;
    let h = file.header;
    if h.version != SCENARIO_FORMAT_VERSION {
        return Err(ScenarioError::Version(h.version));
    }
    let parse_err = |m: &str| ScenarioError::Parse { location: "header".into(), message: m.to_string() };
    if file.task.is_empty() {
        return Err(parse_err("empty task list"));
    }
    if h.tasks != file.task.len() {
        return Err(parse_err(&format!(
            "header declares {} tasks but {} task records follow",
            h.tasks,
            file.task.len()
        )));
    }
    let seed = u64::try_from(h.seed).map_err(|_| parse_err("negative seed"))?;
    let s = Scenario {
        seed,
        arena: h.arena,
        depot: h.depot,
        fleet: FleetSpec {
            robots: h.robots,
            capacity: h.fleet.capacity,
            range: h.fleet.range,
            speed: h.fleet.speed,
            comm_range: h.fleet.comm_range,
        },
        tasks: file.task,
    }
    .canonicalize();
    s.validate()?;
    Ok(s)
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    let text = scenario_to_string(s)?;
    fs::write(path, text).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    scenario_from_str(&text)
}

/// Invertible affine map `v -> (v - offset) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
    /// Set when the source range was degenerate; the map then sends every
    /// value to 0 and cannot be inverted.
    pub degenerate: bool,
}

impl AffineMap {
    fn unit_interval(lo: f64, hi: f64) -> Self {
        if hi > lo {
            AffineMap { offset: lo, scale: 1.0 / (hi - lo), degenerate: false }
        } else {
            AffineMap { offset: lo, scale: 0.0, degenerate: true }
        }
    }

    fn by_extent(extent: f64) -> Self {
        Self::unit_interval(0.0, extent)
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.offset) * self.scale
    }

    pub fn inverse(&self, u: f64) -> f64 {
        if self.degenerate {
            self.offset
        } else {
            u / self.scale + self.offset
        }
    }
}

/// Per-feature maps taking raw task features (km, km, s, kg) to unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTable {
    pub x: AffineMap,
    pub y: AffineMap,
    pub deadline: AffineMap,
    pub demand: AffineMap,
}

impl NormalizationTable {
    pub fn has_degenerate(&self) -> bool {
        self.x.degenerate || self.y.degenerate || self.deadline.degenerate || self.demand.degenerate
    }

    /// Normalized node feature vector `[x, y, deadline, remaining demand]`.
    pub fn features(&self, task: &TaskSpec, remaining: f64) -> [f64; 4] {
        [
            self.x.forward(task.x),
            self.y.forward(task.y),
            self.deadline.forward(task.deadline),
            self.demand.forward(remaining),
        ]
    }
}

impl fmt::Display for NormalizationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "x: (v-{})*{}, y: (v-{})*{}, deadline: (v-{})*{}, demand: (v-{})*{}",
            self.x.offset,
            self.x.scale,
            self.y.offset,
            self.y.scale,
            self.deadline.offset,
            self.deadline.scale,
            self.demand.offset,
            self.demand.scale
        )
    }
}

pub fn normalize_features(s: &Scenario) -> NormalizationTable {
    let (mut dl_lo, mut dl_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut w_lo, mut w_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in &s.tasks {
        dl_lo = dl_lo.min(t.deadline);
        dl_hi = dl_hi.max(t.deadline);
        w_lo = w_lo.min(t.demand);
        w_hi = w_hi.max(t.demand);
    }
    let table = NormalizationTable {
        x: AffineMap::by_extent(s.arena.width),
        y: AffineMap::by_extent(s.arena.height),
        deadline: AffineMap::unit_interval(dl_lo, dl_hi),
        demand: AffineMap::unit_interval(w_lo, w_hi),
    };
    if table.has_degenerate() {
        log::warn!("degenerate feature range in scenario {}; mapping to constant 0", s.seed);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_scale_factors() {
        let c = GenerationConfig::with_scales(1.0, 1.0);
        assert_eq!((c.num_tasks(), c.num_robots()), (50, 7));
        let c = GenerationConfig::with_scales(0.5, 0.5);
        assert_eq!((c.num_tasks(), c.num_robots()), (25, 2));
        let c = GenerationConfig::with_scales(0.2, 1.0);
        assert_eq!((c.num_tasks(), c.num_robots()), (10, 2));
        let c = GenerationConfig::with_scales(10.0, 2.0);
        assert_eq!((c.num_tasks(), c.num_robots()), (500, 121));
    }

    #[test]
    fn non_positive_lambda_rejected() {
        for (lt, lr) in [(0.0, 1.0), (1.0, -0.5), (f64::NAN, 1.0)] {
            let err = generate_scenario(&GenerationConfig::with_scales(lt, lr), 1).unwrap_err();
            assert!(matches!(err, ScenarioError::InvalidConfig(_)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let c = GenerationConfig::with_scales(0.5, 1.0);
        let a = scenario_to_string(&generate_scenario(&c, 42).unwrap()).unwrap();
        let b = scenario_to_string(&generate_scenario(&c, 42).unwrap()).unwrap();
        assert_eq!(a, b);
        let d = scenario_to_string(&generate_scenario(&c, 43).unwrap()).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn generated_values_in_declared_ranges() {
        let s = generate_scenario(&GenerationConfig::default(), 7).unwrap();
        for t in &s.tasks {
            assert!((1.0..=10.0).contains(&t.demand));
            assert!((150.0..=600.0).contains(&t.deadline));
            assert!(s.arena.contains(&t.position()));
        }
    }

    #[test]
    fn empty_task_list_is_parse_error() {
        let s = generate_scenario(&GenerationConfig::with_scales(0.1, 1.0), 3).unwrap();
        let text = scenario_to_string(&s).unwrap();
        let header_only: String = text.split("[[task]]").next().unwrap().replace("tasks = 5", "tasks = 0");
        match scenario_from_str(&header_only) {
            Err(ScenarioError::Parse { message, .. }) => assert_eq!(message, "empty task list"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_parse_error_with_location() {
        let s = generate_scenario(&GenerationConfig::with_scales(0.1, 1.0), 3).unwrap();
        let text = scenario_to_string(&s).unwrap();
        let cut = &text[..text.rfind("demand").unwrap() + 3];
        match scenario_from_str(cut) {
            Err(ScenarioError::Parse { location, .. }) => assert!(location.starts_with("line")),
            Err(ScenarioError::Invalid(_)) => {}
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn normalization_examples() {
        let mut s = generate_scenario(&GenerationConfig::with_scales(0.1, 1.0), 9).unwrap();
        s.tasks[0].x = 0.5;
        s.tasks[0].deadline = 600.0;
        s.tasks[1].deadline = 150.0;
        for t in &mut s.tasks {
            t.demand = 4.0;
        }
        let n = normalize_features(&s);
        assert_eq!(n.x.forward(0.5), 0.5);
        assert_eq!(n.deadline.forward(600.0), 1.0);
        assert!(n.demand.degenerate);
        assert!(s.tasks.iter().all(|t| n.demand.forward(t.demand) == 0.0));
        assert!(n.has_degenerate());
    }

    #[test]
    fn infinite_comm_range_round_trips() {
        let mut s = generate_scenario(&GenerationConfig::with_scales(0.1, 1.0), 5).unwrap();
        s.fleet.comm_range = f64::INFINITY;
        let back = scenario_from_str(&scenario_to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
