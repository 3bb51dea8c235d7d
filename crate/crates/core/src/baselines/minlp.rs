//! Algebraic model of the fleet routing problem in a plain-text grammar.
//!
//! Nodes are numbered `0..=N` with the depot at 0; decisions `h`, tours `s`
//! and robots `r` are 1-based. One declaration per line:
//!
//! ```text
//! ctmodel 1
//! param <name> <value>
//! var <name> <binary|continuous|integer> <lower> <upper>
//! objective <max|min>: <terms> const <value>
//! con <family>[<indices>]: <terms> <<=|>=|=> <rhs>
//! ```
//!
//! A term is a signed coefficient followed by one variable or a `*`-joined
//! pair of variables. Each tour is exactly `H` transitions; unused decisions
//! are depot self-loops.
//!
//! Deviations from the formulation as usually stated: the end-of-horizon
//! demand balance is an upper bound so partial service stays feasible; the
//! tour-carry and per-decision demand updates are indexed by task and apply
//! to every tour; the work-demand bound uses the demand met before the
//! decision; a completion indicator may be set only when the completion time
//! is within the deadline (one big-M row) and the demand is fully met.

use std::fmt::Write as _;

use crate::scenario::Scenario;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
    Integer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    /// One variable, or two for a bilinear product.
    pub vars: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// `family[indices]`.
    pub name: String,
    pub terms: Vec<Term>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn family(&self) -> &str {
        self.name.split('[').next().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinlpModel {
    pub params: Vec<(String, f64)>,
    pub variables: Vec<Variable>,
    pub maximize: bool,
    pub objective: Vec<Term>,
    pub objective_constant: f64,
    pub constraints: Vec<Constraint>,
}

impl MinlpModel {
    pub fn family_count(&self, family: &str) -> usize {
        self.constraints.iter().filter(|c| c.family() == family).count()
    }

    pub fn families(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.constraints {
            if out.last().map(|f| f != c.family()).unwrap_or(true) && !out.iter().any(|f| f == c.family()) {
                out.push(c.family().to_string());
            }
        }
        out
    }
}

/// `S = ceil(total demand / (M * C_max)) + 1` tours and `H = N + 1`
/// decisions per tour.
pub fn default_bounds(s: &Scenario) -> (usize, usize) {
    let tours = (s.total_demand() / (s.num_robots() as f64 * s.fleet.capacity)).ceil() as usize + 1;
    (tours, s.num_tasks() + 1)
}

fn x(i: usize, j: usize, h: usize, s: usize, r: usize) -> String {
    format!("x[{i},{j},{h},{s},{r}]")
}
fn e(i: usize, j: usize, h: usize, s: usize, r: usize) -> String {
    format!("e[{i},{j},{h},{s},{r}]")
}
fn tt(i: usize, j: usize, h: usize, s: usize, r: usize) -> String {
    format!("time[{i},{j},{h},{s},{r}]")
}
fn w(j: usize, h: usize, s: usize) -> String {
    format!("w[{j},{h},{s}]")
}
fn c(h: usize, s: usize, r: usize) -> String {
    format!("c[{h},{s},{r}]")
}
fn d(h: usize, s: usize, r: usize) -> String {
    format!("range[{h},{s},{r}]")
}

fn t1(coef: f64, v: String) -> Term {
    Term { coef, vars: vec![v] }
}
fn t2(coef: f64, a: String, b: String) -> Term {
    Term { coef, vars: vec![a, b] }
}

struct Builder {
    cons: Vec<Constraint>,
}

impl Builder {
    fn add(&mut self, name: String, terms: Vec<Term>, sense: Sense, rhs: f64) {
        self.cons.push(Constraint { name, terms, sense, rhs });
    }
}

/// Expands every variable and constraint family for `S` tours of `H`
/// decisions.
pub fn export_minlp(sc: &Scenario, tours: usize, decisions: usize) -> Result<MinlpModel> {
    if tours < 1 || decisions < 1 {
        return Err(Error::Other("S and H must be at least 1".into()));
    }
    let n = sc.num_tasks();
    let m = sc.num_robots();
    let (big_s, big_h) = (tours, decisions);
    let nodes = 0..=n;
    let cap = sc.fleet.capacity;
    let range = sc.fleet.range;
    let dist = |i: usize, j: usize| sc.node_distance(i, j);
    let ttime = |i: usize, j: usize| sc.fleet.travel_time(dist(i, j));
    let demand = |j: usize| if j == 0 { 0.0 } else { sc.tasks[j - 1].demand };
    let max_t = nodes.clone().flat_map(|i| nodes.clone().map(move |j| (i, j))).map(|(i, j)| ttime(i, j)).fold(0.0, f64::max);
    let big_m = max_t * (big_s * big_h * m) as f64 + sc.max_deadline() + 1.0;

    let mut vars = Vec::new();
    let var = |vars: &mut Vec<Variable>, name: String, kind: VarKind, lower: f64, upper: f64| {
        vars.push(Variable { name, kind, lower, upper })
    };
    let idx5 = || {
        let nodes = nodes.clone();
        (1..=m).flat_map(move |r| {
            let nodes = nodes.clone();
            (1..=big_s).flat_map(move |s| {
                let nodes = nodes.clone();
                (1..=big_h).flat_map(move |h| {
                    let nodes = nodes.clone();
                    nodes.clone().flat_map(move |i| nodes.clone().map(move |j| (i, j, h, s, r)))
                })
            })
        })
    };
    for (i, j, h, s, r) in idx5() {
        var(&mut vars, x(i, j, h, s, r), VarKind::Binary, 0.0, 1.0);
    }
    for (i, j, h, s, r) in idx5() {
        var(&mut vars, e(i, j, h, s, r), VarKind::Continuous, 0.0, cap);
    }
    for (i, j, h, s, r) in idx5() {
        var(&mut vars, tt(i, j, h, s, r), VarKind::Continuous, 0.0, max_t);
    }
    for s in 1..=big_s {
        for h in 1..=big_h {
            for j in nodes.clone() {
                var(&mut vars, w(j, h, s), VarKind::Continuous, 0.0, demand(j));
            }
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            for h in 1..=big_h {
                var(&mut vars, c(h, s, r), VarKind::Continuous, 0.0, cap);
            }
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            for h in 1..=big_h {
                var(&mut vars, d(h, s, r), VarKind::Continuous, 0.0, range);
            }
        }
    }
    for j in 1..=n {
        var(&mut vars, format!("tc[{j}]"), VarKind::Continuous, 0.0, big_m);
    }
    for j in 1..=n {
        var(&mut vars, format!("done[{j}]"), VarKind::Binary, 0.0, 1.0);
    }
    var(&mut vars, "nsuccess".into(), VarKind::Integer, 0.0, n as f64);

    let mut b = Builder { cons: Vec::new() };
    let all_pairs = || nodes.clone().flat_map(|i| nodes.clone().map(move |j| (i, j)));
    for r in 1..=m {
        for s in 1..=big_s {
            b.add(format!("tour_start[s={s},r={r}]"), nodes.clone().map(|j| t1(1.0, x(0, j, 1, s, r))).collect(), Sense::Eq, 1.0);
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            b.add(format!("tour_end[s={s},r={r}]"), nodes.clone().map(|j| t1(1.0, x(j, 0, big_h, s, r))).collect(), Sense::Eq, 1.0);
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            for h in 1..=big_h {
                b.add(
                    format!("one_transition[h={h},s={s},r={r}]"),
                    all_pairs().map(|(i, j)| t1(1.0, x(i, j, h, s, r))).collect(),
                    Sense::Le,
                    1.0,
                );
            }
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            for h in 2..=big_h {
                for i in nodes.clone() {
                    let mut terms: Vec<Term> = nodes.clone().map(|j| t1(1.0, x(i, j, h, s, r))).collect();
                    terms.extend(nodes.clone().map(|k| t1(-1.0, x(k, i, h - 1, s, r))));
                    b.add(format!("flow[i={i},h={h},s={s},r={r}]"), terms, Sense::Eq, 0.0);
                }
            }
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            let mut terms = vec![t1(1.0, d(1, s, r))];
            terms.extend(all_pairs().filter(|&(i, j)| dist(i, j) != 0.0).map(|(i, j)| t1(dist(i, j), x(i, j, 1, s, r))));
            b.add(format!("range_init[s={s},r={r}]"), terms, Sense::Eq, range);
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            for h in 1..=big_h {
                b.add(format!("range_bounds[h={h},s={s},r={r}]"), vec![t1(1.0, d(h, s, r))], Sense::Le, range);
            }
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            for h in 1..=big_h {
                b.add(format!("capacity_bounds[h={h},s={s},r={r}]"), vec![t1(1.0, c(h, s, r))], Sense::Le, cap);
            }
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            for h in 2..=big_h {
                let mut terms = vec![t1(1.0, d(h, s, r)), t1(-1.0, d(h - 1, s, r))];
                terms.extend(all_pairs().filter(|&(i, j)| dist(i, j) != 0.0).map(|(i, j)| t1(dist(i, j), x(i, j, h, s, r))));
                b.add(format!("range_update[h={h},s={s},r={r}]"), terms, Sense::Eq, 0.0);
            }
        }
    }
    let delivered_into = |j: usize, h: usize, s: usize| -> Vec<Term> {
        (1..=m).flat_map(|r| nodes.clone().map(move |i| t2(-1.0, e(i, j, h, s, r), x(i, j, h, s, r)))).collect()
    };
    for j in nodes.clone() {
        let mut terms = vec![t1(1.0, w(j, 1, 1))];
        terms.extend(delivered_into(j, 1, 1));
        b.add(format!("demand_init[j={j}]"), terms, Sense::Eq, 0.0);
    }
    for s in 2..=big_s {
        for j in nodes.clone() {
            let mut terms = vec![t1(1.0, w(j, 1, s)), t1(-1.0, w(j, big_h, s - 1))];
            terms.extend(delivered_into(j, 1, s));
            b.add(format!("demand_tour_carry[j={j},s={s}]"), terms, Sense::Eq, 0.0);
        }
    }
    for (i, j, h, s, r) in idx5() {
        b.add(format!("work_bounds[i={i},j={j},h={h},s={s},r={r}]"), vec![t1(1.0, e(i, j, h, s, r))], Sense::Le, cap);
    }
    for (i, j, h, s, r) in idx5().filter(|t| t.2 >= 2) {
        b.add(
            format!("work_capacity[i={i},j={j},h={h},s={s},r={r}]"),
            vec![t1(1.0, e(i, j, h, s, r)), t1(-1.0, c(h - 1, s, r))],
            Sense::Le,
            0.0,
        );
    }
    for (i, j, h, s, r) in idx5().filter(|t| t.2 >= 2) {
        b.add(
            format!("work_demand[i={i},j={j},h={h},s={s},r={r}]"),
            vec![t1(1.0, e(i, j, h, s, r)), t1(1.0, w(j, h - 1, s))],
            Sense::Le,
            demand(j),
        );
    }
    for s in 1..=big_s {
        for h in 2..=big_h {
            for j in nodes.clone() {
                let mut terms = vec![t1(1.0, w(j, h, s)), t1(-1.0, w(j, h - 1, s))];
                terms.extend(delivered_into(j, h, s));
                b.add(format!("demand_update[j={j},h={h},s={s}]"), terms, Sense::Eq, 0.0);
            }
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            let mut terms = vec![t1(1.0, c(1, s, r))];
            terms.extend(all_pairs().map(|(i, j)| t2(1.0, e(i, j, 1, s, r), x(i, j, 1, s, r))));
            b.add(format!("capacity_init[s={s},r={r}]"), terms, Sense::Eq, cap);
        }
    }
    for r in 1..=m {
        for s in 1..=big_s {
            for h in 2..=big_h {
                let mut terms = vec![t1(1.0, c(h, s, r)), t1(-1.0, c(h - 1, s, r))];
                terms.extend(all_pairs().map(|(i, j)| t2(1.0, e(i, j, h, s, r), x(i, j, h, s, r))));
                b.add(format!("capacity_update[h={h},s={s},r={r}]"), terms, Sense::Eq, 0.0);
            }
        }
    }
    for s in 1..=big_s {
        for h in 1..=big_h {
            for j in nodes.clone() {
                b.add(format!("demand_cap[j={j},h={h},s={s}]"), vec![t1(1.0, w(j, h, s))], Sense::Le, demand(j));
            }
        }
    }
    for j in nodes.clone() {
        b.add(format!("demand_total[j={j}]"), vec![t1(1.0, w(j, big_h, big_s))], Sense::Le, demand(j));
    }
    for (i, j, h, s, r) in idx5() {
        let mut terms = vec![t1(1.0, tt(i, j, h, s, r))];
        if ttime(i, j) != 0.0 {
            terms.push(t1(-ttime(i, j), x(i, j, h, s, r)));
        }
        b.add(format!("transition_time[i={i},j={j},h={h},s={s},r={r}]"), terms, Sense::Eq, 0.0);
    }
    for j in 1..=n {
        let mut terms = vec![t1(1.0, format!("tc[{j}]"))];
        for r in 1..=m {
            for s in 1..=big_s {
                for h in 1..=big_h {
                    for i in nodes.clone() {
                        terms.push(t1(-1.0, tt(i, j, h, s, r)));
                    }
                }
            }
        }
        b.add(format!("completion_time[j={j}]"), terms, Sense::Eq, 0.0);
    }
    for j in 1..=n {
        let tau = sc.tasks[j - 1].deadline;
        b.add(format!("done_on_time[j={j}]"), vec![t1(1.0, format!("tc[{j}]")), t1(big_m, format!("done[{j}]"))], Sense::Le, tau + big_m);
        b.add(
            format!("done_demand[j={j}]"),
            vec![t1(demand(j), format!("done[{j}]")), t1(-1.0, w(j, big_h, big_s))],
            Sense::Le,
            0.0,
        );
    }
    let mut terms = vec![t1(1.0, "nsuccess".into())];
    terms.extend((1..=n).map(|j| t1(-1.0, format!("done[{j}]"))));
    b.add("nsuccess_def[]".into(), terms, Sense::Eq, 0.0);

    let params = vec![
        ("N".to_string(), n as f64),
        ("M".to_string(), m as f64),
        ("S".to_string(), big_s as f64),
        ("H".to_string(), big_h as f64),
        ("Cmax".to_string(), cap),
        ("Dmax".to_string(), range),
        ("bigM".to_string(), big_m),
    ];
    Ok(MinlpModel {
        params,
        variables: vars,
        maximize: true,
        objective: vec![t1(1.0 / n as f64, "nsuccess".into())],
        objective_constant: -1.0,
        constraints: b.cons,
    })
}

fn fmt_terms(out: &mut String, terms: &[Term]) {
    for t in terms {
        let _ = write!(out, " {:+?} {}", t.coef, t.vars.join("*"));
    }
}

pub fn write_model(m: &MinlpModel) -> String {
    let mut out = String::from("ctmodel 1\n");
    for (k, v) in &m.params {
        let _ = writeln!(out, "param {k} {v:?}");
    }
    for v in &m.variables {
        let kind = match v.kind {
            VarKind::Binary => "binary",
            VarKind::Continuous => "continuous",
            VarKind::Integer => "integer",
        };
        let _ = writeln!(out, "var {} {kind} {:?} {:?}", v.name, v.lower, v.upper);
    }
    let _ = write!(out, "objective {}:", if m.maximize { "max" } else { "min" });
    fmt_terms(&mut out, &m.objective);
    let _ = writeln!(out, " const {:?}", m.objective_constant);
    for c in &m.constraints {
        let _ = write!(out, "con {}:", c.name);
        fmt_terms(&mut out, &c.terms);
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {:?}", c.rhs);
    }
    out
}

fn perr(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Other(format!("model line {line}: {msg}"))
}

fn num(tok: Option<&str>, line: usize) -> Result<f64> {
    let t = tok.ok_or_else(|| perr(line, "missing number"))?;
    t.parse::<f64>().map_err(|_| perr(line, format!("bad number '{t}'")))
}

fn parse_terms<'a>(toks: &mut std::iter::Peekable<impl Iterator<Item = &'a str>>, line: usize, stop: &[&str]) -> Result<Vec<Term>> {
    let mut terms = Vec::new();
    while let Some(&tok) = toks.peek() {
        if stop.contains(&tok) {
            break;
        }
        toks.next();
        let coef = tok.parse::<f64>().map_err(|_| perr(line, format!("bad coefficient '{tok}'")))?;
        let vars = toks.next().ok_or_else(|| perr(line, "coefficient without variable"))?;
        terms.push(Term { coef, vars: vars.split('*').map(str::to_string).collect() });
    }
    Ok(terms)
}

pub fn parse_model(text: &str) -> Result<MinlpModel> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == "ctmodel 1" => {}
        _ => return Err(perr(1, "missing 'ctmodel 1' header")),
    }
    let mut model = MinlpModel {
        params: Vec::new(),
        variables: Vec::new(),
        maximize: true,
        objective: Vec::new(),
        objective_constant: 0.0,
        constraints: Vec::new(),
    };
    for (ln, l) in lines {
        let ln = ln + 1;
        let mut toks = l.split_whitespace().peekable();
        match toks.next() {
            Some("param") => {
                let name = toks.next().ok_or_else(|| perr(ln, "param without name"))?;
                model.params.push((name.to_string(), num(toks.next(), ln)?));
            }
            Some("var") => {
                let name = toks.next().ok_or_else(|| perr(ln, "var without name"))?.to_string();
                let kind = match toks.next() {
                    Some("binary") => VarKind::Binary,
                    Some("continuous") => VarKind::Continuous,
                    Some("integer") => VarKind::Integer,
                    other => return Err(perr(ln, format!("unknown variable kind {other:?}"))),
                };
                let lower = num(toks.next(), ln)?;
                let upper = num(toks.next(), ln)?;
                model.variables.push(Variable { name, kind, lower, upper });
            }
            Some(tok) if tok.starts_with("objective") => {
                model.maximize = match toks.next() {
                    Some("max:") => true,
                    Some("min:") => false,
                    other => return Err(perr(ln, format!("bad objective sense {other:?}"))),
                };
                model.objective = parse_terms(&mut toks, ln, &["const"])?;
                toks.next();
                model.objective_constant = num(toks.next(), ln)?;
            }
            Some("con") => {
                let name = toks.next().and_then(|n| n.strip_suffix(':')).ok_or_else(|| perr(ln, "constraint without name"))?;
                let terms = parse_terms(&mut toks, ln, &["<=", ">=", "="])?;
                let sense = match toks.next() {
                    Some("<=") => Sense::Le,
                    Some(">=") => Sense::Ge,
                    Some("=") => Sense::Eq,
                    other => return Err(perr(ln, format!("bad relation {other:?}"))),
                };
                let rhs = num(toks.next(), ln)?;
                model.constraints.push(Constraint { name: name.to_string(), terms, sense, rhs });
            }
            other => return Err(perr(ln, format!("unknown declaration {other:?}"))),
        }
    }
    Ok(model)
}
