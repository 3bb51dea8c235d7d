//! Matrix-valued reverse-mode differentiation.
//!
//! Every operation appends a node holding its value; [`Tape::backward`]
//! walks the nodes in reverse and accumulates adjoints.

use ndarray::{concatenate, s, Array2, Axis};

use super::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Powi(Var, i32),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize, usize),
    MeanRows(Var),
    Transpose(Var),
    Sum(Var),
    Pick(Var, usize, usize),
    SoftmaxMasked(Var),
    LogSoftmaxMasked(Var, Vec<bool>),
}

#[derive(Debug, Default)]
pub struct Tape {
    values: Vec<Array2<f64>>,
    ops: Vec<Op>,
    params: Vec<Option<Var>>,
}

/// Adjoints of every parameter touched by a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub grads: Vec<Option<Array2<f64>>>,
}

fn masked_softmax_row(row: ndarray::ArrayView1<f64>, mask: &[bool]) -> (Vec<f64>, f64, f64) {
    let mut max = f64::NEG_INFINITY;
    for (v, &m) in row.iter().zip(mask) {
        if m && *v > max {
            max = *v;
        }
    }
    assert!(max.is_finite(), "masked softmax over an all-masked row");
    let mut out = vec![0.0; row.len()];
    let mut z = 0.0;
    for ((o, v), &m) in out.iter_mut().zip(row.iter()).zip(mask) {
        if m {
            *o = (v - max).exp();
            z += *o;
        }
    }
    for o in &mut out {
        *o /= z;
    }
    (out, max, z)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.values[v.0]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let x = self.value(v);
        assert_eq!(x.dim(), (1, 1), "not a scalar");
        x[[0, 0]]
    }

    /// A constant input.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// The tape variable for parameter `id`, created on first use.
    pub fn param(&mut self, store: &ParamStore, id: usize) -> Var {
        if self.params.len() < store.len() {
            self.params.resize(store.len(), None);
        }
        if let Some(v) = self.params[id] {
            return v;
        }
        let v = self.push(store.tensor(id).clone(), Op::Param(id));
        self.params[id] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    /// Adds the `1 x c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(b).nrows(), 1);
        let v = self.value(a) + self.value(b);
        self.push(v, Op::AddRow(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a) * s;
        self.push(v, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a) + s;
        self.push(v, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    /// Element-wise integer power.
    pub fn powi(&mut self, a: Var, p: i32) -> Var {
        if p == 1 {
            return a;
        }
        let v = self.value(a).mapv(|x| x.powi(p));
        self.push(v, Op::Powi(a, p))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        if parts.len() == 1 {
            return parts[0];
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("row counts differ");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("column counts differ");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(v, Op::SliceCols(a, start, len))
    }

    /// Column means as a `1 x c` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = x.mean_axis(Axis(0)).expect("empty matrix").insert_axis(Axis(0));
        self.push(v, Op::MeanRows(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn pick(&mut self, a: Var, row: usize, col: usize) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a)[[row, col]]);
        self.push(v, Op::Pick(a, row, col))
    }

    /// Row-wise softmax over the columns where `mask` is true; masked
    /// columns get probability exactly zero.
    pub fn softmax_masked(&mut self, a: Var, mask: &[bool]) -> Var {
        let x = self.value(a);
        assert_eq!(x.ncols(), mask.len());
        let mut v = Array2::zeros(x.raw_dim());
        for (r, row) in x.rows().into_iter().enumerate() {
            let (p, _, _) = masked_softmax_row(row, mask);
            for (c, pv) in p.into_iter().enumerate() {
                v[[r, c]] = pv;
            }
        }
        self.push(v, Op::SoftmaxMasked(a))
    }

    /// Row-wise log-softmax over unmasked columns; masked columns hold 0 and
    /// carry no gradient.
    pub fn log_softmax_masked(&mut self, a: Var, mask: &[bool]) -> Var {
        let x = self.value(a);
        assert_eq!(x.ncols(), mask.len());
        let mut v = Array2::zeros(x.raw_dim());
        for (r, row) in x.rows().into_iter().enumerate() {
            let (_, max, z) = masked_softmax_row(row, mask);
            let lz = max + z.ln();
            for (c, &m) in mask.iter().enumerate() {
                if m {
                    v[[r, c]] = row[c] - lz;
                }
            }
        }
        self.push(v, Op::LogSoftmaxMasked(a, mask.to_vec()))
    }

    /// Reverse pass from scalar `loss`; returns parameter adjoints.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).dim(), (1, 1), "loss must be a scalar");
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; self.values.len()];
        adj[loss.0] = Some(Array2::ones((1, 1)));
        let mut grads = vec![None; self.params.len()];

        fn acc(adj: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut adj[v.0] {
                Some(a) => *a += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Param(id) => grads[*id] = Some(g),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *b, -&g);
                    acc(&mut adj, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::AddRow(a, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut adj, *b, gb);
                    acc(&mut adj, *a, g);
                }
                Op::Scale(a, s) => acc(&mut adj, *a, g * *s),
                Op::AddScalar(a) => acc(&mut adj, *a, g),
                Op::Relu(a) => {
                    let mut g = g;
                    g.zip_mut_with(self.value(*a), |gv, &x| {
                        if x <= 0.0 {
                            *gv = 0.0
                        }
                    });
                    acc(&mut adj, *a, g);
                }
                Op::Tanh(a) => {
                    let mut g = g;
                    g.zip_mut_with(&self.values[i], |gv, &y| *gv *= 1.0 - y * y);
                    acc(&mut adj, *a, g);
                }
                Op::Exp(a) => acc(&mut adj, *a, g * &self.values[i]),
                Op::Powi(a, p) => {
                    let mut g = g;
                    let p = *p;
                    g.zip_mut_with(self.value(*a), |gv, &x| *gv *= p as f64 * x.powi(p - 1));
                    acc(&mut adj, *a, g);
                }
                Op::ConcatCols(parts) => {
                    let mut c = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        acc(&mut adj, *p, g.slice(s![.., c..c + w]).to_owned());
                        c += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut r = 0;
                    for p in parts {
                        let h = self.value(*p).nrows();
                        acc(&mut adj, *p, g.slice(s![r..r + h, ..]).to_owned());
                        r += h;
                    }
                }
                Op::SliceCols(a, start, len) => {
                    let mut full = Array2::zeros(self.value(*a).raw_dim());
                    full.slice_mut(s![.., *start..*start + *len]).assign(&g);
                    acc(&mut adj, *a, full);
                }
                Op::MeanRows(a) => {
                    let n = self.value(*a).nrows();
                    let row = g.row(0).to_owned() / n as f64;
                    let full = row.broadcast(self.value(*a).raw_dim()).unwrap().to_owned();
                    acc(&mut adj, *a, full);
                }
                Op::Transpose(a) => acc(&mut adj, *a, g.t().to_owned()),
                Op::Sum(a) => {
                    let full = Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]]);
                    acc(&mut adj, *a, full);
                }
                Op::Pick(a, r, c) => {
                    let mut full = Array2::zeros(self.value(*a).raw_dim());
                    full[[*r, *c]] = g[[0, 0]];
                    acc(&mut adj, *a, full);
                }
                Op::SoftmaxMasked(a) => {
                    let y = &self.values[i];
                    let mut ga = Array2::zeros(y.raw_dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = y.row(r).iter().zip(g.row(r)).map(|(p, gv)| p * gv).sum();
                        for c in 0..y.ncols() {
                            ga[[r, c]] = y[[r, c]] * (g[[r, c]] - dot);
                        }
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::LogSoftmaxMasked(a, mask) => {
                    let y = &self.values[i];
                    let mut ga = Array2::zeros(y.raw_dim());
                    for r in 0..y.nrows() {
                        let gsum: f64 = (0..y.ncols()).filter(|&c| mask[c]).map(|c| g[[r, c]]).sum();
                        for c in 0..y.ncols() {
                            if mask[c] {
                                ga[[r, c]] = g[[r, c]] - y[[r, c]].exp() * gsum;
                            }
                        }
                    }
                    acc(&mut adj, *a, ga);
                }
            }
        }
        Gradients { grads }
    }
}
