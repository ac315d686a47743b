//! Minimal reverse-mode differentiation over dense matrices.

use ndarray::{Array2, Axis};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Scale(Var, f64),
    Add(Var, Var),
    SoftmaxRows(Var),
    /// Column vector plus a `1 x 1` scalar broadcast.
    AddScalar(Var, Var),
    /// `z_k = x[a_k] - x[b_k]` over a column vector.
    PairDiff(Var, Vec<(usize, usize)>),
    /// `sum_k -[mu_k ln s(z_k) + (1 - mu_k) ln s(-z_k)]`, `s` the logistic function.
    LogisticLoss(Var, Vec<f64>),
    /// `sum_k (z_k - t_k)^2`
    SquaredError(Var, Vec<f64>),
}

#[derive(Clone, Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn scalar(v: f64) -> Array2<f64> {
    Array2::from_elem((1, 1), v)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a) * s;
        self.push(v, Op::Scale(a, s))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn add_scalar(&mut self, a: Var, s: Var) -> Var {
        let v = self.value(a) + self.value(s)[[0, 0]];
        self.push(v, Op::AddScalar(a, s))
    }

    pub fn pair_diff(&mut self, x: Var, pairs: &[(usize, usize)]) -> Var {
        let xv = self.value(x);
        let v = Array2::from_shape_fn((pairs.len(), 1), |(k, _)| xv[[pairs[k].0, 0]] - xv[[pairs[k].1, 0]]);
        self.push(v, Op::PairDiff(x, pairs.to_vec()))
    }

    pub fn logistic_loss(&mut self, z: Var, mu: &[f64]) -> Var {
        let zv = self.value(z);
        let total: f64 = zv.iter().zip(mu).map(|(&z, &m)| m * softplus(-z) + (1.0 - m) * softplus(z)).sum();
        self.push(scalar(total), Op::LogisticLoss(z, mu.to_vec()))
    }

    pub fn squared_error(&mut self, z: Var, target: &[f64]) -> Var {
        let zv = self.value(z);
        let total: f64 = zv.iter().zip(target).map(|(&z, &t)| (z - t) * (z - t)).sum();
        self.push(scalar(total), Op::SquaredError(z, target.to_vec()))
    }

    /// Gradients of the scalar `out` with respect to every node.
    pub fn backward(&self, out: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Array2::ones(self.value(out).raw_dim()));
        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].clone() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.dot(self.value(*b));
                    let gb = g.t().dot(self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, &g * *s),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[idx].value;
                    let mut ga = Array2::zeros(y.raw_dim());
                    for ((mut out_row, y_row), g_row) in ga.axis_iter_mut(Axis(0)).zip(y.axis_iter(Axis(0))).zip(g.axis_iter(Axis(0))) {
                        let dot: f64 = y_row.iter().zip(g_row.iter()).map(|(y, g)| y * g).sum();
                        for ((o, &yv), &gv) in out_row.iter_mut().zip(y_row.iter()).zip(g_row.iter()) {
                            *o = yv * (gv - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::AddScalar(a, s) => {
                    let gs = scalar(g.sum());
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *s, gs);
                }
                Op::PairDiff(x, pairs) => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    for (k, &(a, b)) in pairs.iter().enumerate() {
                        gx[[a, 0]] += g[[k, 0]];
                        gx[[b, 0]] -= g[[k, 0]];
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::LogisticLoss(z, mu) => {
                    let s = g[[0, 0]];
                    let zv = self.value(*z);
                    let gz = Array2::from_shape_fn(zv.raw_dim(), |(k, c)| s * (sigmoid(zv[[k, c]]) - mu[k]));
                    accumulate(&mut grads, *z, gz);
                }
                Op::SquaredError(z, t) => {
                    let s = g[[0, 0]];
                    let zv = self.value(*z);
                    let gz = Array2::from_shape_fn(zv.raw_dim(), |(k, c)| 2.0 * s * (zv[[k, c]] - t[k]));
                    accumulate(&mut grads, *z, gz);
                }
            }
        }
        Gradients(grads)
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

pub struct Gradients(Vec<Option<Array2<f64>>>);

impl Gradients {
    /// Gradient for `v`, zero-shaped like `like` when `v` did not influence the output.
    pub fn get(&self, v: Var, like: &Array2<f64>) -> Array2<f64> {
        self.0[v.0].clone().unwrap_or_else(|| Array2::zeros(like.raw_dim()))
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}
