//! A minimal reverse-mode tape over a closed set of matrix primitives.
//!
//! Values are recorded in topological order as primitives are applied, so a
//! single reverse sweep over the node list computes every gradient. A [`Var`]
//! is a plain index into the tape that produced it; mixing handles from two
//! tapes is a logic error.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{log_sum_exp, Matrix};

/// Guard added to the batch standard deviation before dividing.
pub const STANDARDIZE_EPS: f64 = 1e-12;

/// Handle to a recorded value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
}

/// Axis collapsed by a reduction. `Rows` sums down each column (r×c → 1×c),
/// `Cols` sums along each row (r×c → r×1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
    All,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy {
        input: Var,
        scalar: Var,
    },
    AddRow {
        input: Var,
        row: Var,
    },
    MulRow {
        input: Var,
        row: Var,
    },
    Relu(Var),
    Transpose(Var),
    GatherRows {
        input: Var,
        indices: Vec<usize>,
    },
    ConcatRows(Vec<Var>),
    Log(Var),
    Exp(Var),
    RowSoftmax(Var),
    Standardize {
        input: Var,
        centered: Matrix,
        scale: Vec<f64>,
        std: Vec<f64>,
    },
    ColNormalize {
        input: Var,
        norms: Vec<f64>,
    },
    BatchNorm {
        input: Var,
        scale: Vec<f64>,
    },
    Reduce {
        input: Var,
        kind: ReduceKind,
        axis: Axis,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Matrix,
    },
    BceWithLogits {
        logits: Var,
        labels: Vec<f64>,
    },
    Dropout {
        input: Var,
        mask: Matrix,
    },
    Custom(Vec<(Var, Matrix)>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Append-only record of primitive applications.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward sweep, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `shape` if nothing flowed into it.
    pub fn wrt_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v).cloned().unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

fn dim_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Dimension {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op: Op, value: Matrix, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input value. Parameters and constants are both leaves;
    /// a constant is simply a leaf whose gradient is never read.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        assert!(value.is_finite(), "leaf values must be finite");
        self.nodes.push(Node { op: Op::Leaf, value });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), value, "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        self.push(Op::Add(a, b), value, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        self.push(Op::Sub(a, b), value, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        self.push(Op::Mul(a, b), value, "mul")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).scale(s);
        self.push(Op::Scale(a, s), value, "scale")
    }

    /// Multiplies every entry of `input` by the 1x1 value `scalar`.
    pub fn scale_by(&mut self, input: Var, scalar: Var) -> Result<Var> {
        let s = self.value(scalar);
        if s.shape() != (1, 1) {
            return Err(dim_err("scale_by", self.value(input), s));
        }
        let value = self.value(input).scale(s.item());
        self.push(Op::ScaleBy { input, scalar }, value, "scale_by")
    }

    /// Adds the 1×c row vector `row` to every row of `input`.
    pub fn add_row(&mut self, input: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(input), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(dim_err("add_row", x, r));
        }
        let mut value = x.clone();
        for i in 0..value.rows() {
            for (v, b) in value.row_mut(i).iter_mut().zip(r.data()) {
                *v += b;
            }
        }
        self.push(Op::AddRow { input, row }, value, "add_row")
    }

    /// Multiplies column `c` of `input` by `row[c]`.
    pub fn mul_row(&mut self, input: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(input), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(dim_err("mul_row", x, r));
        }
        let mut value = x.clone();
        for i in 0..value.rows() {
            for (v, b) in value.row_mut(i).iter_mut().zip(r.data()) {
                *v *= b;
            }
        }
        self.push(Op::MulRow { input, row }, value, "mul_row")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(Op::Relu(a), value, "relu")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value, "transpose")
    }

    /// Selects rows by index; repeated indices accumulate on the way back.
    pub fn gather_rows(&mut self, input: Var, indices: &[usize]) -> Result<Var> {
        let x = self.value(input);
        if let Some(&bad) = indices.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::precondition(
                "gather_rows",
                alloc::format!("row index {bad} out of range for {} rows", x.rows()),
            ));
        }
        let value = x.select_rows(indices);
        self.push(
            Op::GatherRows {
                input,
                indices: indices.to_vec(),
            },
            value,
            "gather_rows",
        )
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::precondition("concat_rows", "no inputs"));
        }
        let refs: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::vstack(&refs)?;
        self.push(Op::ConcatRows(parts.to_vec()), value, "concat_rows")
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.data().iter().any(|&v| v <= 0.0) {
            return Err(Error::precondition("log", "argument must be positive"));
        }
        let value = x.map(libm::log);
        self.push(Op::Log(a), value, "log")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(libm::exp);
        self.push(Op::Exp(a), value, "exp")
    }

    /// Softmax along each row, shifted by the row maximum before exponentiating.
    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::precondition("row_softmax", "empty input"));
        }
        let mut value = x.clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        self.push(Op::RowSoftmax(a), value, "row_softmax")
    }

    /// Per-column standardization along the batch axis:
    /// `(x - mean) / (std + 1e-12)` with the population (divide-by-N) std.
    pub fn batch_standardize(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (n, d) = x.shape();
        if n < 2 {
            return Err(Error::precondition(
                "batch_standardize",
                alloc::format!("batch size {n} < 2"),
            ));
        }
        let means: Vec<f64> = x.col_sums().into_iter().map(|s| s / n as f64).collect();
        let centered = Matrix::from_fn(n, d, |r, c| x[(r, c)] - means[c]);
        let std: Vec<f64> = (0..d)
            .map(|c| {
                let ss: f64 = (0..n).map(|r| centered[(r, c)] * centered[(r, c)]).sum();
                libm::sqrt(ss / n as f64)
            })
            .collect();
        let scale: Vec<f64> = std.iter().map(|s| s + STANDARDIZE_EPS).collect();
        let value = Matrix::from_fn(n, d, |r, c| centered[(r, c)] / scale[c]);
        self.push(
            Op::Standardize {
                input: a,
                centered,
                scale,
                std,
            },
            value,
            "batch_standardize",
        )
    }

    /// Batch normalization without affine terms:
    /// `(x - mean) / sqrt(var + eps)` per column, population variance.
    pub fn batch_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        let x = self.value(a);
        let (n, d) = x.shape();
        if n < 2 {
            return Err(Error::precondition("batch_norm", alloc::format!("batch size {n} < 2")));
        }
        if !(eps > 0.0) {
            return Err(Error::precondition("batch_norm", "eps must be positive"));
        }
        let means: Vec<f64> = x.col_sums().into_iter().map(|s| s / n as f64).collect();
        let scale: Vec<f64> = (0..d)
            .map(|c| {
                let ss: f64 = (0..n).map(|r| (x[(r, c)] - means[c]) * (x[(r, c)] - means[c])).sum();
                libm::sqrt(ss / n as f64 + eps)
            })
            .collect();
        let value = Matrix::from_fn(n, d, |r, c| (x[(r, c)] - means[c]) / scale[c]);
        self.push(Op::BatchNorm { input: a, scale }, value, "batch_norm")
    }

    /// Scales each column to unit L2 norm; all-zero columns stay zero.
    pub fn col_normalize(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (n, d) = x.shape();
        let norms: Vec<f64> = (0..d)
            .map(|c| libm::sqrt((0..n).map(|r| x[(r, c)] * x[(r, c)]).sum::<f64>()))
            .collect();
        let value = Matrix::from_fn(n, d, |r, c| if norms[c] > 0.0 { x[(r, c)] / norms[c] } else { 0.0 });
        self.push(Op::ColNormalize { input: a, norms }, value, "col_normalize")
    }

    pub fn reduce(&mut self, a: Var, kind: ReduceKind, axis: Axis) -> Result<Var> {
        let x = self.value(a);
        let (n, d) = x.shape();
        let mut value = match axis {
            Axis::Rows => Matrix::row_vector(&x.col_sums()),
            Axis::Cols => Matrix::col_vector(&x.row_sums()),
            Axis::All => Matrix::scalar(x.sum()),
        };
        if kind == ReduceKind::Mean {
            let count = match axis {
                Axis::Rows => n,
                Axis::Cols => d,
                Axis::All => n * d,
            };
            if count == 0 {
                return Err(Error::precondition("reduce", "mean over an empty axis"));
            }
            value = value.scale(1.0 / count as f64);
        }
        self.push(Op::Reduce { input: a, kind, axis }, value, "reduce")
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        self.reduce(a, ReduceKind::Sum, Axis::All)
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        self.reduce(a, ReduceKind::Mean, Axis::All)
    }

    /// Mean softmax cross-entropy of each logit row against its target class.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let x = self.value(logits);
        if x.rows() != targets.len() || x.rows() == 0 {
            return Err(Error::precondition(
                "cross_entropy",
                alloc::format!("{} logit rows for {} targets", x.rows(), targets.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= x.cols()) {
            return Err(Error::precondition(
                "cross_entropy",
                alloc::format!("target {bad} out of range for {} classes", x.cols()),
            ));
        }
        let mut probs = x.clone();
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            total += log_sum_exp(x.row(r)) - x[(r, t)];
            softmax_in_place(probs.row_mut(r));
        }
        let value = Matrix::scalar(total / targets.len() as f64);
        self.push(
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            value,
            "cross_entropy",
        )
    }

    /// Mean binary cross-entropy of an n×1 logit column against 0/1 labels.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var> {
        let x = self.value(logits);
        if x.cols() != 1 || x.rows() != labels.len() || labels.is_empty() {
            return Err(Error::precondition(
                "bce_with_logits",
                alloc::format!("logits {:?} for {} labels", x.shape(), labels.len()),
            ));
        }
        let total: f64 = x.data().iter().zip(labels).map(|(&z, &y)| softplus(z) - y * z).sum();
        let value = Matrix::scalar(total / labels.len() as f64);
        self.push(
            Op::BceWithLogits {
                logits,
                labels: labels.to_vec(),
            },
            value,
            "bce_with_logits",
        )
    }

    /// Multiplies by a fixed (already rescaled) mask.
    pub fn dropout(&mut self, input: Var, mask: Matrix) -> Result<Var> {
        let value = self.value(input).hadamard(&mask)?;
        self.push(Op::Dropout { input, mask }, value, "dropout")
    }

    /// Records a scalar whose gradient with respect to each listed input was
    /// computed outside the tape. Used for losses with detached inner solvers.
    pub fn custom_scalar(&mut self, value: f64, inputs: Vec<(Var, Matrix)>) -> Result<Var> {
        for (v, g) in &inputs {
            if self.shape(*v) != g.shape() {
                return Err(dim_err("custom_scalar", self.value(*v), g));
            }
        }
        self.push(Op::Custom(inputs), Matrix::scalar(value), "custom_scalar")
    }

    /// Reverse sweep from a 1x1 output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.shape() != (1, 1) {
            return Err(Error::precondition("backward", "output must be 1x1"));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let mut acc = |v: Var, contrib: Matrix| -> Result<()> {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&contrib),
                slot @ None => {
                    *slot = Some(contrib);
                    Ok(())
                }
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = g.matmul_t(bv)?;
                let gb = av.t_matmul(g)?;
                acc(*a, ga)?;
                acc(*b, gb)?;
            }
            Op::Add(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.clone())?;
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.scale(-1.0))?;
            }
            Op::Mul(a, b) => {
                let ga = g.hadamard(self.value(*b))?;
                let gb = g.hadamard(self.value(*a))?;
                acc(*a, ga)?;
                acc(*b, gb)?;
            }
            Op::Scale(a, s) => acc(*a, g.scale(*s))?,
            Op::ScaleBy { input, scalar } => {
                let s = self.value(*scalar).item();
                let gs = g.frobenius_dot(self.value(*input))?;
                acc(*input, g.scale(s))?;
                acc(*scalar, Matrix::scalar(gs))?;
            }
            Op::AddRow { input, row } => {
                acc(*input, g.clone())?;
                acc(*row, Matrix::row_vector(&g.col_sums()))?;
            }
            Op::MulRow { input, row } => {
                let (x, r) = (self.value(*input), self.value(*row));
                let gx = Matrix::from_fn(g.rows(), g.cols(), |i, c| g[(i, c)] * r.data()[c]);
                let mut gr = vec![0.0; r.cols()];
                for i in 0..g.rows() {
                    for c in 0..g.cols() {
                        gr[c] += g[(i, c)] * x[(i, c)];
                    }
                }
                acc(*input, gx)?;
                acc(*row, Matrix::row_vector(&gr))?;
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                acc(*a, g.zip_map(x, "relu", |gi, xi| if xi > 0.0 { gi } else { 0.0 })?)?;
            }
            Op::Transpose(a) => acc(*a, g.transpose())?,
            Op::GatherRows { input, indices } => {
                let x = self.value(*input);
                let mut gx = Matrix::zeros(x.rows(), x.cols());
                for (r, &i) in indices.iter().enumerate() {
                    for (t, s) in gx.row_mut(i).iter_mut().zip(g.row(r)) {
                        *t += s;
                    }
                }
                acc(*input, gx)?;
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    let idx: Vec<usize> = (start..start + rows).collect();
                    acc(p, g.select_rows(&idx))?;
                    start += rows;
                }
            }
            Op::Log(a) => {
                let x = self.value(*a);
                acc(*a, g.zip_map(x, "log", |gi, xi| gi / xi)?)?;
            }
            Op::Exp(a) => acc(*a, g.hadamard(&node.value)?)?,
            Op::RowSoftmax(a) => {
                let y = &node.value;
                let mut gx = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let inner: f64 = y.row(r).iter().zip(g.row(r)).map(|(a, b)| a * b).sum();
                    for c in 0..y.cols() {
                        gx[(r, c)] = y[(r, c)] * (g[(r, c)] - inner);
                    }
                }
                acc(*a, gx)?;
            }
            Op::Standardize {
                input,
                centered,
                scale,
                std,
            } => {
                let (n, d) = centered.shape();
                let nf = n as f64;
                let mut gx = Matrix::zeros(n, d);
                for c in 0..d {
                    let s = scale[c];
                    let gxc: f64 = (0..n).map(|r| g[(r, c)] * centered[(r, c)]).sum();
                    // d/dxc through std; zero for a constant column.
                    let through_std = if std[c] > 0.0 {
                        -gxc / (s * s) / (nf * std[c])
                    } else {
                        0.0
                    };
                    let h: Vec<f64> = (0..n).map(|r| g[(r, c)] / s + through_std * centered[(r, c)]).collect();
                    let mean_h = h.iter().sum::<f64>() / nf;
                    for r in 0..n {
                        gx[(r, c)] = h[r] - mean_h;
                    }
                }
                acc(*input, gx)?;
            }
            Op::BatchNorm { input, scale } => {
                let y = &node.value;
                let (n, d) = y.shape();
                let nf = n as f64;
                let mut gx = Matrix::zeros(n, d);
                for c in 0..d {
                    let mean_g = (0..n).map(|r| g[(r, c)]).sum::<f64>() / nf;
                    let mean_gy = (0..n).map(|r| g[(r, c)] * y[(r, c)]).sum::<f64>() / nf;
                    for r in 0..n {
                        gx[(r, c)] = (g[(r, c)] - mean_g - y[(r, c)] * mean_gy) / scale[c];
                    }
                }
                acc(*input, gx)?;
            }
            Op::ColNormalize { input, norms } => {
                let y = &node.value;
                let (n, d) = y.shape();
                let mut gx = Matrix::zeros(n, d);
                for c in 0..d {
                    if norms[c] == 0.0 {
                        continue;
                    }
                    let proj: f64 = (0..n).map(|r| g[(r, c)] * y[(r, c)]).sum();
                    for r in 0..n {
                        gx[(r, c)] = (g[(r, c)] - y[(r, c)] * proj) / norms[c];
                    }
                }
                acc(*input, gx)?;
            }
            Op::Reduce { input, kind, axis } => {
                let (n, d) = self.shape(*input);
                let factor = match (kind, axis) {
                    (ReduceKind::Sum, _) => 1.0,
                    (ReduceKind::Mean, Axis::Rows) => 1.0 / n as f64,
                    (ReduceKind::Mean, Axis::Cols) => 1.0 / d as f64,
                    (ReduceKind::Mean, Axis::All) => 1.0 / (n * d) as f64,
                };
                let gx = Matrix::from_fn(n, d, |r, c| {
                    factor
                        * match axis {
                            Axis::Rows => g[(0, c)],
                            Axis::Cols => g[(r, 0)],
                            Axis::All => g[(0, 0)],
                        }
                });
                acc(*input, gx)?;
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let scale = g.item() / targets.len() as f64;
                let mut gx = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    gx[(r, t)] -= 1.0;
                }
                acc(*logits, gx.scale(scale))?;
            }
            Op::BceWithLogits { logits, labels } => {
                let scale = g.item() / labels.len() as f64;
                let z = self.value(*logits);
                let gx = Matrix::from_fn(z.rows(), 1, |r, _| (sigmoid(z[(r, 0)]) - labels[r]) * scale);
                acc(*logits, gx)?;
            }
            Op::Dropout { input, mask } => acc(*input, g.hadamard(mask)?)?,
            Op::Custom(inputs) => {
                let s = g.item();
                for (v, grad) in inputs {
                    acc(*v, grad.scale(s))?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}
