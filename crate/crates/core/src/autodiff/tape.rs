use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::sparse::{self, SelfLoopLayout, SparsePattern};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable leaf. `decay` marks it for weight decay in the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parameter {
    pub var: Var,
    pub decay: bool,
}

/// Recorded operation. Sparse matrices appear on the tape as `nnz x 1`
/// value columns; the sparse ops carry the pattern they are defined over.
#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    SoftmaxRows(Var),
    SoftmaxCols(Var),
    SoftmaxVector(Var),
    RowSelect(Var, Vec<usize>),
    StackRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SelectCol(Var, usize),
    Transpose(Var),
    MeanRows(Var),
    Sum(Var),
    Mean(Var),
    Bilinear {
        h: Var,
        q: Var,
        s: Var,
    },
    MulCol {
        col: Var,
        mat: Var,
    },
    NormalizeRows {
        input: Var,
        guard: f64,
    },
    Spmm {
        pattern: Arc<SparsePattern>,
        values: Var,
        rhs: Var,
    },
    SparseCombine {
        maps: Arc<Vec<Vec<usize>>>,
        inputs: Vec<Var>,
        weights: Var,
        col: usize,
    },
    SparseNormalize {
        layout: Arc<SelfLoopLayout>,
        values: Var,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Array2<f64>,
    requires_grad: bool,
}

/// Append-only record of a forward computation. Nodes are stored in creation
/// order, which is a topological order; [`Tape::backward`] walks it in
/// reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Array2<f64>>>,
    params: Vec<Parameter>,
    differentiated: bool,
    track_branches: bool,
    branch_hash: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn shape_of(a: &Array2<f64>) -> (usize, usize) {
    a.dim()
}

/// Sum with Neumaier compensation; the result does not depend on chunking.
fn compensated_sum<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn softmax_lane(lane: &mut [f64]) {
    let max = lane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in lane.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in lane.iter_mut() {
        *v /= total;
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            branch_hash: FNV_OFFSET,
            ..Self::default()
        }
    }

    /// Records a fingerprint of every non-differentiable branch decision
    /// (relu sign, clamp activity, attention guard). Used by gradient checks
    /// to skip entries whose perturbation crosses a kink.
    pub fn with_branch_tracking() -> Self {
        Self {
            track_branches: true,
            ..Self::new()
        }
    }

    pub fn branch_signature(&self) -> u64 {
        self.branch_hash
    }

    fn note_branches(&mut self, bits: impl Iterator<Item = bool>) {
        if !self.track_branches {
            return;
        }
        let mut h = self.branch_hash ^ self.nodes.len() as u64;
        for b in bits {
            h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
        }
        self.branch_hash = h;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Array2<f64>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<&Array2<f64>> {
        self.nodes
            .get(v.0)
            .map(|n| &n.value)
            .ok_or_else(|| Error::shape("tape", format!("unknown node {}", v.0)))
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    /// A leaf that gradients do not flow into.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(Op::Leaf, value, &[])
    }

    /// A trainable leaf.
    pub fn parameter(&mut self, value: Array2<f64>, decay: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad: true,
        });
        self.grads.push(None);
        let var = Var(self.nodes.len() - 1);
        self.params.push(Parameter { var, decay });
        var
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.check(a)?, self.check(b)?);
        if av.ncols() != bv.nrows() {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", shape_of(av), shape_of(bv)),
            ));
        }
        let out = av.dot(bv);
        Ok(self.push(Op::MatMul(a, b), out, &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (av, bv) = (self.check(a)?, self.check(b)?);
        if av.dim() != bv.dim() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", shape_of(av), shape_of(bv)),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        Ok(self.push(Op::Add(a, b), out, &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        Ok(self.push(Op::Sub(a, b), out, &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        Ok(self.push(Op::Mul(a, b), out, &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.check(a)? * c;
        Ok(self.push(Op::Scale(a, c), out, &[a]))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.check(a)? + c;
        Ok(self.push(Op::AddScalar(a), out, &[a]))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.check(a)?.mapv(|x| if x > 0.0 { x } else { 0.0 });
        if self.track_branches {
            let bits: Vec<bool> = self.value(a).iter().map(|&x| x > 0.0).collect();
            self.note_branches(bits.into_iter());
        }
        Ok(self.push(Op::Relu(a), out, &[a]))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.check(a)?.mapv(f64::tanh);
        Ok(self.push(Op::Tanh(a), out, &[a]))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.check(a)?.mapv(sigmoid);
        Ok(self.push(Op::Sigmoid(a), out, &[a]))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let out = self.check(a)?.mapv(f64::ln);
        Ok(self.push(Op::Log(a), out, &[a]))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let out = self.check(a)?.mapv(|x| x.clamp(lo, hi));
        if self.track_branches {
            let bits: Vec<bool> = self
                .value(a)
                .iter()
                .map(|&x| (lo..=hi).contains(&x))
                .collect();
            self.note_branches(bits.into_iter());
        }
        Ok(self.push(Op::Clamp(a, lo, hi), out, &[a]))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let mut out = self.check(a)?.as_standard_layout().into_owned();
        for mut row in out.rows_mut() {
            softmax_lane(row.as_slice_mut().expect("standard layout"));
        }
        Ok(self.push(Op::SoftmaxRows(a), out, &[a]))
    }

    /// Softmax over each column independently.
    pub fn softmax_cols(&mut self, a: Var) -> Result<Var> {
        let src = self.check(a)?;
        let mut out = src.clone();
        for mut col in out.columns_mut() {
            let mut lane: Vec<f64> = col.to_vec();
            softmax_lane(&mut lane);
            for (o, v) in col.iter_mut().zip(lane) {
                *o = v;
            }
        }
        Ok(self.push(Op::SoftmaxCols(a), out, &[a]))
    }

    /// Softmax over all entries of a row or column vector.
    pub fn softmax_vector(&mut self, a: Var) -> Result<Var> {
        let src = self.check(a)?;
        if src.nrows() != 1 && src.ncols() != 1 {
            return Err(Error::shape(
                "softmax_vector",
                format!("{:?} is not a vector", src.dim()),
            ));
        }
        let mut out = src.as_standard_layout().to_owned();
        softmax_lane(out.as_slice_mut().expect("standard layout"));
        Ok(self.push(Op::SoftmaxVector(a), out, &[a]))
    }

    pub fn row_select(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let src = self.check(a)?;
        if let Some(&r) = rows.iter().find(|&&r| r >= src.nrows()) {
            return Err(Error::shape(
                "row_select",
                format!("row {r} of a {}-row matrix", src.nrows()),
            ));
        }
        let out = src.select(Axis(0), rows);
        Ok(self.push(Op::RowSelect(a, rows.to_vec()), out, &[a]))
    }

    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let views: Vec<_> = parts
            .iter()
            .map(|&p| self.check(p).map(|v| v.view()))
            .collect::<Result<_>>()?;
        let out = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::shape("stack_rows", e.to_string()))?;
        Ok(self.push(Op::StackRows(parts.to_vec()), out, parts))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let views: Vec<_> = parts
            .iter()
            .map(|&p| self.check(p).map(|v| v.view()))
            .collect::<Result<_>>()?;
        let out = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| Error::shape("concat_cols", e.to_string()))?
            .as_standard_layout()
            .into_owned();
        Ok(self.push(Op::ConcatCols(parts.to_vec()), out, parts))
    }

    pub fn select_col(&mut self, a: Var, col: usize) -> Result<Var> {
        let src = self.check(a)?;
        if col >= src.ncols() {
            return Err(Error::shape(
                "select_col",
                format!("column {col} of a {}-column matrix", src.ncols()),
            ));
        }
        let out = src.column(col).to_owned().insert_axis(Axis(1));
        Ok(self.push(Op::SelectCol(a, col), out, &[a]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.check(a)?.t().as_standard_layout().to_owned();
        Ok(self.push(Op::Transpose(a), out, &[a]))
    }

    /// Column means: `N x M -> 1 x M`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let src = self.check(a)?;
        if src.nrows() == 0 {
            return Err(Error::shape("mean_rows", "empty matrix"));
        }
        let n = src.nrows() as f64;
        let out = Array2::from_shape_fn((1, src.ncols()), |(_, j)| {
            compensated_sum(src.column(j).iter()) / n
        });
        Ok(self.push(Op::MeanRows(a), out, &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = compensated_sum(self.check(a)?.iter());
        Ok(self.push(Op::Sum(a), Array2::from_elem((1, 1), s), &[a]))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let src = self.check(a)?;
        if src.is_empty() {
            return Err(Error::shape("mean", "empty matrix"));
        }
        // Shifted by the first entry so a constant input yields itself exactly.
        let first = src.iter().next().copied().unwrap_or(0.0);
        let shifted: Vec<f64> = src.iter().map(|v| v - first).collect();
        let s = first + compensated_sum(shifted.iter()) / src.len() as f64;
        Ok(self.push(Op::Mean(a), Array2::from_elem((1, 1), s), &[a]))
    }

    /// Row-wise bilinear scores `h_i Q s^T` for `h: N x M`, `Q: M x M`,
    /// `s: 1 x M`; returns `N x 1`.
    pub fn bilinear(&mut self, h: Var, q: Var, s: Var) -> Result<Var> {
        let (hv, qv, sv) = (self.check(h)?, self.check(q)?, self.check(s)?);
        let m = hv.ncols();
        if qv.dim() != (m, m) || sv.dim() != (1, m) {
            return Err(Error::shape(
                "bilinear",
                format!("h {:?}, Q {:?}, s {:?}", hv.dim(), qv.dim(), sv.dim()),
            ));
        }
        let qs = qv.dot(&sv.t());
        let out = hv.dot(&qs);
        Ok(self.push(Op::Bilinear { h, q, s }, out, &[h, q, s]))
    }

    /// Scales every row of `mat` by the matching entry of the column `col`.
    pub fn mul_col(&mut self, col: Var, mat: Var) -> Result<Var> {
        let (cv, mv) = (self.check(col)?, self.check(mat)?);
        if cv.ncols() != 1 || cv.nrows() != mv.nrows() {
            return Err(Error::shape(
                "mul_col",
                format!("{:?} against {:?}", cv.dim(), mv.dim()),
            ));
        }
        let out = mv * cv;
        Ok(self.push(Op::MulCol { col, mat }, out, &[col, mat]))
    }

    /// Divides each row by its (signed) sum. Rows whose sum has magnitude
    /// below `guard` become uniform and pass no gradient.
    pub fn normalize_rows(&mut self, a: Var, guard: f64) -> Result<Var> {
        let src = self.check(a)?;
        let width = src.ncols();
        if width == 0 {
            return Err(Error::shape("normalize_rows", "zero columns"));
        }
        let mut out = src.clone();
        let mut guarded = Vec::with_capacity(src.nrows());
        for mut row in out.rows_mut() {
            let s: f64 = row.sum();
            if s.abs() < guard {
                row.fill(1.0 / width as f64);
                guarded.push(true);
            } else {
                row.mapv_inplace(|x| x / s);
                guarded.push(false);
            }
        }
        self.note_branches(guarded.into_iter());
        Ok(self.push(Op::NormalizeRows { input: a, guard }, out, &[a]))
    }

    /// Sparse-dense product `A X` where `A` has the given pattern and the
    /// `nnz x 1` stored values in `values`.
    pub fn spmm(&mut self, pattern: &Arc<SparsePattern>, values: Var, rhs: Var) -> Result<Var> {
        let (vv, xv) = (self.check(values)?, self.check(rhs)?);
        if vv.dim() != (pattern.nnz(), 1) {
            return Err(Error::shape(
                "spmm",
                format!("values {:?} for {} stored entries", vv.dim(), pattern.nnz()),
            ));
        }
        if xv.nrows() != pattern.n_cols() {
            return Err(Error::shape(
                "spmm",
                format!(
                    "{}x{} sparse times {:?}",
                    pattern.n_rows(),
                    pattern.n_cols(),
                    xv.dim()
                ),
            ));
        }
        let out = sparse::spmm(pattern, vv.as_slice().expect("column"), xv.view());
        Ok(self.push(
            Op::Spmm {
                pattern: pattern.clone(),
                values,
                rhs,
            },
            out,
            &[values, rhs],
        ))
    }

    /// `sum_i weights[i, col] * inputs[i]`, scattered onto a union pattern.
    /// `maps[i][k]` is the union position of entry `k` of input `i`.
    pub fn sparse_combine(
        &mut self,
        maps: &Arc<Vec<Vec<usize>>>,
        union_nnz: usize,
        inputs: &[Var],
        weights: Var,
        col: usize,
    ) -> Result<Var> {
        let wv = self.check(weights)?;
        if wv.nrows() != inputs.len() || col >= wv.ncols() || maps.len() != inputs.len() {
            return Err(Error::shape(
                "sparse_combine",
                format!(
                    "{} inputs, {} maps, weights {:?}, column {col}",
                    inputs.len(),
                    maps.len(),
                    wv.dim()
                ),
            ));
        }
        let mut out = vec![0.0; union_nnz];
        for (i, (&input, map)) in inputs.iter().zip(maps.iter()).enumerate() {
            let iv = self.check(input)?;
            if iv.dim() != (map.len(), 1) {
                return Err(Error::shape(
                    "sparse_combine",
                    format!("input {i} has shape {:?}, map has {}", iv.dim(), map.len()),
                ));
            }
            let w = self.value(weights)[[i, col]];
            for (&m, &x) in map.iter().zip(iv.iter()) {
                out[m] += w * x;
            }
        }
        let out = Array2::from_shape_vec((union_nnz, 1), out).expect("column");
        let mut deps = inputs.to_vec();
        deps.push(weights);
        Ok(self.push(
            Op::SparseCombine {
                maps: maps.clone(),
                inputs: inputs.to_vec(),
                weights,
                col,
            },
            out,
            &deps,
        ))
    }

    /// Symmetric GCN normalization of sparse values over `layout`.
    pub fn sparse_normalize(&mut self, layout: &Arc<SelfLoopLayout>, values: Var) -> Result<Var> {
        let vv = self.check(values)?;
        if vv.dim() != (layout.source_pos.len(), 1) {
            return Err(Error::shape(
                "sparse_normalize",
                format!(
                    "values {:?} for {} stored entries",
                    vv.dim(),
                    layout.source_pos.len()
                ),
            ));
        }
        let (out, _) = layout.normalize(vv.as_slice().expect("column"));
        let n = out.len();
        let out = Array2::from_shape_vec((n, 1), out).expect("column");
        Ok(self.push(
            Op::SparseNormalize {
                layout: layout.clone(),
                values,
            },
            out,
            &[values],
        ))
    }

    /// Accumulates `d loss / d node` for every node that depends on a
    /// parameter. `loss` must be `1 x 1`; a tape can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.differentiated {
            return Err(Error::BackwardTwice);
        }
        let lv = self.check(loss)?;
        if lv.dim() != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("loss has shape {:?}", lv.dim()),
            ));
        }
        self.differentiated = true;
        self.grads[loss.0] = Some(Array2::ones((1, 1)));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Gradient of the last differentiated loss with respect to `v`; zeros
    /// when `v` does not influence the loss.
    pub fn grad(&self, v: Var) -> Array2<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Array2::zeros(self.nodes[v.0].value.dim()),
        }
    }

    fn accumulate(&mut self, v: Var, delta: Array2<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(g) => *g += &delta,
            slot @ None => *slot = Some(delta),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&mut self, i: usize, g: &Array2<f64>) {
        // Split borrow: the op and values are read while grads are written.
        let node = &self.nodes[i];
        let y = &node.value;
        let mut updates: Vec<(Var, Array2<f64>)> = Vec::new();
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    updates.push((*a, g.dot(&val(*b).t())));
                }
                if self.wants(*b) {
                    updates.push((*b, val(*a).t().dot(g)));
                }
            }
            Op::Add(a, b) => {
                updates.push((*a, g.clone()));
                updates.push((*b, g.clone()));
            }
            Op::Sub(a, b) => {
                updates.push((*a, g.clone()));
                updates.push((*b, -g));
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    updates.push((*a, g * val(*b)));
                }
                if self.wants(*b) {
                    updates.push((*b, g * val(*a)));
                }
            }
            Op::Scale(a, c) => updates.push((*a, g * *c)),
            Op::AddScalar(a) => updates.push((*a, g.clone())),
            Op::Relu(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d = 0.0;
                    }
                });
                updates.push((*a, d));
            }
            Op::Tanh(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(y).for_each(|d, &t| *d *= 1.0 - t * t);
                updates.push((*a, d));
            }
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(y)
                    .for_each(|d, &s| *d *= s * (1.0 - s));
                updates.push((*a, d));
            }
            Op::Log(a) => updates.push((*a, g / val(*a))),
            Op::Clamp(a, lo, hi) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                    if x < *lo || x > *hi {
                        *d = 0.0;
                    }
                });
                updates.push((*a, d));
            }
            Op::SoftmaxRows(a) => {
                let mut d = g * y;
                for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                    let dot: f64 = drow.sum();
                    Zip::from(&mut drow)
                        .and(&yrow)
                        .for_each(|dv, &yv| *dv -= yv * dot);
                }
                updates.push((*a, d));
            }
            Op::SoftmaxCols(a) => {
                let mut d = g * y;
                for (mut dcol, ycol) in d.columns_mut().into_iter().zip(y.columns()) {
                    let dot: f64 = dcol.sum();
                    Zip::from(&mut dcol)
                        .and(&ycol)
                        .for_each(|dv, &yv| *dv -= yv * dot);
                }
                updates.push((*a, d));
            }
            Op::SoftmaxVector(a) => {
                let mut d = g * y;
                let dot: f64 = d.sum();
                Zip::from(&mut d).and(y).for_each(|dv, &yv| *dv -= yv * dot);
                updates.push((*a, d));
            }
            Op::RowSelect(a, rows) => {
                let mut d = Array2::zeros(val(*a).dim());
                for (k, &r) in rows.iter().enumerate() {
                    let mut target = d.row_mut(r);
                    target += &g.row(k);
                }
                updates.push((*a, d));
            }
            Op::StackRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let rows = val(p).nrows();
                    if self.wants(p) {
                        updates.push((p, g.slice(ndarray::s![start..start + rows, ..]).to_owned()));
                    }
                    start += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let cols = val(p).ncols();
                    if self.wants(p) {
                        updates.push((p, g.slice(ndarray::s![.., start..start + cols]).to_owned()));
                    }
                    start += cols;
                }
            }
            Op::SelectCol(a, col) => {
                let mut d = Array2::zeros(val(*a).dim());
                d.column_mut(*col).assign(&g.column(0));
                updates.push((*a, d));
            }
            Op::Transpose(a) => updates.push((*a, g.t().as_standard_layout().to_owned())),
            Op::MeanRows(a) => {
                let (n, m) = val(*a).dim();
                let row = g / n as f64;
                updates.push((*a, row.broadcast((n, m)).expect("1 x M").to_owned()));
            }
            Op::Sum(a) => updates.push((*a, Array2::from_elem(val(*a).dim(), g[[0, 0]]))),
            Op::Mean(a) => {
                let src = val(*a);
                let per = g[[0, 0]] / src.len() as f64;
                updates.push((*a, Array2::from_elem(src.dim(), per)));
            }
            Op::Bilinear { h, q, s } => {
                let (hv, qv, sv) = (val(*h), val(*q), val(*s));
                let qs = qv.dot(&sv.t()); // M x 1
                let dqs = hv.t().dot(g); // M x 1
                if self.wants(*h) {
                    updates.push((*h, g.dot(&qs.t())));
                }
                if self.wants(*q) {
                    updates.push((*q, dqs.dot(sv)));
                }
                if self.wants(*s) {
                    updates.push((*s, dqs.t().dot(qv)));
                }
            }
            Op::MulCol { col, mat } => {
                let (cv, mv) = (val(*col), val(*mat));
                if self.wants(*col) {
                    let d = (g * mv).sum_axis(Axis(1)).insert_axis(Axis(1));
                    updates.push((*col, d));
                }
                if self.wants(*mat) {
                    updates.push((*mat, g * cv));
                }
            }
            Op::NormalizeRows { input, guard } => {
                let src = val(*input);
                let mut d = Array2::zeros(src.dim());
                for ((mut drow, srow), (grow, yrow)) in d
                    .rows_mut()
                    .into_iter()
                    .zip(src.rows())
                    .zip(g.rows().into_iter().zip(y.rows()))
                {
                    let s: f64 = srow.sum();
                    if s.abs() < *guard {
                        continue;
                    }
                    let dot: f64 = grow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum();
                    Zip::from(&mut drow)
                        .and(&grow)
                        .for_each(|dv, &gv| *dv = (gv - dot) / s);
                }
                updates.push((*input, d));
            }
            Op::Spmm {
                pattern,
                values,
                rhs,
            } => {
                let (vv, xv) = (val(*values), val(*rhs));
                let vals = vv.as_slice().expect("column");
                let column = |d: Vec<f64>| {
                    let n = d.len();
                    Array2::from_shape_vec((n, 1), d).expect("column")
                };
                match (self.wants(*values), self.wants(*rhs)) {
                    (true, true) => {
                        let (dv, dx) = sparse::spmm_backward(pattern, vals, g.view(), xv.view());
                        updates.push((*values, column(dv)));
                        updates.push((*rhs, dx));
                    }
                    (true, false) => {
                        let dv = sparse::spmm_value_grad(pattern, g.view(), xv.view());
                        updates.push((*values, column(dv)));
                    }
                    (false, true) => {
                        updates.push((*rhs, sparse::spmm_transpose(pattern, vals, g.view())));
                    }
                    (false, false) => {}
                }
            }
            Op::SparseCombine {
                maps,
                inputs,
                weights,
                col,
            } => {
                let wv = val(*weights);
                let gs = g.as_slice().expect("column");
                let mut dw = Array2::zeros(wv.dim());
                for (i, (&input, map)) in inputs.iter().zip(maps.iter()).enumerate() {
                    let iv = val(input);
                    if self.wants(*weights) {
                        dw[[i, *col]] = map.iter().zip(iv.iter()).map(|(&m, &x)| gs[m] * x).sum();
                    }
                    if self.wants(input) {
                        let w = wv[[i, *col]];
                        let d: Vec<f64> = map.iter().map(|&m| w * gs[m]).collect();
                        updates.push((
                            input,
                            Array2::from_shape_vec((d.len(), 1), d).expect("column"),
                        ));
                    }
                }
                if self.wants(*weights) {
                    updates.push((*weights, dw));
                }
            }
            Op::SparseNormalize { layout, values } => {
                let d = sparse_normalize_grad(layout, val(*values), g);
                updates.push((*values, d));
            }
        }
        for (v, d) in updates {
            self.accumulate(v, d);
        }
    }
}

/// Backward rule of `D^{-1/2} (A + I) D^{-1/2}` with respect to the stored
/// values of `A`; degrees depend on the values.
fn sparse_normalize_grad(
    layout: &SelfLoopLayout,
    input: &Array2<f64>,
    g: &Array2<f64>,
) -> Array2<f64> {
    let pattern = &layout.pattern;
    let n = layout.diag_pos.len();
    let mut b = vec![0.0; pattern.nnz()];
    for (k, &v) in input.iter().enumerate() {
        b[layout.source_pos[k]] += v;
    }
    for &p in &layout.diag_pos {
        b[p] += 1.0;
    }
    let ptr = pattern.indptr();
    let rho: Vec<f64> = (0..n)
        .map(|r| 1.0 / b[ptr[r]..ptr[r + 1]].iter().sum::<f64>().sqrt())
        .collect();
    let gs = g.as_slice().expect("column");
    let mut d_rho = vec![0.0; n];
    let mut d_b = vec![0.0; pattern.nnz()];
    for (r, c, k) in pattern.entries() {
        let t = gs[k] * b[k];
        d_rho[r] += t * rho[c];
        d_rho[c] += t * rho[r];
        d_b[k] = gs[k] * rho[r] * rho[c];
    }
    // rho = deg^{-1/2}, deg = row sum of b.
    let d_deg: Vec<f64> = (0..n).map(|r| -0.5 * d_rho[r] * rho[r].powi(3)).collect();
    for (r, _, k) in pattern.entries() {
        d_b[k] += d_deg[r];
    }
    let out: Vec<f64> = layout.source_pos.iter().map(|&p| d_b[p]).collect();
    Array2::from_shape_vec((out.len(), 1), out).expect("column")
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
