//! Reverse-mode differentiation over dense 2-D arrays.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s. Nodes are
//! appended in evaluation order, so walking the tape backwards visits each
//! node after everything that consumed it. A tape is single-use: `backward`
//! consumes it and frees all recorded values.

use std::ops::Range;
use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::graph::CsrMatrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    SpMM(Arc<CsrMatrix>, Var),
    Relu(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Mask(Var, Array2<f64>),
    SegmentMean(Var, Arc<[Range<usize>]>),
    CrossEntropy { logits: Var, probs: Array2<f64>, labels: Arc<[usize]>, scale: f64 },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Arc<Array2<f64>>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    detached: bool,
    consumed: bool,
}

/// Gradients of a scalar with respect to every leaf that influenced it.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Takes the gradient of `v`, or zeros of `shape` if `v` did not influence the loss.
    pub fn take_or_zeros(&mut self, v: Var, shape: (usize, usize)) -> Array2<f64> {
        self.grads.get_mut(v.0).and_then(Option::take).unwrap_or_else(|| Array2::zeros(shape))
    }
}

fn same_shape(a: &Array2<f64>, b: &Array2<f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("{what}: {:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

impl Tape {
    /// A tape that records operations for `backward`.
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape that evaluates values only; `backward` on it is an error.
    pub fn detached() -> Self {
        Self { detached: true, ..Self::default() }
    }

    pub fn is_recording(&self) -> bool {
        !self.detached
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        let op = if self.detached { Op::Leaf } else { op };
        self.nodes.push(Node { value: Arc::new(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records a leaf without copying a shared value.
    pub fn leaf_shared(&mut self, value: Arc<Array2<f64>>) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    /// Value of `v`. Panics after `backward` has consumed the tape.
    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Matrix product `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.nrows() {
            return Err(Error::shape(format!("matmul {:?} · {:?}", av.dim(), bv.dim())));
        }
        let out = av.dot(bv);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape(av, bv, "add")?;
        let out = av + bv;
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a `1 × d` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (xv, rv) = (self.value(x), self.value(row));
        if rv.nrows() != 1 || rv.ncols() != xv.ncols() {
            return Err(Error::shape(format!("row broadcast {:?} onto {:?}", rv.dim(), xv.dim())));
        }
        let out = xv + rv;
        Ok(self.push(out, Op::AddRow(x, row)))
    }

    /// Sparse-times-dense `op · x`; `op` is a constant.
    pub fn spmm(&mut self, op: &Arc<CsrMatrix>, x: Var) -> Result<Var> {
        let out = op.matmul_dense(self.value(x).view())?;
        Ok(self.push(out, Op::SpMM(Arc::clone(op), x)))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(f64::tanh);
        self.push(out, Op::Tanh(x))
    }

    /// Column-wise concatenation.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concatenation of zero tensors"));
        };
        let rows = self.value(first).nrows();
        if let Some(&bad) = parts.iter().find(|&&p| self.value(p).nrows() != rows) {
            return Err(Error::shape(format!("concat rows {} vs {}", rows, self.value(bad).nrows())));
        }
        let cols = parts.iter().map(|&p| self.value(p).ncols()).sum();
        let mut out = Array2::<f64>::zeros((rows, cols));
        let mut start = 0;
        for &p in parts {
            let v = self.value(p);
            out.slice_mut(s![.., start..start + v.ncols()]).assign(v);
            start += v.ncols();
        }
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    /// Elementwise product with a constant mask.
    pub fn mul_mask(&mut self, x: Var, mask: Array2<f64>) -> Result<Var> {
        same_shape(self.value(x), &mask, "mask")?;
        let out = self.value(x) * &mask;
        Ok(self.push(out, Op::Mask(x, mask)))
    }

    /// Row mean of `x` within each range; one output row per range.
    pub fn segment_mean(&mut self, x: Var, ranges: &Arc<[Range<usize>]>) -> Result<Var> {
        let xv = self.value(x);
        let mut out = Array2::<f64>::zeros((ranges.len(), xv.ncols()));
        for (g, r) in ranges.iter().enumerate() {
            if r.is_empty() {
                return Err(Error::shape(format!("graph {g} has no nodes")));
            }
            if r.end > xv.nrows() {
                return Err(Error::shape(format!("range {r:?} exceeds {} rows", xv.nrows())));
            }
            let mean = xv.slice(s![r.clone(), ..]).mean_axis(Axis(0)).expect("non-empty range");
            out.row_mut(g).assign(&mean);
        }
        Ok(self.push(out, Op::SegmentMean(x, Arc::clone(ranges))))
    }

    /// `scale · Σ_rows (logsumexp(row) − row[label])`, as a `1 × 1` value.
    pub fn cross_entropy(&mut self, logits: Var, labels: &Arc<[usize]>, scale: f64) -> Result<Var> {
        let lv = self.value(logits);
        if lv.nrows() != labels.len() {
            return Err(Error::shape(format!("{} labels for {} rows", labels.len(), lv.nrows())));
        }
        let classes = lv.ncols();
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Label(format!("label {bad} outside [0, {classes})")));
        }
        let mut probs = Array2::<f64>::zeros(lv.dim());
        let mut total = 0.0;
        for ((row, mut p), &label) in lv.rows().into_iter().zip(probs.rows_mut()).zip(labels.iter()) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            Zip::from(&mut p).and(&row).for_each(|p, &x| {
                *p = (x - max).exp();
                denom += *p;
            });
            p.mapv_inplace(|v| v / denom);
            total += max + denom.ln() - row[label];
        }
        let out = Array2::from_elem((1, 1), scale * total);
        Ok(self.push(out, Op::CrossEntropy { logits, probs, labels: Arc::clone(labels), scale }))
    }

    /// Sum of all entries as a `1 × 1` value.
    pub fn sum(&mut self, x: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(x).sum());
        self.push(out, Op::Sum(x))
    }

    /// Propagates d(loss)/d(node) back to every leaf, then frees the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::Tape("backward already ran on this tape; run a new forward pass".into()));
        }
        if self.detached {
            return Err(Error::Tape("tape is detached; no gradients were recorded".into()));
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::Tape(format!("loss must be 1x1, got {:?}", self.shape(loss))));
        }
        self.consumed = true;
        let nodes = std::mem::take(&mut self.nodes);
        let mut grads: Vec<Option<Array2<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));

        fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&nodes[b.0].value.t());
                    let gb = nodes[a.0].value.t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(x, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *row, gr);
                    accumulate(&mut grads, *x, g);
                }
                Op::SpMM(op, x) => {
                    let gx = op.transpose_matmul_dense(g.view())?;
                    accumulate(&mut grads, *x, gx);
                }
                Op::Relu(x) => {
                    let mut gx = g;
                    Zip::from(&mut gx).and(&*nodes[x.0].value).for_each(|g, &v| {
                        if v <= 0.0 {
                            *g = 0.0
                        }
                    });
                    accumulate(&mut grads, *x, gx);
                }
                Op::Tanh(x) => {
                    let mut gx = g;
                    Zip::from(&mut gx).and(&*node.value).for_each(|g, &y| *g *= 1.0 - y * y);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = nodes[p.0].value.ncols();
                        accumulate(&mut grads, *p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::Mask(x, mask) => accumulate(&mut grads, *x, g * mask),
                Op::SegmentMean(x, ranges) => {
                    let mut gx = Array2::<f64>::zeros(nodes[x.0].value.dim());
                    for (k, r) in ranges.iter().enumerate() {
                        let share = g.row(k).mapv(|v| v / r.len() as f64);
                        for mut row in gx.slice_mut(s![r.clone(), ..]).rows_mut() {
                            row.assign(&share);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::CrossEntropy { logits, probs, labels, scale } => {
                    let upstream = g[[0, 0]] * scale;
                    let mut gl = probs.clone();
                    for (mut row, &label) in gl.rows_mut().into_iter().zip(labels.iter()) {
                        row[label] -= 1.0;
                    }
                    gl.mapv_inplace(|v| v * upstream);
                    accumulate(&mut grads, *logits, gl);
                }
                Op::Sum(x) => {
                    let gx = Array2::from_elem(nodes[x.0].value.dim(), g[[0, 0]]);
                    accumulate(&mut grads, *x, gx);
                }
            }
        }
        Ok(Gradients { grads })
    }
}
