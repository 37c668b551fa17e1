use std::ops::Range;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, GraphBatch};

/// Nonlinearity applied after a graph convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

/// Index of a tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named trainable tensors. Values are shared with tapes without copying.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Arc<Array2<f64>>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        self.names.push(name.into());
        self.values.push(Arc::new(value));
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    /// Mutable access; copies the tensor first if a tape still shares it.
    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        Arc::make_mut(&mut self.values[id.0])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter().map(|v| &**v))
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Records every parameter as a leaf; the returned vars are indexed by `ParamId`.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.values.iter().map(|v| tape.leaf_shared(Arc::clone(v))).collect()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.values.iter().map(|v| v.dim()).collect()
    }
}

/// Glorot-uniform `rows × cols` matrix: entries in `±sqrt(6 / (rows + cols))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
}

/// Weight and bias of one graph-convolution or linear layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LayerParams {
    /// Registers a Glorot-initialized `in × out` weight and a zero `1 × out` bias.
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), glorot_uniform(in_dim, out_dim, rng));
        let bias = bias.then(|| store.add(format!("{name}.bias"), Array2::zeros((1, out_dim))));
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn scalar_count(&self) -> usize {
        self.in_dim * self.out_dim + if self.bias.is_some() { self.out_dim } else { 0 }
    }

    fn vars(&self, bound: &[Var]) -> (Var, Option<Var>) {
        (bound[self.weight.0], self.bias.map(|b| bound[b.0]))
    }
}

/// Graph convolution `σ(op · x · W + b)`; `activation = None` leaves it linear.
pub fn gcn_forward(
    tape: &mut Tape,
    x: Var,
    op: &Arc<CsrMatrix>,
    weight: Var,
    bias: Option<Var>,
    activation: Option<Activation>,
) -> Result<Var> {
    let (rows, _) = tape.shape(x);
    if op.rows() != rows || op.cols() != rows {
        return Err(Error::shape(format!("operator {}x{} for {rows} nodes", op.rows(), op.cols())));
    }
    // Aggregating after the projection is cheaper when out ≤ in and is the same product.
    let projected = tape.matmul(x, weight)?;
    let mut out = tape.spmm(op, projected)?;
    if let Some(b) = bias {
        out = tape.add_row(out, b)?;
    }
    Ok(match activation {
        Some(act) => act.apply(tape, out),
        None => out,
    })
}

/// Residual graph convolution: `gcn_forward(x) + x`. Needs a square weight.
pub fn gcn_residual_forward(
    tape: &mut Tape,
    x: Var,
    op: &Arc<CsrMatrix>,
    weight: Var,
    bias: Option<Var>,
    activation: Option<Activation>,
) -> Result<Var> {
    let (i, o) = tape.shape(weight);
    if i != o {
        return Err(Error::shape(format!("residual layer needs in = out, got {i} → {o}")));
    }
    let conv = gcn_forward(tape, x, op, weight, bias, activation)?;
    tape.add(conv, x)
}

/// Dense layer `x · W + b`.
pub fn linear_forward(tape: &mut Tape, x: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
    let out = tape.matmul(x, weight)?;
    match bias {
        Some(b) => tape.add_row(out, b),
        None => Ok(out),
    }
}

impl LayerParams {
    pub fn gcn(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        x: Var,
        op: &Arc<CsrMatrix>,
        activation: Option<Activation>,
    ) -> Result<Var> {
        let (w, b) = self.vars(bound);
        gcn_forward(tape, x, op, w, b, activation)
    }

    pub fn linear(&self, tape: &mut Tape, bound: &[Var], x: Var) -> Result<Var> {
        let (w, b) = self.vars(bound);
        linear_forward(tape, x, w, b)
    }
}

/// Inverted dropout: in training, zero each entry with probability `p` and
/// scale survivors by `1/(1-p)`. Identity otherwise.
pub fn dropout(tape: &mut Tape, x: Var, p: f64, training: bool, rng: &mut impl Rng) -> Result<Var> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("dropout probability {p} outside [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Array2::from_shape_simple_fn(tape.shape(x), || if rng.random::<f64>() < p { 0.0 } else { keep });
    tape.mul_mask(x, mask)
}

/// Per-graph mean of node rows.
pub fn mean_nodes(tape: &mut Tape, batch: &GraphBatch, x: Var) -> Result<Var> {
    let (rows, _) = tape.shape(x);
    if rows != batch.node_count() {
        return Err(Error::shape(format!("{rows} rows for a batch of {} nodes", batch.node_count())));
    }
    let ranges: Arc<[Range<usize>]> = Arc::from(batch.ranges.clone());
    tape.segment_mean(x, &ranges)
}

/// Mean cross-entropy over rows.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let rows = labels.len().max(1) as f64;
    tape.cross_entropy(logits, &Arc::from(labels), 1.0 / rows)
}
