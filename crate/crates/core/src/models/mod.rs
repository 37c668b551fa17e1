//! Densely connected GCN networks for mesh classification and segmentation.
//!
//! Classification: `GCN(in→τ) → DC → mean nodes → linear(6τ→C)`.
//! Segmentation: `GCN(in→τ) → DC → GCN(6τ→τ) → DC → GCN(6τ→C)`.
//! A DC block of `n` layers maps `τ` columns to `(n+1)·τ`: layer `l` sees the
//! block input and every earlier layer output, `l·τ` columns in total.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FeatureMask;
use crate::graph::{Aggregation, CsrMatrix, GraphBatch};
use crate::nn::{dropout, mean_nodes, Activation, LayerParams, ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Classification,
    Segmentation,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Segmentation => "segmentation",
        })
    }
}

/// Width and depth of one densely connected block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcBlockConfig {
    pub layers: usize,
    pub tau: usize,
}

impl DcBlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 {
            return Err(Error::config(format!("a DC block needs at least 2 layers, got {}", self.layers)));
        }
        if self.tau == 0 {
            return Err(Error::config("width τ must be positive"));
        }
        Ok(())
    }

    /// Input width of in-block layer `l` (1-based).
    pub fn layer_input(&self, l: usize) -> usize {
        l * self.tau
    }

    pub fn output_width(&self) -> usize {
        (self.layers + 1) * self.tau
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub task: Task,
    /// Feature components the network consumes; fixes the input width.
    pub mask: FeatureMask,
    pub tau: usize,
    pub block_layers: usize,
    pub blocks: usize,
    pub classes: usize,
    pub dropout: f64,
    pub activation: Activation,
    pub aggregation: Aggregation,
    pub bias: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn classification(classes: usize) -> Self {
        Self {
            task: Task::Classification,
            mask: FeatureMask::ALL,
            tau: 1024,
            block_layers: 5,
            blocks: 1,
            classes,
            dropout: 0.3,
            activation: Activation::Relu,
            aggregation: Aggregation::SymmetricNormalized,
            bias: true,
            seed: 0,
        }
    }

    pub fn segmentation(classes: usize) -> Self {
        Self { task: Task::Segmentation, blocks: 2, ..Self::classification(classes) }
    }

    pub fn input_width(&self) -> usize {
        self.mask.width()
    }

    pub fn block(&self) -> DcBlockConfig {
        DcBlockConfig { layers: self.block_layers, tau: self.tau }
    }

    pub fn validate(&self) -> Result<()> {
        self.block().validate()?;
        if self.blocks == 0 {
            return Err(Error::config("at least one DC block is required"));
        }
        if self.classes == 0 {
            return Err(Error::config("class count must be positive"));
        }
        if self.mask.is_empty() {
            return Err(Error::config("feature mask selects no components"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout probability {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Gcn,
    MeanNodes,
    Linear,
}

/// One row of a network listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: bool,
}

impl LayerSpec {
    pub fn parameter_count(&self, bias: bool) -> usize {
        match self.kind {
            LayerKind::MeanNodes => 0,
            _ => self.in_dim * self.out_dim + if bias { self.out_dim } else { 0 },
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LayerKind::MeanNodes => write!(f, "(graph mean nodes)"),
            _ => write!(f, "(in={}, out={})", self.in_dim, self.out_dim),
        }
    }
}

/// Layer listing in evaluation order.
pub fn architecture(config: &ModelConfig) -> Result<Vec<LayerSpec>> {
    config.validate()?;
    let block = config.block();
    let tau = config.tau;
    let wide = block.output_width();
    let gcn = |name: String, in_dim, out_dim, activation| LayerSpec {
        name,
        kind: LayerKind::Gcn,
        in_dim,
        out_dim,
        activation,
    };
    let mut specs = vec![gcn("input".into(), config.input_width(), tau, true)];
    for b in 1..=config.blocks {
        for l in 1..=block.layers {
            specs.push(gcn(format!("dc{b}.{l}"), block.layer_input(l), tau, true));
        }
        if b < config.blocks {
            specs.push(gcn(format!("transition{b}"), wide, tau, true));
        }
    }
    match config.task {
        Task::Classification => {
            specs.push(LayerSpec {
                name: "mean".into(),
                kind: LayerKind::MeanNodes,
                in_dim: wide,
                out_dim: wide,
                activation: false,
            });
            specs.push(LayerSpec {
                name: "output".into(),
                kind: LayerKind::Linear,
                in_dim: wide,
                out_dim: config.classes,
                activation: false,
            });
        }
        Task::Segmentation => specs.push(gcn("output".into(), wide, config.classes, false)),
    }
    Ok(specs)
}

/// Parameter count quoted for the reference 13-layer segmentation network.
///
/// It cannot belong to the τ=1024 listing: the 57→1024 input layer alone holds
/// 59,392 scalars and the first DC layer another 1,049,600. Reports print it
/// next to the exact count and leave the mismatch open.
pub const REFERENCE_SEGMENTATION_PARAMETERS: usize = 147_828;

/// Exact number of trainable scalars.
pub fn count_parameters(config: &ModelConfig) -> Result<usize> {
    Ok(architecture(config)?.iter().map(|s| s.parameter_count(config.bias)).sum())
}

/// Runs one DC block. `layers[l-1]` maps `l·τ` columns to `τ`.
#[allow(clippy::too_many_arguments)]
pub fn dc_block_forward(
    tape: &mut Tape,
    bound: &[Var],
    layers: &[LayerParams],
    x: Var,
    op: &Arc<CsrMatrix>,
    activation: Option<Activation>,
    dropout_p: f64,
    training: bool,
    rng: &mut impl Rng,
) -> Result<Var> {
    let Some(first) = layers.first() else {
        return Err(Error::config("empty DC block"));
    };
    let (_, width) = tape.shape(x);
    if width != first.in_dim {
        return Err(Error::shape(format!("DC block expects {} input columns, got {width}", first.in_dim)));
    }
    let mut parts = vec![x];
    for layer in layers {
        let input = if parts.len() == 1 { x } else { tape.concat_cols(&parts)? };
        let h = layer.gcn(tape, bound, input, op, activation)?;
        parts.push(dropout(tape, h, dropout_p, training, rng)?);
    }
    tape.concat_cols(&parts)
}

/// Network parameters plus the wiring that uses them.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    input: LayerParams,
    blocks: Vec<Vec<LayerParams>>,
    transitions: Vec<LayerParams>,
    output: LayerParams,
}

impl Model {
    /// Glorot-initialized weights and zero biases drawn from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::build(config, &mut rng)
    }

    fn build(config: ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let specs = architecture(&config)?;
        let mut params = ParamStore::new();
        let mut layers = specs
            .iter()
            .filter(|s| s.kind != LayerKind::MeanNodes)
            .map(|s| LayerParams::init(&mut params, &s.name, s.in_dim, s.out_dim, config.bias, rng));
        let mut next = || layers.next().expect("architecture lists every layer");
        let input = next();
        let mut blocks = Vec::with_capacity(config.blocks);
        let mut transitions = Vec::new();
        for b in 0..config.blocks {
            blocks.push((0..config.block_layers).map(|_| next()).collect());
            if b + 1 < config.blocks {
                transitions.push(next());
            }
        }
        let output = next();
        Ok(Self { config, params, input, blocks, transitions, output })
    }

    /// Rebuilds a model from stored tensors, checking names and shapes.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<(String, Array2<f64>)>) -> Result<Self> {
        let mut model = Self::new(config)?;
        if tensors.len() != model.params.len() {
            return Err(Error::config(format!(
                "{} stored tensors for a model with {}",
                tensors.len(),
                model.params.len()
            )));
        }
        for (k, (name, value)) in tensors.into_iter().enumerate() {
            let id = crate::nn::ParamId(k);
            if name != model.params.name(id) || value.dim() != model.params.get(id).dim() {
                return Err(Error::config(format!(
                    "stored tensor {name} {:?} does not match {} {:?}",
                    value.dim(),
                    model.params.name(id),
                    model.params.get(id).dim()
                )));
            }
            *model.params.get_mut(id) = value;
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Records the whole network; returns logits (`G×C` or `N×C`).
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        batch: &GraphBatch,
        x: Var,
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<Var> {
        let cfg = &self.config;
        let (_, width) = tape.shape(x);
        if width != cfg.input_width() {
            return Err(Error::config(format!(
                "model expects {} feature columns ({}), got {width}",
                cfg.input_width(),
                cfg.mask
            )));
        }
        let op = &batch.operator;
        let act = Some(cfg.activation);
        let mut h = self.input.gcn(tape, bound, x, op, act)?;
        for (b, block) in self.blocks.iter().enumerate() {
            h = dc_block_forward(tape, bound, block, h, op, act, cfg.dropout, training, rng)?;
            if let Some(t) = self.transitions.get(b) {
                h = t.gcn(tape, bound, h, op, act)?;
            }
        }
        match cfg.task {
            Task::Classification => {
                let pooled = mean_nodes(tape, batch, h)?;
                self.output.linear(tape, bound, pooled)
            }
            Task::Segmentation => self.output.gcn(tape, bound, h, op, None),
        }
    }

    /// Evaluation-mode logits without recording gradients.
    pub fn predict(&self, batch: &GraphBatch) -> Result<Array2<f64>> {
        let mut tape = Tape::detached();
        let bound = self.params.bind(&mut tape);
        let x = tape.leaf(batch.features.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = self.forward(&mut tape, &bound, batch, x, false, &mut rng)?;
        Ok(tape.value(logits).clone())
    }
}

/// Row-wise argmax; the first maximum wins ties.
pub fn argmax_rows(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FeatureComponent;
    use crate::graph::{batch_graphs, FaceGraph};

    fn widths(specs: &[LayerSpec]) -> Vec<(usize, usize)> {
        specs.iter().filter(|s| s.kind != LayerKind::MeanNodes).map(|s| (s.in_dim, s.out_dim)).collect()
    }

    #[test]
    fn dc_growth_law() {
        for tau in [1, 8, 1024] {
            let b = DcBlockConfig { layers: 5, tau };
            let ins: Vec<usize> = (1..=5).map(|l| b.layer_input(l)).collect();
            assert_eq!(ins, vec![tau, 2 * tau, 3 * tau, 4 * tau, 5 * tau]);
            assert_eq!(b.output_width(), 6 * tau);
        }
        assert!(DcBlockConfig { layers: 1, tau: 4 }.validate().is_err());
    }

    #[test]
    fn classifier_listing_at_1024() {
        let specs = architecture(&ModelConfig::classification(30)).unwrap();
        let rows: Vec<String> = specs.iter().map(ToString::to_string).collect();
        assert_eq!(
            rows,
            [
                "(in=57, out=1024)",
                "(in=1024, out=1024)",
                "(in=2048, out=1024)",
                "(in=3072, out=1024)",
                "(in=4096, out=1024)",
                "(in=5120, out=1024)",
                "(graph mean nodes)",
                "(in=6144, out=30)",
            ]
        );
        assert_eq!(specs.last().unwrap().kind, LayerKind::Linear);
    }

    #[test]
    fn segmenter_listing_at_1024() {
        let specs = architecture(&ModelConfig::segmentation(8)).unwrap();
        assert_eq!(specs.len(), 13);
        assert!(specs.iter().all(|s| s.kind == LayerKind::Gcn));
        let mut want = vec![(57, 1024)];
        for _ in 0..2 {
            want.extend((1..=5).map(|l| (l * 1024, 1024)));
            want.push((6144, 1024));
        }
        want.pop();
        want.push((6144, 8));
        assert_eq!(widths(&specs), want);
        assert!(!specs.last().unwrap().activation);
    }

    #[test]
    fn parameter_counts() {
        let linear =
            LayerSpec { name: "l".into(), kind: LayerKind::Linear, in_dim: 6144, out_dim: 30, activation: false };
        assert_eq!(linear.parameter_count(true), 184_350);

        let cfg = ModelConfig { tau: 8, ..ModelConfig::classification(2) };
        let hand =
            (57 * 8 + 8) + (8 * 8 + 8) + (16 * 8 + 8) + (24 * 8 + 8) + (32 * 8 + 8) + (40 * 8 + 8) + (48 * 2 + 2);
        assert_eq!(count_parameters(&cfg).unwrap(), hand);
        assert_eq!(Model::new(cfg).unwrap().params().scalar_count(), hand);

        let toy = ModelConfig {
            tau: 1,
            classes: 1,
            mask: FeatureMask::from_components(&[FeatureComponent::Angles]),
            ..ModelConfig::classification(1)
        };
        // input 3→1, five block layers 1..5→1, linear 6→1.
        assert_eq!(count_parameters(&toy).unwrap(), 4 + (2 + 3 + 4 + 5 + 6) + 7);

        let zero = ModelConfig { tau: 0, ..ModelConfig::classification(2) };
        assert!(matches!(count_parameters(&zero), Err(Error::Config(_))));

        let table3 = count_parameters(&ModelConfig::segmentation(8)).unwrap();
        let mut hand = 57 * 1024 + 1024 + 6144 * 1024 + 1024 + 6144 * 8 + 8;
        hand += 2 * (1..=5).map(|l| l * 1024 * 1024 + 1024).sum::<usize>();
        assert_eq!(table3, hand);
        assert!(table3 > REFERENCE_SEGMENTATION_PARAMETERS);
    }

    fn path_graph(n: usize, width: usize) -> FaceGraph {
        let text = format!(
            "meshgcn-adjacency 1\nnodes {n}\nedges {}\n{}",
            n.saturating_sub(1),
            (1..n).map(|i| format!("{} {i}\n", i - 1)).collect::<String>()
        );
        let feats = Array2::from_shape_fn((n, width), |(i, j)| ((i * 7 + j * 3) % 11) as f64 * 0.1 - 0.5);
        FaceGraph::read_adjacency(&text, feats).unwrap()
    }

    #[test]
    fn dc_block_with_zero_weights_passes_input_through() {
        let g = path_graph(4, 3);
        let batch = batch_graphs(&[&g], Aggregation::default()).unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layers: Vec<LayerParams> =
            (1..=5).map(|l| LayerParams::init(&mut store, "z", 3 * l, 3, false, &mut rng)).collect();
        for l in &layers {
            store.get_mut(l.weight).fill(0.0);
        }
        let mut t = Tape::new();
        let bound = store.bind(&mut t);
        let x = t.leaf(g.features.clone());
        let y = dc_block_forward(&mut t, &bound, &layers, x, &batch.operator, None, 0.3, false, &mut rng).unwrap();
        let v = t.value(y);
        assert_eq!(v.dim(), (4, 18));
        assert_eq!(v.slice(ndarray::s![.., 0..3]), g.features);
        assert!(v.slice(ndarray::s![.., 3..]).iter().all(|&e| e == 0.0));

        let bad = t.leaf(Array2::zeros((4, 5)));
        assert!(dc_block_forward(&mut t, &bound, &layers, bad, &batch.operator, None, 0.0, false, &mut rng).is_err());
    }

    #[test]
    fn output_shapes() {
        let mask = FeatureMask::from_components(&[FeatureComponent::Angles]);
        let cls = Model::new(ModelConfig { tau: 4, mask, ..ModelConfig::classification(3) }).unwrap();
        let one = path_graph(5, 3);
        let batch = batch_graphs(&[&one], Aggregation::default()).unwrap();
        assert_eq!(cls.predict(&batch).unwrap().dim(), (1, 3));

        let seg = Model::new(ModelConfig { tau: 4, mask, ..ModelConfig::segmentation(2) }).unwrap();
        let single = path_graph(1, 3);
        let batch = batch_graphs(&[&single], Aggregation::default()).unwrap();
        assert_eq!(seg.predict(&batch).unwrap().dim(), (1, 2));

        let wide = path_graph(2, 57);
        let batch = batch_graphs(&[&wide], Aggregation::default()).unwrap();
        assert!(matches!(seg.predict(&batch), Err(Error::Config(_))));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let model = Model::new(ModelConfig { tau: 4, ..ModelConfig::segmentation(3) }).unwrap();
        let g = path_graph(6, 57);
        let batch = batch_graphs(&[&g], Aggregation::default()).unwrap();
        assert_eq!(model.predict(&batch).unwrap(), model.predict(&batch).unwrap());
    }

    #[test]
    fn tensors_round_trip_and_mismatch() {
        let cfg = ModelConfig { tau: 2, ..ModelConfig::classification(2) };
        let model = Model::new(cfg.clone()).unwrap();
        let tensors: Vec<(String, Array2<f64>)> =
            model.params().iter().map(|(n, v)| (n.to_string(), v.clone())).collect();
        let back = Model::from_tensors(cfg.clone(), tensors.clone()).unwrap();
        assert!(back.params().iter().zip(model.params().iter()).all(|(a, b)| a == b));
        let mut wrong = tensors;
        wrong[0].1 = Array2::zeros((1, 1));
        assert!(Model::from_tensors(cfg, wrong).is_err());
    }

    #[test]
    fn argmax_first_wins() {
        let l = ndarray::array![[0.0, 1.0, 1.0], [2.0, -1.0, 0.0]];
        assert_eq!(argmax_rows(&l), vec![1, 0]);
    }
}
