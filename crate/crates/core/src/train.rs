//! Feature preparation, minibatch training and evaluation.
//!
//! Every mesh of a minibatch runs forward and backward on its own tape, in
//! parallel. Per-mesh gradients are then summed in minibatch order, so results
//! do not depend on the number of worker threads. Batching graphs block-
//! diagonally gives the same loss, because no operation mixes rows of
//! different graphs.

use std::sync::Arc;

use log::{debug, info};
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{edge_accuracy, face_accuracy, DatasetIndex, DatasetItem, ItemFailure};
use crate::error::{Error, Result};
use crate::geometry::{FeatureOptions, MeshGeometry};
use crate::graph::{mesh_to_graph, normalized_operator, Aggregation, CsrMatrix, FaceGraph, GraphBatch};
use crate::mesh::EdgeTable;
use crate::models::{argmax_rows, Model, Task};
use crate::nn::{AdamConfig, AdamState, Tape};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Class(usize),
    Faces(Vec<usize>),
}

/// A mesh turned into model input.
#[derive(Debug, Clone)]
pub struct PreparedItem {
    pub name: String,
    pub graph: FaceGraph,
    pub operator: Arc<CsrMatrix>,
    pub edges: EdgeTable,
    pub target: Target,
}

impl PreparedItem {
    pub fn new(
        name: String,
        geometry: &MeshGeometry,
        mask: crate::geometry::FeatureMask,
        aggregation: Aggregation,
        target: Target,
    ) -> Self {
        let graph = mesh_to_graph(&geometry.edges, &geometry.features(mask));
        let operator = Arc::new(normalized_operator(&graph, aggregation));
        Self { name, graph, operator, edges: geometry.edges.clone(), target }
    }

    pub fn batch(&self) -> Result<GraphBatch> {
        let b = GraphBatch::from_parts(&[(self.graph.features.view(), &*self.operator)])?;
        match &self.target {
            Target::Class(c) => b.with_graph_labels(vec![*c]),
            Target::Faces(l) => b.with_node_labels(&[l]),
        }
    }

    fn labels(&self) -> &[usize] {
        match &self.target {
            Target::Class(c) => std::slice::from_ref(c),
            Target::Faces(l) => l,
        }
    }
}

/// Extracts features for every dataset item in parallel. Items whose geometry
/// is degenerate are reported, not fatal.
pub fn prepare_items(
    items: &[DatasetItem],
    options: &FeatureOptions,
    aggregation: Aggregation,
) -> (Vec<PreparedItem>, Vec<ItemFailure>) {
    let results: Vec<Result<PreparedItem>> = items
        .par_iter()
        .map(|item| {
            let target = match (&item.face_labels, item.class) {
                (Some(l), _) => {
                    if l.len() != item.mesh.face_count() {
                        return Err(Error::Label(format!("{} labels for {} faces", l.len(), item.mesh.face_count())));
                    }
                    Target::Faces(l.clone())
                }
                (None, Some(c)) => Target::Class(c),
                (None, None) => return Err(Error::Label("item has no label".into())),
            };
            let geo = MeshGeometry::compute(&item.mesh, options)?;
            Ok(PreparedItem::new(item.mesh.name.clone(), &geo, options.mask, aggregation, target))
        })
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (res, item) in results.into_iter().zip(items) {
        match res {
            Ok(p) => ok.push(p),
            Err(e) => failed.push(ItemFailure { path: item.path.clone(), reason: e.to_string() }),
        }
    }
    (ok, failed)
}

/// Prepares a loaded dataset; convenience over [`prepare_items`].
pub fn prepare_dataset(
    index: &DatasetIndex,
    options: &FeatureOptions,
    aggregation: Aggregation,
) -> (Vec<PreparedItem>, Vec<ItemFailure>) {
    prepare_items(&index.items, options, aggregation)
}

/// Per-column standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaling {
    /// Mean and population standard deviation over all rows of `items`.
    /// Constant columns get a unit scale.
    pub fn fit(items: &[&PreparedItem]) -> Result<Self> {
        let Some(first) = items.first() else {
            return Err(Error::config("cannot fit feature scaling on zero items"));
        };
        let width = first.graph.feature_width();
        let mut sum = Array1::<f64>::zeros(width);
        let mut sq = Array1::<f64>::zeros(width);
        let mut n = 0usize;
        for it in items {
            sum += &it.graph.features.sum_axis(Axis(0));
            n += it.graph.node_count();
        }
        let mean = sum / n as f64;
        for it in items {
            for row in it.graph.features.rows() {
                let d = &row - &mean;
                sq += &(&d * &d);
            }
        }
        let std = (sq / n as f64).mapv(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 });
        Ok(Self { mean: mean.to_vec(), std: std.to_vec() })
    }

    pub fn apply(&self, features: &mut Array2<f64>) -> Result<()> {
        if features.ncols() != self.mean.len() {
            return Err(Error::shape(format!(
                "scaling fitted on {} columns applied to {}",
                self.mean.len(),
                features.ncols()
            )));
        }
        for mut row in features.rows_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[k]) / self.std[k];
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seed for minibatch order and dropout masks.
    pub seed: u64,
    /// Recorded for the run log; [`train`] leaves features as given, so callers
    /// fit and apply [`FeatureScaling`] themselves.
    pub standardize: bool,
    pub soft_edge_accuracy: bool,
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        Self {
            epochs: 200,
            batch_size: match task {
                Task::Classification => 16,
                Task::Segmentation => 4,
            },
            adam: AdamConfig::default(),
            seed: 0,
            standardize: false,
            soft_edge_accuracy: false,
        }
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the training forward passes (dropout active).
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub test_edge_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Mesh accuracy for classification, pooled face accuracy for segmentation.
    pub accuracy: f64,
    pub edge_accuracy: Option<f64>,
    pub items: usize,
    pub predictions: Vec<Vec<usize>>,
}

/// Predicts every item (in parallel) and scores it.
pub fn evaluate(model: &Model, items: &[&PreparedItem], soft_edges: bool) -> Result<EvalMetrics> {
    let preds: Vec<Vec<usize>> =
        items.par_iter().map(|it| Ok(argmax_rows(&model.predict(&it.batch()?)?))).collect::<Result<_>>()?;
    let mut correct = 0usize;
    let mut total = 0usize;
    let (mut edge_correct, mut edge_total) = (0.0, 0usize);
    for (it, p) in items.iter().zip(&preds) {
        let truth = it.labels();
        if truth.len() != p.len() {
            return Err(Error::config(format!(
                "model produced {} predictions for {} labels of '{}'",
                p.len(),
                truth.len(),
                it.name
            )));
        }
        correct += p.iter().zip(truth).filter(|(a, b)| a == b).count();
        total += truth.len();
        if let Target::Faces(t) = &it.target {
            let e = it.edges.edge_count();
            edge_correct += edge_accuracy(&it.edges, p, t, soft_edges) * e as f64;
            edge_total += e;
        }
    }
    let ratio = |c: f64, t: usize| if t == 0 { 0.0 } else { c / t as f64 };
    Ok(EvalMetrics {
        accuracy: ratio(correct as f64, total),
        edge_accuracy: (edge_total > 0).then(|| ratio(edge_correct, edge_total)),
        items: items.len(),
        predictions: preds,
    })
}

/// Face accuracy of one item's predictions.
pub fn item_accuracy(item: &PreparedItem, predicted: &[usize]) -> f64 {
    face_accuracy(predicted, item.labels())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) with the highest test accuracy, first one on ties.
    pub best_epoch: Option<usize>,
    pub best_test_accuracy: Option<f64>,
    pub best_model: Model,
    pub final_model: Model,
    pub adam: AdamState,
}

struct StepResult {
    loss: f64,
    correct: usize,
    total: usize,
    grads: Vec<Array2<f64>>,
}

fn item_step(model: &Model, item: &PreparedItem, scale: f64, rng: &mut ChaCha8Rng) -> Result<StepResult> {
    let batch = item.batch()?;
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let x = tape.leaf(batch.features.clone());
    let logits = model.forward(&mut tape, &bound, &batch, x, true, rng)?;
    let labels = item.labels();
    let pred = argmax_rows(tape.value(logits));
    let correct = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    let loss = tape.cross_entropy(logits, &Arc::from(labels), scale)?;
    let loss_value = tape.value(loss)[[0, 0]];
    let mut g = tape.backward(loss)?;
    let grads = bound.iter().zip(model.params().shapes()).map(|(&v, shape)| g.take_or_zeros(v, shape)).collect();
    Ok(StepResult { loss: loss_value, correct, total: labels.len(), grads })
}

fn dropout_rng(seed: u64, epoch: usize, batch: usize, position: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 40) | ((batch as u64) << 20) | position as u64);
    rng
}

/// Trains `model` on `train`, scoring `test` after every epoch.
///
/// `on_epoch` sees each record as soon as it is complete.
pub fn train(
    mut model: Model,
    train: &[&PreparedItem],
    test: &[&PreparedItem],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.adam.validate()?;
    if train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if config.batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let task = model.config().task;
    let mut adam = AdamState::new(config.adam, model.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(u64::MAX);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Model)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut batches, mut correct, mut seen) = (0.0, 0usize, 0usize, 0usize);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let scale = match task {
                Task::Classification => 1.0 / chunk.len() as f64,
                Task::Segmentation => 1.0 / chunk.iter().map(|&i| train[i].graph.node_count()).sum::<usize>() as f64,
            };
            let results: Vec<StepResult> = chunk
                .par_iter()
                .enumerate()
                .map(|(pos, &i)| item_step(&model, train[i], scale, &mut dropout_rng(config.seed, epoch, b, pos)))
                .collect::<Result<_>>()?;
            let mut iter = results.into_iter();
            let mut total = iter.next().expect("chunks are non-empty");
            for r in iter {
                total.loss += r.loss;
                total.correct += r.correct;
                total.total += r.total;
                for (acc, g) in total.grads.iter_mut().zip(&r.grads) {
                    *acc += g;
                }
            }
            if !total.loss.is_finite() || total.grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::Diverged(format!(
                    "non-finite loss or gradient at epoch {epoch}, batch {b} (lr {}, loss {})",
                    config.adam.lr, total.loss
                )));
            }
            adam.step(model.params_mut(), &total.grads)?;
            loss_sum += total.loss;
            batches += 1;
            correct += total.correct;
            seen += total.total;
        }
        let (test_accuracy, test_edge_accuracy) = if test.is_empty() {
            (None, None)
        } else {
            let m = evaluate(&model, test, config.soft_edge_accuracy)?;
            (Some(m.accuracy), m.edge_accuracy)
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            train_accuracy: correct as f64 / seen as f64,
            test_accuracy,
            test_edge_accuracy,
        };
        debug!("{record:?}");
        on_epoch(&record);
        if let Some(acc) = test_accuracy {
            if best.as_ref().is_none_or(|(_, b, _)| acc > *b) {
                best = Some((epoch, acc, model.clone()));
            }
        }
        history.push(record);
    }
    let (best_epoch, best_test_accuracy, best_model) = match best {
        Some((e, a, m)) => (Some(e), Some(a), m),
        None => (None, None, model.clone()),
    };
    if let (Some(e), Some(a)) = (best_epoch, best_test_accuracy) {
        info!("best test accuracy {a:.4} at epoch {e}");
    }
    Ok(TrainOutcome { history, best_epoch, best_test_accuracy, best_model, final_model: model, adam })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synthetic;
    use crate::geometry::FeatureMask;
    use crate::models::ModelConfig;
    use crate::primitives;

    fn items(n: usize) -> Vec<PreparedItem> {
        let opts = FeatureOptions::default();
        synthetic::classification_meshes(n, 0.01, 5)
            .into_iter()
            .map(|(class, mesh)| {
                let geo = MeshGeometry::compute(&mesh, &opts).unwrap();
                let c = usize::from(class == "sphere");
                PreparedItem::new(mesh.name.clone(), &geo, FeatureMask::ALL, Aggregation::default(), Target::Class(c))
            })
            .collect()
    }

    #[test]
    fn scaling_standardizes_columns() {
        let it = items(1);
        let refs: Vec<&PreparedItem> = it.iter().collect();
        let s = FeatureScaling::fit(&refs).unwrap();
        let mut all =
            ndarray::concatenate(Axis(0), &[it[0].graph.features.view(), it[1].graph.features.view()]).unwrap();
        s.apply(&mut all).unwrap();
        for col in all.columns() {
            assert!(col.mean().unwrap().abs() < 1e-10);
            let var = col.mapv(|v| v * v).mean().unwrap();
            assert!((var - 1.0).abs() < 1e-9 || var < 1e-20);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let it = items(2);
        let refs: Vec<&PreparedItem> = it.iter().collect();
        let model = Model::new(ModelConfig { tau: 4, ..ModelConfig::classification(2) }).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            adam: AdamConfig { lr: 0.0, ..Default::default() },
            ..TrainConfig::for_task(Task::Classification)
        };
        let out = train(model.clone(), &refs, &refs, &cfg, |_| {}).unwrap();
        assert!(out.final_model.params().iter().zip(model.params().iter()).all(|(a, b)| a == b));
        assert_eq!(out.history.len(), 2);
    }

    #[test]
    fn rejects_empty_training_set_and_zero_batch() {
        let model = Model::new(ModelConfig { tau: 2, ..ModelConfig::classification(2) }).unwrap();
        let cfg = TrainConfig::for_task(Task::Classification);
        assert!(train(model.clone(), &[], &[], &cfg, |_| {}).is_err());
        let it = items(1);
        let refs: Vec<&PreparedItem> = it.iter().collect();
        let zero = TrainConfig { batch_size: 0, ..cfg };
        assert!(train(model, &refs, &[], &zero, |_| {}).is_err());
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let it = items(2);
        let refs: Vec<&PreparedItem> = it.iter().collect();
        let model = Model::new(ModelConfig { tau: 4, dropout: 0.0, ..ModelConfig::classification(2) }).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 4,
            adam: AdamConfig { lr: 1e300, ..Default::default() },
            ..TrainConfig::for_task(Task::Classification)
        };
        match train(model, &refs, &[], &cfg, |_| {}) {
            Err(Error::Diverged(msg)) => assert!(msg.contains("epoch") && msg.contains("batch") && msg.contains("lr")),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.history.len())),
        }
    }

    #[test]
    fn segmentation_metrics_include_edges() {
        let m = primitives::icosphere(1);
        let geo = MeshGeometry::compute(&m, &FeatureOptions::default()).unwrap();
        let labels = vec![1; m.face_count()];
        let item = PreparedItem::new("s".into(), &geo, FeatureMask::ALL, Aggregation::default(), Target::Faces(labels));
        let model = Model::new(ModelConfig { tau: 2, ..ModelConfig::segmentation(2) }).unwrap();
        let metrics = evaluate(&model, &[&item], false).unwrap();
        let acc = metrics.accuracy;
        assert!(metrics.edge_accuracy.is_some());
        assert!((0.0..=1.0).contains(&acc));
    }
}
