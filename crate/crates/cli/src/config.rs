use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use meshgcn::datasets::SplitRule;
use meshgcn::geometry::{CurvatureArea, FeatureMask, FeatureOptions};
use meshgcn::graph::Aggregation;
use meshgcn::models::{ModelConfig, Task};
use meshgcn::nn::{Activation, AdamConfig};
use meshgcn::train::TrainConfig;
use serde::{Deserialize, Serialize};

/// Everything one `train` or `ablate` run depends on. Written next to every
/// result so a run can be repeated from its own output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub dataset: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
    pub deterministic: bool,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,

    pub mask: FeatureMask,
    pub normalize_mesh: bool,
    pub curvature_area: CurvatureArea,
    pub standardize: bool,

    pub tau: usize,
    pub block_layers: usize,
    /// DC blocks; `None` means 1 for classification and 2 for segmentation.
    pub blocks: Option<usize>,
    /// Output classes; `None` takes the count from the dataset.
    pub classes: Option<usize>,
    pub dropout: f64,
    pub activation: Activation,
    pub aggregation: Aggregation,
    pub bias: bool,

    pub epochs: usize,
    /// `None` means 16 for classification and 4 for segmentation.
    pub batch_size: Option<usize>,
    pub adam: AdamConfig,

    pub split: SplitRule,
    pub repeats: usize,
    /// Directory with `train.txt` and `test.txt`; overrides `split`.
    pub manifest: Option<PathBuf>,
    pub soft_edge_accuracy: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::Classification,
            dataset: PathBuf::new(),
            output: PathBuf::from("runs/latest"),
            seed: 0,
            deterministic: false,
            threads: None,
            mask: FeatureMask::ALL,
            normalize_mesh: true,
            curvature_area: CurvatureArea::IncidentSum,
            standardize: false,
            tau: 1024,
            block_layers: 5,
            blocks: None,
            classes: None,
            dropout: 0.3,
            activation: Activation::Relu,
            aggregation: Aggregation::SymmetricNormalized,
            bias: true,
            epochs: 200,
            batch_size: None,
            adam: AdamConfig::default(),
            split: SplitRule::Fraction(0.8),
            repeats: 1,
            manifest: None,
            soft_edge_accuracy: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    pub fn features(&self) -> FeatureOptions {
        FeatureOptions { mask: self.mask, normalize_mesh: self.normalize_mesh, curvature_area: self.curvature_area }
    }

    /// Model settings for split `repeat`; each repeat gets its own seed.
    pub fn model(&self, dataset_classes: usize, repeat: usize) -> anyhow::Result<ModelConfig> {
        let classes = self.classes.unwrap_or(dataset_classes);
        if classes < dataset_classes {
            bail!("configured for {classes} classes but the dataset has {dataset_classes}");
        }
        let base = match self.task {
            Task::Classification => ModelConfig::classification(classes),
            Task::Segmentation => ModelConfig::segmentation(classes),
        };
        let cfg = ModelConfig {
            mask: self.mask,
            tau: self.tau,
            block_layers: self.block_layers,
            blocks: self.blocks.unwrap_or(base.blocks),
            dropout: self.dropout,
            activation: self.activation,
            aggregation: self.aggregation,
            bias: self.bias,
            seed: self.seed.wrapping_add(repeat as u64),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train(&self, repeat: usize) -> TrainConfig {
        let defaults = TrainConfig::for_task(self.task);
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size.unwrap_or(defaults.batch_size),
            adam: self.adam,
            seed: self.seed.wrapping_add(repeat as u64),
            standardize: self.standardize,
            soft_edge_accuracy: self.soft_edge_accuracy,
        }
    }
}
