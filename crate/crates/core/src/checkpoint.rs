//! JSON checkpoints: model configuration, parameters, optimizer state.
//!
//! Floats are written with shortest round-trip formatting, so a checkpoint of
//! identical parameters is byte-identical and reloads exactly.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FeatureOptions;
use crate::models::{Model, ModelConfig};
use crate::nn::AdamState;
use crate::train::FeatureScaling;

pub const FORMAT: &str = "meshgcn-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub toolkit_version: String,
    pub model: ModelConfig,
    pub features: FeatureOptions,
    pub class_names: Vec<String>,
    pub scaling: Option<FeatureScaling>,
    pub epoch: usize,
    pub tensors: Vec<StoredTensor>,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(
        model: &Model,
        features: FeatureOptions,
        class_names: Vec<String>,
        scaling: Option<FeatureScaling>,
        epoch: usize,
        adam: Option<AdamState>,
    ) -> Self {
        let tensors = model
            .params()
            .iter()
            .map(|(name, v)| StoredTensor {
                name: name.to_string(),
                rows: v.nrows(),
                cols: v.ncols(),
                data: v.iter().copied().collect(),
            })
            .collect();
        Self {
            format: FORMAT.into(),
            version: VERSION,
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            model: model.config().clone(),
            features,
            class_names,
            scaling,
            epoch,
            tensors,
            adam,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(Error::config(format!(
                "unsupported checkpoint {} v{} (expected {FORMAT} v{VERSION})",
                c.format, c.version
            )));
        }
        if c.features.mask != c.model.mask {
            return Err(Error::config(format!(
                "checkpoint feature mask {} differs from model mask {}",
                c.features.mask, c.model.mask
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    pub fn model(&self) -> Result<Model> {
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                Array2::from_shape_vec((t.rows, t.cols), t.data.clone())
                    .map(|a| (t.name.clone(), a))
                    .map_err(|e| Error::config(format!("tensor {}: {e}", t.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Model::from_tensors(self.model.clone(), tensors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::AdamConfig;

    #[test]
    fn round_trip_is_exact_and_byte_stable() {
        let model = Model::new(ModelConfig { tau: 3, seed: 11, ..ModelConfig::segmentation(4) }).unwrap();
        let adam = AdamState::new(AdamConfig::default(), model.params());
        let scaling = FeatureScaling { mean: vec![0.1; 57], std: vec![1.0 / 3.0; 57] };
        let ck = Checkpoint::new(&model, FeatureOptions::default(), vec!["a".into()], Some(scaling), 7, Some(adam));
        let text = ck.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json().unwrap(), text);
        let m = back.model().unwrap();
        assert!(m.params().iter().zip(model.params().iter()).all(|(a, b)| a == b));
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(Checkpoint::from_json("{}").is_err());
        let model = Model::new(ModelConfig { tau: 2, ..ModelConfig::classification(2) }).unwrap();
        let mut ck = Checkpoint::new(&model, FeatureOptions::default(), vec![], None, 0, None);
        ck.version = 99;
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());
    }
}
