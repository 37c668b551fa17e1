use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use log::{info, warn};
use meshgcn::checkpoint::Checkpoint;
use meshgcn::datasets::{
    load_classification_dataset, load_face_labels, load_segmentation_dataset, make_splits, read_manifest,
    resolve_manifest, synthetic, write_manifest, DatasetIndex, ItemFailure, SplitRule, SplitSpec,
};
use meshgcn::geometry::{FeatureComponent, FeatureMask, FeatureOptions, MeshGeometry, ABLATION_MASKS};
use meshgcn::mesh::read_mesh;
use meshgcn::models::{
    architecture, argmax_rows, count_parameters, Model, ModelConfig, Task, REFERENCE_SEGMENTATION_PARAMETERS,
};
use meshgcn::train::{evaluate, prepare_dataset, train, FeatureScaling, PreparedItem, Target};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::ply;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hidden widths swept by `ablate --axis width`.
pub const ABLATION_WIDTHS: [usize; 8] = [8, 16, 32, 64, 128, 256, 512, 1024];

pub fn load_dataset(task: Task, root: &Path) -> Result<DatasetIndex> {
    let index = match task {
        Task::Classification => load_classification_dataset(root),
        Task::Segmentation => load_segmentation_dataset(root),
    }
    .with_context(|| format!("loading {task} dataset at {}", root.display()))?;
    ensure!(!index.is_empty(), "no meshes could be loaded from {}", root.display());
    Ok(index)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub component: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub toolkit_version: String,
    pub meshes: usize,
    pub width: usize,
    pub mask: FeatureMask,
    pub components: Vec<ComponentStats>,
    pub failures: Vec<ItemFailure>,
}

/// Writes `<out>/<relative path>.features` and `.adjacency` for every mesh.
pub fn cmd_extract(task: Task, dataset: &Path, options: FeatureOptions, out: &Path) -> Result<ExtractSummary> {
    let index = load_dataset(task, dataset)?;
    let mut failures = index.failures.clone();
    let mut stats: Vec<(f64, f64, f64, usize)> = vec![(f64::INFINITY, f64::NEG_INFINITY, 0.0, 0); 5];
    let mut written = 0;
    for item in &index.items {
        let geo = match MeshGeometry::compute(&item.mesh, &options) {
            Ok(g) => g,
            Err(e) => {
                warn!("skipping {}: {e}", item.path.display());
                failures.push(ItemFailure { path: item.path.clone(), reason: e.to_string() });
                continue;
            }
        };
        let feats = geo.features(options.mask);
        let rel = item.path.strip_prefix(dataset).unwrap_or(&item.path).with_extension("");
        let base = out.join(rel);
        let mut dump = Vec::new();
        feats.write_dump(&item.mesh.name, &mut dump)?;
        write_file(&base.with_extension("features"), std::str::from_utf8(&dump)?)?;
        let graph = meshgcn::graph::mesh_to_graph(&geo.edges, &feats);
        let mut adj = Vec::new();
        graph.write_adjacency(&mut adj)?;
        write_file(&base.with_extension("adjacency"), std::str::from_utf8(&adj)?)?;
        for (k, c) in FeatureComponent::ALL.iter().enumerate() {
            let Some(cols) = feats.columns(*c) else { continue };
            let s = &mut stats[k];
            for &v in feats.data.rows().into_iter().flat_map(|r| r.into_iter().skip(cols.start).take(cols.len())) {
                s.0 = s.0.min(v);
                s.1 = s.1.max(v);
                s.2 += v;
                s.3 += 1;
            }
        }
        written += 1;
    }
    let components = FeatureComponent::ALL
        .iter()
        .zip(&stats)
        .filter(|(_, s)| s.3 > 0)
        .map(|(c, s)| ComponentStats { component: c.tag().to_string(), min: s.0, max: s.1, mean: s.2 / s.3 as f64 })
        .collect();
    let summary = ExtractSummary {
        toolkit_version: TOOLKIT_VERSION.into(),
        meshes: written,
        width: options.mask.width(),
        mask: options.mask,
        components,
        failures,
    };
    write_file(&out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Exact parameter counts next to the quoted reference figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterReport {
    pub configured: usize,
    /// Same task and classes at τ=1024, n=5 with the default block count.
    pub full_width: usize,
    pub reference: Option<usize>,
    pub note: Option<String>,
}

pub fn parameter_report(model: &ModelConfig) -> Result<ParameterReport> {
    let configured = count_parameters(model)?;
    let full = ModelConfig {
        tau: 1024,
        block_layers: 5,
        blocks: match model.task {
            Task::Classification => 1,
            Task::Segmentation => 2,
        },
        ..model.clone()
    };
    let full_width = count_parameters(&full)?;
    let (reference, note) = match model.task {
        Task::Segmentation => (
            Some(REFERENCE_SEGMENTATION_PARAMETERS),
            Some(format!(
                "the 13-layer segmentation network at τ=1024 has {full_width} parameters; the reference figure \
                 {REFERENCE_SEGMENTATION_PARAMETERS} is smaller than its input layer alone and is left unreconciled"
            )),
        ),
        Task::Classification => (None, None),
    };
    Ok(ParameterReport { configured, full_width, reference, note })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub train_items: usize,
    pub test_items: usize,
    pub best_epoch: Option<usize>,
    pub best_test_accuracy: Option<f64>,
    pub best_test_edge_accuracy: Option<f64>,
    pub final_train_accuracy: f64,
    pub final_test_accuracy: Option<f64>,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub toolkit_version: String,
    pub config: RunConfig,
    /// Which epoch's test accuracy is reported.
    pub selection: String,
    pub parameters: ParameterReport,
    pub splits: Vec<SplitResult>,
    pub mean_best_test_accuracy: Option<f64>,
    pub failures: Vec<ItemFailure>,
}

/// One metrics-log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLine {
    pub split: usize,
    #[serde(flatten)]
    pub record: meshgcn::train::EpochRecord,
}

fn splits_for(cfg: &RunConfig, index: &DatasetIndex) -> Result<Vec<SplitSpec>> {
    if let Some(dir) = &cfg.manifest {
        let read = |name: &str| -> Result<Vec<usize>> {
            let path = dir.join(name);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let mut ids = resolve_manifest(index, &read_manifest(&text))?;
            ids.sort_unstable();
            Ok(ids)
        };
        return Ok(vec![SplitSpec { seed: cfg.seed, repeat: 0, train: read("train.txt")?, test: read("test.txt")? }]);
    }
    Ok(make_splits(&index.strata(), cfg.split, cfg.seed, cfg.repeats.max(1))?)
}

fn dataset_classes(index: &DatasetIndex) -> usize {
    index.class_count()
}

fn scaled_copies(items: &[&PreparedItem], scaling: &FeatureScaling) -> Result<Vec<PreparedItem>> {
    items
        .iter()
        .map(|it| {
            let mut c = (*it).clone();
            scaling.apply(&mut c.graph.features)?;
            Ok(c)
        })
        .collect()
}

/// Trains one model per split and writes config, metrics log, checkpoints and results.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport> {
    create_dir(&cfg.output)?;
    write_file(&cfg.output.join("config.json"), &cfg.to_json())?;
    let index = load_dataset(cfg.task, &cfg.dataset)?;
    let features = cfg.features();
    let (items, mut failures) = prepare_dataset(&index, &features, cfg.aggregation);
    failures.splice(0..0, index.failures.iter().cloned());
    ensure!(!items.is_empty(), "no usable meshes in {}", cfg.dataset.display());
    let usable = DatasetIndex {
        items: index.items.iter().filter(|i| !failures.iter().any(|f| f.path == i.path)).cloned().collect(),
        ..index.clone()
    };
    let splits = splits_for(cfg, &usable)?;
    let classes = dataset_classes(&index);
    let parameters = parameter_report(&cfg.model(classes, 0)?)?;
    info!("model has {} trainable parameters", parameters.configured);
    if let Some(note) = &parameters.note {
        info!("{note}");
    }

    let mut log = BufWriter::new(
        File::create(cfg.output.join("metrics.jsonl"))
            .with_context(|| format!("creating metrics log in {}", cfg.output.display()))?,
    );
    let mut results = Vec::with_capacity(splits.len());
    for split in &splits {
        let r = split.repeat;
        let mut train_refs: Vec<&PreparedItem> = split.train.iter().map(|&i| &items[i]).collect();
        let mut test_refs: Vec<&PreparedItem> = split.test.iter().map(|&i| &items[i]).collect();
        let scaling = if cfg.standardize { Some(FeatureScaling::fit(&train_refs)?) } else { None };
        let (scaled_train, scaled_test);
        if let Some(s) = &scaling {
            scaled_train = scaled_copies(&train_refs, s)?;
            scaled_test = scaled_copies(&test_refs, s)?;
            train_refs = scaled_train.iter().collect();
            test_refs = scaled_test.iter().collect();
        }
        let model = Model::new(cfg.model(classes, r)?)?;
        let mut write_err = None;
        let outcome = train(model, &train_refs, &test_refs, &cfg.train(r), |rec| {
            let line = MetricsLine { split: r, record: rec.clone() };
            if let Err(e) =
                serde_json::to_writer(&mut log, &line).map_err(anyhow::Error::from).and_then(|_| Ok(writeln!(log)?))
            {
                write_err.get_or_insert(e);
            }
            info!(
                "split {r} epoch {}: loss {:.4} train acc {:.4} test acc {}",
                rec.epoch,
                rec.train_loss,
                rec.train_accuracy,
                rec.test_accuracy.map_or("-".into(), |a| format!("{a:.4}"))
            );
        })
        .map_err(|e| anyhow!(e).context(format!("training split {r}")))?;
        if let Some(e) = write_err {
            return Err(e.context("writing metrics log"));
        }
        let best_record = outcome.best_epoch.map(|e| &outcome.history[e - 1]);
        let last = outcome.history.last();
        let ck_path = cfg.output.join(format!("checkpoint-split{r}.json"));
        let ck = Checkpoint::new(
            &outcome.best_model,
            features,
            index.class_names.clone(),
            scaling,
            outcome.best_epoch.unwrap_or(cfg.epochs),
            None,
        );
        ck.save(&ck_path)?;
        results.push(SplitResult {
            split: r,
            train_items: train_refs.len(),
            test_items: test_refs.len(),
            best_epoch: outcome.best_epoch,
            best_test_accuracy: outcome.best_test_accuracy,
            best_test_edge_accuracy: best_record.and_then(|b| b.test_edge_accuracy),
            final_train_accuracy: last.map_or(0.0, |l| l.train_accuracy),
            final_test_accuracy: last.and_then(|l| l.test_accuracy),
            checkpoint: ck_path,
        });
    }
    log.flush()?;
    let bests: Vec<f64> = results.iter().filter_map(|r| r.best_test_accuracy).collect();
    let report = TrainReport {
        toolkit_version: TOOLKIT_VERSION.into(),
        config: cfg.clone(),
        selection: "best test epoch per split".into(),
        parameters,
        mean_best_test_accuracy: (!bests.is_empty()).then(|| bests.iter().sum::<f64>() / bests.len() as f64),
        splits: results,
        failures,
    };
    write_file(&cfg.output.join("results.json"), &serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub name: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub toolkit_version: String,
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub task: Task,
    pub items: usize,
    pub accuracy: f64,
    pub edge_accuracy: Option<f64>,
    pub soft_edge_accuracy: bool,
    pub per_item: Vec<ItemScore>,
    pub failures: Vec<ItemFailure>,
}

fn checkpoint_items(ck: &Checkpoint, index: &DatasetIndex) -> Result<(Vec<PreparedItem>, Vec<ItemFailure>)> {
    let model = &ck.model;
    match model.task {
        Task::Classification => ensure!(
            index.class_count() == model.classes,
            "checkpoint predicts {} classes but the dataset has {}",
            model.classes,
            index.class_count()
        ),
        Task::Segmentation => ensure!(
            index.class_count() <= model.classes,
            "dataset uses {} segment labels but the checkpoint predicts {}",
            index.class_count(),
            model.classes
        ),
    }
    let (mut items, failures) = prepare_dataset(index, &ck.features, model.aggregation);
    if let Some(s) = &ck.scaling {
        for it in &mut items {
            s.apply(&mut it.graph.features)?;
        }
    }
    Ok((items, failures))
}

/// Scores a checkpoint on a dataset, optionally restricted to a manifest.
pub fn cmd_eval(checkpoint: &Path, dataset: &Path, manifest: Option<&Path>, soft_edges: bool) -> Result<EvalReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.model()?;
    let index = load_dataset(ck.model.task, dataset)?;
    let (items, mut failures) = checkpoint_items(&ck, &index)?;
    failures.splice(0..0, index.failures.iter().cloned());
    let selected: Vec<&PreparedItem> = match manifest {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let wanted = read_manifest(&text);
            let names: Vec<String> =
                wanted.iter().map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned()).collect();
            items.iter().filter(|it| names.contains(&it.name)).collect()
        }
        None => items.iter().collect(),
    };
    ensure!(!selected.is_empty(), "nothing to evaluate");
    let m = evaluate(&model, &selected, soft_edges)?;
    let per_item = selected
        .iter()
        .zip(&m.predictions)
        .map(|(it, p)| ItemScore { name: it.name.clone(), accuracy: meshgcn::train::item_accuracy(it, p) })
        .collect();
    Ok(EvalReport {
        toolkit_version: TOOLKIT_VERSION.into(),
        checkpoint: checkpoint.to_path_buf(),
        dataset: dataset.to_path_buf(),
        task: ck.model.task,
        items: m.items,
        accuracy: m.accuracy,
        edge_accuracy: m.edge_accuracy,
        soft_edge_accuracy: soft_edges,
        per_item,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportReport {
    pub labels_file: PathBuf,
    pub difference_file: Option<PathBuf>,
    pub face_accuracy: Option<f64>,
    pub predicted: Vec<usize>,
}

/// Writes `<out>.ply` colored by predicted label and, with ground truth,
/// `<out>.diff.ply` colored green/red by agreement.
pub fn cmd_export_seg(checkpoint: &Path, mesh_path: &Path, labels: Option<&Path>, out: &Path) -> Result<ExportReport> {
    let ck = Checkpoint::load(checkpoint)?;
    ensure!(ck.model.task == Task::Segmentation, "checkpoint is not a segmentation model");
    let model = ck.model()?;
    let mesh = read_mesh(mesh_path)?;
    let truth = labels
        .map(|p| -> Result<Vec<usize>> {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(load_face_labels(&text, &mesh)?)
        })
        .transpose()?;
    let geo = MeshGeometry::compute(&mesh, &ck.features)?;
    let target = Target::Faces(truth.clone().unwrap_or_else(|| vec![0; mesh.face_count()]));
    let mut item = PreparedItem::new(mesh.name.clone(), &geo, ck.features.mask, ck.model.aggregation, target);
    if let Some(s) = &ck.scaling {
        s.apply(&mut item.graph.features)?;
    }
    let predicted = argmax_rows(&model.predict(&item.batch()?)?);
    let labels_file = out.with_extension("ply");
    write_file(&labels_file, &ply::label_ply(&mesh, &predicted))?;
    let (difference_file, face_accuracy) = match &truth {
        Some(t) => {
            let path = out.with_extension("diff.ply");
            write_file(&path, &ply::difference_ply(&mesh, &predicted, t))?;
            (Some(path), Some(meshgcn::datasets::face_accuracy(&predicted, t)))
        }
        None => (None, None),
    };
    Ok(ExportReport { labels_file, difference_file, face_accuracy, predicted })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AblationAxis {
    Mask,
    Width,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mask: FeatureMask,
    pub width: usize,
    pub tau: usize,
}

/// Rows of a sweep: the 11 feature subsets, or the 8 hidden widths with all features.
pub fn ablation_rows(axis: AblationAxis, base: &RunConfig) -> Vec<AblationRow> {
    match axis {
        AblationAxis::Mask => {
            ABLATION_MASKS.iter().map(|&(mask, width)| AblationRow { mask, width, tau: base.tau }).collect()
        }
        AblationAxis::Width => ABLATION_WIDTHS
            .iter()
            .map(|&tau| AblationRow { mask: FeatureMask::ALL, width: FeatureMask::ALL.width(), tau })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub row: AblationRow,
    pub mean_best_test_accuracy: Option<f64>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub toolkit_version: String,
    pub axis: AblationAxis,
    pub base: RunConfig,
    pub results: Vec<AblationResult>,
}

impl AblationReport {
    /// Plain-text table, one line per row.
    pub fn table(&self) -> String {
        let second = match self.axis {
            AblationAxis::Mask => "Dimensions",
            AblationAxis::Width => "Nodes",
        };
        let mut out = format!("{:<20} {:>10} {:>10}\n", "Feature", second, "Acc");
        for r in &self.results {
            let value = match self.axis {
                AblationAxis::Mask => r.row.width,
                AblationAxis::Width => r.row.tau,
            };
            let acc = r.mean_best_test_accuracy.map_or("-".to_string(), |a| format!("{:.2}%", 100.0 * a));
            out.push_str(&format!("{:<20} {:>10} {:>10}\n", r.row.mask.to_string(), value, acc));
        }
        out
    }
}

/// Runs `cmd_train` once per selected row, each in `<output>/<axis>-<row>`.
pub fn cmd_ablate(base: &RunConfig, axis: AblationAxis, only: Option<&[usize]>) -> Result<AblationReport> {
    let rows = ablation_rows(axis, base);
    let picked: Vec<usize> = match only {
        Some(sel) => {
            if let Some(bad) = sel.iter().find(|&&i| i >= rows.len()) {
                bail!("row {bad} does not exist; the {axis:?} axis has {} rows", rows.len());
            }
            sel.to_vec()
        }
        None => (0..rows.len()).collect(),
    };
    let mut results = Vec::new();
    for k in picked {
        let row = rows[k].clone();
        let axis_name = match axis {
            AblationAxis::Mask => "mask",
            AblationAxis::Width => "width",
        };
        let cfg = RunConfig {
            mask: row.mask,
            tau: row.tau,
            output: base.output.join(format!("{axis_name}-{k:02}")),
            ..base.clone()
        };
        info!("ablation row {k}: mask {} τ {}", row.mask, row.tau);
        let report = cmd_train(&cfg)?;
        results.push(AblationResult {
            row,
            mean_best_test_accuracy: report.mean_best_test_accuracy,
            output: cfg.output,
        });
    }
    let report = AblationReport { toolkit_version: TOOLKIT_VERSION.into(), axis, base: base.clone(), results };
    write_file(&base.output.join("ablation.json"), &serde_json::to_string_pretty(&report)?)?;
    write_file(&base.output.join("ablation.txt"), &report.table())?;
    Ok(report)
}

/// Writes `split<r>/train.txt` and `split<r>/test.txt` under `out`.
pub fn cmd_splits(
    task: Task,
    dataset: &Path,
    rule: SplitRule,
    repeats: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<SplitSpec>> {
    let index = load_dataset(task, dataset)?;
    let splits = make_splits(&index.strata(), rule, seed, repeats)?;
    for s in &splits {
        let dir = out.join(format!("split{}", s.repeat));
        let paths = |ids: &[usize]| -> Vec<&Path> { ids.iter().map(|&i| index.items[i].path.as_path()).collect() };
        write_file(&dir.join("train.txt"), &write_manifest(&paths(&s.train)))?;
        write_file(&dir.join("test.txt"), &write_manifest(&paths(&s.test)))?;
    }
    Ok(splits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    Classification,
    Segmentation,
}

/// Generates one of the built-in synthetic datasets; returns the mesh count.
pub fn cmd_synth(kind: SynthKind, out: &Path, count: usize, noise: f64, seed: u64) -> Result<usize> {
    Ok(match kind {
        SynthKind::Classification => synthetic::write_classification_set(out, count, noise, seed)?,
        SynthKind::Segmentation => synthetic::write_segmentation_set(out, count, noise, seed)?,
    })
}

/// Layer listing with widths and parameter counts.
pub fn cmd_arch(model: &ModelConfig) -> Result<String> {
    let specs = architecture(model)?;
    let mut out = String::new();
    for (k, s) in specs.iter().enumerate() {
        out.push_str(&format!(
            "{:>3}  {:<14} {:<24} {:>12}\n",
            k + 1,
            s.name,
            s.to_string(),
            s.parameter_count(model.bias)
        ));
    }
    let report = parameter_report(model)?;
    out.push_str(&format!("total trainable parameters: {}\n", report.configured));
    if let Some(note) = report.note {
        out.push_str(&format!("note: {note}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_axis_has_eight_rows() {
        let rows = ablation_rows(AblationAxis::Width, &RunConfig::default());
        let taus: Vec<usize> = rows.iter().map(|r| r.tau).collect();
        assert_eq!(taus, [8, 16, 32, 64, 128, 256, 512, 1024]);
        assert!(rows.iter().all(|r| r.width == 57));
    }

    #[test]
    fn mask_axis_has_eleven_rows() {
        let rows = ablation_rows(AblationAxis::Mask, &RunConfig::default());
        let widths: Vec<usize> = rows.iter().map(|r| r.width).collect();
        assert_eq!(widths, [3, 6, 12, 18, 18, 39, 39, 45, 51, 54, 57]);
        assert_eq!(rows[0].mask.to_string(), "Theta");
    }

    #[test]
    fn parameter_report_notes_reference_for_segmentation_only() {
        let seg = parameter_report(&ModelConfig { tau: 8, ..ModelConfig::segmentation(8) }).unwrap();
        assert_eq!(seg.reference, Some(REFERENCE_SEGMENTATION_PARAMETERS));
        assert_eq!(seg.full_width, count_parameters(&ModelConfig::segmentation(8)).unwrap());
        assert!(seg.note.unwrap().contains("147828"));
        let cls = parameter_report(&ModelConfig::classification(2)).unwrap();
        assert_eq!(cls.configured, cls.full_width);
        assert!(cls.note.is_none());
    }

    #[test]
    fn ablation_table_layout() {
        let report = AblationReport {
            toolkit_version: TOOLKIT_VERSION.into(),
            axis: AblationAxis::Width,
            base: RunConfig::default(),
            results: vec![AblationResult {
                row: AblationRow { mask: FeatureMask::ALL, width: 57, tau: 64 },
                mean_best_test_accuracy: Some(0.9416),
                output: PathBuf::from("x"),
            }],
        };
        let t = report.table();
        assert!(t.lines().next().unwrap().contains("Nodes"));
        assert!(t.contains("64"));
        assert!(t.contains("94.16%"));
    }
}
