//! Dataset directories, face labels, seeded splits and edge-label conversion.
//!
//! Classification layout: `root/<class>/[<split>/]*.{obj,off}`; class ids follow
//! sorted class names. Segmentation layout: `root/meshes/*.{obj,off}` with
//! `root/labels/<stem>.txt` holding one integer per face.

pub mod synthetic;

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{read_mesh, EdgeFaces, EdgeTable, Mesh};

fn is_mesh_file(path: &Path) -> bool {
    path.is_file()
        && path.extension().map(|e| matches!(e.to_ascii_lowercase().to_str(), Some("obj" | "off"))).unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::from(e).in_file(dir))? {
        out.push(entry.map_err(|e| Error::from(e).in_file(dir))?.path());
    }
    out.sort();
    Ok(out)
}

/// An item that failed to load, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub path: PathBuf,
    pub mesh: Mesh,
    /// Class id for classification, `None` for segmentation.
    pub class: Option<usize>,
    /// Per-face segment ids for segmentation.
    pub face_labels: Option<Vec<usize>>,
    /// Name of the split subdirectory the file was found in, if any.
    pub split_hint: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub class_names: Vec<String>,
    pub items: Vec<DatasetItem>,
    pub failures: Vec<ItemFailure>,
}

impl DatasetIndex {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Per-item class ids; segmentation items all count as class 0.
    pub fn strata(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.class.unwrap_or(0)).collect()
    }

    pub fn paths(&self) -> Vec<&Path> {
        self.items.iter().map(|i| i.path.as_path()).collect()
    }
}

fn load_meshes(paths: Vec<(PathBuf, usize, Option<String>)>) -> (Vec<DatasetItem>, Vec<ItemFailure>) {
    let loaded: Vec<_> =
        paths.into_par_iter().map(|(path, class, hint)| (read_mesh(&path), path, class, hint)).collect();
    let mut items = Vec::new();
    let mut failures = Vec::new();
    for (mesh, path, class, split_hint) in loaded {
        match mesh {
            Ok(mesh) => items.push(DatasetItem { path, mesh, class: Some(class), face_labels: None, split_hint }),
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                failures.push(ItemFailure { path, reason: e.to_string() });
            }
        }
    }
    (items, failures)
}

/// Indexes `root/<class>/...` and parses every mesh. Unreadable meshes are
/// collected in `failures` instead of aborting.
pub fn load_classification_dataset(root: &Path) -> Result<DatasetIndex> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(Error::config(format!("{} has no class directories", root.display())));
    }
    let mut class_names = Vec::new();
    let mut paths = Vec::new();
    for (class, dir) in class_dirs.iter().enumerate() {
        class_names.push(dir.file_name().unwrap_or_default().to_string_lossy().into_owned());
        let before = paths.len();
        for entry in sorted_entries(dir)? {
            if entry.is_dir() {
                let hint = entry.file_name().map(|n| n.to_string_lossy().into_owned());
                for f in sorted_entries(&entry)?.into_iter().filter(|p| is_mesh_file(p)) {
                    paths.push((f, class, hint.clone()));
                }
            } else if is_mesh_file(&entry) {
                paths.push((entry, class, None));
            }
        }
        if paths.len() == before {
            warn!("class directory {} holds no meshes", dir.display());
        }
    }
    let (items, failures) = load_meshes(paths);
    info!(
        "loaded {} meshes in {} classes from {} ({} failed)",
        items.len(),
        class_names.len(),
        root.display(),
        failures.len()
    );
    Ok(DatasetIndex { root: root.to_path_buf(), class_names, items, failures })
}

/// Parses one integer per non-empty line.
pub fn parse_label_lines(text: &str) -> Result<Vec<i64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<i64>()
                .map_err(|_| Error::Parse { line: i + 1, message: format!("invalid label '{}'", l.trim()) })
        })
        .collect()
}

fn to_zero_based(raw: &[i64], shift: bool) -> Result<Vec<usize>> {
    let offset = i64::from(shift);
    raw.iter().map(|&v| usize::try_from(v - offset).map_err(|_| Error::Label(format!("negative label {v}")))).collect()
}

/// Face labels of `mesh` from label-file text. A file whose smallest label is 1
/// is taken as 1-based and shifted down.
pub fn load_face_labels(text: &str, mesh: &Mesh) -> Result<Vec<usize>> {
    let raw = parse_label_lines(text)?;
    if raw.len() != mesh.face_count() {
        return Err(Error::Label(format!("{} labels for {} faces of '{}'", raw.len(), mesh.face_count(), mesh.name)));
    }
    let shift = raw.iter().min() == Some(&1);
    if shift {
        info!("labels for '{}' look 1-based; shifting to 0-based", mesh.name);
    }
    to_zero_based(&raw, shift)
}

/// Indexes `root/meshes` with labels from `root/labels/<stem>.txt`.
///
/// The 1-based check runs over the whole dataset, so one file missing label 0
/// is not shifted on its own.
pub fn load_segmentation_dataset(root: &Path) -> Result<DatasetIndex> {
    let mesh_dir = root.join("meshes");
    let label_dir = root.join("labels");
    let mesh_paths: Vec<(PathBuf, usize, Option<String>)> =
        sorted_entries(&mesh_dir)?.into_iter().filter(|p| is_mesh_file(p)).map(|p| (p, 0, None)).collect();
    if mesh_paths.is_empty() {
        return Err(Error::config(format!("{} holds no meshes", mesh_dir.display())));
    }
    let (loaded, mut failures) = load_meshes(mesh_paths);
    let mut labelled = Vec::new();
    for item in loaded {
        let stem = item.path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let label_path = label_dir.join(format!("{stem}.txt"));
        let parsed = fs::read_to_string(&label_path)
            .map_err(|e| Error::from(e).in_file(&label_path))
            .and_then(|t| parse_label_lines(&t).map_err(|e| e.in_file(&label_path)))
            .and_then(|raw| {
                if raw.len() == item.mesh.face_count() {
                    Ok(raw)
                } else {
                    Err(Error::Label(format!("{} labels for {} faces", raw.len(), item.mesh.face_count()))
                        .in_file(&label_path))
                }
            });
        match parsed {
            Ok(raw) => labelled.push((item, raw)),
            Err(e) => {
                warn!("skipping {}: {e}", item.path.display());
                failures.push(ItemFailure { path: item.path, reason: e.to_string() });
            }
        }
    }
    let min = labelled.iter().flat_map(|(_, raw)| raw.iter().copied()).min();
    let shift = min == Some(1);
    if shift {
        info!("segmentation labels under {} look 1-based; shifting to 0-based", label_dir.display());
    }
    let mut items = Vec::with_capacity(labelled.len());
    let mut classes = 0;
    for (mut item, raw) in labelled {
        let labels = to_zero_based(&raw, shift).map_err(|e| e.in_file(&item.path))?;
        classes = classes.max(labels.iter().max().map_or(0, |m| m + 1));
        item.class = None;
        item.face_labels = Some(labels);
        items.push(item);
    }
    Ok(DatasetIndex {
        root: root.to_path_buf(),
        class_names: (0..classes).map(|c| format!("segment{c}")).collect(),
        items,
        failures,
    })
}

/// How many items of each class go to training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRule {
    PerClass(usize),
    Fraction(f64),
}

/// One train/test partition, as item indices in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub repeat: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `repeats` independent stratified splits of items with class ids `strata`.
///
/// Repeat `r` shuffles each class with stream `r` of a ChaCha8 generator seeded
/// by `seed`, so any single split can be regenerated on its own.
pub fn make_splits(strata: &[usize], rule: SplitRule, seed: u64, repeats: usize) -> Result<Vec<SplitSpec>> {
    let classes = strata.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in strata.iter().enumerate() {
        members[c].push(i);
    }
    let mut takes = Vec::with_capacity(classes);
    for (c, m) in members.iter().enumerate() {
        let take = match rule {
            SplitRule::PerClass(n) => n,
            SplitRule::Fraction(f) => {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::config(format!("train fraction {f} outside [0, 1]")));
                }
                (f * m.len() as f64).round() as usize
            }
        };
        if take > m.len() {
            return Err(Error::config(format!(
                "class {c} has {} items but {take} are requested for training",
                m.len()
            )));
        }
        if take == m.len() && !m.is_empty() {
            warn!("class {c}: every item goes to training; its test set is empty");
        }
        takes.push(take);
    }
    let mut splits = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(repeat as u64);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (m, &take) in members.iter().zip(&takes) {
            let mut shuffled = m.clone();
            shuffled.shuffle(&mut rng);
            train.extend_from_slice(&shuffled[..take]);
            test.extend_from_slice(&shuffled[take..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        splits.push(SplitSpec { seed, repeat, train, test });
    }
    Ok(splits)
}

/// One path per line.
pub fn write_manifest(paths: &[&Path]) -> String {
    paths.iter().map(|p| format!("{}\n", p.display())).collect()
}

pub fn read_manifest(text: &str) -> Vec<PathBuf> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(PathBuf::from).collect()
}

/// Item indices whose paths are listed in a manifest, in manifest order.
pub fn resolve_manifest(index: &DatasetIndex, paths: &[PathBuf]) -> Result<Vec<usize>> {
    paths
        .iter()
        .map(|p| {
            index
                .items
                .iter()
                .position(|i| &i.path == p)
                .ok_or_else(|| Error::config(format!("manifest entry {} is not in the dataset", p.display())))
        })
        .collect()
}

/// Per-edge labels. Agreeing neighbors share their label; disagreeing ones give
/// the label of the lower-indexed face; boundary edges take their only face's label.
pub fn face_to_edge_labels(edges: &EdgeTable, labels: &[usize]) -> Vec<usize> {
    edges
        .edge_faces()
        .iter()
        .map(|e| match *e {
            EdgeFaces::Boundary(f) => labels[f],
            EdgeFaces::Interior(a, b) => labels[a.min(b)],
        })
        .collect()
}

/// Fraction of faces whose prediction matches the truth.
pub fn face_accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

/// Edge accuracy after converting both labelings with [`face_to_edge_labels`].
/// With `soft`, an edge also counts as correct when its predicted label matches
/// the truth of either incident face.
pub fn edge_accuracy(edges: &EdgeTable, predicted: &[usize], truth: &[usize], soft: bool) -> f64 {
    let pred = face_to_edge_labels(edges, predicted);
    let hard = face_to_edge_labels(edges, truth);
    if pred.is_empty() {
        return 0.0;
    }
    let correct = edges
        .edge_faces()
        .iter()
        .zip(pred.iter().zip(&hard))
        .filter(|(faces, (p, t))| {
            p == t
                || (soft
                    && match **faces {
                        EdgeFaces::Interior(a, b) => **p == truth[a] || **p == truth[b],
                        EdgeFaces::Boundary(_) => false,
                    })
        })
        .count();
    correct as f64 / pred.len() as f64
}
