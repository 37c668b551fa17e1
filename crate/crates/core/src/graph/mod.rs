//! Face-adjacency graphs, their aggregation operators and minibatches.

mod sparse;

pub use sparse::CsrMatrix;

use std::ops::Range;
use std::sync::Arc;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NodeFeatures;
use crate::mesh::{EdgeFaces, EdgeTable};

/// How a node combines its neighbors' rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// `D̃^-1/2 (A + I) D̃^-1/2`, with `D̃` the degree matrix of `A + I`.
    #[default]
    SymmetricNormalized,
    /// Plain sum over neighbors, self excluded (`A`).
    NeighborSum,
}

/// One node per mesh face; one undirected edge per interior mesh edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGraph {
    node_count: usize,
    /// Sorted `(i, j)` pairs with `i < j`.
    edges: Vec<(usize, usize)>,
    pub features: Array2<f64>,
}

impl FaceGraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.node_count];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn feature_width(&self) -> usize {
        self.features.ncols()
    }

    /// Writes the edge list sidecar that accompanies a feature dump.
    pub fn write_adjacency(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "meshgcn-adjacency 1")?;
        writeln!(out, "nodes {}", self.node_count)?;
        writeln!(out, "edges {}", self.edges.len())?;
        for (i, j) in &self.edges {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }

    /// Rebuilds a graph from an adjacency sidecar and its feature rows.
    pub fn read_adjacency(text: &str, features: Array2<f64>) -> Result<FaceGraph> {
        let bad = |line: usize, message: &str| Error::Parse { line, message: message.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "meshgcn-adjacency 1")) => {}
            _ => return Err(bad(1, "expected 'meshgcn-adjacency 1' header")),
        }
        let mut count = |key: &str| -> Result<usize> {
            let (no, l) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
            l.strip_prefix(key)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| bad(no, &format!("expected '{key} <count>'")))
        };
        let nodes = count("nodes")?;
        let n_edges = count("edges")?;
        let mut edges = Vec::with_capacity(n_edges);
        for (no, l) in lines.filter(|(_, l)| !l.is_empty()) {
            let mut t = l.split_whitespace().map(str::parse::<usize>);
            match (t.next(), t.next(), t.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) if i < nodes && j < nodes && i != j => {
                    edges.push((i.min(j), i.max(j)))
                }
                _ => return Err(bad(no, "invalid edge line")),
            }
        }
        if edges.len() != n_edges {
            return Err(bad(0, "edge count does not match header"));
        }
        if features.nrows() != nodes {
            return Err(Error::shape(format!("{} feature rows for {nodes} nodes", features.nrows())));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(FaceGraph { node_count: nodes, edges, features })
    }
}

/// Face graph of a mesh with its node features attached by face index.
pub fn mesh_to_graph(edges: &EdgeTable, features: &NodeFeatures) -> FaceGraph {
    let mut pairs: Vec<(usize, usize)> = edges
        .edge_faces()
        .iter()
        .filter_map(|e| match *e {
            EdgeFaces::Interior(a, b) => Some((a.min(b), a.max(b))),
            EdgeFaces::Boundary(_) => None,
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    FaceGraph { node_count: features.rows(), edges: pairs, features: features.data.clone() }
}

/// Sparse aggregation weights for `graph`.
pub fn normalized_operator(graph: &FaceGraph, aggregation: Aggregation) -> CsrMatrix {
    let n = graph.node_count;
    let mut triplets = Vec::with_capacity(n + 2 * graph.edges.len());
    match aggregation {
        Aggregation::SymmetricNormalized => {
            // One rounding per weight: 1/sqrt(d̃_i·d̃_j), so equal degrees give exact reciprocals.
            let d: Vec<f64> = graph.degrees().iter().map(|&d| (d + 1) as f64).collect();
            triplets.extend(d.iter().enumerate().map(|(i, &di)| (i, i, 1.0 / di)));
            for &(i, j) in &graph.edges {
                let w = 1.0 / (d[i] * d[j]).sqrt();
                triplets.push((i, j, w));
                triplets.push((j, i, w));
            }
        }
        Aggregation::NeighborSum => {
            for &(i, j) in &graph.edges {
                triplets.push((i, j, 1.0));
                triplets.push((j, i, 1.0));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, triplets).expect("graph edges index valid nodes")
}

/// Several graphs stacked into one block-diagonal graph.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub features: Array2<f64>,
    pub ranges: Vec<Range<usize>>,
    pub operator: Arc<CsrMatrix>,
    pub graph_labels: Option<Vec<usize>>,
    pub node_labels: Option<Vec<usize>>,
}

impl GraphBatch {
    /// Stacks `(features, operator)` pairs.
    pub fn from_parts(parts: &[(ArrayView2<'_, f64>, &CsrMatrix)]) -> Result<GraphBatch> {
        let Some((first, _)) = parts.first() else {
            return Err(Error::shape("cannot batch zero graphs"));
        };
        let width = first.ncols();
        let mut ranges = Vec::with_capacity(parts.len());
        let mut offset = 0;
        for (k, (feats, op)) in parts.iter().enumerate() {
            if feats.ncols() != width {
                return Err(Error::shape(format!(
                    "graph {k} has feature width {} but graph 0 has {width}",
                    feats.ncols()
                )));
            }
            if op.rows() != feats.nrows() || op.cols() != feats.nrows() {
                return Err(Error::shape(format!(
                    "graph {k}: operator {}x{} for {} nodes",
                    op.rows(),
                    op.cols(),
                    feats.nrows()
                )));
            }
            ranges.push(offset..offset + feats.nrows());
            offset += feats.nrows();
        }
        let views: Vec<ArrayView2<'_, f64>> = parts.iter().map(|(f, _)| f.view()).collect();
        let features = concatenate(Axis(0), &views).map_err(|e| Error::shape(e.to_string()))?;
        let ops: Vec<&CsrMatrix> = parts.iter().map(|(_, op)| *op).collect();
        Ok(GraphBatch {
            features,
            ranges,
            operator: Arc::new(CsrMatrix::block_diagonal(&ops)),
            graph_labels: None,
            node_labels: None,
        })
    }

    pub fn with_graph_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.ranges.len() {
            return Err(Error::Label(format!("{} labels for {} graphs", labels.len(), self.ranges.len())));
        }
        self.graph_labels = Some(labels);
        Ok(self)
    }

    /// Concatenates per-graph node labels in batch order.
    pub fn with_node_labels(mut self, per_graph: &[&[usize]]) -> Result<Self> {
        if per_graph.len() != self.ranges.len() {
            return Err(Error::Label(format!("{} label sets for {} graphs", per_graph.len(), self.ranges.len())));
        }
        let mut all = Vec::with_capacity(self.node_count());
        for (k, (labels, range)) in per_graph.iter().zip(&self.ranges).enumerate() {
            if labels.len() != range.len() {
                return Err(Error::Label(format!("graph {k}: {} labels for {} nodes", labels.len(), range.len())));
            }
            all.extend_from_slice(labels);
        }
        self.node_labels = Some(all);
        Ok(self)
    }

    pub fn graph_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn node_count(&self) -> usize {
        self.features.nrows()
    }

    /// Splits rows of a batch-aligned matrix back into per-graph blocks.
    pub fn unbatch(&self, rows: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        if rows.nrows() != self.node_count() {
            return Err(Error::shape(format!("{} rows for a batch of {} nodes", rows.nrows(), self.node_count())));
        }
        Ok(self.ranges.iter().map(|r| rows.slice(s![r.clone(), ..]).to_owned()).collect())
    }

    /// Per-graph slices of the node labels.
    pub fn unbatch_node_labels(&self) -> Option<Vec<&[usize]>> {
        let labels = self.node_labels.as_ref()?;
        Some(self.ranges.iter().map(|r| &labels[r.clone()]).collect())
    }
}

/// Batches whole graphs, building each operator with `aggregation`.
pub fn batch_graphs(graphs: &[&FaceGraph], aggregation: Aggregation) -> Result<GraphBatch> {
    let ops: Vec<CsrMatrix> = graphs.iter().map(|g| normalized_operator(g, aggregation)).collect();
    let parts: Vec<(ArrayView2<'_, f64>, &CsrMatrix)> =
        graphs.iter().zip(&ops).map(|(g, op)| (g.features.view(), op)).collect();
    GraphBatch::from_parts(&parts)
}
