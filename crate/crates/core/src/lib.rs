//! Face-graph geometric deep learning on triangle meshes.
//!
//! A mesh becomes a graph with one node per triangle and one edge per shared
//! mesh edge. Each node carries a 57-wide 1-ring geometric feature (vertex
//! positions, vertex normals, Gaussian curvature, face normals, dihedral
//! angles). Densely connected graph convolutional networks then classify whole
//! meshes or label every face.

pub mod checkpoint;
pub mod datasets;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod mesh;
pub mod models;
pub mod nn;
pub mod primitives;
pub mod train;

pub use error::{Error, Result};
