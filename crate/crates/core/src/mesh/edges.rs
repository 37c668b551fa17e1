use std::collections::HashMap;

use super::Mesh;
use crate::error::{Error, Result};

/// Faces incident to one undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFaces {
    Boundary(usize),
    Interior(usize, usize),
}

impl EdgeFaces {
    pub fn first(&self) -> usize {
        match *self {
            EdgeFaces::Boundary(f) | EdgeFaces::Interior(f, _) => f,
        }
    }

    /// The face across this edge from `face`, if there is one.
    pub fn other(&self, face: usize) -> Option<usize> {
        match *self {
            EdgeFaces::Boundary(_) => None,
            EdgeFaces::Interior(a, b) if a == face => Some(b),
            EdgeFaces::Interior(a, b) if b == face => Some(a),
            EdgeFaces::Interior(..) => None,
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, EdgeFaces::Boundary(_))
    }
}

/// Undirected edges of a manifold triangle mesh.
///
/// Edges are numbered in order of first appearance while walking faces in
/// index order and each face's slots `(v0,v1), (v1,v2), (v2,v0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTable {
    edges: Vec<[usize; 2]>,
    edge_faces: Vec<EdgeFaces>,
    face_edges: Vec<[usize; 3]>,
}

impl EdgeTable {
    pub fn build(mesh: &Mesh) -> Result<Self> {
        let mut lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(mesh.face_count() * 3 / 2 + 3);
        let mut edges = Vec::new();
        let mut incident: Vec<Vec<usize>> = Vec::new();
        let mut face_edges = Vec::with_capacity(mesh.face_count());

        for (fi, f) in mesh.faces().iter().enumerate() {
            let mut slots = [0usize; 3];
            for k in 0..3 {
                let key = edge_key(f[k], f[(k + 1) % 3]);
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    incident.push(Vec::with_capacity(2));
                    edges.len() - 1
                });
                incident[id].push(fi);
                slots[k] = id;
            }
            face_edges.push(slots);
        }

        let mut edge_faces = Vec::with_capacity(edges.len());
        for (id, faces) in incident.iter().enumerate() {
            match faces.as_slice() {
                [a] => edge_faces.push(EdgeFaces::Boundary(*a)),
                [a, b] if a != b => edge_faces.push(EdgeFaces::Interior(*a, *b)),
                _ => {
                    let [u, v] = edges[id];
                    return Err(Error::NonManifoldEdge(u, v, faces.len()));
                }
            }
        }

        let boundary = edge_faces.iter().filter(|e| e.is_boundary()).count();
        if boundary > 0 {
            log::warn!("mesh '{}' is not watertight: {boundary} boundary edges", mesh.name);
        }

        Ok(Self { edges, edge_faces, face_edges })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Vertex pair of edge `e`, smaller index first.
    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces_of_edge(&self, e: usize) -> EdgeFaces {
        self.edge_faces[e]
    }

    pub fn edge_faces(&self) -> &[EdgeFaces] {
        &self.edge_faces
    }

    /// Edge ids of face `f` in slot order `(v0,v1), (v1,v2), (v2,v0)`.
    pub fn edges_of_face(&self, f: usize) -> [usize; 3] {
        self.face_edges[f]
    }

    pub fn face_edge_slots(&self) -> &[[usize; 3]] {
        &self.face_edges
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edge_faces.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edge_count() == 0
    }
}

fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;

    #[test]
    fn tetrahedron_edges_are_all_interior() {
        let t = primitives::tetrahedron();
        let e = EdgeTable::build(&t).unwrap();
        assert_eq!(e.edge_count(), 6);
        // Brute force: every pair of the 4 faces shares exactly one edge.
        for id in 0..6 {
            let [u, v] = e.edge(id);
            let owners: Vec<usize> = t
                .faces()
                .iter()
                .enumerate()
                .filter(|(_, f)| f.contains(&u) && f.contains(&v))
                .map(|(i, _)| i)
                .collect();
            assert_eq!(owners.len(), 2);
            assert_eq!(e.faces_of_edge(id), EdgeFaces::Interior(owners[0], owners[1]));
        }
        assert_eq!(e.face_edge_slots().len() * 3, 12);
    }

    #[test]
    fn single_triangle_has_three_boundary_edges() {
        let m = Mesh::new("tri", vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let e = EdgeTable::build(&m).unwrap();
        assert_eq!(e.edge_count(), 3);
        assert!(e.edge_faces().iter().all(|f| *f == EdgeFaces::Boundary(0)));
        assert_eq!(e.edges_of_face(0), [0, 1, 2]);
        assert_eq!(e.edges(), &[[0, 1], [1, 2], [0, 2]]);
    }

    #[test]
    fn two_triangles_share_one_edge() {
        let m = primitives::two_triangles();
        let e = EdgeTable::build(&m).unwrap();
        assert_eq!(e.edge_count(), 5);
        let shared: Vec<_> = e.edge_faces().iter().filter(|f| !f.is_boundary()).collect();
        assert_eq!(shared, vec![&EdgeFaces::Interior(0, 1)]);
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = Mesh::new("fin", v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap();
        match EdgeTable::build(&m) {
            Err(Error::NonManifoldEdge(0, 1, 3)) => {}
            other => panic!("expected non-manifold error, got {other:?}"),
        }
    }

    #[test]
    fn closed_meshes_satisfy_three_f_equals_two_e() {
        for m in [primitives::icosphere(2), primitives::torus(10, 7, 1.0, 0.4), primitives::cube()] {
            let e = EdgeTable::build(&m).unwrap();
            assert!(e.is_closed());
            assert_eq!(3 * m.face_count(), 2 * e.edge_count());
        }
    }
}
