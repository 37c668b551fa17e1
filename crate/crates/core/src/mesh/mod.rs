//! Indexed triangle meshes: validation, adjacency, canonical placement.
//!
//! A [`Mesh`] owns its vertex positions and triangle index triples. Winding is
//! taken from the source file as-is. Derived connectivity lives in
//! [`EdgeTable`], which also enforces the manifold condition (no edge shared by
//! more than two faces).

mod edges;
mod io;
pub mod vec3;

pub use edges::{EdgeFaces, EdgeTable};
pub use io::{parse_obj, parse_off, read_mesh, write_obj};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// An indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub name: String,
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds a mesh, rejecting out-of-range indices and faces that repeat a vertex.
    pub fn new(name: impl Into<String>, vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidMesh(format!("face {fi} references vertex {bad} but mesh has {n} vertices")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex: {f:?}")));
            }
        }
        if let Some((i, p)) = vertices.iter().enumerate().find(|(_, p)| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {i} has non-finite position {p:?}")));
        }
        Ok(Self { name: name.into(), vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Corner positions of face `f`.
    pub fn triangle(&self, f: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Applies `map` to every vertex position, keeping topology.
    pub fn map_vertices(&self, mut map: impl FnMut(Point3) -> Point3) -> Mesh {
        Mesh {
            name: self.name.clone(),
            vertices: self.vertices.iter().map(|&p| map(p)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Relabels faces so that new face `i` is old face `order[i]`.
    pub fn permute_faces(&self, order: &[usize]) -> Result<Mesh> {
        if !is_permutation(order, self.faces.len()) {
            return Err(Error::shape("face order is not a permutation of the face indices"));
        }
        Ok(Mesh {
            name: self.name.clone(),
            vertices: self.vertices.clone(),
            faces: order.iter().map(|&i| self.faces[i]).collect(),
        })
    }
}

pub(crate) fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// Translates the vertex centroid to the origin and scales so the farthest
/// vertex sits at distance 1.
pub fn normalize_mesh(mesh: &Mesh) -> Result<Mesh> {
    if mesh.vertices.is_empty() {
        return Err(Error::DegenerateGeometry("mesh has no vertices".into()));
    }
    let n = mesh.vertices.len() as f64;
    let mut centroid = [0.0; 3];
    for p in &mesh.vertices {
        for k in 0..3 {
            centroid[k] += p[k];
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n);

    let radius = mesh.vertices.iter().map(|&p| vec3::norm(vec3::sub(p, centroid))).fold(0.0_f64, f64::max);
    if radius <= f64::EPSILON * centroid.iter().map(|c| c.abs()).fold(1.0, f64::max) {
        return Err(Error::DegenerateGeometry(format!("all vertices of '{}' coincide", mesh.name)));
    }
    Ok(mesh.map_vertices(|p| vec3::scale(vec3::sub(p, centroid), 1.0 / radius)))
}

/// V - E + F.
pub fn euler_characteristic(mesh: &Mesh, edges: &EdgeTable) -> i64 {
    mesh.vertex_count() as i64 - edges.edge_count() as i64 + mesh.face_count() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;

    #[test]
    fn rejects_out_of_range_and_repeated_indices() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(Mesh::new("a", v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(Mesh::new("a", v.clone(), vec![[0, 1, 1]]).is_err());
        assert!(Mesh::new("a", v, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn normalize_unit_cube_corners() {
        let cube = primitives::cube();
        let m = normalize_mesh(&cube).unwrap();
        let mut c = [0.0; 3];
        for p in m.vertices() {
            c = vec3::add(c, *p);
        }
        assert!(vec3::norm(c) < 1e-12);
        let r = m.vertices().iter().map(|&p| vec3::norm(p)).fold(0.0, f64::max);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let m = normalize_mesh(&primitives::icosphere(1)).unwrap();
        let again = normalize_mesh(&m).unwrap();
        for (a, b) in m.vertices().iter().zip(again.vertices()) {
            assert!(vec3::norm(vec3::sub(*a, *b)) < 1e-12);
        }
    }

    #[test]
    fn normalize_removes_similarity_transform() {
        let base = primitives::torus(12, 8, 1.0, 0.3);
        let moved = base.map_vertices(|p| vec3::add(vec3::scale(p, 7.0), [5.0, 5.0, 5.0]));
        let a = normalize_mesh(&base).unwrap();
        let b = normalize_mesh(&moved).unwrap();
        for (p, q) in a.vertices().iter().zip(b.vertices()) {
            assert!(vec3::norm(vec3::sub(*p, *q)) < 1e-9);
        }
        assert_eq!(a.faces(), b.faces());
    }

    #[test]
    fn normalize_rejects_coincident_vertices() {
        let m = Mesh::new("dot", vec![[2.0, 2.0, 2.0]; 3], vec![]).unwrap();
        assert!(matches!(normalize_mesh(&m), Err(Error::DegenerateGeometry(_))));
        let empty = Mesh::new("empty", vec![], vec![]).unwrap();
        assert!(normalize_mesh(&empty).is_err());
    }

    #[test]
    fn euler_characteristics() {
        for (mesh, chi) in
            [(primitives::tetrahedron(), 2), (primitives::icosahedron(), 2), (primitives::torus(16, 9, 1.0, 0.35), 0)]
        {
            let edges = EdgeTable::build(&mesh).unwrap();
            assert_eq!(euler_characteristic(&mesh, &edges), chi, "{}", mesh.name);
        }
        let ico = primitives::icosahedron();
        let e = EdgeTable::build(&ico).unwrap();
        assert_eq!((ico.vertex_count(), e.edge_count(), ico.face_count()), (12, 30, 20));
    }
}
