//! Per-face and per-vertex differential geometry and the 1-ring node feature.
//!
//! Every face contributes one feature row built from its 1-ring: the three
//! faces across its edges, and the vertices of those faces that lie opposite
//! the shared edges. Edge slots are ordered `(v0,v1), (v1,v2), (v2,v0)`
//! everywhere. A slot on a boundary edge is padded with the face itself: its
//! neighbor is the face, its dihedral angle is 0 and its opposite vertex is
//! the face's own vertex opposite that edge.

mod features;

pub use features::{assemble_features, FeatureComponent, FeatureMask, NodeFeatures, ABLATION_MASKS};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{normalize_mesh, vec3, EdgeTable, Mesh, Point3};

/// Faces with area below this are rejected.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Area used to normalize the angular deficit at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureArea {
    /// Sum of the areas of all incident triangles.
    #[default]
    IncidentSum,
    /// One third of the incident-area sum (barycentric cell).
    IncidentThird,
}

/// The 1-ring of one face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceRing {
    /// Face across each edge slot; `None` on a boundary edge.
    pub neighbors: [Option<usize>; 3],
    /// Vertex opposite each edge slot: in the neighbor face, or in this face for boundary slots.
    pub opposite: [usize; 3],
}

impl FaceRing {
    /// Neighbor across slot `k`, with boundary slots padded by `this`.
    pub fn neighbor_or_self(&self, k: usize, this: usize) -> usize {
        self.neighbors[k].unwrap_or(this)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceGeometry {
    pub normals: Vec<Point3>,
    pub areas: Vec<f64>,
    pub rings: Vec<FaceRing>,
    /// Dihedral angle per edge slot, radians in [0, π].
    pub dihedral: Vec<[f64; 3]>,
}

impl FaceGeometry {
    pub fn compute(mesh: &Mesh, edges: &EdgeTable) -> Result<Self> {
        let (normals, areas) = face_normals_areas(mesh)?;
        let rings = one_ring(mesh, edges);
        let dihedral = dihedral_angles(&rings, &normals);
        Ok(Self { normals, areas, rings, dihedral })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexGeometry {
    pub normals: Vec<Point3>,
    pub curvature: Vec<f64>,
}

impl VertexGeometry {
    pub fn compute(mesh: &Mesh, faces: &FaceGeometry, area: CurvatureArea) -> Result<Self> {
        Ok(Self {
            normals: vertex_normals(mesh, &faces.normals, &faces.areas)?,
            curvature: gaussian_curvature(mesh, area),
        })
    }
}

/// Unit normal `(v1-v0)×(v2-v0)` normalized, and area, of every face.
pub fn face_normals_areas(mesh: &Mesh) -> Result<(Vec<Point3>, Vec<f64>)> {
    let mut normals = Vec::with_capacity(mesh.face_count());
    let mut areas = Vec::with_capacity(mesh.face_count());
    for f in 0..mesh.face_count() {
        let [a, b, c] = mesh.triangle(f);
        let cross = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
        let len = vec3::norm(cross);
        let area = 0.5 * len;
        if area.is_nan() || area < DEGENERATE_AREA {
            return Err(Error::DegenerateFace { face: f, area });
        }
        normals.push(vec3::scale(cross, 1.0 / len));
        areas.push(area);
    }
    Ok((normals, areas))
}

/// Area-weighted sum of incident face normals, rescaled to unit length.
///
/// Vertices referenced by no face get a zero normal.
pub fn vertex_normals(mesh: &Mesh, face_normals: &[Point3], areas: &[f64]) -> Result<Vec<Point3>> {
    let mut sums = vec![[0.0; 3]; mesh.vertex_count()];
    let mut incident = vec![0.0; mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let weighted = vec3::scale(face_normals[fi], areas[fi]);
        for &v in f {
            sums[v] = vec3::add(sums[v], weighted);
            incident[v] += areas[fi];
        }
    }
    sums.iter()
        .zip(&incident)
        .enumerate()
        .map(|(v, (&s, &area))| {
            if area == 0.0 {
                return Ok([0.0; 3]);
            }
            // Relative threshold: full cancellation leaves only rounding noise.
            match vec3::normalized(s) {
                Some(n) if vec3::norm(s) > 1e-12 * area => Ok(n),
                _ => Err(Error::DegenerateNormal(v)),
            }
        })
        .collect()
}

/// Per-vertex angle sum and incident-area sum.
fn angle_and_area_sums(mesh: &Mesh) -> (Vec<f64>, Vec<f64>) {
    let mut angles = vec![0.0; mesh.vertex_count()];
    let mut areas = vec![0.0; mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = mesh.triangle(fi);
        let area = 0.5 * vec3::norm(vec3::cross(vec3::sub(p[1], p[0]), vec3::sub(p[2], p[0])));
        for k in 0..3 {
            let here = p[k];
            let next = p[(k + 1) % 3];
            let prev = p[(k + 2) % 3];
            angles[f[k]] += vec3::angle_between(vec3::sub(next, here), vec3::sub(prev, here));
            areas[f[k]] += area;
        }
    }
    (angles, areas)
}

/// `2π − Σ incident angles` at every vertex. Vertices without faces get 0.
pub fn angular_deficits(mesh: &Mesh) -> Vec<f64> {
    let (angles, areas) = angle_and_area_sums(mesh);
    angles.iter().zip(&areas).map(|(&s, &a)| if a > 0.0 { 2.0 * PI - s } else { 0.0 }).collect()
}

/// Discrete Gaussian curvature: angular deficit over incident area.
pub fn gaussian_curvature(mesh: &Mesh, area: CurvatureArea) -> Vec<f64> {
    let (angles, areas) = angle_and_area_sums(mesh);
    let scale = match area {
        CurvatureArea::IncidentSum => 1.0,
        CurvatureArea::IncidentThird => 1.0 / 3.0,
    };
    let mut isolated = 0usize;
    let out = angles
        .iter()
        .zip(&areas)
        .map(|(&s, &a)| {
            if a > 0.0 {
                (2.0 * PI - s) / (a * scale)
            } else {
                isolated += 1;
                0.0
            }
        })
        .collect();
    if isolated > 0 {
        log::warn!("mesh '{}': {isolated} isolated vertices given zero curvature", mesh.name);
    }
    out
}

/// Neighbor face and opposite vertex for each edge slot of each face.
pub fn one_ring(mesh: &Mesh, edges: &EdgeTable) -> Vec<FaceRing> {
    mesh.faces()
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let slots = edges.edges_of_face(fi);
            let mut ring = FaceRing { neighbors: [None; 3], opposite: [0; 3] };
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                match edges.faces_of_edge(slots[k]).other(fi) {
                    Some(g) => {
                        ring.neighbors[k] = Some(g);
                        ring.opposite[k] = *mesh.faces()[g]
                            .iter()
                            .find(|&&v| v != a && v != b)
                            .expect("neighbor face has a vertex off the shared edge");
                    }
                    None => ring.opposite[k] = f[(k + 2) % 3],
                }
            }
            ring
        })
        .collect()
}

/// Angle between unit normals of a face and each of its neighbors.
pub fn dihedral_angles(rings: &[FaceRing], face_normals: &[Point3]) -> Vec<[f64; 3]> {
    rings
        .iter()
        .enumerate()
        .map(|(fi, ring)| {
            let mut out = [0.0; 3];
            for (k, slot) in out.iter_mut().enumerate() {
                if let Some(g) = ring.neighbors[k] {
                    *slot = normal_angle(face_normals[fi], face_normals[g]);
                }
            }
            out
        })
        .collect()
}

/// Angle between two vectors as `atan2(|a×b|, a·b)`, which stays accurate
/// near 0 and π where `acos` of the dot product loses half its digits.
pub fn normal_angle(a: Point3, b: Point3) -> f64 {
    vec3::norm(vec3::cross(a, b)).atan2(vec3::dot(a, b))
}

/// Options for turning a mesh into node features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub mask: FeatureMask,
    pub normalize_mesh: bool,
    pub curvature_area: CurvatureArea,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { mask: FeatureMask::ALL, normalize_mesh: true, curvature_area: CurvatureArea::IncidentSum }
    }
}

/// Everything derived from one mesh on the way to its face graph.
#[derive(Debug, Clone)]
pub struct MeshGeometry {
    pub mesh: Mesh,
    pub edges: EdgeTable,
    pub faces: FaceGeometry,
    pub vertices: VertexGeometry,
}

impl MeshGeometry {
    pub fn compute(mesh: &Mesh, options: &FeatureOptions) -> Result<Self> {
        let mesh = if options.normalize_mesh { normalize_mesh(mesh)? } else { mesh.clone() };
        let edges = EdgeTable::build(&mesh)?;
        let faces = FaceGeometry::compute(&mesh, &edges)?;
        let vertices = VertexGeometry::compute(&mesh, &faces, options.curvature_area)?;
        Ok(Self { mesh, edges, faces, vertices })
    }

    pub fn features(&self, mask: FeatureMask) -> NodeFeatures {
        assemble_features(&self.mesh, &self.vertices, &self.faces, mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::euler_characteristic;
    use crate::primitives;

    fn geometry(mesh: &Mesh) -> (EdgeTable, FaceGeometry) {
        let e = EdgeTable::build(mesh).unwrap();
        let fg = FaceGeometry::compute(mesh, &e).unwrap();
        (e, fg)
    }

    #[test]
    fn right_triangle_normal_and_area() {
        let m = Mesh::new("t", vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let (n, a) = face_normals_areas(&m).unwrap();
        assert_eq!(n[0], [0.0, 0.0, 1.0]);
        assert_eq!(a[0], 0.5);

        let flipped = Mesh::new("t", m.vertices().to_vec(), vec![[0, 2, 1]]).unwrap();
        let (n, _) = face_normals_areas(&flipped).unwrap();
        assert_eq!(n[0], [0.0, 0.0, -1.0]);
    }

    #[test]
    fn regular_tetrahedron_areas() {
        let (_, areas) = face_normals_areas(&primitives::tetrahedron()).unwrap();
        for a in areas {
            assert!((a - 3f64.sqrt() / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_face_is_reported() {
        let m = Mesh::new("d", vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(face_normals_areas(&m), Err(Error::DegenerateFace { face: 0, .. })));
    }

    #[test]
    fn flat_fan_vertex_normals_point_up() {
        let m = primitives::flat_fan(7);
        let (n, a) = face_normals_areas(&m).unwrap();
        for vn in vertex_normals(&m, &n, &a).unwrap() {
            assert!(vec3::norm(vec3::sub(vn, [0.0, 0.0, 1.0])) < 1e-12);
        }
    }

    #[test]
    fn cube_corner_vertex_normal() {
        let m = primitives::cube();
        let (n, a) = face_normals_areas(&m).unwrap();
        let vn = vertex_normals(&m, &n, &a).unwrap();
        let corner = m.vertices().iter().position(|p| *p == [1.0, 1.0, 1.0]).unwrap();
        // Hand sum: x̂·1 + ŷ·1 + ẑ·1 (each side contributes two half-unit triangles).
        let expected = vec3::scale([1.0, 1.0, 1.0], 1.0 / 3f64.sqrt());
        assert!(vec3::norm(vec3::sub(vn[corner], expected)) < 1e-12);
    }

    #[test]
    fn folded_vertex_normal_is_degenerate() {
        // Two coincident triangles with opposite winding cancel at every vertex.
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = Mesh::new("fold", v, vec![[0, 1, 2], [0, 2, 1]]).unwrap();
        let (n, a) = face_normals_areas(&m).unwrap();
        assert!(matches!(vertex_normals(&m, &n, &a), Err(Error::DegenerateNormal(_))));
    }

    #[test]
    fn sphere_vertex_normals_are_radial() {
        let m = primitives::icosphere(3);
        let (n, a) = face_normals_areas(&m).unwrap();
        let vn = vertex_normals(&m, &n, &a).unwrap();
        for (p, nv) in m.vertices().iter().zip(&vn) {
            let angle = normal_angle(*p, *nv);
            assert!(angle < 2f64.to_radians(), "angle {angle}");
            assert!((vec3::norm(*nv) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn planar_interior_vertex_has_zero_curvature() {
        let m = primitives::flat_fan(9);
        let k = gaussian_curvature(&m, CurvatureArea::IncidentSum);
        assert!(k[0].abs() < 1e-12);
    }

    #[test]
    fn cube_corner_curvature_by_hand() {
        let m = primitives::cube();
        let k = gaussian_curvature(&m, CurvatureArea::IncidentSum);
        for (v, p) in m.vertices().iter().enumerate() {
            // Oracle: every cube corner sees three right angles; area by enumerating incident faces.
            let area: f64 = m.faces().iter().filter(|f| f.contains(&v)).map(|_| 0.5).sum();
            let expected = (PI / 2.0) / area;
            assert!((k[v] - expected).abs() < 1e-12, "{p:?}");
        }
        let third = gaussian_curvature(&m, CurvatureArea::IncidentThird);
        assert!((third[7] - 3.0 * k[7]).abs() < 1e-12);
    }

    #[test]
    fn gauss_bonnet_on_closed_meshes() {
        for m in [primitives::tetrahedron(), primitives::icosphere(3), primitives::torus(20, 11, 1.0, 0.4)] {
            let e = EdgeTable::build(&m).unwrap();
            let total: f64 = angular_deficits(&m).iter().sum();
            let expected = 2.0 * PI * euler_characteristic(&m, &e) as f64;
            assert!((total - expected).abs() <= 1e-9 * expected.abs().max(1.0), "{}", m.name);
        }
    }

    #[test]
    fn isolated_vertex_curvature_is_zero() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0, 5.0, 5.0]];
        let m = Mesh::new("iso", v, vec![[0, 1, 2]]).unwrap();
        assert_eq!(gaussian_curvature(&m, CurvatureArea::IncidentSum)[3], 0.0);
    }

    #[test]
    fn dihedral_angles_by_analytic_normals() {
        let m = primitives::two_triangles();
        let (_, fg) = geometry(&m);
        assert_eq!(fg.dihedral[0][1], 0.0);

        let (_, fg) = geometry(&primitives::tetrahedron());
        let expected = (-1.0f64 / 3.0).acos();
        for row in &fg.dihedral {
            for &a in row {
                assert!((a - expected).abs() < 1e-9);
            }
        }
        assert!((expected - 1.91063).abs() < 1e-5);

        let (_, fg) = geometry(&primitives::cube());
        for (f, ring) in fg.rings.iter().enumerate() {
            for k in 0..3 {
                let g = ring.neighbors[k].unwrap();
                let coplanar = fg.normals[f] == fg.normals[g];
                let expected = if coplanar { 0.0 } else { PI / 2.0 };
                assert!((fg.dihedral[f][k] - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dihedral_angles_are_symmetric() {
        let m = primitives::torus(9, 7, 1.0, 0.45);
        let (_, fg) = geometry(&m);
        for (f, ring) in fg.rings.iter().enumerate() {
            for k in 0..3 {
                let g = ring.neighbors[k].unwrap();
                let back = fg.rings[g].neighbors.iter().position(|&n| n == Some(f)).unwrap();
                assert_eq!(fg.dihedral[f][k], fg.dihedral[g][back]);
            }
        }
    }

    #[test]
    fn tetrahedron_ring_is_k4() {
        let (_, fg) = geometry(&primitives::tetrahedron());
        for (f, ring) in fg.rings.iter().enumerate() {
            let mut n: Vec<usize> = ring.neighbors.iter().map(|x| x.unwrap()).collect();
            n.sort();
            let expected: Vec<usize> = (0..4).filter(|&g| g != f).collect();
            assert_eq!(n, expected);
        }
    }

    #[test]
    fn two_triangle_ring_and_padding() {
        let m = primitives::two_triangles();
        let (_, fg) = geometry(&m);
        assert_eq!(fg.rings[0].neighbors, [None, Some(1), None]);
        assert_eq!(fg.rings[0].opposite, [2, 3, 1]);
        assert_eq!(fg.rings[1].neighbors[2], Some(0));
        assert_eq!(fg.rings[1].opposite[2], 0);

        let tri = Mesh::new("t", vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let (_, fg) = geometry(&tri);
        assert_eq!(fg.rings[0].neighbors, [None; 3]);
        assert_eq!(fg.rings[0].opposite, [2, 0, 1]);
        assert_eq!(fg.dihedral[0], [0.0; 3]);
        assert_eq!(fg.rings[0].neighbor_or_self(1, 0), 0);
    }
}
