//! Closed and open triangle meshes generated procedurally.
//!
//! All closed shapes are wound so face normals point outward.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{vec3, Mesh, Point3};

fn build(name: &str, vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Mesh {
    Mesh::new(name, vertices, faces).expect("generated mesh is valid")
}

/// Flips faces of a convex, origin-enclosing shape so normals point away from the centroid.
fn orient_outward(vertices: &[Point3], faces: &mut [[usize; 3]]) {
    let n = vertices.len() as f64;
    let centroid = vertices.iter().fold([0.0; 3], |acc, &p| vec3::add(acc, vec3::scale(p, 1.0 / n)));
    for f in faces.iter_mut() {
        let [a, b, c] = f.map(|i| vertices[i]);
        let normal = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
        let face_center = vec3::scale(vec3::add(vec3::add(a, b), c), 1.0 / 3.0);
        if vec3::dot(normal, vec3::sub(face_center, centroid)) < 0.0 {
            f.swap(1, 2);
        }
    }
}

/// Regular tetrahedron with unit edge length, centered at the origin.
pub fn tetrahedron() -> Mesh {
    let s = 1.0 / (2.0 * 2f64.sqrt());
    let vertices: Vec<Point3> = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
        .into_iter()
        .map(|p| vec3::scale(p, s))
        .collect();
    let mut faces = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    orient_outward(&vertices, &mut faces);
    build("tetrahedron", vertices, faces)
}

/// Unit cube `[0,1]^3` as 12 triangles.
///
/// Every face diagonal passes through `(0,0,0)` or `(1,1,1)`, so those two
/// corners each touch six triangles of equal area.
pub fn cube() -> Mesh {
    let vertices: Vec<Point3> =
        (0..8).map(|i| [(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]).collect();
    let idx = |x: usize, y: usize, z: usize| x | (y << 1) | (z << 2);
    let mut faces = Vec::with_capacity(12);
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let corner = |a: usize, b: usize| {
                let mut c = [0usize; 3];
                c[axis] = side;
                c[u] = a;
                c[v] = b;
                idx(c[0], c[1], c[2])
            };
            // The face contains (0,0,0) when side = 0 and (1,1,1) when side = 1.
            let (d0, d1) = if side == 0 { (corner(0, 0), corner(1, 1)) } else { (corner(1, 1), corner(0, 0)) };
            faces.push([d0, corner(1, 0), d1]);
            faces.push([d0, d1, corner(0, 1)]);
        }
    }
    orient_outward(&vertices, &mut faces);
    build("cube", vertices, faces)
}

/// Regular icosahedron inscribed in the unit sphere.
pub fn icosahedron() -> Mesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut raw = Vec::with_capacity(12);
    for &a in &[-1.0, 1.0] {
        for &b in &[-phi, phi] {
            raw.push([0.0, a, b]);
            raw.push([a, b, 0.0]);
            raw.push([b, 0.0, a]);
        }
    }
    let vertices: Vec<Point3> = raw.iter().map(|&p| vec3::normalized(p).unwrap()).collect();
    // Faces are the triples that are pairwise at edge distance 2 in the unscaled coordinates.
    let adjacent = |i: usize, j: usize| (vec3::norm(vec3::sub(raw[i], raw[j])) - 2.0).abs() < 1e-9;
    let mut faces = Vec::with_capacity(20);
    for i in 0..12 {
        for j in i + 1..12 {
            for k in j + 1..12 {
                if adjacent(i, j) && adjacent(j, k) && adjacent(i, k) {
                    faces.push([i, j, k]);
                }
            }
        }
    }
    orient_outward(&vertices, &mut faces);
    build("icosahedron", vertices, faces)
}

/// Geodesic sphere: each icosahedron face split into `frequency²` triangles,
/// vertices projected to the unit sphere. Has `20·frequency²` faces.
pub fn geodesic_sphere(frequency: usize) -> Mesh {
    assert!(frequency >= 1, "frequency must be positive");
    let base = icosahedron();
    let f = frequency;
    let mut lookup: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces = Vec::with_capacity(20 * f * f);

    for tri in base.faces() {
        let [a, b, c] = *tri;
        let mut point = |i: usize, j: usize| -> usize {
            let mut key: Vec<(usize, usize)> =
                [(a, f - i - j), (b, i), (c, j)].into_iter().filter(|&(_, w)| w > 0).collect();
            key.sort_unstable();
            *lookup.entry(key.clone()).or_insert_with(|| {
                let mut p = [0.0; 3];
                for &(v, w) in &key {
                    p = vec3::add(p, vec3::scale(base.vertices()[v], w as f64));
                }
                vertices.push(vec3::normalized(p).unwrap());
                vertices.len() - 1
            })
        };
        for i in 0..f {
            for j in 0..f - i {
                faces.push([point(i, j), point(i + 1, j), point(i, j + 1)]);
                if i + j + 2 <= f {
                    faces.push([point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)]);
                }
            }
        }
    }
    build(&format!("geodesic_sphere_{f}"), vertices, faces)
}

/// Icosphere after `level` rounds of 4-to-1 subdivision (`20·4^level` faces).
pub fn icosphere(level: u32) -> Mesh {
    let mut m = geodesic_sphere(1 << level);
    m.name = format!("icosphere_{level}");
    m
}

/// Torus around the z axis with `major` segments around the ring and `minor`
/// around the tube.
pub fn torus(major: usize, minor: usize, ring_radius: f64, tube_radius: f64) -> Mesh {
    assert!(major >= 3 && minor >= 3);
    let mut vertices = Vec::with_capacity(major * minor);
    for i in 0..major {
        let u = 2.0 * PI * i as f64 / major as f64;
        for j in 0..minor {
            let v = 2.0 * PI * j as f64 / minor as f64;
            let r = ring_radius + tube_radius * v.cos();
            vertices.push([r * u.cos(), r * u.sin(), tube_radius * v.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % major) * minor + (j % minor);
    let mut faces = Vec::with_capacity(2 * major * minor);
    for i in 0..major {
        for j in 0..minor {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build("torus", vertices, faces)
}

/// Closed cylinder along z, centered at the origin, with fan-triangulated caps.
///
/// Face count is `2·segments·rings + 2·segments`; side faces come first, ordered
/// bottom ring to top ring.
pub fn cylinder(segments: usize, rings: usize, radius: f64, height: f64) -> Mesh {
    assert!(segments >= 3 && rings >= 1);
    let mut vertices = Vec::with_capacity(segments * (rings + 1) + 2);
    for k in 0..=rings {
        let z = -height / 2.0 + height * k as f64 / rings as f64;
        for i in 0..segments {
            let a = 2.0 * PI * i as f64 / segments as f64;
            vertices.push([radius * a.cos(), radius * a.sin(), z]);
        }
    }
    let bottom = vertices.len();
    vertices.push([0.0, 0.0, -height / 2.0]);
    let top = vertices.len();
    vertices.push([0.0, 0.0, height / 2.0]);

    let id = |k: usize, i: usize| k * segments + i % segments;
    let mut faces = Vec::with_capacity(2 * segments * (rings + 1));
    for k in 0..rings {
        for i in 0..segments {
            faces.push([id(k, i), id(k, i + 1), id(k + 1, i + 1)]);
            faces.push([id(k, i), id(k + 1, i + 1), id(k + 1, i)]);
        }
    }
    for i in 0..segments {
        faces.push([bottom, id(0, i + 1), id(0, i)]);
        faces.push([top, id(rings, i), id(rings, i + 1)]);
    }
    build("cylinder", vertices, faces)
}

/// Surface of the cube `[-1,1]^3` with each side split into a `k×k` grid
/// (`12·k²` faces).
pub fn box_grid(k: usize) -> Mesh {
    assert!(k >= 1);
    let mut lookup: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::with_capacity(12 * k * k);
    let mut point = |c: [usize; 3]| -> usize {
        *lookup.entry(c).or_insert_with(|| {
            vertices.push(c.map(|x| 2.0 * x as f64 / k as f64 - 1.0));
            vertices.len() - 1
        })
    };
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, k] {
            let outward = if side == 0 { -1.0 } else { 1.0 };
            for a in 0..k {
                for b in 0..k {
                    let at = |da: usize, db: usize| {
                        let mut c = [0usize; 3];
                        c[axis] = side;
                        c[u] = a + da;
                        c[v] = b + db;
                        c
                    };
                    let quad = [at(0, 0), at(1, 0), at(1, 1), at(0, 1)];
                    for tri in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                        let p = tri.map(|c| c.map(|x| x as f64));
                        let n = vec3::cross(vec3::sub(p[1], p[0]), vec3::sub(p[2], p[0]));
                        let mut ids = tri.map(&mut point);
                        if n[axis] * outward < 0.0 {
                            ids.swap(1, 2);
                        }
                        faces.push(ids);
                    }
                }
            }
        }
    }
    build(&format!("box_{k}"), vertices, faces)
}

/// Two triangles in the z=0 plane sharing edge (v1, v2).
pub fn two_triangles() -> Mesh {
    build(
        "two_triangles",
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
        vec![[0, 1, 2], [1, 3, 2]],
    )
}

/// Fan of `n` triangles around vertex 0 in the z=0 plane, wound counter-clockwise.
pub fn flat_fan(n: usize) -> Mesh {
    assert!(n >= 3);
    let mut vertices = vec![[0.0, 0.0, 0.0]];
    for i in 0..n {
        let a = 2.0 * PI * i as f64 / n as f64;
        // Irregular radii keep the fan generic.
        let r = 1.0 + 0.3 * ((i * 7) % 5) as f64 / 5.0;
        vertices.push([r * a.cos(), r * a.sin(), 0.0]);
    }
    let faces = (0..n).map(|i| [0, 1 + i, 1 + (i + 1) % n]).collect();
    build("fan", vertices, faces)
}
