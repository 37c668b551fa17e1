//! Small generated datasets for smoke tests and learnability checks.
//!
//! Classification: jittered geodesic spheres (500 faces) against jittered
//! subdivided boxes (432 faces), each randomly rotated and stretched.
//! Segmentation: jittered closed cylinders (600 faces) whose faces are labelled
//! by the sign of the centroid's z coordinate.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{write_obj, Mesh, Point3};
use crate::primitives;

pub type Rotation = [[f64; 3]; 3];

/// Uniformly distributed rotation (unit quaternion method).
pub fn random_rotation(rng: &mut impl Rng) -> Rotation {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) =
        (a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn rotate_point(r: &Rotation, p: Point3) -> Point3 {
    [0, 1, 2].map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2])
}

fn jitter(mesh: &Mesh, amplitude: f64, rng: &mut impl Rng) -> Mesh {
    mesh.map_vertices(|p| p.map(|c| c + rng.random_range(-amplitude..=amplitude)))
}

fn stretch_and_rotate(mesh: &Mesh, rng: &mut impl Rng) -> Mesh {
    let s: [f64; 3] = [(); 3].map(|_| rng.random_range(0.8..1.2));
    let r = random_rotation(rng);
    mesh.map_vertices(|p| rotate_point(&r, [p[0] * s[0], p[1] * s[1], p[2] * s[2]]))
}

pub fn noisy_sphere(noise: f64, rng: &mut impl Rng) -> Mesh {
    let m = jitter(&primitives::geodesic_sphere(5), noise, rng);
    stretch_and_rotate(&m, rng)
}

pub fn noisy_box(noise: f64, rng: &mut impl Rng) -> Mesh {
    let m = jitter(&primitives::box_grid(6), noise, rng);
    stretch_and_rotate(&m, rng)
}

/// `(class name, mesh)` pairs, `per_class` of each class, classes interleaved.
pub fn classification_meshes(per_class: usize, noise: f64, seed: u64) -> Vec<(&'static str, Mesh)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * per_class);
    for i in 0..per_class {
        let mut s = noisy_sphere(noise, &mut rng);
        s.name = format!("sphere_{i:03}");
        out.push(("sphere", s));
        let mut b = noisy_box(noise, &mut rng);
        b.name = format!("box_{i:03}");
        out.push(("box", b));
    }
    out
}

/// Jittered cylinder with top/bottom face labels.
pub fn labelled_cylinder(noise: f64, rng: &mut impl Rng) -> (Mesh, Vec<usize>) {
    let radius = rng.random_range(0.4..0.6);
    let height = rng.random_range(1.6..2.4);
    let base = primitives::cylinder(20, 14, radius, height);
    let spin = rng.random_range(0.0..2.0 * PI);
    let (s, c) = spin.sin_cos();
    let m = jitter(&base, noise, rng).map_vertices(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]);
    let labels = (0..m.face_count())
        .map(|f| {
            let t = base.triangle(f);
            usize::from(t[0][2] + t[1][2] + t[2][2] > 0.0)
        })
        .collect();
    (m, labels)
}

pub fn segmentation_meshes(count: usize, noise: f64, seed: u64) -> Vec<(Mesh, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (mut m, l) = labelled_cylinder(noise, &mut rng);
            m.name = format!("cylinder_{i:03}");
            (m, l)
        })
        .collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::from(e).in_file(path))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::from(e).in_file(path))
}

/// Writes `root/<class>/<name>.obj`; returns the number of meshes.
pub fn write_classification_set(root: &Path, per_class: usize, noise: f64, seed: u64) -> Result<usize> {
    let meshes = classification_meshes(per_class, noise, seed);
    for (class, mesh) in &meshes {
        let dir = root.join(class);
        create_dir(&dir)?;
        write(&dir.join(format!("{}.obj", mesh.name)), &write_obj(mesh))?;
    }
    Ok(meshes.len())
}

/// Writes `root/meshes/<name>.obj` and `root/labels/<name>.txt`.
pub fn write_segmentation_set(root: &Path, count: usize, noise: f64, seed: u64) -> Result<usize> {
    let (mesh_dir, label_dir) = (root.join("meshes"), root.join("labels"));
    create_dir(&mesh_dir)?;
    create_dir(&label_dir)?;
    let items = segmentation_meshes(count, noise, seed);
    for (mesh, labels) in &items {
        write(&mesh_dir.join(format!("{}.obj", mesh.name)), &write_obj(mesh))?;
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        write(&label_dir.join(format!("{}.txt", mesh.name)), &text)?;
    }
    Ok(items.len())
}
