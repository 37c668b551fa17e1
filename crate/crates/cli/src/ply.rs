//! ASCII PLY output with per-face colors.

use std::fmt::Write as _;

use meshgcn::mesh::Mesh;

/// Fixed label palette; label `k` uses entry `k % 12`.
pub const PALETTE: [[u8; 3]; 12] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [255, 221, 0],
    [0, 0, 128],
];

pub const AGREE: [u8; 3] = [0, 200, 0];
pub const DISAGREE: [u8; 3] = [220, 0, 0];

pub fn label_color(label: usize) -> [u8; 3] {
    PALETTE[label % PALETTE.len()]
}

/// Writes `mesh` with one RGB triple per face.
pub fn write_colored_ply(mesh: &Mesh, colors: &[[u8; 3]]) -> String {
    assert_eq!(colors.len(), mesh.face_count(), "one color per face");
    let mut out = String::new();
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\ncomment {}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        mesh.name,
        mesh.vertex_count(),
        mesh.face_count()
    );
    for [x, y, z] in mesh.vertices() {
        let _ = writeln!(out, "{x:?} {y:?} {z:?}");
    }
    for ([a, b, c], [r, g, bl]) in mesh.faces().iter().zip(colors) {
        let _ = writeln!(out, "3 {a} {b} {c} {r} {g} {bl}");
    }
    out
}

pub fn label_ply(mesh: &Mesh, labels: &[usize]) -> String {
    let colors: Vec<[u8; 3]> = labels.iter().map(|&l| label_color(l)).collect();
    write_colored_ply(mesh, &colors)
}

/// Green where `predicted` matches `truth`, red elsewhere.
pub fn difference_ply(mesh: &Mesh, predicted: &[usize], truth: &[usize]) -> String {
    let colors: Vec<[u8; 3]> =
        predicted.iter().zip(truth).map(|(p, t)| if p == t { AGREE } else { DISAGREE }).collect();
    write_colored_ply(mesh, &colors)
}

/// Face colors read back from a file written by [`write_colored_ply`].
pub fn read_face_colors(text: &str) -> Vec<[u8; 3]> {
    let mut lines = text.lines();
    let mut vertices = 0;
    let mut faces = 0;
    for line in lines.by_ref() {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["element", "vertex", n] => vertices = n.parse().unwrap_or(0),
            ["element", "face", n] => faces = n.parse().unwrap_or(0),
            ["end_header"] => break,
            _ => {}
        }
    }
    lines
        .skip(vertices)
        .take(faces)
        .map(|l| {
            let v: Vec<u8> = l.split_whitespace().skip(4).filter_map(|t| t.parse().ok()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}
