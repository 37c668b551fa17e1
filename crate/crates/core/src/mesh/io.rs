//! ASCII OBJ and OFF readers, OBJ writer.

use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, Point3};
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| parse_err(line, format!("invalid number '{tok}'")))
}

/// Reads `v` and `f` records from OBJ text. Other record types are ignored.
///
/// Face corners may use the `v/vt/vn` forms; only the position index is kept.
/// Negative (relative) indices are resolved against the vertices read so far.
pub fn parse_obj(text: &str, name: &str) -> Result<Mesh> {
    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let coords: Vec<&str> = toks.collect();
                if coords.len() < 3 {
                    return Err(parse_err(line_no, "vertex record needs 3 coordinates"));
                }
                vertices.push([
                    parse_f64(coords[0], line_no)?,
                    parse_f64(coords[1], line_no)?,
                    parse_f64(coords[2], line_no)?,
                ]);
            }
            Some("f") => {
                let corners: Vec<&str> = toks.collect();
                if corners.len() > 3 {
                    return Err(Error::UnsupportedTopology { line: line_no, vertices: corners.len() });
                }
                if corners.len() < 3 {
                    return Err(parse_err(line_no, format!("face has only {} corners", corners.len())));
                }
                let mut face = [0usize; 3];
                for (slot, corner) in face.iter_mut().zip(&corners) {
                    let idx_tok = corner.split('/').next().unwrap_or("");
                    let idx: i64 =
                        idx_tok.parse().map_err(|_| parse_err(line_no, format!("invalid face index '{corner}'")))?;
                    *slot = match idx {
                        0 => return Err(parse_err(line_no, "OBJ indices are 1-based; found 0")),
                        i if i > 0 => (i - 1) as usize,
                        i => {
                            let resolved = vertices.len() as i64 + i;
                            if resolved < 0 {
                                return Err(parse_err(line_no, format!("relative index {i} before first vertex")));
                            }
                            resolved as usize
                        }
                    };
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Mesh::new(name, vertices, faces)
}

/// Reads an ASCII OFF file containing only triangles.
pub fn parse_off(text: &str, name: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (first_no, first) = lines.next().ok_or_else(|| parse_err(1, "empty OFF file"))?;
    let mut header = first.split_whitespace();
    if header.next() != Some("OFF") {
        return Err(parse_err(first_no, "missing OFF header"));
    }
    let rest: Vec<&str> = header.collect();
    let (counts_no, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (no, l) = lines.next().ok_or_else(|| parse_err(first_no, "missing counts line"))?;
        (no, l.split_whitespace().collect())
    } else {
        (first_no, rest)
    };
    if counts.len() < 2 {
        return Err(parse_err(counts_no, "counts line needs vertex and face counts"));
    }
    let count = |tok: &str| tok.parse::<usize>().map_err(|_| parse_err(counts_no, format!("invalid count '{tok}'")));
    let (nv, nf) = (count(counts[0])?, count(counts[1])?);

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (no, l) = lines
            .next()
            .ok_or_else(|| parse_err(counts_no, format!("header declares {nv} vertices but only {k} present")))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(parse_err(no, "vertex line needs 3 coordinates"));
        }
        vertices.push([parse_f64(t[0], no)?, parse_f64(t[1], no)?, parse_f64(t[2], no)?]);
    }

    let mut faces = Vec::with_capacity(nf);
    for k in 0..nf {
        let (no, l) = lines
            .next()
            .ok_or_else(|| parse_err(counts_no, format!("header declares {nf} faces but only {k} present")))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        let arity: usize = t
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(no, "face line must start with its vertex count"))?;
        if arity > 3 {
            return Err(Error::UnsupportedTopology { line: no, vertices: arity });
        }
        if arity < 3 || t.len() < 4 {
            return Err(parse_err(no, "face needs 3 vertex indices"));
        }
        let mut face = [0usize; 3];
        for (slot, tok) in face.iter_mut().zip(&t[1..4]) {
            *slot = tok.parse().map_err(|_| parse_err(no, format!("invalid face index '{tok}'")))?;
        }
        faces.push(face);
    }
    if let Some((no, _)) = lines.next() {
        return Err(parse_err(no, format!("data beyond the declared {nv} vertices and {nf} faces")));
    }
    Mesh::new(name, vertices, faces)
}

/// Serializes to OBJ. Coordinates use shortest round-trip formatting.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::with_capacity(32 * (mesh.vertex_count() + mesh.face_count()));
    let _ = writeln!(out, "# {}", mesh.name);
    for [x, y, z] in mesh.vertices() {
        let _ = writeln!(out, "v {x:?} {y:?} {z:?}");
    }
    for [a, b, c] in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    out
}

/// Loads an `.obj` or `.off` file; the mesh is named after the file stem.
pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
    let parsed = match ext.as_str() {
        "obj" => parse_obj(&text, &name),
        "off" => parse_off(&text, &name),
        other => Err(Error::config(format!("unsupported mesh extension '{other}'"))),
    };
    parsed.map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;
    use proptest::prelude::*;

    #[test]
    fn minimal_obj() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3", "t").unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_quad_is_unsupported() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n", "q").unwrap_err();
        assert!(matches!(err, Error::UnsupportedTopology { line: 5, vertices: 4 }));
    }

    #[test]
    fn obj_ignores_other_records_and_slash_forms() {
        let text = "# comment\nmtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nusemtl m\ns off\nf 1/1/1 2//1 -1/3\n";
        let m = parse_obj(text, "t").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_malformed_line_reports_line_number() {
        match parse_obj("v 0 0 0\nv 1 zero 0\n", "t") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", "t") {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn icosahedron_obj_counts() {
        let text = write_obj(&primitives::icosahedron());
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 12);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 20);
        let m = parse_obj(&text, "ico").unwrap();
        assert_eq!((m.vertex_count(), m.face_count()), (12, 20));
    }

    #[test]
    fn minimal_off() {
        let m = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2", "t").unwrap();
        assert_eq!((m.vertex_count(), m.face_count()), (3, 1));
        assert_eq!(m.faces()[0], [0, 1, 2]);
    }

    #[test]
    fn off_count_mismatch() {
        assert!(matches!(parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n", "t"), Err(Error::Parse { .. })));
        assert!(matches!(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n", "t"), Err(Error::Parse { .. })));
        assert!(matches!(parse_off("3 1 0\n", "t"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn off_tetrahedron() {
        let t = primitives::tetrahedron();
        let mut text = format!("OFF\n{} {} 0\n", t.vertex_count(), t.face_count());
        for p in t.vertices() {
            text += &format!("{} {} {}\n", p[0], p[1], p[2]);
        }
        for f in t.faces() {
            text += &format!("3 {} {} {}\n", f[0], f[1], f[2]);
        }
        let m = parse_off(&text, "tet").unwrap();
        assert_eq!((m.vertex_count(), m.face_count()), (4, 4));
        assert_eq!(m.faces(), t.faces());
    }

    #[test]
    fn off_quad_is_unsupported() {
        let text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(parse_off(text, "q"), Err(Error::UnsupportedTopology { vertices: 4, .. })));
    }

    proptest! {
        #[test]
        fn obj_round_trip(
            pts in proptest::collection::vec(proptest::array::uniform3(-1e6f64..1e6), 3..40),
            seed in 0usize..1000,
        ) {
            let n = pts.len();
            let faces: Vec<[usize; 3]> = (0..n)
                .map(|i| [(i + seed) % n, (i + seed + 1) % n, (i + seed + 2) % n])
                .collect();
            let m = Mesh::new("rt", pts, faces).unwrap();
            let back = parse_obj(&write_obj(&m), "rt").unwrap();
            prop_assert_eq!(back.faces(), m.faces());
            for (a, b) in back.vertices().iter().zip(m.vertices()) {
                for k in 0..3 {
                    prop_assert!((a[k] - b[k]).abs() <= 1e-12 * b[k].abs().max(1.0));
                }
            }
        }
    }
}
