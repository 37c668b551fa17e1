use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{FaceGeometry, VertexGeometry};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// One block of the node feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureComponent {
    /// Positions of the 3 face vertices and 3 opposite ring vertices.
    Positions,
    /// Vertex normals, same vertex order.
    VertexNormals,
    /// Gaussian curvature, same vertex order.
    Curvature,
    /// Face normals of the face and its 3 neighbors.
    FaceNormals,
    /// Dihedral angles to the 3 neighbors.
    Angles,
}

impl FeatureComponent {
    /// Row-layout order.
    pub const ALL: [FeatureComponent; 5] = [
        FeatureComponent::Positions,
        FeatureComponent::VertexNormals,
        FeatureComponent::Curvature,
        FeatureComponent::FaceNormals,
        FeatureComponent::Angles,
    ];

    pub const fn width(self) -> usize {
        match self {
            FeatureComponent::Positions | FeatureComponent::VertexNormals => 18,
            FeatureComponent::Curvature => 6,
            FeatureComponent::FaceNormals => 12,
            FeatureComponent::Angles => 3,
        }
    }

    pub const fn tag(self) -> &'static str {
        match self {
            FeatureComponent::Positions => "P",
            FeatureComponent::VertexNormals => "Nv",
            FeatureComponent::Curvature => "GC",
            FeatureComponent::FaceNormals => "Nf",
            FeatureComponent::Angles => "Theta",
        }
    }

    const fn bit(self) -> u8 {
        match self {
            FeatureComponent::Positions => 1,
            FeatureComponent::VertexNormals => 2,
            FeatureComponent::Curvature => 4,
            FeatureComponent::FaceNormals => 8,
            FeatureComponent::Angles => 16,
        }
    }
}

impl FromStr for FeatureComponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p" | "pos" | "positions" => Ok(FeatureComponent::Positions),
            "nv" | "vertex-normals" => Ok(FeatureComponent::VertexNormals),
            "gc" | "curvature" => Ok(FeatureComponent::Curvature),
            "nf" | "face-normals" => Ok(FeatureComponent::FaceNormals),
            "theta" | "angles" | "θ" => Ok(FeatureComponent::Angles),
            other => Err(Error::config(format!("unknown feature component '{other}'"))),
        }
    }
}

/// Subset of feature components to emit, always in row-layout order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureMask(u8);

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask(0b11111);
    pub const NONE: FeatureMask = FeatureMask(0);

    pub fn from_components(components: &[FeatureComponent]) -> Self {
        FeatureMask(components.iter().fold(0, |acc, c| acc | c.bit()))
    }

    pub fn contains(self, c: FeatureComponent) -> bool {
        self.0 & c.bit() != 0
    }

    pub fn components(self) -> impl Iterator<Item = FeatureComponent> {
        FeatureComponent::ALL.into_iter().filter(move |&c| self.contains(c))
    }

    pub fn width(self) -> usize {
        self.components().map(FeatureComponent::width).sum()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tags: Vec<&str> = self.components().map(FeatureComponent::tag).collect();
        f.write_str(&tags.join(","))
    }
}

impl fmt::Debug for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeatureMask({self})")
    }
}

impl FromStr for FeatureMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(FeatureMask::ALL);
        }
        let comps =
            s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect::<Result<Vec<FeatureComponent>>>()?;
        let mask = FeatureMask::from_components(&comps);
        if mask.is_empty() {
            return Err(Error::config("feature mask selects no components"));
        }
        Ok(mask)
    }
}

impl TryFrom<String> for FeatureMask {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureMask> for String {
    fn from(m: FeatureMask) -> String {
        m.to_string()
    }
}

/// Input-feature ablation rows: (mask, expected width), in table order.
pub const ABLATION_MASKS: [(FeatureMask, usize); 11] = {
    use FeatureComponent as C;
    const fn m(bits: &[FeatureComponent]) -> FeatureMask {
        let mut acc = 0;
        let mut i = 0;
        while i < bits.len() {
            acc |= bits[i].bit();
            i += 1;
        }
        FeatureMask(acc)
    }
    [
        (m(&[C::Angles]), 3),
        (m(&[C::Curvature]), 6),
        (m(&[C::FaceNormals]), 12),
        (m(&[C::Positions]), 18),
        (m(&[C::VertexNormals]), 18),
        (m(&[C::VertexNormals, C::Curvature, C::FaceNormals, C::Angles]), 39),
        (m(&[C::Positions, C::Curvature, C::FaceNormals, C::Angles]), 39),
        (m(&[C::Positions, C::VertexNormals, C::Curvature, C::Angles]), 45),
        (m(&[C::Positions, C::VertexNormals, C::FaceNormals, C::Angles]), 51),
        (m(&[C::Positions, C::VertexNormals, C::Curvature, C::FaceNormals]), 54),
        (FeatureMask::ALL, 57),
    ]
};

/// Per-face feature matrix, one row per face.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub data: Array2<f64>,
    pub mask: FeatureMask,
}

impl NodeFeatures {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    /// Column range of `component` within a row, if the mask includes it.
    pub fn columns(&self, component: FeatureComponent) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for c in self.mask.components() {
            if c == component {
                return Some(start..start + c.width());
            }
            start += c.width();
        }
        None
    }

    /// Writes the textual dump: header lines then one row per face.
    pub fn write_dump(&self, name: &str, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "meshgcn-features 1")?;
        writeln!(out, "name {name}")?;
        writeln!(out, "faces {}", self.rows())?;
        writeln!(out, "width {}", self.width())?;
        writeln!(out, "mask {}", self.mask)?;
        let mut line = String::new();
        for row in self.data.rows() {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{v:?}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parses a dump written by [`NodeFeatures::write_dump`]; returns the mesh name too.
    pub fn read_dump(text: &str) -> Result<(String, NodeFeatures)> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header = |key: &str| -> Result<String> {
            let (no, line) =
                lines.next().ok_or_else(|| Error::Parse { line: 0, message: format!("missing '{key}' header") })?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| Error::Parse { line: no, message: format!("expected '{key}' header") })?;
            Ok(rest.trim().to_string())
        };
        if header("meshgcn-features")? != "1" {
            return Err(Error::Parse { line: 1, message: "unsupported feature dump version".into() });
        }
        let name = header("name")?;
        let parse_count = |s: String, line: usize| {
            s.parse::<usize>().map_err(|_| Error::Parse { line, message: format!("invalid count '{s}'") })
        };
        let faces = parse_count(header("faces")?, 3)?;
        let width = parse_count(header("width")?, 4)?;
        let mask: FeatureMask = header("mask")?.parse()?;
        if mask.width() != width {
            return Err(Error::shape(format!("mask {mask} has width {} but header says {width}", mask.width())));
        }
        let mut data = Vec::with_capacity(faces * width);
        let mut rows = 0;
        for (no, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::Parse { line: no, message: format!("invalid number '{tok}'") })?,
                );
            }
            if data.len() - before != width {
                return Err(Error::Parse {
                    line: no,
                    message: format!("row has {} values, expected {width}", data.len() - before),
                });
            }
            rows += 1;
        }
        if rows != faces {
            return Err(Error::Parse { line: 0, message: format!("header declares {faces} rows but {rows} present") });
        }
        let data = Array2::from_shape_vec((faces, width), data).map_err(|e| Error::shape(e.to_string()))?;
        Ok((name, NodeFeatures { data, mask }))
    }
}

/// Builds the per-face feature rows, keeping only masked components.
///
/// Vertex order per row is `[v0, v1, v2, w0, w1, w2]` where `wk` is the ring
/// vertex opposite edge slot `k`; face order is `[self, n0, n1, n2]`.
pub fn assemble_features(
    mesh: &Mesh,
    vertices: &VertexGeometry,
    faces: &FaceGeometry,
    mask: FeatureMask,
) -> NodeFeatures {
    let width = mask.width();
    let mut data = Array2::<f64>::zeros((mesh.face_count(), width));
    for (fi, mut row) in data.rows_mut().into_iter().enumerate() {
        let tri = mesh.faces()[fi];
        let ring = &faces.rings[fi];
        let six = [tri[0], tri[1], tri[2], ring.opposite[0], ring.opposite[1], ring.opposite[2]];
        let quad = [fi, ring.neighbor_or_self(0, fi), ring.neighbor_or_self(1, fi), ring.neighbor_or_self(2, fi)];
        let mut col = 0;
        let mut push = |v: f64| {
            row[col] = v;
            col += 1;
        };
        for component in mask.components() {
            match component {
                FeatureComponent::Positions => six.iter().flat_map(|&v| mesh.vertices()[v]).for_each(&mut push),
                FeatureComponent::VertexNormals => six.iter().flat_map(|&v| vertices.normals[v]).for_each(&mut push),
                FeatureComponent::Curvature => six.iter().map(|&v| vertices.curvature[v]).for_each(&mut push),
                FeatureComponent::FaceNormals => quad.iter().flat_map(|&f| faces.normals[f]).for_each(&mut push),
                FeatureComponent::Angles => faces.dihedral[fi].iter().copied().for_each(&mut push),
            }
        }
    }
    NodeFeatures { data, mask }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FeatureOptions, MeshGeometry};
    use crate::primitives;

    #[test]
    fn component_widths() {
        let widths: Vec<usize> = FeatureComponent::ALL.iter().map(|c| c.width()).collect();
        assert_eq!(widths, vec![18, 18, 6, 12, 3]);
        assert_eq!(FeatureMask::ALL.width(), 57);
    }

    #[test]
    fn ablation_rows_match_widths() {
        for (mask, dim) in ABLATION_MASKS {
            assert_eq!(mask.width(), dim, "{mask}");
        }
        assert_eq!("Theta".parse::<FeatureMask>().unwrap().width(), 3);
        assert_eq!("P,GC,Nf,Theta".parse::<FeatureMask>().unwrap().width(), 39);
    }

    #[test]
    fn mask_parse_display_round_trip() {
        for (mask, _) in ABLATION_MASKS {
            assert_eq!(mask.to_string().parse::<FeatureMask>().unwrap(), mask);
        }
        assert_eq!("Theta,P".parse::<FeatureMask>().unwrap().to_string(), "P,Theta");
        assert!("".parse::<FeatureMask>().is_err());
        assert!("P,Q".parse::<FeatureMask>().is_err());
    }

    #[test]
    fn row_layout_on_tetrahedron() {
        let geo = MeshGeometry::compute(&primitives::tetrahedron(), &FeatureOptions::default()).unwrap();
        let feats = geo.features(FeatureMask::ALL);
        assert_eq!(feats.data.dim(), (4, 57));
        for f in 0..4 {
            let row = feats.data.row(f);
            let tri = geo.mesh.faces()[f];
            let ring = geo.faces.rings[f];
            assert_eq!(&row.as_slice().unwrap()[0..3], &geo.mesh.vertices()[tri[0]]);
            assert_eq!(&row.as_slice().unwrap()[9..12], &geo.mesh.vertices()[ring.opposite[0]]);
            assert_eq!(row[36], geo.vertices.curvature[tri[0]]);
            assert_eq!(&row.as_slice().unwrap()[42..45], &geo.faces.normals[f]);
            let n1 = ring.neighbors[1].unwrap();
            assert_eq!(&row.as_slice().unwrap()[48..51], &geo.faces.normals[n1]);
            assert_eq!(&row.as_slice().unwrap()[54..57], &geo.faces.dihedral[f]);
        }
        assert_eq!(feats.columns(FeatureComponent::Curvature), Some(36..42));
    }

    #[test]
    fn masked_components_keep_relative_order() {
        let geo = MeshGeometry::compute(&primitives::icosphere(1), &FeatureOptions::default()).unwrap();
        let full = geo.features(FeatureMask::ALL);
        let mask: FeatureMask = "GC,Theta".parse().unwrap();
        let part = geo.features(mask);
        assert_eq!(part.width(), 9);
        for f in 0..full.rows() {
            assert_eq!(part.data[[f, 0]], full.data[[f, 36]]);
            assert_eq!(part.data[[f, 8]], full.data[[f, 56]]);
        }
    }

    #[test]
    fn dump_round_trip() {
        let geo = MeshGeometry::compute(&primitives::torus(6, 5, 1.0, 0.3), &FeatureOptions::default()).unwrap();
        let feats = geo.features("P,Theta".parse().unwrap());
        let mut buf = Vec::new();
        feats.write_dump("torus", &mut buf).unwrap();
        let (name, back) = NodeFeatures::read_dump(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(name, "torus");
        assert_eq!(back, feats);
    }

    #[test]
    fn dump_rejects_short_rows() {
        let text = "meshgcn-features 1\nname x\nfaces 1\nwidth 3\nmask Theta\n0 1\n";
        assert!(NodeFeatures::read_dump(text).is_err());
    }
}
