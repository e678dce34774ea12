//! Triangle meshes in a small OBJ subset, plus contact-vertex sampling.

use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GeomError, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct MeshModel {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: face index {index} out of range (mesh has {count} vertices)")]
    IndexOutOfRange { line: usize, index: usize, count: usize },
    #[error("input is not valid UTF-8")]
    Encoding,
}

impl MeshModel {
    /// Axis-aligned box centered on the origin, 8 vertices and 12 triangles.
    pub fn cuboid(name: &str, half: Vec3) -> Self {
        let mut vertices = Vec::with_capacity(8);
        for &z in &[-half.z, half.z] {
            for &(x, y) in &[(-half.x, -half.y), (half.x, -half.y), (half.x, half.y), (-half.x, half.y)] {
                vertices.push(Vec3::new(x, y, z));
            }
        }
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        Self {
            name: name.to_string(),
            vertices,
            faces,
        }
    }

    /// Axis-aligned bounding box `(min, max)`. Zero box for an empty mesh.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let Some(first) = self.vertices.first() else {
            return (Vec3::ZERO, Vec3::ZERO);
        };
        self.vertices.iter().fold((*first, *first), |(lo, hi), v| {
            (
                Vec3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z)),
                Vec3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z)),
            )
        })
    }

    pub fn extent(&self) -> Vec3 {
        let (lo, hi) = self.bounds();
        hi - lo
    }

    /// Canonical OBJ text: a name comment, then `v` and `f` lines.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        if !self.name.is_empty() {
            let _ = writeln!(out, "o {}", self.name);
        }
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }
}

/// Parse the OBJ subset: `v x y z`, `f i j k` (1-based, triangles only),
/// `o name`. Comments, blank lines and other keywords are skipped. Face
/// entries of the form `i/t/n` use only the vertex index.
pub fn load_mesh(bytes: &[u8]) -> Result<MeshModel, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|_| MeshError::Encoding)?;
    let mut mesh = MeshModel {
        name: String::new(),
        vertices: Vec::new(),
        faces: Vec::new(),
    };
    let mut face_lines = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(parse_err(line_no, "vertex needs three coordinates"));
                }
                let mut xyz = [0.0; 3];
                for (slot, tok) in xyz.iter_mut().zip(&coords) {
                    *slot = tok
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(line_no, &format!("bad coordinate {tok:?}")))?;
                }
                mesh.vertices.push(Vec3::from_array(xyz));
            }
            Some("f") => {
                let idx: Vec<&str> = tokens.collect();
                if idx.len() != 3 {
                    return Err(parse_err(line_no, "only triangular faces are supported"));
                }
                let mut face = [0usize; 3];
                for (slot, tok) in face.iter_mut().zip(&idx) {
                    let head = tok.split('/').next().unwrap_or("");
                    let one_based: usize = head
                        .parse()
                        .ok()
                        .filter(|&v: &usize| v >= 1)
                        .ok_or_else(|| parse_err(line_no, &format!("bad face index {tok:?}")))?;
                    *slot = one_based - 1;
                }
                face_lines.push(line_no);
                mesh.faces.push(face);
            }
            Some("o") => {
                mesh.name = tokens.collect::<Vec<_>>().join(" ");
            }
            _ => {}
        }
    }

    let count = mesh.vertices.len();
    for (face, &line) in mesh.faces.iter().zip(&face_lines) {
        if let Some(&bad) = face.iter().find(|&&v| v >= count) {
            return Err(MeshError::IndexOutOfRange {
                line,
                index: bad + 1,
                count,
            });
        }
    }
    Ok(mesh)
}

fn parse_err(line: usize, msg: &str) -> MeshError {
    MeshError::Parse {
        line,
        msg: msg.to_string(),
    }
}

/// Pick `k` distinct vertex indices likely to touch the ground.
///
/// The lowest-z vertices come first: at least `⌈k/2⌉` of them, and every
/// vertex lying on the lowest plane when that plane holds more (up to `k`).
/// The rest are drawn uniformly from the remaining vertices with `seed`.
/// The result is sorted.
pub fn sample_contact_vertices(mesh: &MeshModel, k: usize, seed: u64) -> Result<Vec<usize>, GeomError> {
    let n = mesh.vertices.len();
    if k == 0 || k > n {
        return Err(GeomError::SampleCount { k, vertices: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mesh.vertices[a].z.total_cmp(&mesh.vertices[b].z).then(a.cmp(&b)));

    let zmin = mesh.vertices[order[0]].z;
    let (lo, hi) = mesh.bounds();
    let plane_tol = 1e-9 * (hi - lo).norm().max(1.0);
    let on_plane = order.iter().take_while(|&&i| mesh.vertices[i].z - zmin <= plane_tol).count();
    let deterministic = k.div_ceil(2).max(on_plane.min(k));

    let mut chosen: Vec<usize> = order[..deterministic].to_vec();
    let rest = &order[deterministic..];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in index::sample(&mut rng, rest.len(), k - deterministic) {
        chosen.push(rest[j]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}
