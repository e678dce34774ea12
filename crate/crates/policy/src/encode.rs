use std::f64::consts::PI;

use massid_core::geom::Vec3;
use serde::{Deserialize, Serialize};

/// Flattened network input: per-vertex Fourier features followed by one
/// normalized mass slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub features: Vec<f64>,
    pub vertex_count: usize,
    pub band_count: usize,
}

pub fn features_per_vertex(bands: usize) -> usize {
    3 + 6 * bands
}

impl EncodedInput {
    pub fn per_vertex(&self) -> usize {
        features_per_vertex(self.band_count)
    }

    /// Features of vertex `i`, without the mass slot.
    pub fn vertex(&self, i: usize) -> &[f64] {
        let w = self.per_vertex();
        &self.features[i * w..(i + 1) * w]
    }

    pub fn mass_slot(&self) -> f64 {
        *self.features.last().expect("encoded input always carries a mass slot")
    }
}

/// Fourier-feature encoding of `vertices` after mapping the bounding box
/// onto `[-1, 1]³`. An axis with zero extent maps to 0.
///
/// The returned input has its mass slot set to 0; see [`encode_input`].
pub fn positional_encode(vertices: &[Vec3], bands: usize) -> EncodedInput {
    let (lo, hi) = bounds(vertices);
    let norm = |c: f64, lo: f64, hi: f64| {
        let ext = hi - lo;
        if ext > 0.0 {
            2.0 * (c - lo) / ext - 1.0
        } else {
            0.0
        }
    };
    let mut features = Vec::with_capacity(vertices.len() * features_per_vertex(bands) + 1);
    for v in vertices {
        let c = [norm(v.x, lo.x, hi.x), norm(v.y, lo.y, hi.y), norm(v.z, lo.z, hi.z)];
        features.extend_from_slice(&c);
        for b in 0..bands {
            let freq = (1u64 << b) as f64 * PI;
            for &x in &c {
                features.push((freq * x).sin());
                features.push((freq * x).cos());
            }
        }
    }
    features.push(0.0);
    EncodedInput {
        features,
        vertex_count: vertices.len(),
        band_count: bands,
    }
}

/// [`positional_encode`] with the mass slot filled by `mass / m_ref`.
pub fn encode_input(vertices: &[Vec3], mass: f64, bands: usize, m_ref: f64) -> EncodedInput {
    let mut e = positional_encode(vertices, bands);
    *e.features.last_mut().unwrap() = mass / m_ref;
    e
}

fn bounds(vertices: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        lo = Vec3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
        hi = Vec3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
    }
    (lo, hi)
}
