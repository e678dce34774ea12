//! Parameter files: an 8-byte little-endian header length, a JSON header
//! describing the tensors, then every value as a little-endian `f32`
//! (weights row-major, then biases, tensor by tensor).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::mlp::{Dense, GraspMLPParams, TENSOR_NAMES};
use crate::{Policy, PolicySpec, PolicyError};

const FORMAT: &str = "massid-grasp-mlp";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    spec: PolicySpec,
    tensors: Vec<TensorInfo>,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

pub fn params_to_bytes(policy: &Policy) -> Vec<u8> {
    let tensors = policy.params.tensors();
    let header = Header {
        format: FORMAT.into(),
        version: 1,
        spec: policy.spec.clone(),
        tensors: TENSOR_NAMES
            .iter()
            .zip(tensors)
            .map(|(n, d)| TensorInfo {
                name: n.to_string(),
                rows: d.w.nrows(),
                cols: d.w.ncols(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + json.len() + 4 * policy.params.param_count());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for d in tensors {
        for v in d.w.iter().chain(d.b.iter()) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<Policy, PolicyError> {
    let fmt = |m: &str| PolicyError::Format(m.to_string());
    let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(|| fmt("truncated header length"))?.try_into().unwrap();
    let len = usize::try_from(u64::from_le_bytes(len_bytes)).map_err(|_| fmt("header length overflow"))?;
    let json = bytes.get(8..8usize.saturating_add(len)).ok_or_else(|| fmt("truncated header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| PolicyError::Format(format!("bad header: {e}")))?;
    if header.format != FORMAT || header.version != 1 {
        return Err(fmt("not a grasp policy parameter file"));
    }
    if header.tensors.len() != TENSOR_NAMES.len() || header.tensors.iter().zip(TENSOR_NAMES).any(|(t, n)| t.name != n) {
        return Err(fmt("unexpected tensor list"));
    }
    let mut data = bytes[8 + len..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let expected: usize = header.tensors.iter().map(|t| t.rows * t.cols + t.cols).sum();
    if bytes.len() - 8 - len != 4 * expected {
        return Err(PolicyError::Format(format!(
            "expected {expected} values, found {} bytes of data",
            bytes.len() - 8 - len
        )));
    }
    let mut take = |t: &TensorInfo| Dense {
        w: Array2::from_shape_vec((t.rows, t.cols), data.by_ref().take(t.rows * t.cols).collect()).unwrap(),
        b: Array1::from_iter(data.by_ref().take(t.cols)),
    };
    let t = &header.tensors;
    let params = GraspMLPParams {
        trunk: [take(&t[0]), take(&t[1]), take(&t[2])],
        action: take(&t[3]),
        reward: take(&t[4]),
        force: take(&t[5]),
    };
    let policy = Policy {
        spec: header.spec,
        params,
    };
    policy.check()?;
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_rounds_to_f32() {
        let spec = PolicySpec {
            hidden: 8,
            ..PolicySpec::default()
        };
        let p = Policy::init(spec, 3);
        let bytes = params_to_bytes(&p);
        let back = params_from_bytes(&bytes).unwrap();
        assert_eq!(back.spec, p.spec);
        for (a, b) in back.params.tensors().iter().zip(p.params.tensors()) {
            for (x, y) in a.w.iter().zip(b.w.iter()) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
        assert_eq!(params_to_bytes(&back), bytes);
    }

    #[test]
    fn truncated_files_are_rejected() {
        let p = Policy::init(
            PolicySpec {
                hidden: 4,
                ..PolicySpec::default()
            },
            0,
        );
        let bytes = params_to_bytes(&p);
        assert!(params_from_bytes(&bytes[..bytes.len() - 4]).is_err());
        assert!(params_from_bytes(&bytes[..5]).is_err());
        assert!(params_from_bytes(b"garbage!garbage").is_err());
    }
}
