#![allow(dead_code)]

use std::path::PathBuf;

use massid_core::identify::{NoiseModel, Scenario};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn scenario(name: &str) -> Scenario {
    let path = fixtures_dir().join("scenarios").join(format!("{name}.json"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn paper_noise(seed: u64) -> NoiseModel {
    NoiseModel {
        pos_sigma: 0.002,
        z_bias: 0.005,
        quat_sigma: 0.0,
        seed,
    }
}
