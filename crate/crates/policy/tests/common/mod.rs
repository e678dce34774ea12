#![allow(dead_code)]

use std::path::PathBuf;

use massid_core::geom::{load_mesh, Vec3};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn mesh(name: &str) -> Vec<Vec3> {
    let bytes = std::fs::read(fixtures_dir().join("meshes").join(name)).expect("mesh fixture");
    load_mesh(&bytes).expect("valid mesh").vertices
}

pub fn cube() -> Vec<Vec3> {
    mesh("cube.obj")
}
