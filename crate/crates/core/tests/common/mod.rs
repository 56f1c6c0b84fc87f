#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tagclass::pipeline::RunConfig;
use tagclass::sparse::{SparseVec, UnitVector};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic")
}

/// The fixture's run.conf, writing into `out_dir`.
pub fn fixture_config(out_dir: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.apply_file(&fixture_dir().join("run.conf")).unwrap();
    c.out_dir = out_dir.to_path_buf();
    c
}

/// Every regular file in `dir`, by name.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            out.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).unwrap());
        }
    }
    out
}

/// Random nonnegative sparse vector over `dims` coordinates, each present with
/// probability `density`; never empty.
pub fn random_sparse(rng: &mut ChaCha8Rng, dims: u32, density: f64) -> SparseVec {
    loop {
        let mut pairs = Vec::new();
        for i in 0..dims {
            if rng.gen_bool(density) {
                pairs.push((i, rng.gen_range(0.05..1.0)));
            }
        }
        if !pairs.is_empty() {
            return SparseVec::from_sorted(pairs).unwrap();
        }
    }
}

pub fn random_unit(rng: &mut ChaCha8Rng, dims: u32, density: f64) -> UnitVector {
    UnitVector::normalize(&random_sparse(rng, dims, density)).unwrap()
}

pub fn unit(pairs: &[(u32, f64)]) -> UnitVector {
    UnitVector::normalize(&SparseVec::from_sorted(pairs.iter().copied()).unwrap()).unwrap()
}
