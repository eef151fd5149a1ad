#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nnwfn_cli::dataset::{save_dataset, Dataset, Format};
use nnwfn_core::rng::{stream_rng, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;

/// Clusters of 10 points around uniform centers in `[0, 20]^d`, with spreads
/// from 0.05 to 0.4 per coordinate so that every distance scale shows up.
pub fn clustered(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, Purpose::Workload, u64::MAX);
    let mut points = Vec::with_capacity(n);
    let mut center = vec![0.0; d];
    let mut sigma = 0.0;
    for i in 0..n {
        if i % 10 == 0 {
            center = (0..d).map(|_| rng.random_range(0.0..20.0)).collect();
            sigma = [0.05, 0.1, 0.2, 0.4][(i / 10) % 4];
        }
        points.push(center.iter().map(|c| c + sigma * rng.sample::<f64, _>(StandardNormal)).collect());
    }
    points
}

pub fn write_csv(dir: &Path, name: &str, points: Vec<Vec<f64>>) -> PathBuf {
    let path = dir.join(name);
    save_dataset(&path, &Dataset::new(points).unwrap(), Format::Csv).unwrap();
    path
}

pub fn nnwfn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnwfn")).args(args).output().expect("spawn nnwfn")
}

pub fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad json ({e}): stdout={} stderr={}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
