#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use caea::dataio::{resolve_dataset, CsvOptions, Dataset};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Approximately normal draw (sum of uniforms); good enough for fixtures.
pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0
}

/// A stream drawn from a few random blobs, with occasional exact repeats so
/// that ties and zero distances show up.
pub fn blob_stream(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let k = rng.gen_range(1..=4);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    let spread: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.5)).collect();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        if !out.is_empty() && rng.gen_bool(0.05) {
            let j = rng.gen_range(0..out.len());
            out.push(out[j].clone());
            continue;
        }
        let c = rng.gen_range(0..k);
        out.push(
            centers[c]
                .iter()
                .map(|m| m + spread[c] * gauss(rng))
                .collect(),
        );
    }
    out
}

/// Two well separated 2-D blobs. Returns points and blob ids, interleaved
/// in random order.
pub fn two_blobs(rng: &mut ChaCha8Rng, per_blob: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let centers = [[0.0, 0.0], [10.0, 10.0]];
    let mut pts = Vec::new();
    let mut ids = Vec::new();
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            pts.push(vec![c[0] + 0.6 * gauss(rng), c[1] + 0.6 * gauss(rng)]);
            ids.push(b);
        }
    }
    let mut order: Vec<usize> = (0..pts.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    (
        order.iter().map(|&i| pts[i].clone()).collect(),
        order.iter().map(|&i| ids[i]).collect(),
    )
}

pub fn data_dir() -> PathBuf {
    std::env::var_os(caea::dataio::DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn load(name: &str) -> caea::Result<Dataset> {
    resolve_dataset(name, &data_dir(), CsvOptions::default())
}

/// Adjusted Rand index by enumerating every pair of instances.
pub fn brute_force_ari(p: &[usize], t: &[usize]) -> f64 {
    let (mut a, mut b, mut c, mut d) = (0i128, 0i128, 0i128, 0i128);
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            match (p[i] == p[j], t[i] == t[j]) {
                (true, true) => a += 1,
                (true, false) => b += 1,
                (false, true) => c += 1,
                (false, false) => d += 1,
            }
        }
    }
    let num = 2 * (a * d - b * c);
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Every labelling of `n` items with labels in `0..k`.
pub fn all_labelings(n: usize, k: usize) -> Vec<Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let l = code % k;
                    code /= k;
                    l
                })
                .collect()
        })
        .collect()
}
