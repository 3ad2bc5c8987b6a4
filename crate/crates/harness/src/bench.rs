//! Per-stage wall-clock timings: entropy parse plus feature assembly per
//! stream, and CNN evaluation per patch for both input sizes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hevcface_cnn::model::scale_input;
use hevcface_cnn::CnnModel;
use hevcface_core::{parse_stream, FeatureImage};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

impl Stats {
    /// Nearest-rank percentiles.
    pub fn of(samples_ms: &[f64]) -> Self {
        if samples_ms.is_empty() {
            return Stats::default();
        }
        let mut v = samples_ms.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Stats {
            count: v.len(),
            mean_ms: v.iter().sum::<f64>() / v.len() as f64,
            p50_ms: rank(0.50),
            p95_ms: rank(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub streams: usize,
    pub parse_and_assemble: Stats,
    pub cnn_64: Stats,
    pub cnn_128: Stats,
    pub cnn_64_faster: bool,
}

pub fn is_stream(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e, "hevc" | "265" | "bin"))
}

/// Stream files under `dir`, recursively, sorted.
pub fn find_streams(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else if is_stream(&p) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Parses the first picture of a stream and builds its feature image.
pub fn extract_first(bytes: &[u8]) -> Result<FeatureImage> {
    let pics = parse_stream(bytes)?;
    let pic = pics
        .first()
        .ok_or_else(|| Error::EmptyDataset("stream holds no picture".into()))?;
    Ok(FeatureImage::from_picture(pic)?)
}

fn time_streams(files: &[PathBuf], pool: &rayon::ThreadPool) -> Result<Vec<f64>> {
    pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let bytes = fs::read(f).map_err(|e| Error::from(e).in_file(f))?;
                let t = Instant::now();
                extract_first(&bytes).map_err(|e| e.in_file(f))?;
                Ok(ms(t))
            })
            .collect()
    })
}

/// Single-patch forward passes of a randomly initialized model; weights do
/// not change the cost.
fn time_cnn(size: usize, patches: usize, seed: u64) -> Result<Vec<f64>> {
    let model = CnnModel::published(size, 32, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bytes: Vec<u8> = (0..size * size * 3).map(|_| rng.random()).collect();
    let x = scale_input::<f32>(&bytes);
    model.predict_proba(&x)?;
    (0..patches)
        .map(|_| {
            let t = Instant::now();
            model.predict_proba(&x)?;
            Ok(ms(t))
        })
        .collect()
}

pub fn bench(
    corpus: &Path,
    patches: usize,
    seed: u64,
    pool: &rayon::ThreadPool,
) -> Result<BenchReport> {
    let files = find_streams(corpus)?;
    if files.is_empty() {
        log::warn!("no streams under {}", corpus.display());
    }
    let parse = time_streams(&files, pool)?;
    let c64 = Stats::of(&time_cnn(64, patches, seed)?);
    let c128 = Stats::of(&time_cnn(128, patches, seed)?);
    Ok(BenchReport {
        seed,
        streams: files.len(),
        parse_and_assemble: Stats::of(&parse),
        cnn_64_faster: c64.mean_ms < c128.mean_ms,
        cnn_64: c64,
        cnn_128: c128,
    })
}
