//! Synthetic feature-image corpora, built directly from PU records without
//! any encoding step.
//!
//! Each image is a quadtree tiling of 32x32 blocks. Faces get a central
//! disc of 4x4 PUs with near-vertical or near-horizontal modes and high bin
//! counts; non-faces never split below 8x8 and draw modes uniformly. The
//! PUS plane alone therefore separates the classes.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hevcface_core::featimg::{assemble, FeatureImage};
use hevcface_core::PuRecord;

use crate::error::Result;
use crate::manifest::{Entry, Label, Manifest};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub size: usize,
    pub qp: u8,
    pub face_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 400,
            size: 64,
            qp: 32,
            face_fraction: 0.5,
            seed: 0,
        }
    }
}

/// Whether the block overlaps the central disc.
fn in_disc(x: u32, y: u32, s: u32, size: u32) -> bool {
    let c = size as f64 / 2.0;
    let r = 0.3 * size as f64;
    let near = |lo: u32| c.clamp(lo as f64, (lo + s) as f64);
    (near(x) - c).powi(2) + (near(y) - c).powi(2) < r * r
}

fn tile(
    rng: &mut ChaCha8Rng,
    face: bool,
    x: u32,
    y: u32,
    s: u32,
    size: u32,
    out: &mut Vec<PuRecord>,
) {
    let central = face && in_disc(x, y, s, size);
    let p_split = match (face, central, s) {
        (true, true, _) => 1.0,
        (_, _, 32) => 0.5,
        (_, _, 16) => 0.4,
        _ => 0.0,
    };
    if s > 4 && rng.random::<f64>() < p_split {
        let h = s / 2;
        for (dx, dy) in [(0, 0), (h, 0), (0, h), (h, h)] {
            tile(rng, face, x + dx, y + dy, h, size, out);
        }
        return;
    }
    let (ipm, per_px) = if central {
        let base = if rng.random::<bool>() { 26 } else { 10 };
        (
            base + rng.random_range(0..5) - 2,
            rng.random_range(2.0..4.0),
        )
    } else {
        (rng.random_range(0..35), rng.random_range(0.1..1.0))
    };
    out.push(PuRecord {
        x,
        y,
        size: s,
        ipm: ipm as u8,
        bins: (per_px * (s * s) as f64) as u64,
    });
}

pub fn synth_image(rng: &mut ChaCha8Rng, face: bool, size: usize, qp: u8) -> Result<FeatureImage> {
    let n = size as u32;
    let mut records = Vec::new();
    for y in (0..n).step_by(32) {
        for x in (0..n).step_by(32) {
            tile(rng, face, x, y, 32, n, &mut records);
        }
    }
    Ok(assemble(&records, n, n, qp)?)
}

/// Images with labels, faces first then non-faces, in generation order.
pub fn synth_images(cfg: &SynthConfig) -> Result<Vec<(FeatureImage, Label)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let faces = (cfg.face_fraction * cfg.count as f64).round() as usize;
    (0..cfg.count)
        .map(|i| {
            let label = if i < faces {
                Label::Face
            } else {
                Label::NonFace
            };
            Ok((
                synth_image(&mut rng, label.is_face(), cfg.size, cfg.qp)?,
                label,
            ))
        })
        .collect()
}

/// Writes `synth_NNNN.fimg` files and `manifest.jsonl` (relative paths, no
/// split tags) into `dir`.
pub fn write_corpus(dir: &Path, cfg: &SynthConfig) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (i, (img, label)) in synth_images(cfg)?.into_iter().enumerate() {
        let name = format!("synth_{i:04}.fimg");
        img.save(&dir.join(&name), true)?;
        entries.push(Entry {
            path: name.into(),
            label,
            qp: cfg.qp,
            size: cfg.size,
            split: None,
        });
    }
    let m = Manifest::new(entries, dir);
    m.save(&dir.join("manifest.jsonl"))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_differ_in_pu_sizes() {
        let cfg = SynthConfig {
            count: 20,
            ..Default::default()
        };
        for (img, label) in synth_images(&cfg).unwrap() {
            let small = img.pus.iter().filter(|&&v| v == 0).count();
            if label.is_face() {
                assert!(small > img.pus.len() / 10);
            } else {
                assert_eq!(small, 0);
            }
        }
    }

    #[test]
    fn deterministic_and_compactable() {
        let cfg = SynthConfig {
            count: 6,
            size: 128,
            ..Default::default()
        };
        let a = synth_images(&cfg).unwrap();
        let b = synth_images(&cfg).unwrap();
        assert_eq!(a, b);
        for (img, _) in a {
            assert_eq!(img.width, 128);
            img.to_fimg(true).unwrap();
        }
    }
}
