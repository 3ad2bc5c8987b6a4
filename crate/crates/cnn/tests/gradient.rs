//! Finite-difference checks of the analytic gradients.

use std::time::Instant;

use hevcface_cnn::arch::Arch;
use hevcface_cnn::gradcheck::{gradcheck, GradCheckConfig, GradCheckReport};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn summary(r: &GradCheckReport) -> String {
    let per_layer: Vec<String> = r
        .layers
        .iter()
        .map(|l| {
            format!(
                "{} n={} kinks={} max={:.2e} bad={}",
                l.layer.name(),
                l.checked,
                l.kinks,
                l.max_rel_err,
                l.mismatches.len()
            )
        })
        .collect();
    format!(
        "input {} seed {}: {}",
        r.arch.input,
        r.seed,
        per_layer.join("; ")
    )
}

#[test]
fn published_architecture_sampled() {
    let cfg = GradCheckConfig::default();
    for input in [64, 128] {
        for seed in SEEDS {
            let t = Instant::now();
            let r = gradcheck(Arch::published(input).unwrap(), seed, &cfg).unwrap();
            eprintln!("{} ({:.1?})", summary(&r), t.elapsed());
            assert!(r.passed(), "{:?}", r.layers);
            for l in &r.layers {
                let (_, nb) = r.arch.layer_sizes(l.layer);
                assert!(l.checked >= 200.min(r.arch.layer_sizes(l.layer).0) + nb);
            }
        }
    }
}

#[test]
fn shrunken_clone_every_parameter() {
    let cfg = GradCheckConfig {
        samples_per_layer: None,
        ..Default::default()
    };
    for input in [64, 128] {
        let arch = Arch::shrunken(input).unwrap();
        for seed in SEEDS {
            let t = Instant::now();
            let r = gradcheck(arch, seed, &cfg).unwrap();
            eprintln!("{} ({:.1?})", summary(&r), t.elapsed());
            assert_eq!(r.checked(), arch.param_count());
            assert!(r.passed(), "{:?}", r.layers);
        }
    }
}
