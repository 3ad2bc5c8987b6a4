use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use hevcface::bench::{bench, extract_first, is_stream};
use hevcface::experiment::{
    corpus_hash, evaluate, hex, history_csv, load_dataset, load_manifest_dir, prepare_entries,
    sweep, thread_pool, train_configuration, TrainRecord, THRESHOLD,
};
use hevcface::manifest::{with_split, Manifest, Split};
use hevcface::metrics::EvalReport;
use hevcface::synth::{write_corpus, SynthConfig};
use hevcface_cnn::arch::Arch;
use hevcface_cnn::gradcheck::{gradcheck, GradCheckConfig};
use hevcface_cnn::model::scale_input;
use hevcface_cnn::{is_face, load_model, save_model, TrainConfig};
use hevcface_core::cabac::bin_log_csv;
use hevcface_core::syntax::{parse_stream_with, ParseOptions};
use hevcface_core::FeatureImage;

#[derive(Parser)]
#[command(
    name = "hevcface",
    version,
    about = "Face detection on HEVC entropy-decoder features"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f32,
    #[arg(long, default_value_t = 3)]
    patience: usize,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build feature images from Annex-B streams (first picture of each).
    Extract {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output file, or directory when several inputs are given.
        #[arg(short)]
        o: PathBuf,
        /// Also write a PPM next to each FIMG.
        #[arg(long)]
        ppm: bool,
        /// Store one value per 4x4 block.
        #[arg(long)]
        compact: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Describe a stream (or FIMG file).
    Inspect {
        input: PathBuf,
        /// Print per-PU records as CSV.
        #[arg(long)]
        csv: bool,
        /// Write every decoded bin as CSV; "-" or no value means stdout.
        #[arg(long, num_args = 0..=1, default_missing_value = "-")]
        bins_trace: Option<PathBuf>,
    },
    /// Train one model for a (size, QP) configuration.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        qp: u8,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(short)]
        o: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Face probability for FIMG files or streams.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = THRESHOLD)]
        threshold: f64,
    },
    /// Confusion counts and metrics on a manifest's test split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(short)]
        o: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Train and evaluate all six (size, QP) configurations.
    Sweep {
        #[arg(long)]
        manifest_dir: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(short)]
        o: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Finite-difference gradient check of both architectures.
    Gradcheck {
        /// Check a single seed instead of 1 to 5.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time parsing and CNN evaluation.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(short)]
        o: PathBuf,
        #[arg(long, default_value_t = 50)]
        patches: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write a synthetic labelled FIMG corpus with a manifest.
    Synth {
        #[arg(short)]
        o: PathBuf,
        #[arg(long, default_value_t = 400)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 32)]
        qp: u8,
        #[arg(long, default_value_t = 0.5)]
        face_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let parse = e.chain().find_map(|c| {
        c.downcast_ref::<hevcface::Error>()
            .and_then(|h| h.parse_error())
            .or_else(|| c.downcast_ref::<hevcface_core::Error>())
    });
    match parse {
        Some(p) if p.is_unsupported() => 2,
        Some(p) if p.is_malformed_stream() => 3,
        _ => 1,
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

/// The error chain, skipping causes whose text an outer message already
/// includes.
fn message(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for c in e.chain() {
        let s = c.to_string();
        if !msg.contains(&s) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&s);
        }
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Extract {
            inputs,
            o,
            ppm,
            compact,
            jobs,
        } => extract(&inputs, &o, ppm, compact, jobs),
        Cmd::Inspect {
            input,
            csv,
            bins_trace,
        } => inspect(&input, csv, bins_trace.as_deref()),
        Cmd::Train {
            manifest,
            size,
            qp,
            train,
            o,
            jobs,
        } => train_cmd(&manifest, size, qp, &train.config(), &o, jobs),
        Cmd::Predict {
            model,
            files,
            threshold,
        } => predict(&model, &files, threshold),
        Cmd::Eval {
            model,
            manifest,
            o,
            jobs,
        } => eval(&model, &manifest, &o, jobs),
        Cmd::Sweep {
            manifest_dir,
            train,
            o,
            jobs,
        } => {
            let m = load_manifest_dir(&manifest_dir)?;
            let s = sweep(&m, &train.config(), &o, &thread_pool(jobs)?)?;
            for r in &s.runs {
                match (&r.report, r.f1) {
                    (Some(rep), f1) => {
                        println!("{} qp{}: F1 {} ({rep})", r.size, r.qp, fmt_opt(f1))
                    }
                    (None, _) => println!("{} qp{}: skipped", r.size, r.qp),
                }
            }
            Ok(())
        }
        Cmd::Gradcheck { seed } => gradcheck_cmd(seed),
        Cmd::Bench {
            corpus,
            o,
            patches,
            seed,
            jobs,
        } => {
            let r = bench(&corpus, patches, seed, &thread_pool(jobs)?)?;
            write_json(&o, &r)?;
            println!(
                "parse+assemble: {} streams, mean {:.3} ms; cnn 64: {:.3} ms; cnn 128: {:.3} ms",
                r.streams, r.parse_and_assemble.mean_ms, r.cnn_64.mean_ms, r.cnn_128.mean_ms
            );
            if !r.cnn_64_faster {
                log::warn!("64x64 evaluation was not faster than 128x128");
            }
            Ok(())
        }
        Cmd::Synth {
            o,
            count,
            size,
            qp,
            face_fraction,
            seed,
        } => {
            let cfg = SynthConfig {
                count,
                size,
                qp,
                face_fraction,
                seed,
            };
            let m = write_corpus(&o, &cfg)?;
            println!("{} images in {}", m.entries.len(), o.display());
            Ok(())
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("null".into(), |x| format!("{x:.4}"))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn extract_file(input: &Path) -> anyhow::Result<FeatureImage> {
    let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    Ok(extract_first(&bytes).map_err(|e| e.in_file(input))?)
}

fn extract(
    inputs: &[PathBuf],
    o: &Path,
    ppm: bool,
    compact: bool,
    jobs: Option<usize>,
) -> anyhow::Result<()> {
    let targets: Vec<PathBuf> = if inputs.len() == 1 && !o.is_dir() {
        vec![o.to_path_buf()]
    } else {
        fs::create_dir_all(o)?;
        inputs
            .iter()
            .map(|i| {
                o.join(i.file_stem().unwrap_or_default())
                    .with_extension("fimg")
            })
            .collect()
    };
    let pool = thread_pool(jobs)?;
    let results: Vec<anyhow::Result<()>> = pool.install(|| {
        inputs
            .par_iter()
            .zip(&targets)
            .map(|(i, t)| {
                let img = extract_file(i)?;
                img.save(t, compact)?;
                if ppm {
                    fs::write(t.with_extension("ppm"), img.to_ppm())?;
                }
                Ok(())
            })
            .collect()
    });
    // report the first failure in input order
    results.into_iter().collect()
}

fn inspect(input: &Path, csv: bool, bins_trace: Option<&Path>) -> anyhow::Result<()> {
    let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    if bytes.starts_with(b"FIMG") {
        let img =
            FeatureImage::from_fimg(&bytes).map_err(|e| hevcface::Error::from(e).in_file(input))?;
        println!("feature image {}x{}, QP {}", img.width, img.height, img.qp);
        return Ok(());
    }
    let opts = ParseOptions {
        bin_log: bins_trace.is_some(),
    };
    let pics =
        parse_stream_with(&bytes, &opts).map_err(|e| hevcface::Error::from(e).in_file(input))?;
    let mut out = std::io::stdout().lock();
    for (n, p) in pics.iter().enumerate() {
        let pu_bins: u64 = p.records.iter().map(|r| r.bins).sum();
        if !csv {
            writeln!(
                out,
                "picture {n}: {}x{}, slice QP {}, {} PUs, {} bins ({} in PUs), {} alignment bits",
                p.width,
                p.height,
                p.slice_qp,
                p.records.len(),
                p.total_bins,
                pu_bins,
                p.alignment_bits
            )?;
        } else {
            out.write_all(p.records_csv().as_bytes())?;
        }
        if let (Some(dest), Some(log)) = (bins_trace, &p.bin_log) {
            let text = bin_log_csv(log);
            if dest == Path::new("-") {
                out.write_all(text.as_bytes())?;
            } else {
                let path = if pics.len() > 1 {
                    dest.with_extension(format!("{n}.csv"))
                } else {
                    dest.to_path_buf()
                };
                fs::write(&path, text)?;
            }
        }
    }
    Ok(())
}

fn sidecar(model: &Path) -> PathBuf {
    model.with_extension("json")
}

fn train_cmd(
    manifest: &Path,
    size: usize,
    qp: u8,
    cfg: &TrainConfig,
    o: &Path,
    jobs: Option<usize>,
) -> anyhow::Result<()> {
    let m = Manifest::load(manifest)?;
    let t = train_configuration(&m, size, qp, cfg, &thread_pool(jobs)?)?;
    if let Some(dir) = o.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_model(&t.model, o)?;
    let meta = serde_json::json!({
        "size": size,
        "qp": qp,
        "seed": cfg.seed,
        "config": TrainRecord::from(cfg),
        "corpus_sha256": t.corpus_sha256,
        "best_epoch": t.best_epoch,
        "epochs_run": t.history.len(),
        "stopped_early": t.stopped_early,
        "warnings": t.warnings,
        "history": t.history.iter().map(|h| serde_json::json!({
            "epoch": h.epoch, "train_loss": h.train_loss, "val_loss": h.val_loss
        })).collect::<Vec<_>>(),
    });
    write_json(&sidecar(o), &meta)?;
    fs::write(o.with_extension("history.csv"), history_csv(&t.history))?;
    println!(
        "best epoch {} of {}, val loss {:.5}",
        t.best_epoch,
        t.history.len(),
        t.history[t.best_epoch - 1].val_loss
    );
    Ok(())
}

fn load_image(path: &Path) -> anyhow::Result<FeatureImage> {
    if is_stream(path) {
        extract_file(path)
    } else {
        Ok(FeatureImage::load(path).map_err(|e| hevcface::Error::from(e).in_file(path))?)
    }
}

fn predict(model: &Path, files: &[PathBuf], threshold: f64) -> anyhow::Result<()> {
    let m = load_model(model).map_err(|e| hevcface::Error::from(e).in_file(model))?;
    let mut out = std::io::stdout().lock();
    for f in files {
        let img = load_image(f)?;
        if img.width != m.arch.input || img.height != m.arch.input {
            bail!(
                "{}: {}x{} image, model expects {}x{}",
                f.display(),
                img.width,
                img.height,
                m.arch.input,
                m.arch.input
            );
        }
        let p = m.predict_proba(&scale_input::<f32>(&img.interleaved()))?[0] as f64;
        let label = if is_face(p, threshold) {
            "face"
        } else {
            "non-face"
        };
        writeln!(out, "{}\t{p:.6}\t{label}", f.display())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalFile {
    model_sha256: String,
    seed: Option<u64>,
    corpus_sha256: String,
    split: &'static str,
    #[serde(flatten)]
    eval: EvalReport,
}

fn eval(model: &Path, manifest: &Path, o: &Path, jobs: Option<usize>) -> anyhow::Result<()> {
    let bytes = fs::read(model).with_context(|| format!("reading {}", model.display()))?;
    let m = hevcface_cnn::io::from_bytes(&bytes)
        .map_err(|e| hevcface::Error::from(e).in_file(model))?;
    let seed = fs::read_to_string(sidecar(model))
        .ok()
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .and_then(|v| v["seed"].as_u64());
    let man = Manifest::load(manifest)?;
    let all = man.select(m.arch.input, m.qp);
    // tagged manifests, or untagged ones with the training seed known, are
    // evaluated on their test split; otherwise on every entry
    let (entries, split) = match seed {
        Some(s) if !all.is_empty() => (
            with_split(&prepare_entries(&man, m.arch.input, m.qp, s)?, Split::Test),
            "test",
        ),
        _ if all.iter().any(|e| e.split.is_some()) => (with_split(&all, Split::Test), "test"),
        _ => (all, "all"),
    };
    if entries.is_empty() {
        bail!("no entries for size {}, QP {}", m.arch.input, m.qp);
    }
    let data = load_dataset(&entries, m.arch.input, &thread_pool(jobs)?)?;
    let report = EvalFile {
        model_sha256: hex(&Sha256::digest(&bytes)),
        seed,
        corpus_sha256: corpus_hash(&entries)?,
        split,
        eval: evaluate(&m, &data, THRESHOLD)?,
    };
    write_json(o, &report)?;
    let e = &report.eval;
    println!(
        "tp {} fp {} tn {} fn {}: precision {} recall {} F1 {}",
        e.counts.tp,
        e.counts.fp,
        e.counts.tn,
        e.counts.fn_,
        fmt_opt(e.metrics.precision),
        fmt_opt(e.metrics.recall),
        fmt_opt(e.metrics.f1)
    );
    Ok(())
}

fn gradcheck_cmd(seed: Option<u64>) -> anyhow::Result<()> {
    let seeds: Vec<u64> = seed.map_or((1..=5).collect(), |s| vec![s]);
    let sampled = GradCheckConfig::default();
    let full = GradCheckConfig {
        samples_per_layer: None,
        ..Default::default()
    };
    let mut failed = 0;
    for input in [64, 128] {
        for (arch, cfg, what) in [
            (Arch::published(input)?, &sampled, "published, sampled"),
            (Arch::shrunken(input)?, &full, "shrunken, every parameter"),
        ] {
            for &s in &seeds {
                let t = Instant::now();
                let r = gradcheck(arch, s, cfg)?;
                let ok = r.passed();
                failed += usize::from(!ok);
                println!(
                    "{} input {input} seed {s} ({what}): {} checked, {} kinks, max rel err {:.2e} [{:.1?}]",
                    if ok { "PASS" } else { "FAIL" },
                    r.checked(),
                    r.kinks(),
                    r.max_rel_err(),
                    t.elapsed()
                );
            }
        }
    }
    if failed > 0 {
        bail!("{failed} gradient checks failed");
    }
    Ok(())
}
