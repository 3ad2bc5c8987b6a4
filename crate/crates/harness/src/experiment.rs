//! One model per (patch size, QP): split, train, evaluate, write artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hevcface_cnn::train::{predict_dataset, train, Dataset, EpochStats, TrainConfig};
use hevcface_cnn::{is_face, save_model, CnnModel};
use hevcface_core::FeatureImage;

use crate::error::{Error, Result};
use crate::manifest::{protocol_warnings, split, with_split, ClassCounts, Entry, Manifest, Split};
use crate::metrics::{Confusion, EvalReport};

pub const SIZES: [usize; 2] = [64, 128];
pub const QPS: [u8; 3] = [22, 32, 42];
pub const THRESHOLD: f64 = 0.5;

pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n.max(1));
    }
    b.build()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Reads one feature image and checks it against its manifest entry.
pub fn load_entry(e: &Entry) -> Result<FeatureImage> {
    let img = FeatureImage::load(&e.path).map_err(|err| Error::from(err).in_file(&e.path))?;
    if img.width != e.size || img.height != e.size {
        return Err(Error::Manifest(format!(
            "{}: image is {}x{}, manifest says {}",
            e.path.display(),
            img.width,
            img.height,
            e.size
        )));
    }
    if img.qp != e.qp {
        log::warn!(
            "{}: image QP {} differs from manifest QP {}",
            e.path.display(),
            img.qp,
            e.qp
        );
    }
    Ok(img)
}

/// Loads entries (already resolved) into a dataset, reading files in
/// parallel but keeping manifest order.
pub fn load_dataset(entries: &[Entry], size: usize, pool: &rayon::ThreadPool) -> Result<Dataset> {
    let images: Vec<Result<FeatureImage>> =
        pool.install(|| entries.par_iter().map(load_entry).collect());
    let mut d = Dataset::new(size);
    for (img, e) in images.into_iter().zip(entries) {
        d.push_bytes(&img?.interleaved(), e.label.as_u8())?;
    }
    Ok(d)
}

pub fn evaluate(model: &CnnModel, data: &Dataset, threshold: f64) -> Result<EvalReport> {
    let probs = predict_dataset(model, data, 64)?;
    let counts = Confusion::from_pairs(
        probs
            .iter()
            .zip(&data.labels)
            .map(|(&p, &y)| (is_face(p as f64, threshold), y == 1)),
    );
    Ok(EvalReport::new(
        model.arch.input,
        model.qp,
        threshold,
        counts,
    ))
}

/// SHA-256 over each entry's manifest line and file contents, in order.
pub fn corpus_hash(entries: &[Entry]) -> Result<String> {
    let mut h = Sha256::new();
    for e in entries {
        h.update(serde_json::to_string(e)?.as_bytes());
        h.update(b"\n");
        let bytes = fs::read(&e.path).map_err(|err| Error::from(err).in_file(&e.path))?;
        h.update(Sha256::digest(&bytes));
    }
    Ok(hex(&h.finalize()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout_rate: f64,
}

impl From<&TrainConfig> for TrainRecord {
    fn from(c: &TrainConfig) -> Self {
        TrainRecord {
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            patience: c.patience,
            dropout_rate: c.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: ClassCounts,
    pub val: ClassCounts,
    pub test: ClassCounts,
}

/// Everything needed to reproduce and judge one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub size: usize,
    pub qp: u8,
    pub seed: u64,
    pub config: TrainRecord,
    pub corpus_sha256: String,
    pub split: SplitCounts,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub model_file: String,
    pub model_sha256: String,
    pub eval: EvalReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub model: CnnModel,
    pub history: Vec<EpochStats>,
    pub model_path: PathBuf,
    pub report_path: PathBuf,
    pub history_path: PathBuf,
}

pub fn history_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for h in history {
        let _ = writeln!(s, "{},{},{}", h.epoch, h.train_loss, h.val_loss);
    }
    s
}

/// Entries of one configuration with split tags. Untagged entries get a
/// seeded stratified split; tagged manifests are used as given.
pub fn prepare_entries(manifest: &Manifest, size: usize, qp: u8, seed: u64) -> Result<Vec<Entry>> {
    let entries = manifest.select(size, qp);
    if entries.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no entries for size {size}, QP {qp}"
        )));
    }
    let tagged = entries.iter().filter(|e| e.split.is_some()).count();
    match tagged {
        0 => split(
            &entries,
            crate::manifest::TEST_FRACTION,
            crate::manifest::VAL_FRACTION,
            seed,
        ),
        n if n == entries.len() => Ok(entries),
        _ => Err(Error::Manifest(
            "either every entry or no entry may carry a split tag".into(),
        )),
    }
}

pub struct TrainedModel {
    pub model: CnnModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub entries: Vec<Entry>,
    pub corpus_sha256: String,
    pub warnings: Vec<String>,
}

/// Loads the train and validation splits and trains a fresh model.
pub fn train_configuration(
    manifest: &Manifest,
    size: usize,
    qp: u8,
    cfg: &TrainConfig,
    pool: &rayon::ThreadPool,
) -> Result<TrainedModel> {
    let entries = prepare_entries(manifest, size, qp, cfg.seed)?;
    let warnings = protocol_warnings(&entries);
    for w in &warnings {
        log::warn!("size {size}, QP {qp}: {w}");
    }
    let tr = with_split(&entries, Split::Train);
    let va = with_split(&entries, Split::Val);
    if tr.is_empty() || va.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "size {size}, QP {qp}: {} training and {} validation entries",
            tr.len(),
            va.len()
        )));
    }
    let train_set = load_dataset(&tr, size, pool)?;
    let val_set = load_dataset(&va, size, pool)?;
    log::info!(
        "size {size}, QP {qp}: training on {} images, validating on {}",
        train_set.len(),
        val_set.len()
    );
    let out = train(size, qp, &train_set, &val_set, cfg)?;
    Ok(TrainedModel {
        model: out.model,
        history: out.history,
        best_epoch: out.best_epoch,
        stopped_early: out.stopped_early,
        corpus_sha256: corpus_hash(&entries)?,
        entries,
        warnings,
    })
}

pub fn artifact_stem(size: usize, qp: u8) -> String {
    format!("{size}_qp{qp}")
}

/// Trains, evaluates on the test split and writes model, report (JSON) and
/// history (CSV) into `out_dir`.
pub fn run_experiment(
    manifest: &Manifest,
    size: usize,
    qp: u8,
    cfg: &TrainConfig,
    out_dir: &Path,
    pool: &rayon::ThreadPool,
) -> Result<ExperimentOutcome> {
    fs::create_dir_all(out_dir)?;
    let t = train_configuration(manifest, size, qp, cfg, pool)?;
    let test = with_split(&t.entries, Split::Test);
    if test.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "size {size}, QP {qp}: empty test split"
        )));
    }
    let test_set = load_dataset(&test, size, pool)?;
    let eval = evaluate(&t.model, &test_set, THRESHOLD)?;

    let stem = artifact_stem(size, qp);
    let model_path = out_dir.join(format!("model_{stem}.hfcn"));
    let report_path = out_dir.join(format!("report_{stem}.json"));
    let history_path = out_dir.join(format!("history_{stem}.csv"));
    save_model(&t.model, &model_path)?;
    let model_bytes = fs::read(&model_path)?;

    let report = ExperimentReport {
        size,
        qp,
        seed: cfg.seed,
        config: cfg.into(),
        corpus_sha256: t.corpus_sha256,
        split: SplitCounts {
            train: ClassCounts::of(&with_split(&t.entries, Split::Train)),
            val: ClassCounts::of(&with_split(&t.entries, Split::Val)),
            test: ClassCounts::of(&test),
        },
        best_epoch: t.best_epoch,
        epochs_run: t.history.len(),
        stopped_early: t.stopped_early,
        model_file: model_path
            .file_name()
            .unwrap()
            .to_string_lossy()
            .into_owned(),
        model_sha256: hex(&Sha256::digest(&model_bytes)),
        eval,
        warnings: t.warnings,
    };
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(&history_path, history_csv(&t.history))?;
    Ok(ExperimentOutcome {
        report,
        model: t.model,
        history: t.history,
        model_path,
        report_path,
        history_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub size: usize,
    pub qp: u8,
    pub report: Option<String>,
    pub f1: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub seed: u64,
    pub runs: Vec<SweepEntry>,
}

/// Reads every `*.jsonl` manifest in `dir` into one entry list.
pub fn load_manifest_dir(dir: &Path) -> Result<Manifest> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Manifest(format!(
            "no .jsonl manifests in {}",
            dir.display()
        )));
    }
    let mut entries = Vec::new();
    for f in files {
        let m = Manifest::load(&f)?;
        entries.extend(m.entries.iter().map(|e| Entry {
            path: m.resolve(e),
            ..e.clone()
        }));
    }
    Ok(Manifest::new(entries, dir))
}

/// The six-configuration grid, one independently trained model each.
/// Configurations without data are skipped and recorded as such.
pub fn sweep(
    manifest: &Manifest,
    cfg: &TrainConfig,
    out_dir: &Path,
    pool: &rayon::ThreadPool,
) -> Result<SweepSummary> {
    let mut runs = Vec::new();
    for size in SIZES {
        for qp in QPS {
            if manifest.select(size, qp).is_empty() {
                log::warn!("no data for size {size}, QP {qp}; skipped");
                runs.push(SweepEntry {
                    size,
                    qp,
                    report: None,
                    f1: None,
                    skipped: Some("no manifest entries".into()),
                });
                continue;
            }
            let out = run_experiment(manifest, size, qp, cfg, out_dir, pool)?;
            runs.push(SweepEntry {
                size,
                qp,
                report: Some(
                    out.report_path
                        .file_name()
                        .unwrap()
                        .to_string_lossy()
                        .into_owned(),
                ),
                f1: out.report.eval.metrics.f1,
                skipped: None,
            });
        }
    }
    let summary = SweepSummary {
        seed: cfg.seed,
        runs,
    };
    fs::write(
        out_dir.join("sweep.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(summary)
}
