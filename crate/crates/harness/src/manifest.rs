//! JSON-lines dataset manifests and the stratified train/val/test split.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TEST_FRACTION: f64 = 0.15;
pub const VAL_FRACTION: f64 = 0.10;
/// Non-face to face ratio of the published corpus.
pub const PUBLISHED_CLASS_RATIO: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    NonFace,
    Face,
}

impl Label {
    pub fn is_face(self) -> bool {
        self == Label::Face
    }

    pub fn as_u8(self) -> u8 {
        self.is_face() as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub path: PathBuf,
    pub label: Label,
    pub qp: u8,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<Entry>,
    /// Relative entry paths resolve against this directory.
    pub base: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<Entry>, base: impl Into<PathBuf>) -> Self {
        Manifest {
            entries,
            base: base.into(),
        }
    }

    pub fn parse(text: &str, base: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Entry = serde_json::from_str(line)
                .map_err(|e| Error::Manifest(format!("line {}: {e}", i + 1)))?;
            entries.push(e);
        }
        Ok(Manifest::new(entries, base))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::parse(&text, base).map_err(|e| e.in_file(path))
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn resolve(&self, e: &Entry) -> PathBuf {
        if e.path.is_absolute() {
            e.path.clone()
        } else {
            self.base.join(&e.path)
        }
    }

    /// Entries of one (size, qp) configuration, with paths made absolute
    /// or base-relative so they no longer depend on `base`.
    pub fn select(&self, size: usize, qp: u8) -> Vec<Entry> {
        self.entries
            .iter()
            .filter(|e| e.size == size && e.qp == qp)
            .map(|e| Entry {
                path: self.resolve(e),
                ..e.clone()
            })
            .collect()
    }

    pub fn configurations(&self) -> Vec<(usize, u8)> {
        let mut v: Vec<(usize, u8)> = self.entries.iter().map(|e| (e.size, e.qp)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Splits round(frac * total) into per-class quotas by the largest-remainder
/// rule, in exact integer arithmetic (frac in parts per million). Ties go to
/// the class listed first.
fn stratified_counts(sizes: &[usize], frac: f64) -> Vec<usize> {
    const DEN: u64 = 1_000_000;
    let f = (frac * DEN as f64).round() as u64;
    let total: u64 = sizes.iter().map(|&n| n as u64).sum();
    let target = ((total * f + DEN / 2) / DEN) as usize;
    let mut counts: Vec<usize> = sizes
        .iter()
        .map(|&n| (n as u64 * f / DEN) as usize)
        .collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(sizes[i] as u64 * f % DEN), i));
    let mut left = target.saturating_sub(counts.iter().sum());
    for &i in order.iter().cycle().take(order.len() * 2) {
        if left == 0 {
            break;
        }
        if counts[i] < sizes[i] {
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}

/// Stratified, seeded split: `test_frac` of each class goes to test, then
/// `val_frac` of what remains goes to validation.
pub fn split(entries: &[Entry], test_frac: f64, val_frac: f64, seed: u64) -> Result<Vec<Entry>> {
    if entries.is_empty() {
        return Err(Error::EmptyDataset("no entries to split".into()));
    }
    if !(0.0..1.0).contains(&test_frac) || !(0.0..1.0).contains(&val_frac) {
        return Err(Error::Manifest("split fractions must be in [0, 1)".into()));
    }
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        by_class.entry(e.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
    }
    // face first, so ties in the remainder favour the rarer class
    let classes: Vec<&Vec<usize>> = by_class.values().rev().collect();
    let sizes: Vec<usize> = classes.iter().map(|v| v.len()).collect();
    let tests = stratified_counts(&sizes, test_frac);
    let rest: Vec<usize> = sizes.iter().zip(&tests).map(|(n, t)| n - t).collect();
    let vals = stratified_counts(&rest, val_frac);

    let mut out: Vec<Entry> = entries.to_vec();
    for (c, idx) in classes.iter().enumerate() {
        for (k, &i) in idx.iter().enumerate() {
            out[i].split = Some(if k < tests[c] {
                Split::Test
            } else if k < tests[c] + vals[c] {
                Split::Val
            } else {
                Split::Train
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub face: usize,
    pub non_face: usize,
}

impl ClassCounts {
    pub fn of<'a>(entries: impl IntoIterator<Item = &'a Entry>) -> Self {
        let mut c = ClassCounts::default();
        for e in entries {
            if e.label.is_face() {
                c.face += 1;
            } else {
                c.non_face += 1;
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.face + self.non_face
    }
}

/// Deviations from the published protocol (test share, class ratio). These
/// are advisory: user corpora may differ on purpose.
pub fn protocol_warnings(entries: &[Entry]) -> Vec<String> {
    let mut w = Vec::new();
    let all = ClassCounts::of(entries);
    if all.total() == 0 {
        return w;
    }
    let test = ClassCounts::of(entries.iter().filter(|e| e.split == Some(Split::Test)));
    let share = test.total() as f64 / all.total() as f64;
    if (share - TEST_FRACTION).abs() > 0.02 {
        w.push(format!(
            "test share is {:.1}%, the published protocol used {:.0}%",
            share * 100.0,
            TEST_FRACTION * 100.0
        ));
    }
    if all.face == 0 || all.non_face == 0 {
        w.push("only one class present".into());
    } else {
        let ratio = all.non_face as f64 / all.face as f64;
        if (ratio / PUBLISHED_CLASS_RATIO - 1.0).abs() > 0.25 {
            w.push(format!(
                "non-face:face ratio is {ratio:.2}, the published corpus was about {PUBLISHED_CLASS_RATIO}:1"
            ));
        }
    }
    w
}

pub fn with_split(entries: &[Entry], s: Split) -> Vec<Entry> {
    entries
        .iter()
        .filter(|e| e.split == Some(s))
        .cloned()
        .collect()
}
