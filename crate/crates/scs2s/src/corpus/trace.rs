use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Ground-truth label of one trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TraceLabel {
    Normal,
    /// Attack kind, e.g. "Hydra_FTP", parsed from the ADFA directory name.
    Attack(String),
}

impl TraceLabel {
    pub fn is_attack(&self) -> bool {
        matches!(self, TraceLabel::Attack(_))
    }
}

impl fmt::Display for TraceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceLabel::Normal => write!(f, "normal"),
            TraceLabel::Attack(kind) => write!(f, "attack:{kind}"),
        }
    }
}

impl std::str::FromStr for TraceLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "normal" {
            Ok(TraceLabel::Normal)
        } else if let Some(kind) = s.strip_prefix("attack:") {
            Ok(TraceLabel::Attack(kind.to_string()))
        } else {
            Err(Error::Input(format!("unknown label {s:?}")))
        }
    }
}

/// One system-call trace: the ordered raw call numbers of a single file.
#[derive(Debug, Clone)]
pub struct Trace {
    pub calls: Vec<u32>,
    pub label: TraceLabel,
    pub origin: PathBuf,
}

/// Per-category bookkeeping from an ADFA-layout ingest.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub normal_train: usize,
    pub normal_validation: usize,
    /// (attack kind, file count), sorted by kind.
    pub attack_kinds: Vec<(String, usize)>,
    pub empty_skipped: usize,
    pub unreadable_skipped: usize,
}

impl IngestReport {
    pub fn attack_total(&self) -> usize {
        self.attack_kinds.iter().map(|(_, n)| n).sum()
    }
}

/// An ingested ADFA-layout dataset, kept in its three on-disk groups.
#[derive(Debug, Clone, Default)]
pub struct AdfaDataset {
    pub normal_train: Vec<Trace>,
    pub normal_validation: Vec<Trace>,
    pub attacks: Vec<Trace>,
    pub report: IngestReport,
}

impl AdfaDataset {
    pub fn all_traces(&self) -> impl Iterator<Item = &Trace> {
        self.normal_train
            .iter()
            .chain(&self.normal_validation)
            .chain(&self.attacks)
    }
}

/// Reads a directory in the ADFA-LD layout:
///
/// ```text
/// root/
///   Training_Data_Master/*.txt
///   Validation_Data_Master/*.txt
///   Attack_Data_Master/<Kind>_<n>/*.txt
/// ```
///
/// Files are ASCII whitespace-separated decimal call numbers, one trace per
/// file. Empty or unreadable files are skipped and counted; a non-integer
/// token is a hard format error naming the file and token offset.
pub fn ingest_adfa(root: &Path) -> Result<AdfaDataset> {
    let mut ds = AdfaDataset::default();

    let train_dir = root.join("Training_Data_Master");
    let val_dir = root.join("Validation_Data_Master");
    let attack_dir = root.join("Attack_Data_Master");
    if !train_dir.is_dir() && !val_dir.is_dir() && !attack_dir.is_dir() {
        return Err(Error::Input(format!(
            "{} does not look like an ADFA-LD root (no *_Data_Master subdirectories)",
            root.display()
        )));
    }

    if train_dir.is_dir() {
        for path in sorted_files(&train_dir)? {
            ingest_file(&path, TraceLabel::Normal, &mut ds.normal_train, &mut ds.report)?;
        }
        ds.report.normal_train = ds.normal_train.len();
    }
    if val_dir.is_dir() {
        for path in sorted_files(&val_dir)? {
            ingest_file(&path, TraceLabel::Normal, &mut ds.normal_validation, &mut ds.report)?;
        }
        ds.report.normal_validation = ds.normal_validation.len();
    }
    if attack_dir.is_dir() {
        let mut kind_counts: Vec<(String, usize)> = Vec::new();
        let mut kind_dirs: Vec<PathBuf> = fs::read_dir(&attack_dir)
            .map_err(|e| Error::io(&attack_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        kind_dirs.sort();
        for dir in kind_dirs {
            let kind = attack_kind_of(&dir);
            let before = ds.attacks.len();
            for path in sorted_files(&dir)? {
                ingest_file(&path, TraceLabel::Attack(kind.clone()), &mut ds.attacks, &mut ds.report)?;
            }
            let added = ds.attacks.len() - before;
            match kind_counts.iter_mut().find(|(k, _)| *k == kind) {
                Some((_, n)) => *n += added,
                None => kind_counts.push((kind, added)),
            }
        }
        kind_counts.sort();
        ds.report.attack_kinds = kind_counts;
    }

    Ok(ds)
}

/// Strips the trailing `_<n>` instance suffix: `Hydra_FTP_3` -> `Hydra_FTP`.
fn attack_kind_of(dir: &Path) -> String {
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("unknown");
    match name.rfind('_') {
        Some(pos) if name[pos + 1..].chars().all(|c| c.is_ascii_digit()) && pos > 0 => {
            name[..pos].to_string()
        }
        _ => name.to_string(),
    }
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

fn ingest_file(
    path: &Path,
    label: TraceLabel,
    out: &mut Vec<Trace>,
    report: &mut IngestReport,
) -> Result<()> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(err) => {
            eprintln!("warning: skipping unreadable {}: {err}", path.display());
            report.unreadable_skipped += 1;
            return Ok(());
        }
    };
    match parse_trace_text(&text, path) {
        Ok(calls) if calls.is_empty() => {
            eprintln!("warning: skipping empty trace {}", path.display());
            report.empty_skipped += 1;
            Ok(())
        }
        Ok(calls) => {
            out.push(Trace { calls, label, origin: path.to_path_buf() });
            Ok(())
        }
        Err(e) => Err(e),
    }
}

/// Parses whitespace-separated decimal call numbers.
pub fn parse_trace_text(text: &str, path: &Path) -> Result<Vec<u32>> {
    let mut calls = Vec::new();
    for (offset, token) in text.split_whitespace().enumerate() {
        let call: u32 = token.parse().map_err(|_| {
            Error::format(path, 0, format!("non-integer token {token:?} at offset {offset}"))
        })?;
        if call == 0 {
            return Err(Error::format(path, 0, format!("call number must be >= 1 at offset {offset}")));
        }
        calls.push(call);
    }
    Ok(calls)
}
