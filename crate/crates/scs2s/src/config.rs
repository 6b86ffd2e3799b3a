//! Declarative run configuration: one flat key=value space resolved from
//! defaults, then a config file, then command-line flags, then environment
//! variables prefixed `SCS2S_` (later sources win). Unknown keys are
//! rejected at every layer.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::Bucket;
use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "SCS2S_";

/// Known keys, their defaults, and whether they are presence-style
/// booleans on the command line (`--attention` means `attention=true`).
const KEYS: &[(&str, &str, bool)] = &[
    // corpus
    ("adfa-root", "", false),
    ("window-lengths", "10,12,15,18,20,22,25,30", false),
    ("split-ratios", "0.4,0.5,0.6,0.7", false),
    ("stride", "1", false),
    ("train-fraction", "0.8", false),
    ("buckets", "8x8,12x12,16x16,24x24", false),
    // model
    ("cell", "gru", false),
    ("layers", "1", false),
    ("hidden", "256", false),
    ("attention", "false", true),
    ("dropout-keep", "0.5", false),
    // training
    ("lr0", "0.1", false),
    ("clip-norm", "5", false),
    ("batch", "64", false),
    ("lr-decay", "0.5", false),
    ("decay-patience", "2", false),
    ("stop-patience", "4", false),
    ("max-epochs", "100", false),
    ("seed", "1", false),
    // evaluation / detection
    ("max-len", "30", false),
    ("beam", "0", false),
    ("classifier", "logreg_ngram", false),
    ("n-max", "3", false),
    // io
    ("out-dir", ".", false),
    ("pairs", "", false),
    ("train-pairs", "", false),
    ("heldout", "", false),
    ("model", "", false),
    ("vocab", "", false),
    ("input", "", false),
    ("spec", "", false),
    ("traces", "100", false),
    ("builtin", "false", true),
    ("runs", "", false),
];

/// Fully resolved configuration. Every artifact header echoes it.
#[derive(Debug, Clone)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            entries: KEYS.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect(),
        }
    }
}

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

fn is_presence_bool(key: &str) -> bool {
    KEYS.iter().any(|(k, _, b)| *k == key && *b)
}

impl RunConfig {
    /// Resolves the full stack: defaults, `--config <file>` if present in
    /// the flags, remaining flags, then `SCS2S_*` environment variables.
    pub fn resolve(flags: &[String]) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();

        // The config file path itself comes from flags (or environment).
        let mut file: Option<PathBuf> = std::env::var("SCS2S_CONFIG").ok().map(PathBuf::from);
        let mut rest: Vec<String> = Vec::new();
        let mut it = flags.iter();
        while let Some(arg) = it.next() {
            if arg == "--config" {
                let path = it
                    .next()
                    .ok_or_else(|| Error::Config("--config requires a path".into()))?;
                file = Some(PathBuf::from(path));
            } else {
                rest.push(arg.clone());
            }
        }

        if let Some(path) = file {
            cfg.apply_file(&path)?;
        }
        cfg.apply_flags(&rest)?;
        cfg.apply_env()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !is_known(key) {
            return Err(Error::Config(format!("unknown configuration key {key:?}")));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{} line {}: expected key = value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn apply_flags(&mut self, flags: &[String]) -> Result<()> {
        let mut it = flags.iter().peekable();
        while let Some(arg) = it.next() {
            let key = arg
                .strip_prefix("--")
                .ok_or_else(|| Error::Config(format!("expected --flag, got {arg:?}")))?;
            if !is_known(key) {
                return Err(Error::Config(format!("unknown flag --{key}")));
            }
            let takes_value = matches!(it.peek(), Some(next) if !next.starts_with("--"));
            if takes_value {
                self.set(key, it.next().unwrap().clone())?;
            } else if is_presence_bool(key) {
                self.set(key, "true")?;
            } else {
                return Err(Error::Config(format!("flag --{key} requires a value")));
            }
        }
        Ok(())
    }

    fn apply_env(&mut self) -> Result<()> {
        for (name, value) in std::env::vars() {
            let Some(suffix) = name.strip_prefix(ENV_PREFIX) else { continue };
            if suffix == "CONFIG" || suffix == "ADFA_FULL_ROOT" {
                continue; // meta-variables, not config keys
            }
            let key = suffix.to_ascii_lowercase().replace('_', "-");
            if !is_known(&key) {
                return Err(Error::Config(format!("unknown environment variable {name}")));
            }
            self.set(&key, value)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.entries
            .get(key)
            .unwrap_or_else(|| panic!("unknown config key {key:?} requested"))
    }

    /// Required path-valued key; empty means the caller forgot it.
    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        let v = self.get(key);
        if v.is_empty() {
            return Err(Error::Config(format!("--{key} is required for this subcommand")));
        }
        Ok(PathBuf::from(v))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.get(key)
            .parse()
            .map_err(|_| Error::Config(format!("{key} must be an integer, got {:?}", self.get(key))))
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.get(key)
            .parse()
            .map_err(|_| Error::Config(format!("{key} must be an integer, got {:?}", self.get(key))))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        self.get(key)
            .parse()
            .map_err(|_| Error::Config(format!("{key} must be a number, got {:?}", self.get(key))))
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::Config(format!("{key} must be true/false, got {other:?}"))),
        }
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.get(key)
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}: bad integer {s:?}")))
            })
            .collect()
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}: bad number {s:?}")))
            })
            .collect()
    }

    /// Buckets in `SxT` comma-separated form, e.g. `8x8,12x12`.
    pub fn get_buckets(&self, key: &str) -> Result<Vec<Bucket>> {
        self.get(key)
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                let (a, b) = s
                    .trim()
                    .split_once('x')
                    .ok_or_else(|| Error::Config(format!("{key}: bucket {s:?} is not SxT")))?;
                Ok(Bucket {
                    max_source_len: a
                        .parse()
                        .map_err(|_| Error::Config(format!("{key}: bad bucket {s:?}")))?,
                    max_target_len: b
                        .parse()
                        .map_err(|_| Error::Config(format!("{key}: bad bucket {s:?}")))?,
                })
            })
            .collect()
    }

    /// Sorted key=value lines for artifact headers.
    pub fn header_lines(&self) -> Vec<String> {
        self.entries.iter().map(|(k, v)| format!("{k}={v}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_the_described_regimen() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.get("hidden"), "256");
        assert_eq!(cfg.get("lr0"), "0.1");
        assert_eq!(cfg.get("batch"), "64");
        assert_eq!(cfg.get("dropout-keep"), "0.5");
        assert_eq!(cfg.get("clip-norm"), "5");
        assert_eq!(
            cfg.get_usize_list("window-lengths").unwrap(),
            vec![10, 12, 15, 18, 20, 22, 25, 30]
        );
        assert_eq!(cfg.get_f64_list("split-ratios").unwrap(), vec![0.4, 0.5, 0.6, 0.7]);
    }

    #[test]
    fn flags_override_and_presence_bools_work() {
        let flags: Vec<String> = ["--hidden", "32", "--attention", "--layers", "3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!(cfg.get("hidden"), "32");
        assert!(cfg.get_bool("attention").unwrap());
        assert_eq!(cfg.get_usize("layers").unwrap(), 3);
    }

    #[test]
    fn unknown_flag_is_rejected() {
        let flags: Vec<String> = ["--frobnicate", "9"].iter().map(|s| s.to_string()).collect();
        let err = RunConfig::resolve(&flags).unwrap_err();
        assert!(err.to_string().contains("frobnicate"));
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "hidden = 64\nlayers = 2  # comment\n\n# full-line comment\n")
            .unwrap();
        let flags: Vec<String> = ["--config", path.to_str().unwrap(), "--hidden", "16"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!(cfg.get("hidden"), "16");
        assert_eq!(cfg.get("layers"), "2");
    }

    #[test]
    fn unknown_file_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "no-such-key = 1\n").unwrap();
        let flags: Vec<String> =
            ["--config", path.to_str().unwrap()].iter().map(|s| s.to_string()).collect();
        assert!(RunConfig::resolve(&flags).is_err());
    }

    #[test]
    fn buckets_parse() {
        let cfg = RunConfig::default();
        let buckets = cfg.get_buckets("buckets").unwrap();
        assert_eq!(buckets.len(), 4);
        assert_eq!(buckets[0].max_source_len, 8);
        assert_eq!(buckets[3].max_target_len, 24);
    }

    #[test]
    fn header_lines_are_sorted_and_complete() {
        let cfg = RunConfig::default();
        let lines = cfg.header_lines();
        assert_eq!(lines.len(), KEYS.len());
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
    }
}
