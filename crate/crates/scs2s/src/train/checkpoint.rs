use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{CellKind, ModelConfig, Seq2Seq};
use crate::numeric::{Matrix, Rng};

/// File magic; the trailing digit is the format version.
pub const CHECKPOINT_MAGIC: &[u8] = b"SCS2S1\n";

/// Ordered key=value header lines. Always contains the model
/// configuration; callers add vocabulary, seed, epoch and loss entries.
#[derive(Debug, Clone, Default)]
pub struct CheckpointHeader {
    entries: Vec<(String, String)>,
}

impl CheckpointHeader {
    pub fn new() -> Self {
        CheckpointHeader::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(!key.contains('=') && !key.contains('\n'), "bad header key");
        assert!(!value.contains('\n'), "header values must be single-line");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Checkpoint(format!("header is missing {key}")))
    }
}

/// Writes the model as: magic, ASCII `key=value` header lines, an
/// `@tensors` separator, then per slot a `name rows cols` line followed by
/// rows*cols little-endian IEEE-754 f32 values.
pub fn save_checkpoint(path: &Path, model: &Seq2Seq, extra: &CheckpointHeader) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);

    w.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;

    let cfg = model.config();
    let mut header = CheckpointHeader::new();
    header.set("cell", cfg.cell.as_str());
    header.set("layers", cfg.layers);
    header.set("hidden", cfg.hidden);
    header.set("vocab_size", cfg.vocab_size);
    header.set("attention", cfg.attention);
    header.set("dropout_keep", cfg.dropout_keep);
    header.set(
        "gru_convention",
        "z=sigm(xWz+hUz+bz);r=sigm(xWr+hUr+br);ht=tanh(xWh+(r.h)Uh+bh);h'=(1-z).h+z.ht",
    );
    header.set("init", "uniform(-0.08,0.08)");
    for (k, v) in extra.entries() {
        header.set(k, v);
    }
    for (k, v) in header.entries() {
        writeln!(w, "{k}={v}").map_err(io_err)?;
    }
    writeln!(w, "@tensors").map_err(io_err)?;

    for slot in model.params().iter() {
        writeln!(w, "{} {} {}", slot.name, slot.value.rows(), slot.value.cols())
            .map_err(io_err)?;
        let mut bytes = Vec::with_capacity(slot.value.data().len() * 4);
        for &v in slot.value.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&bytes).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Loads a checkpoint, rebuilding the model from the header configuration.
/// When `expected_vocab_hash` is given, a differing `vocab_hash` header is
/// an error: the model was trained against a different vocabulary.
pub fn load_checkpoint(
    path: &Path,
    expected_vocab_hash: Option<u64>,
) -> Result<(Seq2Seq, CheckpointHeader)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    if !bytes.starts_with(CHECKPOINT_MAGIC) {
        return Err(Error::Checkpoint(format!(
            "{} does not start with the {:?} magic",
            path.display(),
            String::from_utf8_lossy(CHECKPOINT_MAGIC).trim()
        )));
    }
    let mut pos = CHECKPOINT_MAGIC.len();

    let mut header = CheckpointHeader::new();
    loop {
        let line = read_line(&bytes, &mut pos)
            .ok_or_else(|| Error::Checkpoint("truncated before @tensors".into()))?;
        if line == "@tensors" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("malformed header line {line:?}")))?;
        header.set(k, v);
    }

    if let Some(expected) = expected_vocab_hash {
        let found: u64 = header
            .require("vocab_hash")?
            .parse()
            .map_err(|_| Error::Checkpoint("unparsable vocab_hash".into()))?;
        if found != expected {
            return Err(Error::Checkpoint(format!(
                "vocabulary hash mismatch: checkpoint has {found}, expected {expected}"
            )));
        }
    }

    let config = ModelConfig {
        cell: CellKind::parse(header.require("cell")?)
            .ok_or_else(|| Error::Checkpoint("unknown cell kind".into()))?,
        layers: parse_header(&header, "layers")?,
        hidden: parse_header(&header, "hidden")?,
        vocab_size: parse_header(&header, "vocab_size")?,
        attention: parse_header(&header, "attention")?,
        dropout_keep: parse_header(&header, "dropout_keep")?,
    };
    let mut model = Seq2Seq::new(config, &mut Rng::new(0))?;

    let mut loaded = 0usize;
    while pos < bytes.len() {
        let line = read_line(&bytes, &mut pos)
            .ok_or_else(|| Error::Checkpoint("truncated slot descriptor".into()))?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (name, rows, cols) = match (parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(r), Some(c)) => {
                let rows: usize = r
                    .parse()
                    .map_err(|_| Error::Checkpoint(format!("bad shape for slot {n}")))?;
                let cols: usize = c
                    .parse()
                    .map_err(|_| Error::Checkpoint(format!("bad shape for slot {n}")))?;
                (n.to_string(), rows, cols)
            }
            _ => return Err(Error::Checkpoint(format!("malformed slot line {line:?}"))),
        };

        let id = model
            .params()
            .id(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown slot {name} for this config")))?;
        if model.params().value(id).shape() != (rows, cols) {
            return Err(Error::Checkpoint(format!(
                "slot {name}: shape {rows}x{cols} does not match model {:?}",
                model.params().value(id).shape()
            )));
        }
        let need = rows * cols * 4;
        if pos + need > bytes.len() {
            return Err(Error::Checkpoint(format!("slot {name}: file truncated mid-tensor")));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for chunk in bytes[pos..pos + need].chunks_exact(4) {
            values.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
        }
        pos += need;
        *model.params_mut().value_mut(id) = Matrix::from_vec(rows, cols, values);
        loaded += 1;
    }

    if loaded != model.params().len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {loaded} slots but the configuration needs {}",
            model.params().len()
        )));
    }
    Ok((model, header))
}

fn parse_header<T: std::str::FromStr>(header: &CheckpointHeader, key: &str) -> Result<T> {
    header
        .require(key)?
        .parse()
        .map_err(|_| Error::Checkpoint(format!("unparsable header value for {key}")))
}

fn read_line(bytes: &[u8], pos: &mut usize) -> Option<String> {
    let rest = &bytes[*pos..];
    let end = rest.iter().position(|&b| b == b'\n')?;
    let line = String::from_utf8_lossy(&rest[..end]).into_owned();
    *pos += end + 1;
    Some(line)
}
