use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

use super::trace::Trace;

/// Dense token id. Raw system-call numbers map to ids starting at 4;
/// 0..4 are reserved for the special tokens below.
pub type Token = u32;

pub const PAD: Token = 0;
pub const BOS: Token = 1;
pub const EOS: Token = 2;
pub const UNK: Token = 3;

/// Number of reserved special tokens.
pub const SPECIALS: u32 = 4;

/// Bijection between raw system-call numbers and dense token ids.
///
/// Raw calls are assigned tokens in ascending raw order, so a vocabulary is
/// fully determined by the set of calls it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    /// Ascending raw call numbers; index + SPECIALS is the token id.
    raws: Vec<u32>,
}

impl Vocabulary {
    /// Builds the vocabulary over every call seen in `traces`.
    pub fn build(traces: &[Trace]) -> Vocabulary {
        let set: BTreeSet<u32> = traces.iter().flat_map(|t| t.calls.iter().copied()).collect();
        Vocabulary { raws: set.into_iter().collect() }
    }

    pub fn from_raws(mut raws: Vec<u32>) -> Vocabulary {
        raws.sort_unstable();
        raws.dedup();
        Vocabulary { raws }
    }

    /// Count of distinct raw calls (the paper's m).
    pub fn distinct_calls(&self) -> usize {
        self.raws.len()
    }

    /// Total token-id space including the four specials.
    pub fn size(&self) -> usize {
        self.raws.len() + SPECIALS as usize
    }

    pub fn raws(&self) -> &[u32] {
        &self.raws
    }

    /// Raw call -> token id; unknown calls map to UNK.
    pub fn encode(&self, raw: u32) -> Token {
        match self.raws.binary_search(&raw) {
            Ok(idx) => idx as u32 + SPECIALS,
            Err(_) => UNK,
        }
    }

    pub fn encode_seq(&self, raws: &[u32]) -> Vec<Token> {
        raws.iter().map(|&r| self.encode(r)).collect()
    }

    /// Token id -> raw call; None for specials and out-of-range ids.
    pub fn decode(&self, token: Token) -> Option<u32> {
        if token < SPECIALS {
            return None;
        }
        self.raws.get((token - SPECIALS) as usize).copied()
    }

    /// Decodes a token sequence; specials render as 0 (never a valid call).
    pub fn decode_seq(&self, tokens: &[Token]) -> Vec<u32> {
        tokens.iter().map(|&t| self.decode(t).unwrap_or(0)).collect()
    }

    /// Writes the vocabulary as text: `#`-prefixed comment lines allowed,
    /// then one raw call number per line in ascending order.
    pub fn write_file(&self, path: &Path, header: &[String]) -> Result<()> {
        let mut out = String::new();
        for line in header {
            out.push_str(&format!("# {line}\n"));
        }
        for raw in &self.raws {
            out.push_str(&format!("{raw}\n"));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<Vocabulary> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut raws = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let raw: u32 = line
                .parse()
                .map_err(|_| Error::format(path, lineno + 1, format!("bad call number {line:?}")))?;
            raws.push(raw);
        }
        if raws.is_empty() {
            return Err(Error::format(path, 0, "vocabulary file holds no call numbers"));
        }
        Ok(Vocabulary::from_raws(raws))
    }

    /// Comma-separated raw calls for embedding in checkpoint headers.
    pub fn to_header_value(&self) -> String {
        self.raws.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn from_header_value(value: &str) -> Result<Vocabulary> {
        let raws: std::result::Result<Vec<u32>, _> =
            value.split(',').filter(|s| !s.is_empty()).map(|s| s.parse()).collect();
        match raws {
            Ok(raws) if !raws.is_empty() => Ok(Vocabulary::from_raws(raws)),
            _ => Err(Error::Checkpoint("malformed vocab header entry".into())),
        }
    }

    /// Stable FNV-1a hash of the raw call set, stored in checkpoints to
    /// detect loading a model against the wrong vocabulary.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u32| {
            for byte in v.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        mix(self.raws.len() as u32);
        for &r in &self.raws {
            mix(r);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::trace::TraceLabel;
    use std::path::PathBuf;

    fn trace(calls: &[u32]) -> Trace {
        Trace { calls: calls.to_vec(), label: TraceLabel::Normal, origin: PathBuf::from("t") }
    }

    #[test]
    fn ascending_token_assignment() {
        let vocab = Vocabulary::build(&[trace(&[102, 3, 6, 3])]);
        assert_eq!(vocab.distinct_calls(), 3);
        assert_eq!(vocab.encode(3), 4);
        assert_eq!(vocab.encode(6), 5);
        assert_eq!(vocab.encode(102), 6);
    }

    #[test]
    fn unknown_calls_map_to_unk() {
        let vocab = Vocabulary::build(&[trace(&[3, 6])]);
        assert_eq!(vocab.encode(999), UNK);
    }

    #[test]
    fn encode_decode_identity_on_known_calls() {
        let vocab = Vocabulary::build(&[trace(&[5, 17, 42, 300])]);
        for raw in [5u32, 17, 42, 300] {
            assert_eq!(vocab.decode(vocab.encode(raw)), Some(raw));
        }
        assert_eq!(vocab.decode(PAD), None);
        assert_eq!(vocab.decode(BOS), None);
        assert_eq!(vocab.decode(EOS), None);
        assert_eq!(vocab.decode(UNK), None);
    }

    #[test]
    fn hash_changes_with_content() {
        let a = Vocabulary::from_raws(vec![1, 2, 3]);
        let b = Vocabulary::from_raws(vec![1, 2, 4]);
        assert_ne!(a.hash(), b.hash());
        let c = Vocabulary::from_raws(vec![3, 2, 1, 2]);
        assert_eq!(a.hash(), c.hash());
    }
}
