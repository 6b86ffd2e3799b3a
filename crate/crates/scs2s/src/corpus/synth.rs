use std::collections::HashMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::numeric::Rng;

use super::trace::{Trace, TraceLabel};

/// One probabilistic finite automaton: states, a start state, weighted
/// symbol-emitting edges, and the length of the traces it samples.
#[derive(Debug, Clone)]
pub struct Automaton {
    pub name: String,
    pub label: TraceLabel,
    pub trace_len: usize,
    start: usize,
    /// Outgoing edges per state: (destination, emitted call, probability).
    edges: Vec<Vec<(usize, u32, f64)>>,
}

/// A parsed synthetic-corpus description: one or more automata.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub automata: Vec<Automaton>,
}

impl SynthSpec {
    /// Parses the small text format:
    ///
    /// ```text
    /// # comment
    /// automaton normal
    /// length 60
    /// start A
    /// A -> B : 5 0.7
    /// A -> C : 8 0.3
    /// ...
    /// automaton attack exploit
    /// ...
    /// ```
    ///
    /// Edge probabilities out of each state are normalized by their sum.
    /// A state with no outgoing edges is a spec error.
    pub fn parse(text: &str) -> Result<SynthSpec> {
        let mut automata: Vec<AutomatonBuilder> = Vec::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config(format!("synth spec line {}: {msg}", lineno + 1));

            if let Some(rest) = line.strip_prefix("automaton") {
                let mut words = rest.split_whitespace();
                let label = match words.next() {
                    Some("normal") => TraceLabel::Normal,
                    Some("attack") => {
                        TraceLabel::Attack(words.next().unwrap_or("synthetic").to_string())
                    }
                    other => return Err(err(format!("expected normal|attack, got {other:?}"))),
                };
                let name = format!("{label}");
                automata.push(AutomatonBuilder::new(name, label));
                continue;
            }

            let current = automata
                .last_mut()
                .ok_or_else(|| err("directive before any `automaton` line".into()))?;

            if let Some(rest) = line.strip_prefix("start") {
                current.start = Some(rest.trim().to_string());
            } else if let Some(rest) = line.strip_prefix("length") {
                current.trace_len = rest
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad length {:?}", rest.trim())))?;
            } else if line.contains("->") {
                let (from, rest) = line.split_once("->").unwrap();
                let (to, emit) = rest
                    .split_once(':')
                    .ok_or_else(|| err("edge missing `: symbol prob`".into()))?;
                let mut parts = emit.split_whitespace();
                let symbol: u32 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("edge missing symbol".into()))?;
                let prob: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("edge missing probability".into()))?;
                if symbol == 0 {
                    return Err(err("symbols are raw call numbers and must be >= 1".into()));
                }
                if prob <= 0.0 {
                    return Err(err(format!("probability {prob} must be positive")));
                }
                current.edges.push((
                    from.trim().to_string(),
                    to.trim().to_string(),
                    symbol,
                    prob,
                ));
            } else {
                return Err(err(format!("unrecognized directive {line:?}")));
            }
        }

        if automata.is_empty() {
            return Err(Error::Config("synth spec defines no automata".into()));
        }
        let automata = automata
            .into_iter()
            .map(AutomatonBuilder::finish)
            .collect::<Result<Vec<_>>>()?;
        Ok(SynthSpec { automata })
    }
}

struct AutomatonBuilder {
    name: String,
    label: TraceLabel,
    trace_len: usize,
    start: Option<String>,
    edges: Vec<(String, String, u32, f64)>,
}

impl AutomatonBuilder {
    fn new(name: String, label: TraceLabel) -> Self {
        AutomatonBuilder { name, label, trace_len: 64, start: None, edges: Vec::new() }
    }

    fn finish(self) -> Result<Automaton> {
        let err = |msg: String| Error::Config(format!("automaton {}: {msg}", self.name));
        if self.edges.is_empty() {
            return Err(err("has no edges".into()));
        }
        let mut state_names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let intern = |name: &str, names: &mut Vec<String>, index: &mut HashMap<String, usize>| {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };

        let mut edges: Vec<Vec<(usize, u32, f64)>> = Vec::new();
        for (from, to, symbol, prob) in &self.edges {
            let f = intern(from, &mut state_names, &mut index);
            let t = intern(to, &mut state_names, &mut index);
            if edges.len() <= f.max(t) {
                edges.resize(f.max(t) + 1, Vec::new());
            }
            edges[f].push((t, *symbol, *prob));
        }
        edges.resize(state_names.len(), Vec::new());

        for (s, out) in edges.iter().enumerate() {
            if out.is_empty() {
                return Err(err(format!("state {} has no outgoing edges", state_names[s])));
            }
        }
        // Normalize each state's outgoing probabilities.
        for out in edges.iter_mut() {
            let total: f64 = out.iter().map(|(_, _, p)| p).sum();
            for (_, _, p) in out.iter_mut() {
                *p /= total;
            }
        }

        let start_name = self
            .start
            .unwrap_or_else(|| self.edges[0].0.clone());
        let start = *index
            .get(&start_name)
            .ok_or_else(|| err(format!("start state {start_name:?} never appears")))?;

        Ok(Automaton { name: self.name, label: self.label, trace_len: self.trace_len, start, edges })
    }
}

impl Automaton {
    /// Samples one trace of `trace_len` calls.
    pub fn sample(&self, rng: &mut Rng) -> Vec<u32> {
        let mut state = self.start;
        let mut calls = Vec::with_capacity(self.trace_len);
        for _ in 0..self.trace_len {
            let out = &self.edges[state];
            let mut pick = rng.next_f64();
            let mut chosen = out.len() - 1;
            for (i, (_, _, p)) in out.iter().enumerate() {
                if pick < *p {
                    chosen = i;
                    break;
                }
                pick -= p;
            }
            let (next, symbol, _) = out[chosen];
            calls.push(symbol);
            state = next;
        }
        calls
    }
}

/// Samples `n_per_automaton` labeled traces from every automaton in the
/// spec. Deterministic under the seed.
pub fn generate_synthetic(spec: &SynthSpec, n_per_automaton: usize, rng: &mut Rng) -> Vec<Trace> {
    let mut traces = Vec::with_capacity(spec.automata.len() * n_per_automaton);
    for automaton in &spec.automata {
        for i in 0..n_per_automaton {
            traces.push(Trace {
                calls: automaton.sample(rng),
                label: automaton.label.clone(),
                origin: PathBuf::from(format!("synth://{}/{i}", automaton.name)),
            });
        }
    }
    traces
}

/// Built-in two-automaton corpus used by the examples and the test suite:
/// a "normal" service loop and an "attack" automaton that shares part of
/// the alphabet but emits its own characteristic call patterns.
pub const DEMO_SPEC: &str = "\
# Two-automaton demo corpus over a small call alphabet.
automaton normal
length 56
start idle
idle  -> opened : 3 1.0
opened -> reading : 4 0.8
opened -> stat   : 7 0.2
reading -> writing : 5 0.75
reading -> reading : 4 0.25
writing -> closed : 6 1.0
stat   -> closed : 8 1.0
closed -> idle  : 9 1.0

automaton attack shell_inject
length 56
start probe
probe -> fork    : 3 0.85
probe -> scan    : 11 0.15
fork  -> exec    : 13 1.0
exec  -> sock    : 14 0.8
exec  -> reading : 4 0.2
reading -> exec  : 5 1.0
sock  -> send    : 15 0.9
sock  -> probe   : 6 0.1
send  -> probe   : 16 1.0
scan  -> probe   : 12 1.0
";

/// Parses [`DEMO_SPEC`]; infallible by construction.
pub fn demo_spec() -> SynthSpec {
    SynthSpec::parse(DEMO_SPEC).expect("built-in demo spec is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn deterministic_cycle_emits_repeating_prefix() {
        let spec = SynthSpec::parse(
            "automaton normal\nstart A\nA -> B : 10 1.0\nB -> C : 11 1.0\nC -> A : 12 1.0\n",
        )
        .unwrap();
        let mut rng = Rng::new(0);
        let calls = spec.automata[0].sample(&mut rng);
        for (i, &c) in calls.iter().enumerate() {
            assert_eq!(c, [10, 11, 12][i % 3]);
        }
    }

    #[test]
    fn dead_end_state_is_a_spec_error() {
        let res = SynthSpec::parse("automaton normal\nstart A\nA -> B : 10 1.0\n");
        let msg = res.unwrap_err().to_string();
        assert!(msg.contains("no outgoing edges"), "{msg}");
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = demo_spec();
        let a = generate_synthetic(&spec, 20, &mut Rng::new(7));
        let b = generate_synthetic(&spec, 20, &mut Rng::new(7));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.calls, y.calls);
            assert_eq!(x.label, y.label);
        }
    }

    #[test]
    fn labels_follow_automata() {
        let spec = demo_spec();
        let traces = generate_synthetic(&spec, 5, &mut Rng::new(1));
        assert_eq!(traces.iter().filter(|t| !t.label.is_attack()).count(), 5);
        assert_eq!(traces.iter().filter(|t| t.label.is_attack()).count(), 5);
    }

    #[test]
    fn disjoint_bigram_automata_separate_perfectly() {
        // Two automata over disjoint alphabets: their bigram sets cannot
        // overlap, so bigram-presence scoring must reach AUC 1.0.
        let spec = SynthSpec::parse(
            "automaton normal\nstart A\nA -> B : 1 0.5\nA -> B : 2 0.5\nB -> A : 3 1.0\n\
             automaton attack x\nstart A\nA -> B : 11 0.5\nA -> B : 12 0.5\nB -> A : 13 1.0\n",
        )
        .unwrap();
        let mut rng = Rng::new(3);
        let traces = generate_synthetic(&spec, 30, &mut rng);

        let bigrams = |calls: &[u32]| -> HashSet<(u32, u32)> {
            calls.windows(2).map(|w| (w[0], w[1])).collect()
        };
        let attack_bigrams: HashSet<(u32, u32)> = traces
            .iter()
            .filter(|t| t.label.is_attack())
            .flat_map(|t| bigrams(&t.calls))
            .collect();
        let normal_bigrams: HashSet<(u32, u32)> = traces
            .iter()
            .filter(|t| !t.label.is_attack())
            .flat_map(|t| bigrams(&t.calls))
            .collect();
        assert!(attack_bigrams.is_disjoint(&normal_bigrams));

        // Score = fraction of a trace's bigrams that are attack bigrams;
        // exhaustive pairwise comparison gives the AUC.
        let scored: Vec<(f64, bool)> = traces
            .iter()
            .map(|t| {
                let bg = bigrams(&t.calls);
                let hits = bg.iter().filter(|b| attack_bigrams.contains(b)).count();
                (hits as f64 / bg.len() as f64, t.label.is_attack())
            })
            .collect();
        let mut wins = 0.0;
        let mut total = 0.0;
        for (s_pos, pos) in scored.iter().filter(|(_, l)| *l) {
            for (s_neg, _) in scored.iter().filter(|(_, l)| !*l) {
                total += 1.0;
                if s_pos > s_neg {
                    wins += 1.0;
                } else if s_pos == s_neg {
                    wins += 0.5;
                }
                let _ = pos;
            }
        }
        assert_eq!(wins / total, 1.0);
    }

    #[test]
    fn probabilities_normalize() {
        // Weights 3 and 1 normalize to 0.75 / 0.25.
        let spec = SynthSpec::parse(
            "automaton normal\nstart A\nA -> A : 1 3\nA -> A : 2 1\n",
        )
        .unwrap();
        let mut rng = Rng::new(11);
        let calls = {
            let mut all = Vec::new();
            for _ in 0..200 {
                all.extend(spec.automata[0].sample(&mut rng));
            }
            all
        };
        let ones = calls.iter().filter(|&&c| c == 1).count() as f64;
        let frac = ones / calls.len() as f64;
        assert!((frac - 0.75).abs() < 0.05, "normalization off: {frac}");
    }
}
