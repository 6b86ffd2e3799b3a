//! The `scs2s` command-line pipeline: prepare, synth, train, predict,
//! eval, detect, gradcheck, report, version. Every artifact is CSV/TSV
//! with `#`-prefixed header lines echoing the resolved configuration, so
//! identical invocations produce byte-identical files.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::corpus::{
    self, demo_spec, generate_synthetic, ingest_adfa, make_pairs, read_pairs_tsv,
    write_pairs_tsv, PairConfig, SequencePair, SynthSpec, Trace, Vocabulary,
};
use crate::detect::{run_conditions, roc_csv, summary_csv, ClassifierKind};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::{gradient_check, CellKind, DecodeMode, ModelConfig, Seq2Seq};
use crate::numeric::Rng;
use crate::train::{
    history_csv, load_checkpoint, save_checkpoint, train, CheckpointHeader, StopReason,
    TrainConfig,
};

const USAGE: &str = "\
usage: scs2s <subcommand> [--key value ...]

subcommands:
  prepare    ADFA-layout directory -> pairs TSVs + vocabulary + counts CSV
  synth      automaton spec -> ADFA-layout directory of sampled traces
  train      pairs TSV + vocabulary -> checkpoint + history CSV
  predict    checkpoint + source calls (flag or stdin) -> predicted calls
  eval       checkpoint + pairs TSV -> BLEU / TF-IDF / semantic CSVs
  detect     checkpoint + labeled pairs -> ROC + AUC CSVs
  gradcheck  finite-difference audit of the model gradients
  report     collect per-run eval CSVs into one summary table
  version    print the tool version

common flags: --config <file>, --out-dir <dir>, --seed <n>; every
configuration key doubles as a flag and as an SCS2S_* environment
variable (environment wins over flags, flags win over the file).
";

/// Entry point behind `main`; returns the process exit code.
/// 0 success, 1 usage, 2 data/format error, 3 numerical failure.
pub fn run(args: &[String]) -> i32 {
    let Some(subcommand) = args.first().map(String::as_str) else {
        eprintln!("{USAGE}");
        return 1;
    };
    if subcommand == "version" {
        println!("scs2s {}", crate::VERSION);
        return 0;
    }
    if !matches!(
        subcommand,
        "prepare" | "synth" | "train" | "predict" | "eval" | "detect" | "gradcheck" | "report"
    ) {
        eprintln!("unknown subcommand {subcommand:?}\n{USAGE}");
        return 1;
    }

    let cfg = match RunConfig::resolve(&args[1..]) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("{err}\n{USAGE}");
            return 1;
        }
    };

    let outcome = match subcommand {
        "prepare" => cmd_prepare(&cfg),
        "synth" => cmd_synth(&cfg),
        "train" => cmd_train(&cfg),
        "predict" => cmd_predict(&cfg),
        "eval" => cmd_eval(&cfg),
        "detect" => cmd_detect(&cfg),
        "gradcheck" => cmd_gradcheck(&cfg),
        "report" => cmd_report(&cfg),
        _ => unreachable!(),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) => 1,
                Error::Numeric(_) => 3,
                _ => 2,
            }
        }
    }
}

/// Prefixes the body with `# scs2s <version> <subcommand>` and the full
/// resolved configuration, then writes it.
fn write_artifact(path: &Path, cfg: &RunConfig, subcommand: &str, body: &str) -> Result<()> {
    let mut text = format!("# scs2s {} {}\n", crate::VERSION, subcommand);
    for line in cfg.header_lines() {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str(body);
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.get("out-dir"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn pair_config(cfg: &RunConfig) -> Result<PairConfig> {
    Ok(PairConfig {
        window_lengths: cfg.get_usize_list("window-lengths")?,
        split_ratios: cfg.get_f64_list("split-ratios")?,
        stride: cfg.get_usize("stride")?,
        train_fraction: cfg.get_f64("train-fraction")?,
    })
}

fn model_config(cfg: &RunConfig, vocab_size: usize) -> Result<ModelConfig> {
    Ok(ModelConfig {
        cell: CellKind::parse(cfg.get("cell"))
            .ok_or_else(|| Error::Config(format!("unknown cell {:?}", cfg.get("cell"))))?,
        layers: cfg.get_usize("layers")?,
        hidden: cfg.get_usize("hidden")?,
        vocab_size,
        attention: cfg.get_bool("attention")?,
        dropout_keep: cfg.get_f64("dropout-keep")?,
    })
}

fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    Ok(TrainConfig {
        lr0: cfg.get_f64("lr0")?,
        clip_norm: cfg.get_f64("clip-norm")?,
        batch_size: cfg.get_usize("batch")?,
        lr_decay: cfg.get_f64("lr-decay")?,
        decay_patience: cfg.get_usize("decay-patience")?,
        stop_patience: cfg.get_usize("stop-patience")?,
        max_epochs: cfg.get_usize("max-epochs")?,
        seed: cfg.get_u64("seed")?,
        buckets: cfg.get_buckets("buckets")?,
    })
}

fn decode_mode(cfg: &RunConfig) -> Result<DecodeMode> {
    let beam = cfg.get_usize("beam")?;
    Ok(if beam == 0 { DecodeMode::Greedy } else { DecodeMode::Beam(beam) })
}

fn cmd_prepare(cfg: &RunConfig) -> Result<i32> {
    let root = cfg.require_path("adfa-root")?;
    let dir = out_dir(cfg)?;
    let dataset = ingest_adfa(&root)?;
    let traces: Vec<Trace> = dataset.all_traces().cloned().collect();
    if traces.is_empty() {
        return Err(Error::Input(format!("no traces found under {}", root.display())));
    }
    let vocab = Vocabulary::build(&traces);
    let pair_cfg = pair_config(cfg)?;
    let mut rng = Rng::new(cfg.get_u64("seed")?);
    let (train_pairs, test_pairs, pair_report) = make_pairs(&traces, &vocab, &pair_cfg, &mut rng)?;

    write_pairs_with_header(&dir.join("train.tsv"), cfg, &train_pairs, &vocab)?;
    write_pairs_with_header(&dir.join("test.tsv"), cfg, &test_pairs, &vocab)?;
    vocab.write_file(
        &dir.join("vocab.txt"),
        &[format!("scs2s {} vocabulary, m={}", crate::VERSION, vocab.distinct_calls())],
    )?;

    let mut counts = String::from("section,key,count\n");
    let rep = &dataset.report;
    counts.push_str(&format!("traces,normal_train,{}\n", rep.normal_train));
    counts.push_str(&format!("traces,normal_validation,{}\n", rep.normal_validation));
    for (kind, n) in &rep.attack_kinds {
        counts.push_str(&format!("traces,attack:{kind},{n}\n"));
    }
    counts.push_str(&format!("traces,empty_skipped,{}\n", rep.empty_skipped));
    counts.push_str(&format!("traces,unreadable_skipped,{}\n", rep.unreadable_skipped));
    counts.push_str(&format!("traces,too_short,{}\n", pair_report.short_traces));
    counts.push_str(&format!("vocab,distinct_calls,{}\n", vocab.distinct_calls()));
    for (len, n) in &pair_report.train_per_length {
        counts.push_str(&format!("pairs_train,{len},{n}\n"));
    }
    for (len, n) in &pair_report.test_per_length {
        counts.push_str(&format!("pairs_test,{len},{n}\n"));
    }
    counts.push_str(&format!("pairs_train,total,{}\n", pair_report.train_total()));
    counts.push_str(&format!("pairs_test,total,{}\n", pair_report.test_total()));
    write_artifact(&dir.join("counts.csv"), cfg, "prepare", &counts)?;

    println!(
        "prepare: {} normal-train, {} normal-validation, {} attack traces ({} kinds); \
         m={} distinct calls; {} train / {} test pairs -> {}",
        rep.normal_train,
        rep.normal_validation,
        rep.attack_total(),
        rep.attack_kinds.len(),
        vocab.distinct_calls(),
        pair_report.train_total(),
        pair_report.test_total(),
        dir.display()
    );
    Ok(0)
}

fn write_pairs_with_header(
    path: &Path,
    cfg: &RunConfig,
    pairs: &[SequencePair],
    vocab: &Vocabulary,
) -> Result<()> {
    // Reuse the TSV writer, then prepend the artifact header.
    let tmp = path.with_extension("tsv.body");
    write_pairs_tsv(&tmp, pairs, vocab)?;
    let body = fs::read_to_string(&tmp).map_err(|e| Error::io(&tmp, e))?;
    fs::remove_file(&tmp).ok();
    write_artifact(path, cfg, "prepare", &body)
}

fn cmd_synth(cfg: &RunConfig) -> Result<i32> {
    let spec = if cfg.get_bool("builtin")? {
        demo_spec()
    } else {
        let path = cfg.require_path("spec")?;
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        SynthSpec::parse(&text)?
    };
    let dir = out_dir(cfg)?;
    let n = cfg.get_usize("traces")?;
    let mut rng = Rng::new(cfg.get_u64("seed")?);
    let traces = generate_synthetic(&spec, n, &mut rng);

    let train_dir = dir.join("Training_Data_Master");
    let val_dir = dir.join("Validation_Data_Master");
    fs::create_dir_all(&train_dir).map_err(|e| Error::io(&train_dir, e))?;
    fs::create_dir_all(&val_dir).map_err(|e| Error::io(&val_dir, e))?;

    let mut normal_idx = 0usize;
    let mut attack_idx = 0usize;
    for trace in &traces {
        let line = trace
            .calls
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let path = match &trace.label {
            corpus::TraceLabel::Normal => {
                // Alternate normals between training and validation.
                let side = if normal_idx % 2 == 0 { &train_dir } else { &val_dir };
                normal_idx += 1;
                side.join(format!("synth_{:05}.txt", normal_idx))
            }
            corpus::TraceLabel::Attack(kind) => {
                let kind_dir = dir.join("Attack_Data_Master").join(format!("{kind}_1"));
                fs::create_dir_all(&kind_dir).map_err(|e| Error::io(&kind_dir, e))?;
                attack_idx += 1;
                kind_dir.join(format!("synth_{:05}.txt", attack_idx))
            }
        };
        fs::write(&path, format!("{line}\n")).map_err(|e| Error::io(&path, e))?;
    }
    println!(
        "synth: wrote {} traces ({} normal, {} attack) under {}",
        traces.len(),
        normal_idx,
        attack_idx,
        dir.display()
    );
    Ok(0)
}

fn cmd_train(cfg: &RunConfig) -> Result<i32> {
    let pairs_path = cfg.require_path("pairs")?;
    let vocab_path = cfg.require_path("vocab")?;
    let dir = out_dir(cfg)?;
    let vocab = Vocabulary::read_file(&vocab_path)?;
    let all_pairs = read_pairs_tsv(&pairs_path, &vocab)?;
    if all_pairs.is_empty() {
        return Err(Error::Input(format!("{} holds no pairs", pairs_path.display())));
    }

    // Held-out pairs: an explicit file, or a carved 10% tail.
    let (train_pairs, heldout) = if cfg.get("heldout").is_empty() {
        let mut shuffled = all_pairs;
        Rng::new(cfg.get_u64("seed")?.wrapping_add(0x4e1d)).shuffle(&mut shuffled);
        let carve = (shuffled.len() / 10).max(1).min(shuffled.len() - 1);
        let heldout = shuffled.split_off(shuffled.len() - carve);
        (shuffled, heldout)
    } else {
        let heldout = read_pairs_tsv(&cfg.require_path("heldout")?, &vocab)?;
        (all_pairs, heldout)
    };

    let model_cfg = model_config(cfg, vocab.size())?;
    let train_cfg = train_config(cfg)?;
    let mut model = Seq2Seq::new(model_cfg, &mut Rng::new(train_cfg.seed))?;
    let outcome = train(&mut model, &train_cfg, &train_pairs, &heldout)?;

    let model_path = if cfg.get("model").is_empty() {
        dir.join("model.ckpt")
    } else {
        PathBuf::from(cfg.get("model"))
    };
    let mut header = CheckpointHeader::new();
    header.set("vocab_hash", vocab.hash());
    header.set("vocab", vocab.to_header_value());
    header.set("seed", train_cfg.seed);
    header.set("epoch", outcome.best_epoch);
    header.set("loss", outcome.best_heldout);
    save_checkpoint(&model_path, &model, &header)?;
    write_artifact(&dir.join("history.csv"), cfg, "train", &history_csv(&outcome.history))?;

    println!(
        "train: {} epochs, best held-out loss {} at epoch {} ({:?}) -> {}",
        outcome.history.len(),
        outcome.best_heldout,
        outcome.best_epoch,
        outcome.stop,
        model_path.display()
    );
    Ok(if outcome.stop == StopReason::Diverged { 3 } else { 0 })
}

fn load_model(cfg: &RunConfig) -> Result<(Seq2Seq, Vocabulary)> {
    let model_path = cfg.require_path("model")?;
    // When the caller names a vocabulary file, its hash must match.
    let expected = if cfg.get("vocab").is_empty() {
        None
    } else {
        Some(Vocabulary::read_file(&cfg.require_path("vocab")?)?.hash())
    };
    let (model, header) = load_checkpoint(&model_path, expected)?;
    let vocab = Vocabulary::from_header_value(
        header
            .get("vocab")
            .ok_or_else(|| Error::Checkpoint("checkpoint lacks an embedded vocabulary".into()))?,
    )?;
    Ok((model, vocab))
}

fn cmd_predict(cfg: &RunConfig) -> Result<i32> {
    let (model, vocab) = load_model(cfg)?;
    let input = if cfg.get("input").is_empty() {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Error::io("<stdin>", e))?;
        buf
    } else {
        cfg.get("input").to_string()
    };
    let raws: Vec<u32> = input
        .split_whitespace()
        .map(|t| {
            t.parse::<u32>()
                .map_err(|_| Error::Input(format!("non-integer call {t:?} in input")))
        })
        .collect::<Result<_>>()?;
    if raws.is_empty() {
        return Err(Error::Input("predict needs at least one source call".into()));
    }
    let source = vocab.encode_seq(&raws);
    let predicted = model.predict(&source, cfg.get_usize("max-len")?, decode_mode(cfg)?)?;
    let calls: Vec<String> =
        vocab.decode_seq(&predicted).iter().map(|c| c.to_string()).collect();
    println!("{}", calls.join(" "));
    Ok(0)
}

fn cmd_eval(cfg: &RunConfig) -> Result<i32> {
    let (model, vocab) = load_model(cfg)?;
    let pairs = read_pairs_tsv(&cfg.require_path("pairs")?, &vocab)?;
    let dir = out_dir(cfg)?;
    let report = evaluate(&model, &pairs, cfg.get_usize("max-len")?, decode_mode(cfg)?)?;
    write_artifact(&dir.join("bleu.csv"), cfg, "eval", &report.bleu_csv())?;
    write_artifact(&dir.join("tfidf.csv"), cfg, "eval", &report.tfidf_csv())?;
    write_artifact(&dir.join("semantic.csv"), cfg, "eval", &report.semantic_csv())?;
    println!(
        "eval: {} pairs, BLEU {:.2}, TF-IDF cosine {:.4}, semantic cosine {:.4} -> {}",
        report.pair_count,
        report.corpus_bleu,
        report.mean_tfidf_cosine,
        report.mean_semantic_cosine,
        dir.display()
    );
    Ok(0)
}

fn cmd_detect(cfg: &RunConfig) -> Result<i32> {
    let (model, vocab) = load_model(cfg)?;
    let train_pairs = read_pairs_tsv(&cfg.require_path("train-pairs")?, &vocab)?;
    let test_pairs = read_pairs_tsv(&cfg.require_path("pairs")?, &vocab)?;
    let kind = ClassifierKind::parse(cfg.get("classifier"))
        .ok_or_else(|| Error::Config(format!("unknown classifier {:?}", cfg.get("classifier"))))?;
    let dir = out_dir(cfg)?;
    let results = run_conditions(
        &model,
        kind,
        &train_pairs,
        &test_pairs,
        cfg.get_usize("n-max")?,
        cfg.get_usize("max-len")?,
        cfg.get_u64("seed")?,
    )?;
    write_artifact(&dir.join("roc.csv"), cfg, "detect", &roc_csv(&results))?;
    write_artifact(&dir.join("auc.csv"), cfg, "detect", &summary_csv(&results))?;
    for res in &results {
        println!("detect[{}]: {} AUC {:.4}", kind.as_str(), res.condition.as_str(), res.curve.auc);
    }
    Ok(0)
}

fn cmd_gradcheck(cfg: &RunConfig) -> Result<i32> {
    // Here `vocab` is the vocabulary SIZE of the probe model.
    let vocab_size = cfg
        .get("vocab")
        .parse::<usize>()
        .map_err(|_| Error::Config("gradcheck needs --vocab <size>".into()))?;
    let model_cfg = model_config(cfg, vocab_size)?;
    let err = gradient_check(&model_cfg, 6, 3, 2, cfg.get_u64("seed")?)?;
    println!("gradcheck: max relative error {err:e}");
    Ok(if err < 1e-4 { 0 } else { 3 })
}

fn cmd_report(cfg: &RunConfig) -> Result<i32> {
    let runs: Vec<PathBuf> = cfg
        .get("runs")
        .split(',')
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect();
    if runs.is_empty() {
        return Err(Error::Config("--runs needs a comma-separated list of eval dirs".into()));
    }
    let dir = out_dir(cfg)?;
    let mut body = String::from("model,cell,layers,lr0,bleu\n");
    let mut table = Vec::new();
    for run in &runs {
        let path = run.join("bleu.csv");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut cell = "?".to_string();
        let mut layers = "?".to_string();
        let mut lr0 = "?".to_string();
        let mut bleu = None;
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                if let Some((k, v)) = rest.split_once('=') {
                    match k {
                        "cell" => cell = v.to_string(),
                        "layers" => layers = v.to_string(),
                        "lr0" => lr0 = v.to_string(),
                        _ => {}
                    }
                }
            } else if let Some(rest) = line.strip_prefix("all,") {
                let score = rest.split(',').nth(1).unwrap_or("");
                bleu = Some(score.to_string());
            }
        }
        let bleu = bleu
            .ok_or_else(|| Error::format(&path, 0, "no `all` row; is this an eval bleu.csv?"))?;
        let model = format!("{}-{}, lr={}", cell.to_uppercase(), layers, lr0);
        body.push_str(&format!("{model},{cell},{layers},{lr0},{bleu}\n"));
        table.push((model, bleu));
    }
    write_artifact(&dir.join("summary.csv"), cfg, "report", &body)?;
    println!("{:<24} {}", "Model", "BLEU score");
    for (model, bleu) in table {
        let short: String = bleu.chars().take(5).collect();
        println!("{model:<24} {short}");
    }
    Ok(0)
}
