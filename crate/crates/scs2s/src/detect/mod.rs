//! Downstream detection experiments: score sequences as normal/attack
//! under three conditions — gold target, model-predicted future, and the
//! invoked source extended with the prediction — and compare ROC/AUC.

mod classifier;
mod features;
mod roc;

pub use classifier::{train_classifier, Classifier, ClassifierKind};
pub use features::NgramTable;
pub use roc::{roc_auc, RocCurve};

use crate::corpus::{SequencePair, Token};
use crate::error::{Error, Result};
use crate::model::{DecodeMode, Seq2Seq};

/// Which sequence variant a detector sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// The gold future: the pair's target sequence.
    Target,
    /// The model's predicted future for the pair's source.
    Predicted,
    /// The invoked source concatenated with the prediction, no separator.
    Extended,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Target, Condition::Predicted, Condition::Extended];

    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Target => "target",
            Condition::Predicted => "predicted",
            Condition::Extended => "extended",
        }
    }
}

/// A sequence with its ground-truth label, ready for a detector.
#[derive(Debug, Clone)]
pub struct LabeledSequence {
    pub tokens: Vec<Token>,
    /// 0 = normal, 1 = attack.
    pub label: u8,
    pub condition: Condition,
}

/// Result of one condition's experiment.
#[derive(Debug, Clone)]
pub struct ConditionResult {
    pub condition: Condition,
    pub curve: RocCurve,
    pub n_normal: usize,
    pub n_attack: usize,
}

/// Runs the three-condition comparison: for every condition, build train
/// and test sequences, train a fresh classifier of `kind` on the training
/// split, score the test split, and sweep the ROC.
///
/// Predictions are decoded greedily once per pair and shared between the
/// predicted and extended conditions. A pair whose prediction comes back
/// empty is an error (an empty sequence cannot be featurized honestly).
pub fn run_conditions(
    model: &Seq2Seq,
    kind: ClassifierKind,
    train_pairs: &[SequencePair],
    test_pairs: &[SequencePair],
    n_max: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<ConditionResult>> {
    let train_pred = predict_all(model, train_pairs, max_len)?;
    let test_pred = predict_all(model, test_pairs, max_len)?;

    let mut results = Vec::with_capacity(Condition::ALL.len());
    for condition in Condition::ALL {
        let train_set = build_sequences(train_pairs, &train_pred, condition);
        let test_set = build_sequences(test_pairs, &test_pred, condition);

        let scorer = train_classifier(kind, &train_set, n_max, seed)?;
        let scores: Vec<(f64, u8)> =
            test_set.iter().map(|s| (scorer.risk(&s.tokens), s.label)).collect();
        let curve = roc_auc(&scores)?;
        results.push(ConditionResult {
            condition,
            curve,
            n_normal: test_set.iter().filter(|s| s.label == 0).count(),
            n_attack: test_set.iter().filter(|s| s.label == 1).count(),
        });
    }
    Ok(results)
}

fn predict_all(
    model: &Seq2Seq,
    pairs: &[SequencePair],
    max_len: usize,
) -> Result<Vec<Vec<Token>>> {
    let mut predictions = Vec::with_capacity(pairs.len());
    let mut empty: Vec<usize> = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let pred = model.predict(&pair.source, max_len, DecodeMode::Greedy)?;
        if pred.is_empty() {
            empty.push(i);
        }
        predictions.push(pred);
    }
    if !empty.is_empty() {
        return Err(Error::Input(format!(
            "model produced empty predictions for {} pairs (indices {:?}{})",
            empty.len(),
            &empty[..empty.len().min(10)],
            if empty.len() > 10 { ", ..." } else { "" }
        )));
    }
    Ok(predictions)
}

fn build_sequences(
    pairs: &[SequencePair],
    predictions: &[Vec<Token>],
    condition: Condition,
) -> Vec<LabeledSequence> {
    pairs
        .iter()
        .zip(predictions)
        .map(|(pair, pred)| {
            let tokens = match condition {
                Condition::Target => pair.target.clone(),
                Condition::Predicted => pred.clone(),
                Condition::Extended => {
                    let mut ext = pair.source.clone();
                    ext.extend(pred);
                    ext
                }
            };
            LabeledSequence { tokens, label: pair.label.is_attack() as u8, condition }
        })
        .collect()
}

/// CSV body: `condition,threshold,fpr,tpr` for every curve point.
pub fn roc_csv(results: &[ConditionResult]) -> String {
    let mut out = String::from("condition,threshold,fpr,tpr\n");
    for res in results {
        for (threshold, fpr, tpr) in &res.curve.points {
            out.push_str(&format!("{},{threshold},{fpr},{tpr}\n", res.condition.as_str()));
        }
    }
    out
}

/// CSV body: `condition,auc,n_normal,n_attack`.
pub fn summary_csv(results: &[ConditionResult]) -> String {
    let mut out = String::from("condition,auc,n_normal,n_attack\n");
    for res in results {
        out.push_str(&format!(
            "{},{},{},{}\n",
            res.condition.as_str(),
            res.curve.auc,
            res.n_normal,
            res.n_attack
        ));
    }
    out
}
