use serde::{Deserialize, Serialize};

use super::model::PrecondModel;
use super::train::LabeledGraph;
use super::PrecondError;

/// Confusion counts with the positive label as the reference class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// A scored example: predicted probability of the positive label and truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    pub label: bool,
}

impl ClassCounts {
    /// Counts with `probability > threshold` predicted positive.
    pub fn from_predictions(preds: &[Prediction], threshold: f64) -> Self {
        let mut c = Self::default();
        for p in preds {
            match (p.probability > threshold, p.label) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// F1 of the positive class.
    pub fn f1(&self) -> f64 {
        f1_score(self.tp, self.fp, self.fn_)
    }

    /// Support-weighted mean of the positive- and negative-class F1.
    pub fn weighted_f1(&self) -> f64 {
        weighted_f1(&[
            (self.f1(), self.tp + self.fn_),
            (f1_score(self.tn, self.fn_, self.fp), self.tn + self.fp),
        ])
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean of precision and recall, `2tp / (2tp + fp + fn)`. A class
/// that is neither present nor predicted scores 1.
pub fn f1_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Mean of per-class F1 weighted by class support.
pub fn weighted_f1(per_class: &[(f64, usize)]) -> f64 {
    let total: usize = per_class.iter().map(|(_, s)| s).sum();
    if total == 0 {
        return 0.0;
    }
    per_class.iter().map(|&(f, s)| f * s as f64).sum::<f64>() / total as f64
}

/// Scores every graph with `model` and counts predictions at `threshold`.
pub fn evaluate(model: &PrecondModel, data: &[LabeledGraph], threshold: f64) -> Result<ClassCounts, PrecondError> {
    if data.is_empty() {
        return Err(PrecondError::Empty);
    }
    let preds = data
        .iter()
        .map(|d| {
            let z = model.logit(&d.graph)?;
            Ok(Prediction { probability: 1.0 / (1.0 + (-z).exp()), label: d.label })
        })
        .collect::<Result<Vec<_>, PrecondError>>()?;
    Ok(ClassCounts::from_predictions(&preds, threshold))
}

/// One evaluation row. Serialises to exactly the report fields; the
/// confusion counts stay in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub edge_source: String,
    pub train_split: String,
    pub test_split: String,
    pub f1: f64,
    pub weighted_f1: f64,
    pub seed: u64,
    pub config_digest: String,
    #[serde(skip)]
    pub counts: ClassCounts,
}

impl EvalReport {
    pub fn new(
        model: &str,
        edge_source: &str,
        train_split: &str,
        test_split: &str,
        counts: ClassCounts,
        seed: u64,
        config_digest: u32,
    ) -> Self {
        Self {
            model: model.into(),
            edge_source: edge_source.into(),
            train_split: train_split.into(),
            test_split: test_split.into(),
            f1: counts.f1(),
            weighted_f1: counts.weighted_f1(),
            seed,
            config_digest: format!("{config_digest:08x}"),
            counts,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }
}
