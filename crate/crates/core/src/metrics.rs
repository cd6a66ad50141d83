//! Evaluation metrics over labeled predictions.
//!
//! - overall F1 = 2tp / (2tp + fn + fp) over every case, w.r.t. the
//!   counterfactual label;
//! - changed accuracy over cases whose original and counterfactual labels
//!   differ;
//! - unchanged F1 over cases whose labels agree.
//!
//! When a case set contains no positives and none are predicted, F1 is 1.0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::benchgen::{CaseKind, CfkgrInstance, SourceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPrediction {
    pub kind: CaseKind,
    pub source_kind: SourceKind,
    /// Membership in the original fact set.
    pub original_label: u8,
    /// Membership in the counterfactual fact set.
    pub label: u8,
    pub prediction: u8,
}

impl LabeledPrediction {
    pub fn is_changed(&self) -> bool {
        self.original_label != self.label
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl Confusion {
    pub fn add(&mut self, label: u8, prediction: u8) {
        match (label, prediction) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fn_ += 1,
            (_, 1) => self.fp += 1,
            _ => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fn_ + self.fp;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }

    fn merge(&mut self, o: &Confusion) {
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tp += o.tp;
    }
}

fn confusion<'a>(preds: impl IntoIterator<Item = &'a LabeledPrediction>) -> Confusion {
    let mut c = Confusion::default();
    for p in preds {
        c.add(p.label, p.prediction);
    }
    c
}

pub fn overall_f1(preds: &[LabeledPrediction]) -> f64 {
    confusion(preds).f1()
}

/// `None` when no case changed its label.
pub fn changed_accuracy(preds: &[LabeledPrediction]) -> Option<f64> {
    confusion(preds.iter().filter(|p| p.is_changed())).accuracy()
}

pub fn unchanged_f1(preds: &[LabeledPrediction]) -> f64 {
    confusion(preds.iter().filter(|p| !p.is_changed())).f1()
}

/// Cell name for the per-type breakdown: the fact type (inference, near,
/// far), suffixed with the corrupted slot for corruptions.
pub fn cell(kind: CaseKind, source: SourceKind) -> &'static str {
    use CaseKind as K;
    use SourceKind as S;
    let src = match source {
        S::Inference => 0,
        S::Near1 | S::Near2 => 1,
        S::Far => 2,
    };
    let slot = match kind {
        K::Inference | K::Near | K::Far => 0,
        K::HeadCorruption => 1,
        K::RelationCorruption => 2,
        K::TailCorruption => 3,
    };
    const NAMES: [[&str; 4]; 3] = [
        ["inference", "inference_head", "inference_relation", "inference_tail"],
        ["near", "near_head", "near_relation", "near_tail"],
        ["far", "far_head", "far_relation", "far_tail"],
    ];
    NAMES[src][slot]
}

pub fn per_kind_confusion(preds: &[LabeledPrediction]) -> BTreeMap<String, Confusion> {
    let mut out: BTreeMap<String, Confusion> = BTreeMap::new();
    for p in preds {
        out.entry(cell(p.kind, p.source_kind).to_owned())
            .or_default()
            .add(p.label, p.prediction);
    }
    out
}

pub fn per_kind_accuracy(preds: &[LabeledPrediction]) -> BTreeMap<String, f64> {
    per_kind_confusion(preds)
        .into_iter()
        .filter_map(|(k, c)| c.accuracy().map(|a| (k, a)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_f1: f64,
    pub changed_accuracy: Option<f64>,
    pub unchanged_f1: f64,
    pub per_kind: BTreeMap<String, Confusion>,
    pub n_instances: usize,
    pub n_cases: usize,
}

impl EvalReport {
    pub fn from_predictions(preds: &[LabeledPrediction], n_instances: usize) -> Self {
        EvalReport {
            overall_f1: overall_f1(preds),
            changed_accuracy: changed_accuracy(preds),
            unchanged_f1: unchanged_f1(preds),
            per_kind: per_kind_confusion(preds),
            n_instances,
            n_cases: preds.len(),
        }
    }

    /// Overall F1 recomputed from the per-cell confusion counts.
    pub fn overall_f1_from_cells(&self) -> f64 {
        let mut c = Confusion::default();
        for cell in self.per_kind.values() {
            c.merge(cell);
        }
        c.f1()
    }

    pub fn per_kind_accuracy(&self) -> BTreeMap<String, f64> {
        self.per_kind
            .iter()
            .filter_map(|(k, c)| c.accuracy().map(|a| (k.clone(), a)))
            .collect()
    }
}

/// Pairs every case of every instance with its prediction.
/// `predictions[i][j]` belongs to `instances[i].cases[j]`.
pub fn label_predictions(instances: &[CfkgrInstance], predictions: &[Vec<u8>]) -> Vec<LabeledPrediction> {
    instances
        .iter()
        .zip(predictions)
        .flat_map(|(inst, preds)| {
            inst.cases.iter().zip(preds).map(|(c, &p)| LabeledPrediction {
                kind: c.kind,
                source_kind: c.source_kind,
                original_label: c.original_label,
                label: c.label(),
                prediction: p,
            })
        })
        .collect()
}
