//! Relation-specific decision thresholds for triple classification.
//!
//! A triple `(h, r, t)` is classified valid iff `φ(h, r, t) ≥ μ_r`. Each `μ_r`
//! maximizes validation accuracy over the candidates `{-∞, midpoints between
//! adjacent distinct scores, +∞}`, ties going to the smallest candidate.
//! Relations without validation positives fall back to a global threshold
//! tuned the same way over all validation triples.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng as _;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, RelationId, Triple, Vocab};
use crate::models::EmbeddingModel;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSet {
    pub per_relation: BTreeMap<RelationId, f64>,
    pub global: f64,
}

impl ThresholdSet {
    pub fn lookup(&self, relation: RelationId) -> f64 {
        self.per_relation
            .get(&relation)
            .copied()
            .unwrap_or(self.global)
    }

    pub fn accepts(&self, relation: RelationId, score: f64) -> bool {
        score >= self.lookup(relation)
    }

    pub fn to_json(&self, relations: &Vocab) -> Value {
        let per: Map<String, Value> = self
            .per_relation
            .iter()
            .map(|(&r, &mu)| (relations.label(r).to_owned(), encode(mu)))
            .collect();
        json!({ "global": encode(self.global), "per_relation": per })
    }

    pub fn from_json(value: &Value, relations: &Vocab) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("thresholds file: {m}"));
        let global = decode(value.get("global").ok_or_else(|| bad("missing \"global\""))?)
            .ok_or_else(|| bad("bad global threshold"))?;
        let mut per_relation = BTreeMap::new();
        if let Some(per) = value.get("per_relation") {
            let per = per.as_object().ok_or_else(|| bad("per_relation must be an object"))?;
            for (label, v) in per {
                let r = relations
                    .id(label)
                    .ok_or_else(|| Error::UnknownRelation(label.clone()))?;
                let mu = decode(v).ok_or_else(|| bad(&format!("bad threshold for {label}")))?;
                per_relation.insert(r, mu);
            }
        }
        Ok(ThresholdSet {
            per_relation,
            global,
        })
    }

    pub fn write(&self, path: &Path, relations: &Vocab) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json(relations))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, relations: &Vocab) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&serde_json::from_str(&text)?, relations)
    }
}

// JSON has no infinities; the sentinels travel as strings.
fn encode(x: f64) -> Value {
    if x == f64::INFINITY {
        json!("inf")
    } else if x == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(x)
    }
}

fn decode(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) if s == "inf" => Some(f64::INFINITY),
        Value::String(s) if s == "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

/// Accuracy-maximizing threshold for `(score, is_positive)` pairs and the
/// number of correctly classified items at that threshold.
pub fn best_threshold(items: &[(f64, bool)]) -> (f64, usize) {
    let mut sorted: Vec<(f64, bool)> = items.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let positives = sorted.iter().filter(|x| x.1).count();

    // μ = -∞: everything classified positive.
    let mut correct = positives;
    let mut best = (f64::NEG_INFINITY, correct);
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == v {
            if sorted[i].1 {
                correct -= 1;
            } else {
                correct += 1;
            }
            i += 1;
        }
        let mu = match sorted.get(i) {
            Some(&(next, _)) => v / 2.0 + next / 2.0,
            None => f64::INFINITY,
        };
        if correct > best.1 {
            best = (mu, correct);
        }
    }
    best
}

/// Tunes thresholds from pre-computed `(relation, score, label)` triples.
pub fn tune_from_scores(items: &[(RelationId, f64, bool)]) -> Result<ThresholdSet> {
    if items.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let mut by_rel: BTreeMap<RelationId, Vec<(f64, bool)>> = BTreeMap::new();
    for &(r, s, y) in items {
        by_rel.entry(r).or_default().push((s, y));
    }
    let per_relation = by_rel
        .into_iter()
        .filter(|(_, v)| v.iter().any(|x| x.1))
        .map(|(r, v)| (r, best_threshold(&v).0))
        .collect();
    let pooled: Vec<(f64, bool)> = items.iter().map(|&(_, s, y)| (s, y)).collect();
    Ok(ThresholdSet {
        per_relation,
        global: best_threshold(&pooled).0,
    })
}

/// Scores validation triples in eval mode (tail direction) and tunes.
pub fn tune(
    model: &EmbeddingModel,
    positives: &[Triple],
    negatives: &[Triple],
) -> Result<ThresholdSet> {
    let mut items = Vec::with_capacity(positives.len() + negatives.len());
    for (set, label) in [(positives, true), (negatives, false)] {
        for &t in set {
            items.push((t.relation, model.score(t, crate::models::Mode::Eval)?, label));
        }
    }
    tune_from_scores(&items)
}

/// One uniform tail corruption per positive, redrawn until it is not a fact.
pub fn synth_negatives(positives: &[Triple], kg: &KnowledgeGraph, rng: &mut Rng) -> Result<Vec<Triple>> {
    let n = kg.num_entities() as u32;
    positives
        .iter()
        .map(|&p| {
            for _ in 0..100_000 {
                let c = Triple {
                    tail: rng.gen_range(0..n),
                    ..p
                };
                if !kg.is_fact(c) {
                    return Ok(c);
                }
            }
            Err(Error::NoCandidate { triple: p })
        })
        .collect()
}

pub fn classify(model: &EmbeddingModel, thresholds: &ThresholdSet, triples: &[Triple]) -> Result<Vec<u8>> {
    triples
        .iter()
        .map(|&t| {
            let s = model.score(t, crate::models::Mode::Eval)?;
            Ok(thresholds.accepts(t.relation, s) as u8)
        })
        .collect()
}
