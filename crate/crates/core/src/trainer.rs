//! Negative-sampling cross-entropy training.
//!
//! Each positive `(h, r, t)` yields two softmax lists: the true tail against
//! `k` tail corruptions and the true head against `k` head corruptions. The
//! loss is the mean over lists of `-log softmax(score of positive)` plus the
//! model's regularization penalty.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Triple};
use crate::models::{
    CandidateList, Direction, EmbeddingModel, Frequencies, ModelConfig, SparseGrad,
};
use crate::optim::{apply_update, OptimizerKind, OptimizerState};
use crate::rng::{Rng, SeedPath};

/// Positives per parallel work unit. Fixed so results do not depend on the
/// worker count.
const CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub negatives_per_direction: usize,
    pub seed: u64,
    /// Reject corruptions that are known facts.
    pub filter_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 256,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            negatives_per_direction: 50,
            seed: 0,
            filter_negatives: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.negatives_per_direction == 0 {
            return Err(Error::Config("negatives_per_direction must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Replaces the `direction` slot of `triple` with `count` uniform draws from
/// `pool`, never drawing the original entity. Draws may repeat.
pub fn corrupt(
    triple: Triple,
    direction: Direction,
    count: usize,
    pool: &[EntityId],
    rng: &mut Rng,
) -> Result<Vec<Triple>> {
    let original = match direction {
        Direction::Head => triple.head,
        Direction::Tail => triple.tail,
    };
    if pool.iter().all(|&e| e == original) {
        return Err(Error::NoCandidate { triple });
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let e = pool[rng.gen_range(0..pool.len())];
        if e == original {
            continue;
        }
        out.push(match direction {
            Direction::Head => Triple { head: e, ..triple },
            Direction::Tail => Triple { tail: e, ..triple },
        });
    }
    Ok(out)
}

/// Where corruptions come from during training and adaptation.
#[derive(Clone, Copy)]
pub struct NegativeSampler<'a> {
    pub pool: &'a [EntityId],
    pub per_direction: usize,
    /// When set, corruptions that are facts of this graph are redrawn.
    pub filter: Option<&'a KnowledgeGraph>,
}

impl NegativeSampler<'_> {
    fn draw(&self, triple: Triple, dir: Direction, rng: &mut Rng) -> Result<Vec<EntityId>> {
        let pick = |t: Triple| match dir {
            Direction::Head => t.head,
            Direction::Tail => t.tail,
        };
        let Some(kg) = self.filter else {
            return Ok(corrupt(triple, dir, self.per_direction, self.pool, rng)?
                .into_iter()
                .map(pick)
                .collect());
        };
        let mut out = Vec::with_capacity(self.per_direction);
        let mut rejected = 0usize;
        while out.len() < self.per_direction {
            for c in corrupt(triple, dir, self.per_direction - out.len(), self.pool, rng)? {
                if kg.is_fact(c) {
                    rejected += 1;
                    if rejected > 1000 * self.per_direction {
                        return Err(Error::NoCandidate { triple });
                    }
                } else {
                    out.push(pick(c));
                }
            }
        }
        Ok(out)
    }
}

/// Builds the two candidate lists of one positive. Reciprocal models score
/// the head list as tail prediction of `(t, r⁻¹, ·)`.
pub fn candidate_lists(
    model: &EmbeddingModel,
    positive: Triple,
    sampler: &NegativeSampler<'_>,
    rng: &mut Rng,
) -> Result<[CandidateList; 2]> {
    let mut tails = vec![positive.tail];
    tails.extend(sampler.draw(positive, Direction::Tail, rng)?);
    let mut heads = vec![positive.head];
    heads.extend(sampler.draw(positive, Direction::Head, rng)?);
    let tail_list = CandidateList {
        anchor: positive.head,
        relation_row: positive.relation,
        direction: Direction::Tail,
        candidates: tails,
    };
    let head_list = match model.reciprocal_row(positive.relation) {
        Some(inv) => CandidateList {
            anchor: positive.tail,
            relation_row: inv,
            direction: Direction::Tail,
            candidates: heads,
        },
        None => CandidateList {
            anchor: positive.tail,
            relation_row: positive.relation,
            direction: Direction::Head,
            candidates: heads,
        },
    };
    Ok([tail_list, head_list])
}

/// Loss and gradient of one batch with a single random stream for both
/// corruption and dropout.
pub fn loss_and_grad(
    model: &EmbeddingModel,
    positives: &[Triple],
    sampler: &NegativeSampler<'_>,
    frequencies: Option<&Frequencies>,
    rng: &mut Rng,
) -> Result<(f64, SparseGrad)> {
    let mut grad = SparseGrad::default();
    if positives.is_empty() {
        return Ok((0.0, grad));
    }
    let weight = 1.0 / (2 * positives.len()) as f64;
    let mut lists = Vec::with_capacity(2 * positives.len());
    for &p in positives {
        lists.extend(candidate_lists(model, p, sampler, rng)?);
    }
    let ce = model.grad_batch(&lists, weight, Some(rng), &mut grad);
    let penalty = model.regularization(positives, frequencies, &mut grad);
    finite_or_err(ce + penalty, positives).map(|l| (l, grad))
}

/// Same as [`loss_and_grad`] but fans the batch out in fixed-size chunks,
/// each with its own substream of `seed`. The merge order is fixed, so the
/// result is independent of the thread count.
pub fn parallel_loss_and_grad(
    model: &EmbeddingModel,
    positives: &[Triple],
    sampler: &NegativeSampler<'_>,
    frequencies: Option<&Frequencies>,
    seed: SeedPath,
) -> Result<(f64, SparseGrad)> {
    if positives.is_empty() {
        return Ok((0.0, SparseGrad::default()));
    }
    let weight = 1.0 / (2 * positives.len()) as f64;
    let parts: Vec<Result<(f64, SparseGrad)>> = positives
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(i, chunk)| {
            let mut rng = seed.clone().push_u64(i as u64).rng();
            let mut lists = Vec::with_capacity(2 * chunk.len());
            for &p in chunk {
                lists.extend(candidate_lists(model, p, sampler, &mut rng)?);
            }
            let mut grad = SparseGrad::default();
            let loss = model.grad_batch(&lists, weight, Some(&mut rng), &mut grad);
            Ok((loss, grad))
        })
        .collect();
    let mut grad = SparseGrad::default();
    let mut loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        grad.merge(g);
    }
    loss += model.regularization(positives, frequencies, &mut grad);
    finite_or_err(loss, positives).map(|l| (l, grad))
}

fn finite_or_err(loss: f64, positives: &[Triple]) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFiniteLoss {
            triples: positives.to_vec(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_seconds: f64,
}

pub struct TrainOutput {
    pub model: EmbeddingModel,
    pub trace: Vec<EpochStats>,
}

pub fn all_entities(num_entities: usize) -> Vec<EntityId> {
    (0..num_entities as EntityId).collect()
}

pub fn train(
    kg: &KnowledgeGraph,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    let model = EmbeddingModel::init(
        model_config.clone(),
        kg.num_entities(),
        kg.num_relations(),
        config.seed,
    )?;
    train_from(kg, model, config, |_| {})
}

/// Continues training `model`; `on_epoch` sees each epoch's stats as they
/// are produced.
pub fn train_from(
    kg: &KnowledgeGraph,
    mut model: EmbeddingModel,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutput> {
    config.validate()?;
    if kg.train().is_empty() {
        return Err(Error::NoFacts("training split is empty".into()));
    }
    let pool = all_entities(kg.num_entities());
    let sampler = NegativeSampler {
        pool: &pool,
        per_direction: config.negatives_per_direction,
        filter: config.filter_negatives.then_some(kg),
    };
    let freq = Frequencies::from_triples(kg.train(), kg.num_entities(), kg.num_relations());
    let mut state = OptimizerState::new(config.optimizer);
    let mut order: Vec<Triple> = kg.train().to_vec();
    let mut trace = Vec::with_capacity(config.epochs);
    let start = Instant::now();

    for epoch in 1..=config.epochs {
        order.copy_from_slice(kg.train());
        let mut shuffle_rng = SeedPath::new(config.seed)
            .push("shuffle")
            .push_u64(epoch as u64)
            .rng();
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let seed = SeedPath::new(config.seed)
                .push("train")
                .push_u64(epoch as u64)
                .push_u64(step as u64);
            let (loss, grad) =
                match parallel_loss_and_grad(&model, batch, &sampler, Some(&freq), seed) {
                    Ok(v) => v,
                    Err(Error::NonFiniteLoss { .. }) => {
                        return Err(Error::Diverged {
                            epoch,
                            trace: trace.iter().map(|s: &EpochStats| s.mean_loss).collect(),
                        })
                    }
                    Err(e) => return Err(e),
                };
            epoch_loss += loss * batch.len() as f64;
            apply_update(&mut model, &mut state, &grad, config.learning_rate);
        }
        let stats = EpochStats {
            epoch,
            mean_loss: epoch_loss / order.len() as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        trace.push(stats);
    }
    Ok(TrainOutput { model, trace })
}

/// `epoch,mean_loss,wall_seconds` CSV.
pub fn trace_csv(trace: &[EpochStats]) -> String {
    let mut out = String::from("epoch,mean_loss,wall_seconds\n");
    for s in trace {
        out.push_str(&format!("{},{},{:.3}\n", s.epoch, s.mean_loss, s.wall_seconds));
    }
    out
}
