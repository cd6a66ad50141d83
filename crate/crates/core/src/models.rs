//! Scoring functions and hand-derived gradients for TransE, ComplEx, RESCAL
//! and TuckER.
//!
//! Every model is evaluated through a *query vector*: for a fixed anchor
//! entity and relation the score of a candidate entity `c` is either `q · c`
//! (ComplEx, RESCAL, TuckER) or `-‖q - c‖₂` (TransE). Scoring a candidate list
//! therefore costs one query construction plus one cheap kernel per
//! candidate, and the backward pass mirrors that split.
//!
//! Parameter layouts (row-major, one row per entity or relation):
//!
//! | kind    | entity row      | relation row      | core            |
//! |---------|-----------------|-------------------|-----------------|
//! | TransE  | `d_e`           | `d_e`             | -               |
//! | ComplEx | `2·d_e` (re,im) | `2·d_e` (re,im)   | -               |
//! | RESCAL  | `d_e`           | `d_e²` matrix     | -               |
//! | TuckER  | `d_e`           | `d_r`             | `d_e·d_r·d_e`   |

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, Triple};
use crate::rng::{Rng, SeedPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    TransE,
    ComplEx,
    #[serde(rename = "RESCAL")]
    Rescal,
    #[serde(rename = "TuckER")]
    Tucker,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::TransE,
        ModelKind::ComplEx,
        ModelKind::Rescal,
        ModelKind::Tucker,
    ];

    pub fn code(self) -> u8 {
        match self {
            ModelKind::TransE => 0,
            ModelKind::ComplEx => 1,
            ModelKind::Rescal => 2,
            ModelKind::Tucker => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "complex" => Ok(ModelKind::ComplEx),
            "rescal" => Ok(ModelKind::Rescal),
            "tucker" => Ok(ModelKind::Tucker),
            _ => Err(Error::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    #[default]
    None,
    L1,
    L2,
    L3,
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Regularizer::None),
            "l1" => Ok(Regularizer::L1),
            "l2" => Ok(Regularizer::L2),
            "l3" => Ok(Regularizer::L3),
            _ => Err(Error::Config(format!("unknown regularizer {s:?}"))),
        }
    }
}

impl Regularizer {
    fn power(self) -> Option<i32> {
        match self {
            Regularizer::None => None,
            Regularizer::L1 => Some(1),
            Regularizer::L2 => Some(2),
            Regularizer::L3 => Some(3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub entity_dim: usize,
    /// Only read by TuckER; the other kinds tie it to `entity_dim`.
    pub relation_dim: usize,
    pub reciprocal: bool,
    pub dropout_entity: f64,
    pub dropout_relation: f64,
    pub regularizer: Regularizer,
    pub reg_entity_weight: f64,
    pub reg_relation_weight: f64,
    pub frequency_weighting: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::ComplEx,
            entity_dim: 64,
            relation_dim: 64,
            reciprocal: false,
            dropout_entity: 0.0,
            dropout_relation: 0.0,
            regularizer: Regularizer::None,
            reg_entity_weight: 0.0,
            reg_relation_weight: 0.0,
            frequency_weighting: false,
        }
    }
}

impl ModelConfig {
    pub fn new(kind: ModelKind, entity_dim: usize) -> Self {
        ModelConfig {
            kind,
            entity_dim,
            relation_dim: entity_dim,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entity_dim == 0 || (self.kind == ModelKind::Tucker && self.relation_dim == 0) {
            return Err(Error::Config("embedding dimensions must be positive".into()));
        }
        for (name, p) in [
            ("dropout_entity", self.dropout_entity),
            ("dropout_relation", self.dropout_relation),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {p}")));
            }
        }
        if self.reg_entity_weight < 0.0 || self.reg_relation_weight < 0.0 {
            return Err(Error::Config("regularization weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn entity_width(&self) -> usize {
        match self.kind {
            ModelKind::ComplEx => 2 * self.entity_dim,
            _ => self.entity_dim,
        }
    }

    pub fn relation_width(&self) -> usize {
        match self.kind {
            ModelKind::TransE => self.entity_dim,
            ModelKind::ComplEx => 2 * self.entity_dim,
            ModelKind::Rescal => self.entity_dim * self.entity_dim,
            ModelKind::Tucker => self.relation_dim,
        }
    }

    pub fn core_len(&self) -> usize {
        match self.kind {
            ModelKind::Tucker => self.entity_dim * self.relation_dim * self.entity_dim,
            _ => 0,
        }
    }

    fn effective_relation_dim(&self) -> usize {
        match self.kind {
            ModelKind::Tucker => self.relation_dim,
            _ => self.entity_dim,
        }
    }
}

/// Which slot of a triple the candidate entities fill.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Head,
    Tail,
}

/// Scoring mode. Train mode applies inverted dropout with masks drawn from a
/// stream keyed by `mask_seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { mask_seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    config: ModelConfig,
    num_entities: usize,
    num_relations: usize,
    entity: Vec<f64>,
    relation: Vec<f64>,
    core: Vec<f64>,
    seed: u64,
}

/// Gradient over the rows a batch touched. Untouched rows are absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseGrad {
    pub entity: BTreeMap<EntityId, Vec<f64>>,
    pub relation: BTreeMap<u32, Vec<f64>>,
    pub core: Option<Vec<f64>>,
}

impl SparseGrad {
    pub fn is_empty(&self) -> bool {
        self.entity.is_empty() && self.relation.is_empty() && self.core.is_none()
    }

    pub fn merge(&mut self, other: SparseGrad) {
        for (row, g) in other.entity {
            add_row(&mut self.entity, row, &g);
        }
        for (row, g) in other.relation {
            add_row(&mut self.relation, row, &g);
        }
        if let Some(c) = other.core {
            match &mut self.core {
                Some(mine) => axpy(1.0, &c, mine),
                None => self.core = Some(c),
            }
        }
    }

    fn entity_row(&mut self, row: EntityId, width: usize) -> &mut [f64] {
        self.entity.entry(row).or_insert_with(|| vec![0.0; width])
    }

    fn relation_row(&mut self, row: u32, width: usize) -> &mut [f64] {
        self.relation.entry(row).or_insert_with(|| vec![0.0; width])
    }

    fn core_mut(&mut self, len: usize) -> &mut [f64] {
        self.core.get_or_insert_with(|| vec![0.0; len])
    }
}

fn add_row<K: Ord>(map: &mut BTreeMap<K, Vec<f64>>, row: K, g: &[f64]) {
    match map.get_mut(&row) {
        Some(acc) => axpy(1.0, g, acc),
        None => {
            map.insert(row, g.to_vec());
        }
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One softmax list: the anchor entity and relation row are fixed, the
/// candidates fill `direction`. `candidates[0]` is the positive.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateList {
    pub anchor: EntityId,
    pub relation_row: u32,
    pub direction: Direction,
    pub candidates: Vec<EntityId>,
}

/// Per-row occurrence counts in the training split, used by frequency-weighted
/// regularization.
#[derive(Clone, Debug, Default)]
pub struct Frequencies {
    pub entity: Vec<u32>,
    pub relation: Vec<u32>,
}

impl Frequencies {
    pub fn from_triples(triples: &[Triple], num_entities: usize, num_relations: usize) -> Self {
        let mut f = Frequencies {
            entity: vec![0; num_entities],
            relation: vec![0; num_relations],
        };
        for t in triples {
            f.entity[t.head as usize] += 1;
            f.entity[t.tail as usize] += 1;
            f.relation[t.relation as usize] += 1;
        }
        f
    }

    fn entity_weight(&self, e: EntityId) -> f64 {
        match self.entity.get(e as usize) {
            Some(&n) if n > 0 => 1.0 / n as f64,
            _ => 1.0,
        }
    }

    fn relation_weight(&self, r: u32) -> f64 {
        match self.relation.get(r as usize) {
            Some(&n) if n > 0 => 1.0 / n as f64,
            _ => 1.0,
        }
    }
}

/// Scale factors for inverted dropout, or `None` when dropout is off.
fn dropout_mask(width: usize, rate: f64, rng: Option<&mut Rng>) -> Option<Vec<f64>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some(
        (0..width)
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect(),
    )
}

fn masked(v: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => v.iter().zip(m).map(|(x, s)| x * s).collect(),
        None => v.to_vec(),
    }
}

fn apply_mask(g: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (gi, s) in g.iter_mut().zip(m) {
            *gi *= s;
        }
    }
}

impl EmbeddingModel {
    /// Parameters drawn i.i.d. from N(0, 0.1²); TransE entity rows are then
    /// rescaled to unit norm.
    pub fn init(
        config: ModelConfig,
        num_entities: usize,
        num_relations: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = SeedPath::new(seed).push("init").rng();
        let normal = Normal::new(0.0, 0.1).expect("valid normal");
        let rel_rows = if config.reciprocal {
            2 * num_relations
        } else {
            num_relations
        };
        let mut sample = |n: usize| -> Vec<f64> { (0..n).map(|_| normal.sample(&mut rng)).collect() };
        let mut entity = sample(num_entities * config.entity_width());
        let relation = sample(rel_rows * config.relation_width());
        let core = sample(config.core_len());
        if config.kind == ModelKind::TransE {
            for row in entity.chunks_mut(config.entity_width()) {
                let norm = dot(row, row).sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|x| *x /= norm);
                }
            }
        }
        Ok(EmbeddingModel {
            config,
            num_entities,
            num_relations,
            entity,
            relation,
            core,
            seed,
        })
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        num_entities: usize,
        num_relations: usize,
        entity: Vec<f64>,
        relation: Vec<f64>,
        core: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let rel_rows = if config.reciprocal {
            2 * num_relations
        } else {
            num_relations
        };
        if entity.len() != num_entities * config.entity_width()
            || relation.len() != rel_rows * config.relation_width()
            || core.len() != config.core_len()
        {
            return Err(Error::Checkpoint("parameter array sizes disagree with header".into()));
        }
        if entity.iter().chain(&relation).chain(&core).any(|x| !x.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(EmbeddingModel {
            config,
            num_entities,
            num_relations,
            entity,
            relation,
            core,
            seed,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    /// Number of relations in the graph (not counting reciprocal rows).
    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn relation_rows(&self) -> usize {
        self.relation.len() / self.config.relation_width()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entity_params(&self) -> &[f64] {
        &self.entity
    }

    pub fn relation_params(&self) -> &[f64] {
        &self.relation
    }

    pub fn core_params(&self) -> &[f64] {
        &self.core
    }

    pub fn entity_params_mut(&mut self) -> &mut [f64] {
        &mut self.entity
    }

    pub fn relation_params_mut(&mut self) -> &mut [f64] {
        &mut self.relation
    }

    pub fn core_params_mut(&mut self) -> &mut [f64] {
        &mut self.core
    }

    pub fn entity_row(&self, e: EntityId) -> &[f64] {
        let w = self.config.entity_width();
        &self.entity[e as usize * w..(e as usize + 1) * w]
    }

    pub fn relation_row(&self, r: u32) -> &[f64] {
        let w = self.config.relation_width();
        &self.relation[r as usize * w..(r as usize + 1) * w]
    }

    pub fn entity_row_mut(&mut self, e: EntityId) -> &mut [f64] {
        let w = self.config.entity_width();
        &mut self.entity[e as usize * w..(e as usize + 1) * w]
    }

    pub fn relation_row_mut(&mut self, r: u32) -> &mut [f64] {
        let w = self.config.relation_width();
        &mut self.relation[r as usize * w..(r as usize + 1) * w]
    }

    /// Relation row scoring the reversed triple `(t, r⁻¹, h)`.
    pub fn reciprocal_row(&self, relation: u32) -> Option<u32> {
        self.config
            .reciprocal
            .then_some(relation + self.num_relations as u32)
    }

    pub fn check(&self, t: Triple) -> Result<()> {
        if t.head as usize >= self.num_entities || t.tail as usize >= self.num_entities {
            return Err(Error::OutOfRange {
                what: "entity",
                id: t.head.max(t.tail) as usize,
                limit: self.num_entities,
            });
        }
        if t.relation as usize >= self.num_relations {
            return Err(Error::OutOfRange {
                what: "relation",
                id: t.relation as usize,
                limit: self.num_relations,
            });
        }
        Ok(())
    }

    /// φ(h, r, t), scored in the tail direction with relation row `r`.
    pub fn score(&self, t: Triple, mode: Mode) -> Result<f64> {
        self.check(t)?;
        Ok(match mode {
            Mode::Eval => self.score_eval(t),
            Mode::Train { mask_seed } => {
                let mut rng = SeedPath::new(mask_seed).push("dropout").rng();
                let c = &self.config;
                let mh = dropout_mask(c.entity_width(), c.dropout_entity, Some(&mut rng));
                let mr = dropout_mask(c.relation_width(), c.dropout_relation, Some(&mut rng));
                let mt = dropout_mask(c.entity_width(), c.dropout_entity, Some(&mut rng));
                let h = masked(self.entity_row(t.head), &mh);
                let r = masked(self.relation_row(t.relation), &mr);
                let tt = masked(self.entity_row(t.tail), &mt);
                let q = self.query(Direction::Tail, &h, &r);
                self.candidate_score(&q, &tt)
            }
        })
    }

    /// Eval-mode score without bounds checks.
    pub fn score_eval(&self, t: Triple) -> f64 {
        let q = self.query(
            Direction::Tail,
            self.entity_row(t.head),
            self.relation_row(t.relation),
        );
        self.candidate_score(&q, self.entity_row(t.tail))
    }

    pub fn score_all(&self, triples: &[Triple]) -> Result<Vec<f64>> {
        triples.iter().map(|&t| self.score(t, Mode::Eval)).collect()
    }

    /// Query vector for the given direction. `anchor` is the head row for
    /// [`Direction::Tail`] and the tail row for [`Direction::Head`].
    pub fn query(&self, dir: Direction, anchor: &[f64], rel: &[f64]) -> Vec<f64> {
        let c = &self.config;
        match c.kind {
            ModelKind::TransE => match dir {
                Direction::Tail => anchor.iter().zip(rel).map(|(h, r)| h + r).collect(),
                Direction::Head => anchor.iter().zip(rel).map(|(t, r)| t - r).collect(),
            },
            ModelKind::ComplEx => {
                let d = c.entity_dim;
                let (a_re, a_im) = anchor.split_at(d);
                let (r_re, r_im) = rel.split_at(d);
                let mut q = vec![0.0; 2 * d];
                match dir {
                    Direction::Tail => {
                        for i in 0..d {
                            q[i] = a_re[i] * r_re[i] - a_im[i] * r_im[i];
                            q[d + i] = a_re[i] * r_im[i] + a_im[i] * r_re[i];
                        }
                    }
                    Direction::Head => {
                        for i in 0..d {
                            q[i] = r_re[i] * a_re[i] + r_im[i] * a_im[i];
                            q[d + i] = r_re[i] * a_im[i] - r_im[i] * a_re[i];
                        }
                    }
                }
                q
            }
            ModelKind::Rescal => {
                let d = c.entity_dim;
                let mut q = vec![0.0; d];
                match dir {
                    Direction::Tail => {
                        for (i, &h) in anchor.iter().enumerate() {
                            axpy(h, &rel[i * d..(i + 1) * d], &mut q);
                        }
                    }
                    Direction::Head => {
                        for (i, qi) in q.iter_mut().enumerate() {
                            *qi = dot(&rel[i * d..(i + 1) * d], anchor);
                        }
                    }
                }
                q
            }
            ModelKind::Tucker => {
                let (de, dr) = (c.entity_dim, c.relation_dim);
                let w = &self.core;
                let mut q = vec![0.0; de];
                match dir {
                    Direction::Tail => {
                        for (i, &h) in anchor.iter().enumerate() {
                            for (j, &r) in rel.iter().enumerate() {
                                let base = (i * dr + j) * de;
                                axpy(h * r, &w[base..base + de], &mut q);
                            }
                        }
                    }
                    Direction::Head => {
                        for (i, qi) in q.iter_mut().enumerate() {
                            let mut acc = 0.0;
                            for (j, &r) in rel.iter().enumerate() {
                                let base = (i * dr + j) * de;
                                acc += r * dot(&w[base..base + de], anchor);
                            }
                            *qi = acc;
                        }
                    }
                }
                q
            }
        }
    }

    #[inline]
    pub fn candidate_score(&self, q: &[f64], cand: &[f64]) -> f64 {
        match self.config.kind {
            ModelKind::TransE => {
                -q.iter()
                    .zip(cand)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            }
            _ => dot(q, cand),
        }
    }

    /// Adds `coef · ∂score/∂q` to `dq` and `coef · ∂score/∂cand` to `dc`.
    fn candidate_backward(&self, q: &[f64], cand: &[f64], coef: f64, dq: &mut [f64], dc: &mut [f64]) {
        match self.config.kind {
            ModelKind::TransE => {
                let n = q
                    .iter()
                    .zip(cand)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if n > 0.0 {
                    let s = coef / n;
                    for i in 0..q.len() {
                        let diff = q[i] - cand[i];
                        dq[i] -= s * diff;
                        dc[i] += s * diff;
                    }
                }
            }
            _ => {
                axpy(coef, cand, dq);
                axpy(coef, q, dc);
            }
        }
    }

    /// Back-propagates `dq` into the anchor row, the relation row and the core.
    #[allow(clippy::too_many_arguments)]
    fn query_backward(
        &self,
        dir: Direction,
        anchor: &[f64],
        rel: &[f64],
        dq: &[f64],
        da: &mut [f64],
        dr: &mut [f64],
        dcore: Option<&mut [f64]>,
    ) {
        let c = &self.config;
        match c.kind {
            ModelKind::TransE => {
                axpy(1.0, dq, da);
                match dir {
                    Direction::Tail => axpy(1.0, dq, dr),
                    Direction::Head => axpy(-1.0, dq, dr),
                }
            }
            ModelKind::ComplEx => {
                let d = c.entity_dim;
                let (a_re, a_im) = anchor.split_at(d);
                let (r_re, r_im) = rel.split_at(d);
                let (q_re, q_im) = dq.split_at(d);
                match dir {
                    Direction::Tail => {
                        for i in 0..d {
                            da[i] += q_re[i] * r_re[i] + q_im[i] * r_im[i];
                            da[d + i] += -q_re[i] * r_im[i] + q_im[i] * r_re[i];
                            dr[i] += q_re[i] * a_re[i] + q_im[i] * a_im[i];
                            dr[d + i] += -q_re[i] * a_im[i] + q_im[i] * a_re[i];
                        }
                    }
                    Direction::Head => {
                        for i in 0..d {
                            dr[i] += q_re[i] * a_re[i] + q_im[i] * a_im[i];
                            dr[d + i] += q_re[i] * a_im[i] - q_im[i] * a_re[i];
                            da[i] += q_re[i] * r_re[i] - q_im[i] * r_im[i];
                            da[d + i] += q_re[i] * r_im[i] + q_im[i] * r_re[i];
                        }
                    }
                }
            }
            ModelKind::Rescal => {
                let d = c.entity_dim;
                match dir {
                    Direction::Tail => {
                        for i in 0..d {
                            let row = &rel[i * d..(i + 1) * d];
                            da[i] += dot(row, dq);
                            axpy(anchor[i], dq, &mut dr[i * d..(i + 1) * d]);
                        }
                    }
                    Direction::Head => {
                        for i in 0..d {
                            let row = &rel[i * d..(i + 1) * d];
                            axpy(dq[i], row, da);
                            axpy(dq[i], anchor, &mut dr[i * d..(i + 1) * d]);
                        }
                    }
                }
            }
            ModelKind::Tucker => {
                let (de, drr) = (c.entity_dim, c.relation_dim);
                let w = &self.core;
                let mut dcore = dcore;
                match dir {
                    Direction::Tail => {
                        for i in 0..de {
                            for j in 0..drr {
                                let base = (i * drr + j) * de;
                                let wij = dot(&w[base..base + de], dq);
                                da[i] += rel[j] * wij;
                                dr[j] += anchor[i] * wij;
                                if let Some(g) = dcore.as_deref_mut() {
                                    axpy(anchor[i] * rel[j], dq, &mut g[base..base + de]);
                                }
                            }
                        }
                    }
                    Direction::Head => {
                        for i in 0..de {
                            for j in 0..drr {
                                let base = (i * drr + j) * de;
                                let wk = &w[base..base + de];
                                dr[j] += dq[i] * dot(wk, anchor);
                                axpy(dq[i] * rel[j], wk, da);
                                if let Some(g) = dcore.as_deref_mut() {
                                    axpy(dq[i] * rel[j], anchor, &mut g[base..base + de]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Softmax cross-entropy over each candidate list, each list weighted by
    /// `weight`. Returns the weighted loss sum and accumulates its gradient
    /// into `grad`. With `dropout_rng` set, every embedding lookup gets its own
    /// inverted-dropout mask.
    pub fn grad_batch(
        &self,
        lists: &[CandidateList],
        weight: f64,
        mut dropout_rng: Option<&mut Rng>,
        grad: &mut SparseGrad,
    ) -> f64 {
        let c = &self.config;
        let (ew, rw) = (c.entity_width(), c.relation_width());
        let mut total = 0.0;
        for list in lists {
            if list.candidates.is_empty() {
                continue;
            }
            let ma = dropout_mask(ew, c.dropout_entity, dropout_rng.as_deref_mut());
            let mr = dropout_mask(rw, c.dropout_relation, dropout_rng.as_deref_mut());
            let anchor = masked(self.entity_row(list.anchor), &ma);
            let rel = masked(self.relation_row(list.relation_row), &mr);
            let q = self.query(list.direction, &anchor, &rel);

            let mut cand_masks = Vec::with_capacity(list.candidates.len());
            let mut cand_vecs = Vec::with_capacity(list.candidates.len());
            let mut scores = Vec::with_capacity(list.candidates.len());
            for &e in &list.candidates {
                let m = dropout_mask(ew, c.dropout_entity, dropout_rng.as_deref_mut());
                let v = match &m {
                    Some(_) => masked(self.entity_row(e), &m),
                    None => self.entity_row(e).to_vec(),
                };
                scores.push(self.candidate_score(&q, &v));
                cand_vecs.push(v);
                cand_masks.push(m);
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = scores.iter().map(|s| (s - max).exp()).sum();
            let lse = max + sum_exp.ln();
            total += weight * (lse - scores[0]);

            let mut dq = vec![0.0; q.len()];
            for (j, &e) in list.candidates.iter().enumerate() {
                let p = (scores[j] - lse).exp();
                let coef = weight * (p - if j == 0 { 1.0 } else { 0.0 });
                let mut dc = vec![0.0; ew];
                self.candidate_backward(&q, &cand_vecs[j], coef, &mut dq, &mut dc);
                apply_mask(&mut dc, &cand_masks[j]);
                axpy(1.0, &dc, grad.entity_row(e, ew));
            }
            let mut da = vec![0.0; ew];
            let mut dr = vec![0.0; rw];
            let core_len = c.core_len();
            let dcore = (core_len > 0).then(|| grad.core_mut(core_len));
            self.query_backward(list.direction, &anchor, &rel, &dq, &mut da, &mut dr, dcore);
            apply_mask(&mut da, &ma);
            apply_mask(&mut dr, &mr);
            axpy(1.0, &da, grad.entity_row(list.anchor, ew));
            axpy(1.0, &dr, grad.relation_row(list.relation_row, rw));
        }
        total
    }

    /// Weighted lₚ penalty over the embeddings of `positives` (head, tail,
    /// relation row, plus the reciprocal row for reciprocal models). Returns
    /// the penalty and accumulates its gradient.
    pub fn regularization(
        &self,
        positives: &[Triple],
        frequencies: Option<&Frequencies>,
        grad: &mut SparseGrad,
    ) -> f64 {
        let c = &self.config;
        let Some(p) = c.regularizer.power() else {
            return 0.0;
        };
        let (ew, rw) = (c.entity_width(), c.relation_width());
        let freq = if c.frequency_weighting { frequencies } else { None };
        let mut penalty = 0.0;
        let mut add = |vals: &[f64], lambda: f64, g: &mut [f64]| {
            if lambda == 0.0 {
                return;
            }
            for (x, gi) in vals.iter().zip(g.iter_mut()) {
                let a = x.abs();
                match p {
                    1 => {
                        penalty += lambda * a;
                        *gi += lambda * x.signum() * (a > 0.0) as u8 as f64;
                    }
                    2 => {
                        penalty += lambda * x * x;
                        *gi += 2.0 * lambda * x;
                    }
                    _ => {
                        penalty += lambda * a * a * a;
                        *gi += 3.0 * lambda * a * x;
                    }
                }
            }
        };
        for t in positives {
            for e in [t.head, t.tail] {
                let w = freq.map_or(1.0, |f| f.entity_weight(e));
                add(self.entity_row(e), c.reg_entity_weight * w, grad.entity_row(e, ew));
            }
            let w = freq.map_or(1.0, |f| f.relation_weight(t.relation));
            let mut rows = vec![t.relation];
            rows.extend(self.reciprocal_row(t.relation));
            for r in rows {
                add(self.relation_row(r), c.reg_relation_weight * w, grad.relation_row(r, rw));
            }
        }
        penalty
    }

    pub fn effective_relation_dim(&self) -> usize {
        self.config.effective_relation_dim()
    }
}
