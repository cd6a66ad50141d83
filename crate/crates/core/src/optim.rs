//! Sparse Adam and Adagrad. Accumulators exist only for rows that have
//! received a gradient; untouched rows keep neither parameters nor state
//! changes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::models::{EmbeddingModel, SparseGrad};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[default]
    Adam,
    Adagrad,
}

impl std::str::FromStr for OptimizerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            _ => Err(crate::Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct OptimizerState {
    kind: OptimizerKind,
    step: u64,
    entity: HashMap<u32, Moments>,
    relation: HashMap<u32, Moments>,
    core: Option<Moments>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerState {
            kind,
            step: 0,
            entity: HashMap::new(),
            relation: HashMap::new(),
            core: None,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Number of entity rows with materialized accumulators.
    pub fn touched_entities(&self) -> usize {
        self.entity.len()
    }

    pub fn touched_relations(&self) -> usize {
        self.relation.len()
    }
}

fn update_slice(kind: OptimizerKind, step: u64, m: &mut Moments, param: &mut [f64], grad: &[f64], lr: f64) {
    match kind {
        OptimizerKind::Adagrad => {
            if m.first.is_empty() {
                m.first = vec![0.0; param.len()];
            }
            for ((p, g), acc) in param.iter_mut().zip(grad).zip(m.first.iter_mut()) {
                *acc += g * g;
                *p -= lr * g / (acc.sqrt() + ADAGRAD_EPS);
            }
        }
        OptimizerKind::Adam => {
            if m.first.is_empty() {
                m.first = vec![0.0; param.len()];
                m.second = vec![0.0; param.len()];
            }
            let bc1 = 1.0 - ADAM_BETA1.powi(step as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(step as i32);
            for i in 0..param.len() {
                let g = grad[i];
                m.first[i] = ADAM_BETA1 * m.first[i] + (1.0 - ADAM_BETA1) * g;
                m.second[i] = ADAM_BETA2 * m.second[i] + (1.0 - ADAM_BETA2) * g * g;
                let mh = m.first[i] / bc1;
                let vh = m.second[i] / bc2;
                param[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Applies one optimizer step to every row present in `grad`.
pub fn apply_update(model: &mut EmbeddingModel, state: &mut OptimizerState, grad: &SparseGrad, lr: f64) {
    if grad.is_empty() {
        return;
    }
    state.step += 1;
    let (kind, step) = (state.kind, state.step);
    for (&row, g) in &grad.entity {
        let m = state.entity.entry(row).or_default();
        update_slice(kind, step, m, model.entity_row_mut(row), g, lr);
    }
    for (&row, g) in &grad.relation {
        let m = state.relation.entry(row).or_default();
        update_slice(kind, step, m, model.relation_row_mut(row), g, lr);
    }
    if let Some(g) = &grad.core {
        let m = state.core.get_or_insert_with(Moments::default);
        update_slice(kind, step, m, model.core_params_mut(), g, lr);
    }
}
