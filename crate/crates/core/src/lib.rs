//! Knowledge-graph embeddings for counterfactual reasoning.
//!
//! The crate trains TransE / ComplEx / RESCAL / TuckER embeddings, tunes
//! per-relation classification thresholds, generates counterfactual
//! benchmark instances from composition rules, and evaluates frozen and
//! COULDD-adapted embeddings on them.

pub mod benchgen;
pub mod calibration;
pub mod checkpoint;
pub mod cli;
pub mod couldd;
pub mod dataset;
pub mod error;
pub mod kg;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use kg::{KnowledgeGraph, Triple};
pub use models::{EmbeddingModel, ModelConfig, ModelKind};
