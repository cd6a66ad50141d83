//! Per-scenario adaptation of a pretrained embedding model.
//!
//! For a counterfactual triple `τᶜ`, a private copy of the pristine
//! parameters is updated for at most `E` steps. Each step trains on `τᶜ`
//! plus `N` training edges drawn uniformly with replacement, using the same
//! corrupted-candidate cross-entropy as pretraining and a fresh optimizer.
//! Adaptation stops as soon as `τᶜ` scores at or above its relation's
//! threshold; the adapted copy then classifies the scenario's test cases with
//! the thresholds of the pristine model.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchgen::CfkgrInstance;
use crate::calibration::ThresholdSet;
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Triple};
use crate::metrics::{label_predictions, EvalReport};
use crate::models::{EmbeddingModel, Frequencies};
use crate::optim::{apply_update, OptimizerKind, OptimizerState};
use crate::rng::{Rng, SeedPath};
use crate::trainer::{all_entities, loss_and_grad, NegativeSampler};

pub const TUNE_LEARNING_RATES: [f64; 5] = [0.001, 0.01, 0.1, 0.15, 0.2];
pub const TUNE_SAMPLES: [usize; 5] = [0, 127, 255, 511, 1023];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoulddConfig {
    pub max_iterations: usize,
    pub additional_samples: usize,
    pub learning_rate: f64,
    pub negatives_per_direction: usize,
    pub repeats: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for CoulddConfig {
    fn default() -> Self {
        CoulddConfig {
            max_iterations: 20,
            additional_samples: 0,
            learning_rate: 0.1,
            negatives_per_direction: 50,
            repeats: 5,
            seed: 0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl CoulddConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.negatives_per_direction == 0 {
            return Err(Error::Config("negatives_per_direction must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AdaptationResult {
    pub model: EmbeddingModel,
    pub iterations_used: usize,
    /// `φ(τᶜ) ≥ μ_r` held when adaptation stopped.
    pub cf_accepted: bool,
    /// Eval-mode score of `τᶜ` after each completed step.
    pub cf_scores: Vec<f64>,
    pub case_scores: Vec<f64>,
    pub case_predictions: Vec<u8>,
    /// A step produced a non-finite loss; predictions come from the pristine
    /// model.
    pub diverged: bool,
}

/// Shared read-only state for adapting many scenarios against one model.
pub struct Adapter<'a> {
    pristine: &'a EmbeddingModel,
    kg: &'a KnowledgeGraph,
    thresholds: &'a ThresholdSet,
    config: &'a CoulddConfig,
    pool: Vec<EntityId>,
    frequencies: Frequencies,
}

impl<'a> Adapter<'a> {
    pub fn new(
        pristine: &'a EmbeddingModel,
        kg: &'a KnowledgeGraph,
        thresholds: &'a ThresholdSet,
        config: &'a CoulddConfig,
    ) -> Result<Self> {
        config.validate()?;
        if kg.train().is_empty() {
            return Err(Error::NoFacts("training split is empty".into()));
        }
        if pristine.num_entities() != kg.num_entities() || pristine.num_relations() != kg.num_relations() {
            return Err(Error::Config(format!(
                "model has {} entities / {} relations, graph has {} / {}",
                pristine.num_entities(),
                pristine.num_relations(),
                kg.num_entities(),
                kg.num_relations()
            )));
        }
        Ok(Adapter {
            pristine,
            kg,
            thresholds,
            config,
            pool: all_entities(kg.num_entities()),
            frequencies: Frequencies::from_triples(kg.train(), kg.num_entities(), kg.num_relations()),
        })
    }

    pub fn adapt(&self, cf: Triple, cases: &[Triple], rng: &mut Rng) -> Result<AdaptationResult> {
        self.pristine.check(cf)?;
        let cfg = self.config;
        let sampler = NegativeSampler {
            pool: &self.pool,
            per_direction: cfg.negatives_per_direction,
            filter: None,
        };
        let train = self.kg.train();
        let mu = self.thresholds.lookup(cf.relation);
        let mut model = self.pristine.clone();
        let mut state = OptimizerState::new(cfg.optimizer);
        let mut cf_scores = Vec::with_capacity(cfg.max_iterations);
        let mut batch = Vec::with_capacity(cfg.additional_samples + 1);
        let mut diverged = false;

        for _ in 0..cfg.max_iterations {
            batch.clear();
            batch.push(cf);
            batch.extend((0..cfg.additional_samples).map(|_| train[rng.gen_range(0..train.len())]));
            match loss_and_grad(&model, &batch, &sampler, Some(&self.frequencies), rng) {
                Ok((_, grad)) => apply_update(&mut model, &mut state, &grad, cfg.learning_rate),
                Err(Error::NonFiniteLoss { .. }) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            let s = model.score_eval(cf);
            cf_scores.push(s);
            if !s.is_finite() {
                diverged = true;
                break;
            }
            if s >= mu {
                break;
            }
        }

        let iterations_used = cf_scores.len();
        let cf_accepted = !diverged && cf_scores.last().is_some_and(|&s| s >= mu);
        let scorer = if diverged { self.pristine } else { &model };
        let case_scores = scorer.score_all(cases)?;
        let case_predictions = cases
            .iter()
            .zip(&case_scores)
            .map(|(t, &s)| self.thresholds.accepts(t.relation, s) as u8)
            .collect();
        Ok(AdaptationResult {
            model,
            iterations_used,
            cf_accepted,
            cf_scores,
            case_scores,
            case_predictions,
            diverged,
        })
    }
}

/// Adapts `pristine` to `cf` and classifies `cases`. See [`Adapter`].
pub fn adapt(
    pristine: &EmbeddingModel,
    kg: &KnowledgeGraph,
    cf: Triple,
    cases: &[Triple],
    thresholds: &ThresholdSet,
    config: &CoulddConfig,
    rng: &mut Rng,
) -> Result<AdaptationResult> {
    Adapter::new(pristine, kg, thresholds, config)?.adapt(cf, cases, rng)
}

/// Random stream of one scenario in one repeat.
pub fn scenario_seed(seed: u64, repeat: usize, instance_id: &str) -> SeedPath {
    SeedPath::new(seed)
        .push("couldd")
        .push_u64(repeat as u64)
        .push(instance_id)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub instance_id: String,
    pub iterations_used: usize,
    pub cf_accepted: bool,
    pub final_cf_score: Option<f64>,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub repeat: usize,
    pub report: EvalReport,
    pub scenarios: Vec<ScenarioOutcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub overall_f1: f64,
    pub changed_accuracy: Option<f64>,
    pub unchanged_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoulddReport {
    pub config: CoulddConfig,
    pub baseline: EvalReport,
    pub repeats: Vec<RepeatReport>,
    pub mean: MetricSummary,
    /// Population standard deviation across repeats.
    pub std: MetricSummary,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and population standard deviation of each headline metric. Changed
/// accuracy is absent when any repeat lacks it.
pub fn summarize(reports: &[EvalReport]) -> (MetricSummary, MetricSummary) {
    let of = |f: fn(&EvalReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
    let (f1_m, f1_s) = of(|r| r.overall_f1);
    let (un_m, un_s) = of(|r| r.unchanged_f1);
    let changed: Option<Vec<f64>> = reports.iter().map(|r| r.changed_accuracy).collect();
    let (ch_m, ch_s) = match changed {
        Some(v) if !v.is_empty() => {
            let (m, s) = mean_std(&v);
            (Some(m), Some(s))
        }
        _ => (None, None),
    };
    (
        MetricSummary {
            overall_f1: f1_m,
            changed_accuracy: ch_m,
            unchanged_f1: un_m,
        },
        MetricSummary {
            overall_f1: f1_s,
            changed_accuracy: ch_s,
            unchanged_f1: un_s,
        },
    )
}

fn case_triples(inst: &CfkgrInstance) -> Vec<Triple> {
    inst.cases.iter().map(|c| c.triple).collect()
}

/// Predictions of the unadapted model.
pub fn baseline_report(
    pristine: &EmbeddingModel,
    thresholds: &ThresholdSet,
    dataset: &[CfkgrInstance],
) -> Result<EvalReport> {
    let preds = dataset
        .iter()
        .map(|inst| crate::calibration::classify(pristine, thresholds, &case_triples(inst)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_predictions(
        &label_predictions(dataset, &preds),
        dataset.len(),
    ))
}

pub fn evaluate_dataset(
    pristine: &EmbeddingModel,
    kg: &KnowledgeGraph,
    dataset: &[CfkgrInstance],
    thresholds: &ThresholdSet,
    config: &CoulddConfig,
) -> Result<CoulddReport> {
    let adapter = Adapter::new(pristine, kg, thresholds, config)?;
    let baseline = baseline_report(pristine, thresholds, dataset)?;
    let mut repeats = Vec::with_capacity(config.repeats);
    for repeat in 0..config.repeats {
        let results: Vec<(Vec<u8>, ScenarioOutcome)> = dataset
            .par_iter()
            .map(|inst| {
                let mut rng = scenario_seed(config.seed, repeat, &inst.id).rng();
                let r = adapter.adapt(inst.cf, &case_triples(inst), &mut rng)?;
                Ok((
                    r.case_predictions,
                    ScenarioOutcome {
                        instance_id: inst.id.clone(),
                        iterations_used: r.iterations_used,
                        cf_accepted: r.cf_accepted,
                        final_cf_score: r.cf_scores.last().copied(),
                        diverged: r.diverged,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        let (preds, scenarios): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        repeats.push(RepeatReport {
            repeat,
            report: EvalReport::from_predictions(&label_predictions(dataset, &preds), dataset.len()),
            scenarios,
        });
    }
    let reports: Vec<EvalReport> = repeats.iter().map(|r| r.report.clone()).collect();
    let (mean, std) = summarize(&reports);
    Ok(CoulddReport {
        config: config.clone(),
        baseline,
        repeats,
        mean,
        std,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub additional_samples: usize,
    pub mean: MetricSummary,
    pub std: MetricSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub baseline: EvalReport,
    pub grid: Vec<GridPoint>,
    pub best: GridPoint,
}

/// Evaluates every `(α, N)` pair and picks the highest mean overall F1; ties
/// go to the earlier grid point (smaller α, then smaller N).
pub fn couldd_tune(
    pristine: &EmbeddingModel,
    kg: &KnowledgeGraph,
    dataset: &[CfkgrInstance],
    thresholds: &ThresholdSet,
    base: &CoulddConfig,
    learning_rates: &[f64],
    samples: &[usize],
) -> Result<TuneReport> {
    if learning_rates.is_empty() || samples.is_empty() {
        return Err(Error::Config("empty tuning grid".into()));
    }
    let mut grid = Vec::with_capacity(learning_rates.len() * samples.len());
    let mut baseline = None;
    for &lr in learning_rates {
        for &n in samples {
            let cfg = CoulddConfig {
                learning_rate: lr,
                additional_samples: n,
                ..base.clone()
            };
            let report = evaluate_dataset(pristine, kg, dataset, thresholds, &cfg)?;
            baseline.get_or_insert(report.baseline);
            grid.push(GridPoint {
                learning_rate: lr,
                additional_samples: n,
                mean: report.mean,
                std: report.std,
            });
        }
    }
    let mut best = &grid[0];
    for g in &grid[1..] {
        if g.mean.overall_f1 > best.mean.overall_f1 {
            best = g;
        }
    }
    Ok(TuneReport {
        best: best.clone(),
        baseline: baseline.expect("grid is nonempty"),
        grid,
    })
}
