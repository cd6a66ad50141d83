//! Command-line front end.
//!
//! Every subcommand reads its inputs, runs one library operation and writes
//! the result. Exit status is 0 on success, 2 for usage errors and missing
//! input paths, and 1 for every other failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::benchgen::{
    filter_inferable, read_rules, split_valid_test, AtomDiagnostics, GenConfig, Generator,
};
use crate::calibration::{self, ThresholdSet};
use crate::checkpoint;
use crate::couldd::{self, CoulddConfig, TUNE_LEARNING_RATES, TUNE_SAMPLES};
use crate::dataset;
use crate::error::{Error, Result};
use crate::kg::{load_kg, KgPaths, KnowledgeGraph};
use crate::metrics::{label_predictions, EvalReport};
use crate::models::{ModelConfig, ModelKind, Regularizer};
use crate::optim::OptimizerKind;
use crate::rng::SeedPath;
use crate::trainer::{self, TrainConfig};

pub const THREADS_ENV: &str = "CFKGR_THREADS";

#[derive(Parser, Debug)]
#[command(name = "cfkgr", version, about = "Counterfactual reasoning over knowledge-graph embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train an embedding model and write a checkpoint.
    Train(TrainArgs),
    /// Tune per-relation classification thresholds on the validation split.
    TuneThresholds(TuneThresholdsArgs),
    /// Generate validation and test benchmark files from composition rules.
    Generate(GenerateArgs),
    /// Evaluate COULDD adaptation on a benchmark file.
    CoulddEval(CoulddEvalArgs),
    /// Grid-search the COULDD learning rate and sample count.
    CoulddTune(CoulddTuneArgs),
    /// Keep the test triples that one rule application over train derives.
    FilterInferable(FilterArgs),
    /// Evaluate the unadapted model on a benchmark file.
    Report(ReportArgs),
}

/// Configuration file shared by all subcommands. Each block mirrors the
/// corresponding library config; command-line flags override it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub generate: GenConfig,
    pub couldd: CoulddConfig,
}

impl PipelineConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if let Some(seed) = cfg.seed {
            cfg.train.seed = seed;
            cfg.generate.seed = seed;
            cfg.couldd.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct ConfigArg {
    /// JSON configuration file; flags take precedence over its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig> {
        match &self.config {
            Some(p) => {
                require(p)?;
                PipelineConfig::read(p)
            }
            None => Ok(PipelineConfig::default()),
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory holding train.txt, valid.txt and test.txt.
    #[arg(long, value_name = "DIR")]
    pub kg: PathBuf,
    /// Output checkpoint.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Loss trace CSV [default: <out>.loss.csv].
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    /// Load report JSON [default: <out>.load.json].
    #[arg(long, value_name = "FILE")]
    pub load_report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
    /// Model family: transe, complex, rescal or tucker.
    #[arg(long)]
    pub kind: Option<ModelKind>,
    /// Entity embedding size.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Relation embedding size (TuckER only).
    #[arg(long)]
    pub relation_dim: Option<usize>,
    /// Learn separate parameters for inverse relations.
    #[arg(long)]
    pub reciprocal: Option<bool>,
    #[arg(long)]
    pub dropout_entity: Option<f64>,
    #[arg(long)]
    pub dropout_relation: Option<f64>,
    /// Penalty: none, l1, l2 or l3.
    #[arg(long)]
    pub regularizer: Option<Regularizer>,
    #[arg(long)]
    pub reg_entity: Option<f64>,
    #[arg(long)]
    pub reg_relation: Option<f64>,
    /// Scale each penalty term by the inverse training frequency.
    #[arg(long)]
    pub frequency_weighting: Option<bool>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// adam or adagrad.
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Corruptions per positive and direction.
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Redraw corruptions that are known facts.
    #[arg(long)]
    pub filter_negatives: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TuneThresholdsArgs {
    #[arg(long, value_name = "DIR")]
    pub kg: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Generate one tail corruption per validation triple when the graph has
    /// no validation negatives.
    #[arg(long)]
    pub synth: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_name = "DIR")]
    pub kg: PathBuf,
    /// Rules TSV: rule_id, r1, r2, r3, support, pca_confidence.
    #[arg(long, value_name = "FILE")]
    pub rules: PathBuf,
    /// Receives valid.jsonl, test.jsonl and diagnostics.json.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
    /// Maximum counterfactuals per rule and body atom.
    #[arg(long)]
    pub per_atom: Option<usize>,
    /// Sampling attempts per rule and body atom.
    #[arg(long)]
    pub max_attempts: Option<usize>,
    /// Number of rules assigned to the validation file.
    #[arg(long)]
    pub valid_rules: Option<usize>,
    /// Relations whose body atoms require a shared entity type.
    #[arg(long, value_delimiter = ',')]
    pub typed_relations: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct CoulddArgs {
    #[arg(long, value_name = "DIR")]
    pub kg: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub thresholds: PathBuf,
    /// Benchmark JSONL.
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Report JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Corruptions per batch triple and direction.
    #[arg(long)]
    pub negatives: Option<usize>,
    /// adam or adagrad.
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct CoulddEvalArgs {
    #[command(flatten)]
    pub common: CoulddArgs,
    /// Learning rate α.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Training edges N sampled per step.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CoulddTuneArgs {
    #[command(flatten)]
    pub common: CoulddArgs,
    /// Learning rates to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = TUNE_LEARNING_RATES)]
    pub lrs: Vec<f64>,
    /// Sample counts to sweep.
    #[arg(long = "samples-grid", value_delimiter = ',', default_values_t = TUNE_SAMPLES)]
    pub samples: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    #[arg(long, value_name = "DIR")]
    pub kg: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub rules: PathBuf,
    /// Minimum number of covered test triples for a rule to be kept.
    #[arg(long, default_value_t = 5)]
    pub min_cover: usize,
    /// Filtered triples TSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Rule coverage table JSON [default: <out>.rules.json].
    #[arg(long, value_name = "FILE")]
    pub rules_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long, value_name = "DIR")]
    pub kg: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub thresholds: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Report JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Per-case predictions CSV.
    #[arg(long, value_name = "FILE")]
    pub predictions: Option<PathBuf>,
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(ErrorKind::NotFound, "no such file or directory")))
    }
}

fn load_graph(dir: &Path) -> Result<KnowledgeGraph> {
    require(dir)?;
    let paths = KgPaths::from_dir(dir);
    for p in [&paths.train, &paths.valid, &paths.test] {
        require(p)?;
    }
    load_kg(&paths)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let kg = load_graph(&args.kg)?;
    let PipelineConfig {
        model: mut mc,
        train: mut tc,
        ..
    } = args.config.load()?;
    set(&mut mc.kind, args.kind);
    if let Some(d) = args.dim {
        mc.entity_dim = d;
        if args.relation_dim.is_none() && mc.kind != ModelKind::Tucker {
            mc.relation_dim = d;
        }
    }
    set(&mut mc.relation_dim, args.relation_dim);
    set(&mut mc.reciprocal, args.reciprocal);
    set(&mut mc.dropout_entity, args.dropout_entity);
    set(&mut mc.dropout_relation, args.dropout_relation);
    set(&mut mc.regularizer, args.regularizer);
    set(&mut mc.reg_entity_weight, args.reg_entity);
    set(&mut mc.reg_relation_weight, args.reg_relation);
    set(&mut mc.frequency_weighting, args.frequency_weighting);
    set(&mut tc.epochs, args.epochs);
    set(&mut tc.batch_size, args.batch_size);
    set(&mut tc.optimizer, args.optimizer);
    set(&mut tc.learning_rate, args.lr);
    set(&mut tc.negatives_per_direction, args.negatives);
    set(&mut tc.filter_negatives, args.filter_negatives);
    set(&mut tc.seed, args.seed);

    write_json(
        &args.load_report.clone().unwrap_or_else(|| sibling(&args.out, ".load.json")),
        kg.report(),
    )?;
    let trace_path = args.trace.clone().unwrap_or_else(|| sibling(&args.out, ".loss.csv"));
    let out = match trainer::train(&kg, &mc, &tc) {
        Ok(out) => out,
        Err(Error::Diverged { epoch, trace }) => {
            let stats: Vec<_> = trace
                .iter()
                .enumerate()
                .map(|(i, &mean_loss)| trainer::EpochStats {
                    epoch: i + 1,
                    mean_loss,
                    wall_seconds: 0.0,
                })
                .collect();
            write(&trace_path, trainer::trace_csv(&stats))?;
            return Err(Error::Diverged { epoch, trace });
        }
        Err(e) => return Err(e),
    };
    write(&trace_path, trainer::trace_csv(&out.trace))?;
    checkpoint::save(&out.model, &args.out)?;
    eprintln!(
        "trained {:?} for {} epochs; checkpoint {} (sha256 {})",
        mc.kind,
        tc.epochs,
        args.out.display(),
        checkpoint::digest(&out.model)
    );
    Ok(())
}

pub fn cmd_tune_thresholds(args: &TuneThresholdsArgs) -> Result<()> {
    let kg = load_graph(&args.kg)?;
    require(&args.model)?;
    let model = checkpoint::load(&args.model)?;
    let negatives = match (kg.valid_negatives(), args.synth) {
        (Some(n), false) => n.to_vec(),
        (_, true) => {
            let mut rng = SeedPath::new(args.seed).push("synth-negatives").rng();
            calibration::synth_negatives(kg.valid(), &kg, &mut rng)?
        }
        (None, false) => return Err(Error::MissingNegatives),
    };
    let th = calibration::tune(&model, kg.valid(), &negatives)?;
    th.write(&args.out, kg.relations())?;
    eprintln!(
        "tuned {} relation thresholds on {} positives / {} negatives",
        th.per_relation.len(),
        kg.valid().len(),
        negatives.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct RuleDiagnostics {
    rule_id: String,
    attempts: usize,
    instances: usize,
    constraint_rejections: usize,
    duplicate_counterfactuals: usize,
    neighborhood_discards: usize,
    corruption_discards: usize,
    fallback_corruptions: usize,
}

fn per_rule(atoms: &[AtomDiagnostics]) -> Vec<RuleDiagnostics> {
    let mut out: Vec<RuleDiagnostics> = Vec::new();
    for a in atoms {
        if out.last().map(|r| &r.rule_id) != Some(&a.rule_id) {
            out.push(RuleDiagnostics {
                rule_id: a.rule_id.clone(),
                attempts: 0,
                instances: 0,
                constraint_rejections: 0,
                duplicate_counterfactuals: 0,
                neighborhood_discards: 0,
                corruption_discards: 0,
                fallback_corruptions: 0,
            });
        }
        let r = out.last_mut().expect("pushed above");
        r.attempts += a.attempts;
        r.instances += a.instances;
        r.constraint_rejections += a.constraint_rejections;
        r.duplicate_counterfactuals += a.duplicate_counterfactuals;
        r.neighborhood_discards += a.neighborhood_discards;
        r.corruption_discards += a.corruption_discards;
        r.fallback_corruptions += a.fallback_corruptions;
    }
    out
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let kg = load_graph(&args.kg)?;
    require(&args.rules)?;
    let rules = read_rules(&args.rules, &kg)?;
    let mut gc = args.config.load()?.generate;
    set(&mut gc.per_atom, args.per_atom);
    set(&mut gc.max_attempts, args.max_attempts);
    set(&mut gc.n_valid_rules, args.valid_rules);
    set(&mut gc.typed_relations, args.typed_relations.clone());
    set(&mut gc.seed, args.seed);

    let generator = Generator::new(&kg, &rules, gc.clone())?;
    let (instances, atoms) = generator.generate()?;
    let total = instances.len();
    let split = split_valid_test(instances, gc.n_valid_rules, gc.seed)?;
    if split.test.is_empty() {
        return Err(Error::Config(format!(
            "unsatisfiable split: {} rules produced instances, none left for test after reserving {} for validation",
            split.report.valid_rules.len(),
            gc.n_valid_rules
        )));
    }
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    dataset::write_dataset(&args.out_dir.join("valid.jsonl"), &kg, &split.valid)?;
    dataset::write_dataset(&args.out_dir.join("test.jsonl"), &kg, &split.test)?;
    let fallbacks = split
        .valid
        .iter()
        .chain(&split.test)
        .flat_map(|i| &i.cases)
        .filter(|c| c.fallback)
        .count();
    write_json(
        &args.out_dir.join("diagnostics.json"),
        &json!({
            "config": gc,
            "instances": total,
            "valid_instances": split.valid.len(),
            "test_instances": split.test.len(),
            "fallback_cases": fallbacks,
            "split": split.report,
            "per_rule": per_rule(&atoms),
            "per_atom": atoms,
        }),
    )?;
    eprintln!(
        "generated {} instances: {} validation ({} rules), {} test",
        total,
        split.valid.len(),
        split.report.valid_rules.len(),
        split.test.len()
    );
    Ok(())
}

struct CoulddInputs {
    kg: KnowledgeGraph,
    model: crate::models::EmbeddingModel,
    thresholds: ThresholdSet,
    dataset: Vec<crate::benchgen::CfkgrInstance>,
    config: CoulddConfig,
}

fn couldd_inputs(a: &CoulddArgs) -> Result<CoulddInputs> {
    let kg = load_graph(&a.kg)?;
    for p in [&a.model, &a.thresholds, &a.dataset] {
        require(p)?;
    }
    let model = checkpoint::load(&a.model)?;
    let thresholds = ThresholdSet::read(&a.thresholds, kg.relations())?;
    let dataset = dataset::read_dataset(&a.dataset, &kg)?;
    let mut config = a.config.load()?.couldd;
    set(&mut config.max_iterations, a.max_iters);
    set(&mut config.repeats, a.repeats);
    set(&mut config.negatives_per_direction, a.negatives);
    set(&mut config.optimizer, a.optimizer);
    set(&mut config.seed, a.seed);
    Ok(CoulddInputs {
        kg,
        model,
        thresholds,
        dataset,
        config,
    })
}

pub fn cmd_couldd_eval(args: &CoulddEvalArgs) -> Result<()> {
    let mut inp = couldd_inputs(&args.common)?;
    set(&mut inp.config.learning_rate, args.lr);
    set(&mut inp.config.additional_samples, args.samples);
    let report = couldd::evaluate_dataset(&inp.model, &inp.kg, &inp.dataset, &inp.thresholds, &inp.config)?;
    write_json(&args.common.out, &report)?;
    eprintln!(
        "baseline F1 {:.4}; COULDD F1 {:.4} ± {:.4} over {} repeats",
        report.baseline.overall_f1, report.mean.overall_f1, report.std.overall_f1, inp.config.repeats
    );
    Ok(())
}

pub fn cmd_couldd_tune(args: &CoulddTuneArgs) -> Result<()> {
    let inp = couldd_inputs(&args.common)?;
    let report = couldd::couldd_tune(
        &inp.model,
        &inp.kg,
        &inp.dataset,
        &inp.thresholds,
        &inp.config,
        &args.lrs,
        &args.samples,
    )?;
    write_json(&args.common.out, &report)?;
    eprintln!(
        "best: lr {} samples {} (F1 {:.4})",
        report.best.learning_rate, report.best.additional_samples, report.best.mean.overall_f1
    );
    Ok(())
}

pub fn cmd_filter_inferable(args: &FilterArgs) -> Result<()> {
    let kg = load_graph(&args.kg)?;
    require(&args.rules)?;
    let rules = read_rules(&args.rules, &kg)?;
    let res = filter_inferable(&kg, &rules, args.min_cover);
    write(&args.out, kg.format_triples(&res.triples))?;
    let kept = res.per_rule.iter().filter(|r| r.kept).count();
    write_json(
        &args.rules_out.clone().unwrap_or_else(|| sibling(&args.out, ".rules.json")),
        &json!({
            "min_cover": args.min_cover,
            "triples": res.triples.len(),
            "rules_kept": kept,
            "per_rule": res.per_rule,
        }),
    )?;
    eprintln!("{} triples from {} rules", res.triples.len(), kept);
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    let kg = load_graph(&args.kg)?;
    for p in [&args.model, &args.thresholds, &args.dataset] {
        require(p)?;
    }
    let model = checkpoint::load(&args.model)?;
    let th = ThresholdSet::read(&args.thresholds, kg.relations())?;
    let instances = dataset::read_dataset(&args.dataset, &kg)?;
    let mut scores = Vec::with_capacity(instances.len());
    let mut preds = Vec::with_capacity(instances.len());
    for inst in &instances {
        let s: Vec<f64> = inst.cases.iter().map(|c| model.score_eval(c.triple)).collect();
        preds.push(
            inst.cases
                .iter()
                .zip(&s)
                .map(|(c, &x)| th.accepts(c.triple.relation, x) as u8)
                .collect::<Vec<u8>>(),
        );
        scores.push(s);
    }
    let labeled = label_predictions(&instances, &preds);
    let report = EvalReport::from_predictions(&labeled, instances.len());
    write_json(&args.out, &report)?;
    if let Some(path) = &args.predictions {
        let mut csv = String::from(
            "instance_id,head,rel,tail,kind,source_kind,original_label,label,score,prediction\n",
        );
        for ((inst, s), p) in instances.iter().zip(&scores).zip(&preds) {
            for ((c, x), y) in inst.cases.iter().zip(s).zip(p) {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{}",
                    inst.id,
                    kg.entities().label(c.triple.head),
                    kg.relations().label(c.triple.relation),
                    kg.entities().label(c.triple.tail),
                    serde_json::to_value(c.kind)?.as_str().unwrap_or_default(),
                    serde_json::to_value(c.source_kind)?.as_str().unwrap_or_default(),
                    c.original_label,
                    c.label(),
                    x,
                    y
                );
            }
        }
        write(path, csv)?;
    }
    eprintln!(
        "F1 {:.4}, changed accuracy {}, unchanged F1 {:.4}",
        report.overall_f1,
        report
            .changed_accuracy
            .map_or("n/a".to_owned(), |a| format!("{a:.4}")),
        report.unchanged_f1
    );
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::TuneThresholds(a) => cmd_tune_thresholds(a),
        Command::Generate(a) => cmd_generate(a),
        Command::CoulddEval(a) => cmd_couldd_eval(a),
        Command::CoulddTune(a) => cmd_couldd_tune(a),
        Command::FilterInferable(a) => cmd_filter_inferable(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => 2,
        _ => 1,
    }
}

/// Caps the global worker pool at `CFKGR_THREADS` when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = configure_threads().and_then(|_| execute(&cli));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["cfkgr", "train", "--kg", "x", "--out", "y", "--bogus"]), 2);
    }

    #[test]
    fn missing_kg_dir_exits_2() {
        assert_eq!(run(["cfkgr", "train", "--kg", "/nonexistent/kg", "--out", "/tmp/x"]), 2);
    }

    #[test]
    fn config_seed_propagates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 9, "model": {"kind": "TuckER"}}"#).unwrap();
        let c = PipelineConfig::read(&p).unwrap();
        assert_eq!((c.train.seed, c.generate.seed, c.couldd.seed), (9, 9, 9));
        assert_eq!(c.model.kind, ModelKind::Tucker);
        std::fs::write(&p, r#"{"sed": 9}"#).unwrap();
        assert!(PipelineConfig::read(&p).is_err());
    }
}
