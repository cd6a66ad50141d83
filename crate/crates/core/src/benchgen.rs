//! Counterfactual benchmark generation from composition rules
//! `(X, r1, Y) ∧ (Y, r2, Z) → (X, r3, Z)`.
//!
//! For a rule and a body atom, the generator samples a pair of training edges
//! `e1 = (x, r1, y)` and `e2 = (ȳ, r2, z)`. Atom 1 turns `(x, r1, ȳ)` into the
//! hypothetical fact, atom 2 turns `(y, r2, z)` into it; either way the rule
//! then concludes `(x, r3, z)`. Each accepted scenario carries 16 test cases:
//! the inference, two near facts, one far fact, and a head, relation and tail
//! corruption of each of those four.
//!
//! Sampling constraints on `(e1, e2)`:
//! - I1: atom 1 needs `ȳ ∈ tails(r1)`, atom 2 needs `y ∈ heads(r2)`
//! - I2: `x ∈ heads(r3)`; I3: `z ∈ tails(r3)`
//! - I4 (typed relations only): `types(ȳ) ∩ types(y) ≠ ∅`
//!
//! Corruption constraints: a head replacement comes from `heads(r)` (C1), a
//! tail replacement from `tails(r)` (C2), and no corruption may lie in
//! `F ∪ F⁺_Δ` (C3). When C1/C2 leave nothing, the full entity set is used and
//! the case is flagged.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, NeighborhoodQuery, RelationId, Triple};
use crate::rng::{Rng, SeedPath};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionRule {
    pub id: String,
    pub r1: RelationId,
    pub r2: RelationId,
    pub r3: RelationId,
    pub support: u64,
    pub pca_confidence: f64,
}

/// Reads `rule_id<TAB>r1<TAB>r2<TAB>r3<TAB>support<TAB>pca_confidence`.
pub fn read_rules(path: &Path, kg: &KnowledgeGraph) -> Result<Vec<CompositionRule>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if cols.len() != 6 {
            return Err(parse_err(i + 1, format!("expected 6 columns, found {}", cols.len())));
        }
        let rel = |label: &str| {
            kg.relations()
                .id(label)
                .ok_or_else(|| Error::UnknownRelation(label.to_owned()))
        };
        let support = cols[4]
            .parse()
            .map_err(|_| parse_err(i + 1, format!("bad support {:?}", cols[4])))?;
        let pca_confidence: f64 = cols[5]
            .parse()
            .map_err(|_| parse_err(i + 1, format!("bad confidence {:?}", cols[5])))?;
        if !(0.0..=1.0).contains(&pca_confidence) {
            return Err(parse_err(i + 1, "confidence outside [0, 1]".into()));
        }
        rules.push(CompositionRule {
            id: cols[0].to_owned(),
            r1: rel(cols[1])?,
            r2: rel(cols[2])?,
            r3: rel(cols[3])?,
            support,
            pca_confidence,
        });
    }
    let mut ids = HashSet::new();
    for r in &rules {
        if !ids.insert(r.id.as_str()) {
            return Err(Error::Config(format!("duplicate rule id {:?}", r.id)));
        }
    }
    Ok(rules)
}

pub fn format_rules(rules: &[CompositionRule], kg: &KnowledgeGraph) -> String {
    let rel = |r| kg.relations().label(r);
    rules
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.id,
                rel(r.r1),
                rel(r.r2),
                rel(r.r3),
                r.support,
                r.pca_confidence
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Inference,
    Near,
    Far,
    HeadCorruption,
    RelationCorruption,
    TailCorruption,
}

impl CaseKind {
    pub fn is_corruption(self) -> bool {
        matches!(
            self,
            CaseKind::HeadCorruption | CaseKind::RelationCorruption | CaseKind::TailCorruption
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Inference,
    Near1,
    Near2,
    Far,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub triple: Triple,
    pub kind: CaseKind,
    pub source_kind: SourceKind,
    pub expected_label: u8,
    pub original_label: u8,
    /// Set when a head/tail corruption had to fall back to the full entity set.
    pub fallback: bool,
    /// Manually assigned label overriding `expected_label` in evaluation.
    pub human_label: Option<u8>,
}

impl TestCase {
    /// Counterfactual-world label used for scoring predictions.
    pub fn label(&self) -> u8 {
        self.human_label.unwrap_or(self.expected_label)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfkgrInstance {
    pub id: String,
    pub rule_id: String,
    pub atom: u8,
    pub cf: Triple,
    pub context: [Triple; 2],
    pub inference: Triple,
    pub cases: Vec<TestCase>,
}

pub const CASES_PER_INSTANCE: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub per_atom: usize,
    pub seed: u64,
    pub max_attempts: usize,
    pub typed_relations: Vec<String>,
    pub n_valid_rules: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            per_atom: 25,
            seed: 0,
            max_attempts: 500,
            typed_relations: vec!["P361".into(), "P463".into()],
            n_valid_rules: 5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomDiagnostics {
    pub rule_id: String,
    pub atom: u8,
    pub attempts: usize,
    pub instances: usize,
    pub constraint_rejections: usize,
    pub duplicate_counterfactuals: usize,
    pub neighborhood_discards: usize,
    pub corruption_discards: usize,
    pub fallback_corruptions: usize,
    /// Set when the atom stopped early because `max_attempts` ran out.
    pub exhausted: bool,
}

pub struct Generator<'a> {
    kg: &'a KnowledgeGraph,
    rules: &'a [CompositionRule],
    config: GenConfig,
    typed: HashSet<RelationId>,
}

/// One forward-chaining step of every rule over `F ∪ {cf}`, keeping only the
/// conclusions whose derivation uses `cf` in a body atom.
pub fn rule_inferences(
    kg: &KnowledgeGraph,
    rules: &[CompositionRule],
    cf: Triple,
) -> BTreeSet<Triple> {
    let index = kg.full_index();
    let mut out = BTreeSet::new();
    for rule in rules {
        if cf.relation == rule.r1 {
            let (x, y) = (cf.head, cf.tail);
            for &z in index.tails(y, rule.r2) {
                out.insert(Triple::new(x, rule.r3, z));
            }
            if cf.relation == rule.r2 && cf.head == y {
                out.insert(Triple::new(x, rule.r3, cf.tail));
            }
        }
        if cf.relation == rule.r2 {
            let (y, z) = (cf.head, cf.tail);
            for &x in index.heads(rule.r1, y) {
                out.insert(Triple::new(x, rule.r3, z));
            }
            if cf.relation == rule.r1 && cf.tail == y {
                out.insert(Triple::new(cf.head, rule.r3, z));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Head,
    Relation,
    Tail,
}

/// Triples a corruption must avoid: `F ∪ F⁺_Δ ∪ {τᶜ}`.
pub struct Forbidden<'a> {
    pub kg: &'a KnowledgeGraph,
    pub inferred: &'a BTreeSet<Triple>,
    pub cf: Triple,
}

impl Forbidden<'_> {
    pub fn contains(&self, t: Triple) -> bool {
        t == self.cf || self.kg.is_fact(t) || self.inferred.contains(&t)
    }
}

/// Corrupts one slot of `fact`. Returns the corruption and whether the
/// full-entity fallback was used.
pub fn corrupt_case(
    fact: Triple,
    slot: Slot,
    forbidden: &Forbidden<'_>,
    rng: &mut Rng,
) -> Result<(Triple, bool)> {
    let kg = forbidden.kg;
    let replace = |e: EntityId| match slot {
        Slot::Head => Triple { head: e, ..fact },
        _ => Triple { tail: e, ..fact },
    };
    let pick = |cands: Vec<Triple>, rng: &mut Rng| cands.choose(rng).copied();
    match slot {
        Slot::Relation => {
            let cands: Vec<Triple> = (0..kg.num_relations() as RelationId)
                .filter(|&r| r != fact.relation)
                .map(|r| Triple {
                    relation: r,
                    ..fact
                })
                .filter(|t| !forbidden.contains(*t))
                .collect();
            pick(cands, rng)
                .map(|t| (t, false))
                .ok_or(Error::NoCandidate { triple: fact })
        }
        Slot::Head | Slot::Tail => {
            let (pool, original) = match slot {
                Slot::Head => (kg.heads_of(fact.relation)?, fact.head),
                _ => (kg.tails_of(fact.relation)?, fact.tail),
            };
            let constrained: Vec<Triple> = pool
                .iter()
                .filter(|&&e| e != original)
                .map(|&e| replace(e))
                .filter(|t| !forbidden.contains(*t))
                .collect();
            if let Some(t) = pick(constrained, rng) {
                return Ok((t, false));
            }
            let all: Vec<Triple> = (0..kg.num_entities() as EntityId)
                .filter(|&e| e != original)
                .map(replace)
                .filter(|t| !forbidden.contains(*t))
                .collect();
            pick(all, rng)
                .map(|t| (t, true))
                .ok_or(Error::NoCandidate { triple: fact })
        }
    }
}

/// Two distinct near facts from the one-hop neighborhood of `cf` (minus the
/// context) and one far fact sharing no entity with `cf`. `None` when either
/// pool is too small.
pub fn sample_retained(
    kg: &KnowledgeGraph,
    cf: Triple,
    context: [Triple; 2],
    rng: &mut Rng,
) -> Option<(Triple, Triple, Triple)> {
    let near = kg.one_hop(&NeighborhoodQuery {
        center: cf,
        excluded: context.to_vec(),
    });
    if near.len() < 2 {
        return None;
    }
    let picked = sample(rng, near.len(), 2);
    let (n1, n2) = (near[picked.index(0)], near[picked.index(1)]);

    let facts = kg.facts();
    let far_ok = |t: &Triple| !t.touches(cf.head) && !t.touches(cf.tail);
    for _ in 0..256 {
        let t = facts[rng.gen_range(0..facts.len())];
        if far_ok(&t) {
            return Some((n1, n2, t));
        }
    }
    let far: Vec<Triple> = facts.iter().filter(|t| far_ok(t)).copied().collect();
    far.choose(rng).map(|&f| (n1, n2, f))
}

enum Attempt {
    Rejected,
    Duplicate,
    Neighborhood,
    Corruption,
    Accepted(Box<CfkgrInstance>, usize),
}

impl<'a> Generator<'a> {
    pub fn new(kg: &'a KnowledgeGraph, rules: &'a [CompositionRule], config: GenConfig) -> Result<Self> {
        if config.per_atom == 0 {
            return Err(Error::Config("per_atom must be at least 1".into()));
        }
        for rule in rules {
            for r in [rule.r1, rule.r2, rule.r3] {
                if r as usize >= kg.num_relations() {
                    return Err(Error::UnknownRelation(r.to_string()));
                }
            }
        }
        let typed = config
            .typed_relations
            .iter()
            .filter_map(|l| kg.relations().id(l))
            .collect();
        Ok(Generator {
            kg,
            rules,
            config,
            typed,
        })
    }

    pub fn config(&self) -> &GenConfig {
        &self.config
    }

    /// Whether I4 applies to scenarios built from `atom` of `rule`.
    pub fn needs_types(&self, rule: &CompositionRule, atom: u8) -> bool {
        let r = if atom == 1 { rule.r1 } else { rule.r2 };
        self.typed.contains(&r)
    }

    /// Up to `per_atom` instances for one rule and body atom.
    pub fn generate_for_rule(
        &self,
        rule: &CompositionRule,
        atom: u8,
        rng: &mut Rng,
    ) -> Result<(Vec<CfkgrInstance>, AtomDiagnostics)> {
        assert!(atom == 1 || atom == 2, "atom must be 1 or 2");
        let kg = self.kg;
        let typed = self.needs_types(rule, atom);
        if typed && !kg.has_entity_types() {
            let r = if atom == 1 { rule.r1 } else { rule.r2 };
            return Err(Error::MissingEntityTypes {
                relation: kg.relations().label(r).to_owned(),
            });
        }
        let mut diag = AtomDiagnostics {
            rule_id: rule.id.clone(),
            atom,
            ..Default::default()
        };
        let first = kg.train_index().with_relation(rule.r1);
        let second = kg.train_index().with_relation(rule.r2);
        let mut out = Vec::new();
        if first.is_empty() || second.is_empty() {
            diag.exhausted = true;
            return Ok((out, diag));
        }
        let mut seen = HashSet::new();
        while out.len() < self.config.per_atom {
            let mut accepted = false;
            for _ in 0..self.config.max_attempts {
                diag.attempts += 1;
                let e1 = first[rng.gen_range(0..first.len())];
                let e2 = second[rng.gen_range(0..second.len())];
                match self.attempt(rule, atom, typed, e1, e2, &seen, rng)? {
                    Attempt::Rejected => diag.constraint_rejections += 1,
                    Attempt::Duplicate => diag.duplicate_counterfactuals += 1,
                    Attempt::Neighborhood => diag.neighborhood_discards += 1,
                    Attempt::Corruption => diag.corruption_discards += 1,
                    Attempt::Accepted(inst, fallbacks) => {
                        diag.fallback_corruptions += fallbacks;
                        seen.insert(inst.cf);
                        out.push(*inst);
                        accepted = true;
                        break;
                    }
                }
            }
            if !accepted {
                diag.exhausted = true;
                break;
            }
        }
        diag.instances = out.len();
        Ok((out, diag))
    }

    #[allow(clippy::too_many_arguments)]
    fn attempt(
        &self,
        rule: &CompositionRule,
        atom: u8,
        typed: bool,
        e1: Triple,
        e2: Triple,
        seen: &HashSet<Triple>,
        rng: &mut Rng,
    ) -> Result<Attempt> {
        let kg = self.kg;
        let (x, y) = (e1.head, e1.tail);
        let (ybar, z) = (e2.head, e2.tail);
        let i1 = if atom == 1 {
            kg.tails_of(rule.r1)?.binary_search(&ybar).is_ok()
        } else {
            kg.heads_of(rule.r2)?.binary_search(&y).is_ok()
        };
        let i2 = kg.heads_of(rule.r3)?.binary_search(&x).is_ok();
        let i3 = kg.tails_of(rule.r3)?.binary_search(&z).is_ok();
        let i4 = !typed || shares_type(kg, y, ybar);
        if !(i1 && i2 && i3 && i4) {
            return Ok(Attempt::Rejected);
        }
        let cf = if atom == 1 {
            Triple::new(x, rule.r1, ybar)
        } else {
            Triple::new(y, rule.r2, z)
        };
        let inference = Triple::new(x, rule.r3, z);
        if kg.is_fact(cf) || kg.is_fact(inference) {
            return Ok(Attempt::Rejected);
        }
        if seen.contains(&cf) {
            return Ok(Attempt::Duplicate);
        }
        let context = [e1, e2];
        let Some((n1, n2, far)) = sample_retained(kg, cf, context, rng) else {
            return Ok(Attempt::Neighborhood);
        };
        let inferred = rule_inferences(kg, self.rules, cf);
        let forbidden = Forbidden {
            kg,
            inferred: &inferred,
            cf,
        };
        let facts = [
            (inference, SourceKind::Inference, CaseKind::Inference, 0u8),
            (n1, SourceKind::Near1, CaseKind::Near, 1),
            (n2, SourceKind::Near2, CaseKind::Near, 1),
            (far, SourceKind::Far, CaseKind::Far, 1),
        ];
        let mut cases = Vec::with_capacity(CASES_PER_INSTANCE);
        for &(t, source_kind, kind, original_label) in &facts {
            cases.push(TestCase {
                triple: t,
                kind,
                source_kind,
                expected_label: 1,
                original_label,
                fallback: false,
                human_label: None,
            });
        }
        let mut fallbacks = 0;
        for &(t, source_kind, _, _) in &facts {
            for (slot, kind) in [
                (Slot::Head, CaseKind::HeadCorruption),
                (Slot::Relation, CaseKind::RelationCorruption),
                (Slot::Tail, CaseKind::TailCorruption),
            ] {
                let Ok((c, fallback)) = corrupt_case(t, slot, &forbidden, rng) else {
                    return Ok(Attempt::Corruption);
                };
                fallbacks += fallback as usize;
                cases.push(TestCase {
                    triple: c,
                    kind,
                    source_kind,
                    expected_label: 0,
                    original_label: 0,
                    fallback,
                    human_label: None,
                });
            }
        }
        Ok(Attempt::Accepted(
            Box::new(CfkgrInstance {
                id: String::new(),
                rule_id: rule.id.clone(),
                atom,
                cf,
                context,
                inference,
                cases,
            }),
            fallbacks,
        ))
    }

    /// Runs every (rule, atom) pair on its own substream and returns the
    /// instances sorted by `(rule_id, atom, cf)` with ids assigned in that
    /// order.
    pub fn generate(&self) -> Result<(Vec<CfkgrInstance>, Vec<AtomDiagnostics>)> {
        let jobs: Vec<(&CompositionRule, u8)> = self
            .rules
            .iter()
            .flat_map(|r| [(r, 1u8), (r, 2u8)])
            .collect();
        let results: Vec<Result<(Vec<CfkgrInstance>, AtomDiagnostics)>> = jobs
            .par_iter()
            .map(|&(rule, atom)| {
                let mut rng = SeedPath::new(self.config.seed)
                    .push("benchgen")
                    .push(&rule.id)
                    .push_u64(atom as u64)
                    .rng();
                self.generate_for_rule(rule, atom, &mut rng)
            })
            .collect();
        let mut instances = Vec::new();
        let mut diags = Vec::new();
        for r in results {
            let (mut inst, d) = r?;
            instances.append(&mut inst);
            diags.push(d);
        }
        instances.sort_by(|a, b| (&a.rule_id, a.atom, a.cf).cmp(&(&b.rule_id, b.atom, b.cf)));
        let mut counter: BTreeMap<(String, u8), usize> = BTreeMap::new();
        for inst in &mut instances {
            let n = counter.entry((inst.rule_id.clone(), inst.atom)).or_default();
            inst.id = format!("{}-a{}-{:03}", inst.rule_id, inst.atom, n);
            *n += 1;
        }
        diags.sort_by(|a, b| (&a.rule_id, a.atom).cmp(&(&b.rule_id, b.atom)));
        Ok((instances, diags))
    }
}

fn shares_type(kg: &KnowledgeGraph, a: EntityId, b: EntityId) -> bool {
    match (kg.entity_types(a), kg.entity_types(b)) {
        (Some(ta), Some(tb)) => ta.iter().any(|t| tb.binary_search(t).is_ok()),
        _ => false,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub valid_rules: Vec<String>,
    pub test_rules: Vec<String>,
    /// Test instances dropped because their counterfactual also occurs in
    /// validation.
    pub dropped_overlaps: Vec<String>,
    /// Groups of test instance ids sharing the same (cf, inference) pair.
    pub duplicate_pairs: Vec<Vec<String>>,
    pub warnings: Vec<String>,
}

pub struct Split {
    pub valid: Vec<CfkgrInstance>,
    pub test: Vec<CfkgrInstance>,
    pub report: SplitReport,
}

/// Assigns whole rules to validation (a seeded choice of `n_valid_rules`
/// rules) and the rest to test. Test instances whose counterfactual already
/// occurs in validation are dropped and reported.
pub fn split_valid_test(instances: Vec<CfkgrInstance>, n_valid_rules: usize, seed: u64) -> Result<Split> {
    let mut rule_ids: Vec<String> = instances.iter().map(|i| i.rule_id.clone()).collect();
    rule_ids.sort();
    rule_ids.dedup();
    let mut order = rule_ids.clone();
    order.shuffle(&mut SeedPath::new(seed).push("split").rng());
    let mut valid_rules: Vec<String> = order.iter().take(n_valid_rules).cloned().collect();
    valid_rules.sort();
    let mut report = SplitReport {
        test_rules: rule_ids
            .iter()
            .filter(|r| !valid_rules.contains(r))
            .cloned()
            .collect(),
        valid_rules,
        ..Default::default()
    };
    if report.test_rules.is_empty() {
        report.warnings.push("test split is empty".into());
    }
    if report.valid_rules.len() < n_valid_rules {
        report.warnings.push(format!(
            "only {} rules available for {} validation rules",
            report.valid_rules.len(),
            n_valid_rules
        ));
    }

    let (valid, test_all): (Vec<_>, Vec<_>) = instances
        .into_iter()
        .partition(|i| report.valid_rules.contains(&i.rule_id));
    let valid_cfs: HashSet<Triple> = valid.iter().map(|i| i.cf).collect();
    let mut test = Vec::with_capacity(test_all.len());
    for inst in test_all {
        if valid_cfs.contains(&inst.cf) {
            report.dropped_overlaps.push(inst.id.clone());
        } else {
            test.push(inst);
        }
    }
    if let Some(inst) = test.iter().find(|i| valid_cfs.contains(&i.cf)) {
        return Err(Error::SplitOverlap(inst.cf));
    }

    let mut pairs: BTreeMap<(Triple, Triple), Vec<String>> = BTreeMap::new();
    for inst in &test {
        pairs
            .entry((inst.cf, inst.inference))
            .or_default()
            .push(inst.id.clone());
    }
    report.duplicate_pairs = pairs.into_values().filter(|v| v.len() > 1).collect();
    Ok(Split {
        valid,
        test,
        report,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleCover {
    pub rule_id: String,
    pub cover: usize,
    pub kept: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterResult {
    /// Covered test triples, in test-split order.
    pub triples: Vec<Triple>,
    pub per_rule: Vec<RuleCover>,
}

/// Test triples derivable by one rule application over the training split,
/// restricted to rules that cover at least `min_cover` test triples.
pub fn filter_inferable(kg: &KnowledgeGraph, rules: &[CompositionRule], min_cover: usize) -> FilterResult {
    let test: HashSet<Triple> = kg.test().iter().copied().collect();
    let index = kg.train_index();
    let mut covered_by: Vec<HashSet<Triple>> = Vec::with_capacity(rules.len());
    for rule in rules {
        let mut hits = HashSet::new();
        for e1 in index.with_relation(rule.r1) {
            for &z in index.tails(e1.tail, rule.r2) {
                let t = Triple::new(e1.head, rule.r3, z);
                if test.contains(&t) {
                    hits.insert(t);
                }
            }
        }
        covered_by.push(hits);
    }
    let per_rule: Vec<RuleCover> = rules
        .iter()
        .zip(&covered_by)
        .map(|(r, hits)| RuleCover {
            rule_id: r.id.clone(),
            cover: hits.len(),
            kept: hits.len() >= min_cover,
        })
        .collect();
    let kept: HashSet<Triple> = covered_by
        .iter()
        .zip(&per_rule)
        .filter(|(_, c)| c.kept)
        .flat_map(|(h, _)| h.iter().copied())
        .collect();
    FilterResult {
        triples: kg.test().iter().copied().filter(|t| kept.contains(t)).collect(),
        per_rule,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn rule(r1: u32, r2: u32, r3: u32) -> CompositionRule {
        CompositionRule {
            id: "R".into(),
            r1,
            r2,
            r3,
            support: 1,
            pca_confidence: 1.0,
        }
    }

    #[test]
    fn inferences_from_first_atom() {
        // cf = (0, r0, 1); continuations (1, r1, {2, 3, 4})
        let train = vec![
            Triple::new(1, 1, 2),
            Triple::new(1, 1, 3),
            Triple::new(1, 1, 4),
            Triple::new(5, 1, 6),
        ];
        let kg = KnowledgeGraph::from_ids(7, 3, train, vec![], vec![]).unwrap();
        let got = rule_inferences(&kg, &[rule(0, 1, 2)], Triple::new(0, 0, 1));
        let want: BTreeSet<_> = [2, 3, 4].iter().map(|&z| Triple::new(0, 2, z)).collect();
        assert_eq!(got, want);
        assert!(rule_inferences(&kg, &[rule(0, 1, 2)], Triple::new(0, 2, 1)).is_empty());
    }

    #[test]
    fn inferences_keep_known_facts() {
        let train = vec![Triple::new(1, 1, 2), Triple::new(0, 2, 2)];
        let kg = KnowledgeGraph::from_ids(3, 3, train, vec![], vec![]).unwrap();
        let got = rule_inferences(&kg, &[rule(0, 1, 2)], Triple::new(0, 0, 1));
        assert!(got.contains(&Triple::new(0, 2, 2)));
    }

    #[test]
    fn inference_using_cf_twice() {
        // r1 = r2: cf (0, r0, 0) chains with itself.
        let kg = KnowledgeGraph::from_ids(2, 2, vec![Triple::new(1, 0, 1)], vec![], vec![]).unwrap();
        let got = rule_inferences(&kg, &[rule(0, 0, 1)], Triple::new(0, 0, 0));
        assert!(got.contains(&Triple::new(0, 1, 0)));
    }

    #[test]
    fn forced_fallback_picks_only_candidate() {
        // heads_of(r0) = {0}, so C1 has nothing but the original; of the
        // other entities only 2 yields a triple outside F.
        let train = vec![Triple::new(0, 0, 1), Triple::new(1, 1, 1), Triple::new(3, 1, 1)];
        let kg = KnowledgeGraph::from_ids(4, 2, train, vec![], vec![]).unwrap();
        let inferred = BTreeSet::from([Triple::new(3, 0, 1)]);
        let forbidden = Forbidden {
            kg: &kg,
            inferred: &inferred,
            cf: Triple::new(1, 0, 1),
        };
        let mut rng = substream(0, "c");
        for _ in 0..20 {
            let (t, fb) = corrupt_case(Triple::new(0, 0, 1), Slot::Head, &forbidden, &mut rng).unwrap();
            assert!(fb);
            assert_eq!(t, Triple::new(2, 0, 1));
        }
    }

    #[test]
    fn relation_corruption_avoids_original_and_forbidden() {
        let train: Vec<Triple> = (0..6).map(|r| Triple::new(0, r, 1)).filter(|t| t.relation != 2).collect();
        let kg = KnowledgeGraph::from_ids(2, 8, train, vec![], vec![]).unwrap();
        let inferred = BTreeSet::from([Triple::new(0, 6, 1)]);
        let forbidden = Forbidden {
            kg: &kg,
            inferred: &inferred,
            cf: Triple::new(0, 7, 1),
        };
        let mut rng = substream(0, "r");
        for _ in 0..100 {
            let (t, _) = corrupt_case(Triple::new(0, 0, 1), Slot::Relation, &forbidden, &mut rng).unwrap();
            assert_eq!(t, Triple::new(0, 2, 1));
        }
    }

    #[test]
    fn neighborhood_of_exactly_two() {
        let train = vec![
            Triple::new(0, 0, 1), // context
            Triple::new(0, 1, 2),
            Triple::new(3, 1, 0),
            Triple::new(4, 0, 5),
        ];
        let kg = KnowledgeGraph::from_ids(6, 2, train, vec![], vec![]).unwrap();
        let cf = Triple::new(0, 0, 0);
        let ctx = [Triple::new(0, 0, 1), Triple::new(0, 0, 1)];
        let mut rng = substream(0, "n");
        let (n1, n2, far) = sample_retained(&kg, cf, ctx, &mut rng).unwrap();
        let mut near = [n1, n2];
        near.sort();
        assert_eq!(near, [Triple::new(0, 1, 2), Triple::new(3, 1, 0)]);
        assert_eq!(far, Triple::new(4, 0, 5));
    }

    #[test]
    fn unsatisfiable_rule_yields_nothing() {
        // r0 edges end in {1}, r1 edges start at {2}: I1 for atom 1 needs a
        // tail of r0 to head an r1 edge, impossible; atom 2 needs the head of
        // an r1 edge in heads(r1) = {2} while y = 1.
        let train = vec![Triple::new(0, 0, 1), Triple::new(2, 1, 3), Triple::new(0, 2, 3)];
        let kg = KnowledgeGraph::from_ids(4, 3, train, vec![], vec![]).unwrap();
        let rules = [rule(0, 1, 2)];
        let gen = Generator::new(&kg, &rules, GenConfig { max_attempts: 50, ..Default::default() }).unwrap();
        let mut rng = substream(0, "g");
        for atom in [1, 2] {
            let (inst, diag) = gen.generate_for_rule(&rules[0], atom, &mut rng).unwrap();
            assert!(inst.is_empty());
            assert!(diag.exhausted);
        }
    }

    #[test]
    fn typed_rule_without_types_fails_fast() {
        let kg = KnowledgeGraph::from_ids(3, 3, vec![Triple::new(0, 0, 1)], vec![], vec![]).unwrap();
        let rules = [rule(0, 1, 2)];
        let cfg = GenConfig {
            typed_relations: vec!["r0".into()],
            ..Default::default()
        };
        let gen = Generator::new(&kg, &rules, cfg).unwrap();
        let mut rng = substream(0, "g");
        assert!(matches!(
            gen.generate_for_rule(&rules[0], 1, &mut rng),
            Err(Error::MissingEntityTypes { .. })
        ));
        // atom 2 turns r1 into the counterfactual, which is untyped
        assert!(gen.generate_for_rule(&rules[0], 2, &mut rng).is_ok());
    }

    fn dummy_instance(rule_id: &str, n: u32) -> CfkgrInstance {
        CfkgrInstance {
            id: format!("{rule_id}-{n}"),
            rule_id: rule_id.into(),
            atom: 1,
            cf: Triple::new(n, 0, n + 1),
            context: [Triple::new(0, 0, 0); 2],
            inference: Triple::new(n, 1, n + 2),
            cases: vec![],
        }
    }

    #[test]
    fn split_whole_rules() {
        let instances: Vec<_> = (0..17)
            .flat_map(|r| (0..3).map(move |n| dummy_instance(&format!("rule{r:02}"), r * 10 + n)))
            .collect();
        let split = split_valid_test(instances, 5, 0).unwrap();
        assert_eq!(split.report.valid_rules.len(), 5);
        assert_eq!(split.report.test_rules.len(), 12);
        assert!(split
            .valid
            .iter()
            .all(|i| split.report.valid_rules.contains(&i.rule_id)));
        assert_eq!(split.valid.len() + split.test.len(), 51);
    }

    #[test]
    fn single_rule_split_warns() {
        let split = split_valid_test(vec![dummy_instance("a", 0)], 1, 0).unwrap();
        assert!(split.test.is_empty());
        assert!(!split.report.warnings.is_empty());
    }

    #[test]
    fn duplicate_pairs_flagged_and_overlaps_dropped() {
        let mut a = dummy_instance("a", 0);
        let b = dummy_instance("b", 0); // same cf as a
        let mut c = dummy_instance("c", 5);
        let mut d = dummy_instance("d", 5); // same (cf, inference) as c
        a.id = "a0".into();
        c.id = "c0".into();
        d.id = "d0".into();
        // pick seed so that "a" goes to validation
        let seed = (0..100)
            .find(|&s| {
                split_valid_test(vec![a.clone(), b.clone(), c.clone(), d.clone()], 1, s)
                    .unwrap()
                    .report
                    .valid_rules
                    == ["a"]
            })
            .unwrap();
        let split = split_valid_test(vec![a, b, c, d], 1, seed).unwrap();
        assert_eq!(split.report.dropped_overlaps, ["b-0"]);
        assert_eq!(split.report.duplicate_pairs, vec![vec!["c0".to_string(), "d0".into()]]);
    }

    #[test]
    fn filter_counts_join() {
        let train = vec![
            Triple::new(0, 0, 1),
            Triple::new(1, 1, 2),
            Triple::new(1, 1, 3),
            Triple::new(4, 0, 1),
        ];
        let test = vec![Triple::new(0, 2, 2), Triple::new(4, 2, 3), Triple::new(0, 2, 5)];
        let kg = KnowledgeGraph::from_ids(6, 3, train, vec![], test).unwrap();
        let rules = [rule(0, 1, 2)];
        let res = filter_inferable(&kg, &rules, 2);
        assert_eq!(res.triples, vec![Triple::new(0, 2, 2), Triple::new(4, 2, 3)]);
        assert_eq!(res.per_rule[0].cover, 2);
        assert!(filter_inferable(&kg, &rules, 3).triples.is_empty());
        assert!(filter_inferable(&kg, &[], 0).triples.is_empty());
    }
}
