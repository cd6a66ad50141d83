#![allow(dead_code)]

use std::collections::BTreeSet;

use cfkgr::benchgen::CompositionRule;
use cfkgr::kg::Triple;
use cfkgr::rng::SeedPath;
use cfkgr::KnowledgeGraph;
use rand::seq::SliceRandom;
use rand::Rng;

pub const GROUP: u32 = 100;
pub const CLUSTER: u32 = 5;
pub const R1: u32 = 0;
pub const R2: u32 = 1;
pub const R3: u32 = 2;

/// Graph with one planted composition rule `r1 ∘ r2 → r3`.
///
/// Entities form three groups A, B, C of 100, each split into 20 clusters of
/// five. Every rule instance picks a cluster `c` and `x ∈ A_c`, `y ∈ B_c`,
/// `z ∈ C_c`, adding `(x, r1, y)`, `(y, r2, z)` and the inference
/// `(x, r3, z)`. 80% of the inferences go to train, the rest is split
/// evenly into validation and test. Noise edges over three further
/// relations connect uniformly random entity pairs.
pub struct Planted {
    pub kg: KnowledgeGraph,
    pub rule: CompositionRule,
    pub held_out: Vec<Triple>,
}

pub fn planted(seed: u64, instances: usize, noise: usize) -> Planted {
    let mut rng = SeedPath::new(seed).push("planted").rng();
    let clusters = GROUP / CLUSTER;
    let mut pairs: Vec<(u32, u32)> = (0..clusters)
        .flat_map(|c| {
            (0..CLUSTER).flat_map(move |i| (0..CLUSTER).map(move |j| (c * CLUSTER + i, c * CLUSTER + j)))
        })
        .collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(instances);

    let mut body = BTreeSet::new();
    let mut inferences = Vec::with_capacity(instances);
    for &(xa, zc) in &pairs {
        let c = xa / CLUSTER;
        let y = GROUP + c * CLUSTER + rng.gen_range(0..CLUSTER);
        let (x, z) = (xa, 2 * GROUP + zc);
        body.insert(Triple::new(x, R1, y));
        body.insert(Triple::new(y, R2, z));
        inferences.push(Triple::new(x, R3, z));
    }
    let n_train = instances * 4 / 5;
    let held_out = inferences.split_off(n_train);
    let (valid, test) = held_out.split_at(held_out.len() / 2);

    let mut facts: BTreeSet<Triple> = body.iter().chain(&inferences).chain(&held_out).copied().collect();
    let mut train: Vec<Triple> = body.into_iter().chain(inferences).collect();
    let n = 3 * GROUP;
    let mut added = 0;
    while added < noise {
        let t = Triple::new(rng.gen_range(0..n), 3 + rng.gen_range(0..3), rng.gen_range(0..n));
        if t.head != t.tail && facts.insert(t) {
            train.push(t);
            added += 1;
        }
    }
    train.shuffle(&mut rng);
    let kg = KnowledgeGraph::from_ids(n as usize, 6, train, valid.to_vec(), test.to_vec()).unwrap();
    Planted {
        kg,
        rule: CompositionRule {
            id: "R".into(),
            r1: R1,
            r2: R2,
            r3: R3,
            support: instances as u64,
            pca_confidence: 1.0,
        },
        held_out,
    }
}

pub mod fd {
    use cfkgr::models::{EmbeddingModel, Frequencies, ModelConfig, ModelKind, Regularizer, SparseGrad};
    use cfkgr::rng::SeedPath;
    use cfkgr::trainer::{all_entities, loss_and_grad, NegativeSampler};
    use cfkgr::{KnowledgeGraph, Triple};

    pub const STEP: f64 = 1e-5;

    pub fn toy_graph() -> KnowledgeGraph {
        let train = vec![
            Triple::new(0, 0, 1),
            Triple::new(1, 1, 2),
            Triple::new(2, 2, 3),
            Triple::new(3, 0, 4),
            Triple::new(4, 1, 0),
            Triple::new(0, 2, 2),
        ];
        KnowledgeGraph::from_ids(5, 3, train, vec![], vec![]).unwrap()
    }

    pub fn config(kind: ModelKind, reg: Regularizer, reciprocal: bool, dropout: f64) -> ModelConfig {
        let mut c = ModelConfig::new(kind, 3);
        c.relation_dim = 2;
        c.reciprocal = reciprocal;
        c.regularizer = reg;
        c.reg_entity_weight = 0.05;
        c.reg_relation_weight = 0.03;
        c.frequency_weighting = reg == Regularizer::L3;
        c.dropout_entity = dropout;
        c.dropout_relation = dropout;
        c
    }

    fn loss(model: &EmbeddingModel, kg: &KnowledgeGraph, freq: &Frequencies) -> (f64, SparseGrad) {
        let pool = all_entities(kg.num_entities());
        let sampler = NegativeSampler {
            pool: &pool,
            per_direction: 3,
            filter: None,
        };
        let mut rng = SeedPath::new(11).push("fd").rng();
        loss_and_grad(model, kg.train(), &sampler, Some(freq), &mut rng).unwrap()
    }

    /// Which parameter block a coordinate belongs to.
    #[derive(Clone, Copy, Debug)]
    pub enum Block {
        Entity,
        Relation,
        Core,
    }

    fn block(m: &mut EmbeddingModel, b: Block) -> &mut [f64] {
        match b {
            Block::Entity => m.entity_params_mut(),
            Block::Relation => m.relation_params_mut(),
            Block::Core => m.core_params_mut(),
        }
    }

    fn analytic(g: &SparseGrad, b: Block, idx: usize, ew: usize, rw: usize) -> f64 {
        match b {
            Block::Entity => g.entity.get(&((idx / ew) as u32)).map_or(0.0, |r| r[idx % ew]),
            Block::Relation => g.relation.get(&((idx / rw) as u32)).map_or(0.0, |r| r[idx % rw]),
            Block::Core => g.core.as_ref().map_or(0.0, |c| c[idx]),
        }
    }

    pub struct Check {
        pub coordinates: usize,
        /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, 1e-3)`.
        pub max_rel_err: f64,
        pub worst: Option<(Block, usize, f64, f64)>,
    }

    /// Compares every coordinate of the analytic gradient of the full training
    /// loss with a central difference.
    pub fn check(cfg: ModelConfig) -> Check {
        let kg = toy_graph();
        let freq = Frequencies::from_triples(kg.train(), kg.num_entities(), kg.num_relations());
        let mut model = EmbeddingModel::init(cfg.clone(), kg.num_entities(), kg.num_relations(), 3).unwrap();
        let (_, grad) = loss(&model, &kg, &freq);
        let (ew, rw) = (cfg.entity_width(), cfg.relation_width());
        let mut out = Check {
            coordinates: 0,
            max_rel_err: 0.0,
            worst: None,
        };
        for b in [Block::Entity, Block::Relation, Block::Core] {
            for i in 0..block(&mut model, b).len() {
                let x = block(&mut model, b)[i];
                block(&mut model, b)[i] = x + STEP;
                let up = loss(&model, &kg, &freq).0;
                block(&mut model, b)[i] = x - STEP;
                let down = loss(&model, &kg, &freq).0;
                block(&mut model, b)[i] = x;
                let numeric = (up - down) / (2.0 * STEP);
                let a = analytic(&grad, b, i, ew, rw);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                out.coordinates += 1;
                if rel > out.max_rel_err {
                    out.max_rel_err = rel;
                    out.worst = Some((b, i, a, numeric));
                }
            }
        }
        out
    }

    /// Every model kind with every regularizer, reciprocal on and off, plus
    /// a dropout variant per kind.
    pub fn all_configs() -> Vec<(String, ModelConfig)> {
        let mut v = Vec::new();
        for kind in ModelKind::ALL {
            for reg in [Regularizer::None, Regularizer::L1, Regularizer::L2, Regularizer::L3] {
                for recip in [false, true] {
                    v.push((format!("{kind:?}/{reg:?}/recip={recip}"), config(kind, reg, recip, 0.0)));
                }
            }
            v.push((format!("{kind:?}/L2/dropout"), config(kind, Regularizer::L2, true, 0.2)));
        }
        v
    }
}

/// Brute-force checker for generated benchmark instances. It shares no code
/// with the generator beyond the data types: every set it needs is rebuilt
/// by scanning the fact list.
pub mod validate {
    use std::collections::{BTreeSet, HashSet};

    use cfkgr::benchgen::{CaseKind, CfkgrInstance, CompositionRule, SourceKind};
    use cfkgr::{KnowledgeGraph, Triple};

    fn facts(kg: &KnowledgeGraph) -> Vec<Triple> {
        kg.train().iter().chain(kg.valid()).chain(kg.test()).copied().collect()
    }

    fn shares_entity(a: Triple, b: Triple) -> bool {
        a.head == b.head || a.head == b.tail || a.tail == b.head || a.tail == b.tail
    }

    /// Conclusions of one rule step over `F ∪ {cf}` whose body uses `cf`.
    fn inferred(all: &[Triple], rules: &[CompositionRule], cf: Triple) -> BTreeSet<Triple> {
        let mut world: Vec<Triple> = all.to_vec();
        world.push(cf);
        let mut out = BTreeSet::new();
        for rule in rules {
            for &a in &world {
                for &b in &world {
                    if (a == cf || b == cf) && a.relation == rule.r1 && b.relation == rule.r2 && a.tail == b.head {
                        out.insert(Triple::new(a.head, rule.r3, b.tail));
                    }
                }
            }
        }
        out
    }

    pub fn instance(
        kg: &KnowledgeGraph,
        rules: &[CompositionRule],
        typed: &[&str],
        inst: &CfkgrInstance,
    ) -> Result<(), String> {
        let all = facts(kg);
        let fset: HashSet<Triple> = all.iter().copied().collect();
        let train: HashSet<Triple> = kg.train().iter().copied().collect();
        let rule = rules
            .iter()
            .find(|r| r.id == inst.rule_id)
            .ok_or("unknown rule id")?;
        let heads = |r: u32| all.iter().filter(|t| t.relation == r).map(|t| t.head).collect::<HashSet<_>>();
        let tails = |r: u32| all.iter().filter(|t| t.relation == r).map(|t| t.tail).collect::<HashSet<_>>();

        let [e1, e2] = inst.context;
        if !(train.contains(&e1) && train.contains(&e2) && e1.relation == rule.r1 && e2.relation == rule.r2) {
            return Err("context edges are not train edges of r1 / r2".into());
        }
        let (x, y, ybar, z) = (e1.head, e1.tail, e2.head, e2.tail);
        let cf = match inst.atom {
            1 => Triple::new(x, rule.r1, ybar),
            2 => Triple::new(y, rule.r2, z),
            a => return Err(format!("atom {a}")),
        };
        if inst.cf != cf || inst.inference != Triple::new(x, rule.r3, z) {
            return Err("cf / inference do not follow from the context".into());
        }
        if fset.contains(&inst.cf) || fset.contains(&inst.inference) {
            return Err("cf or inference already in F".into());
        }
        let i1 = if inst.atom == 1 { tails(rule.r1).contains(&ybar) } else { heads(rule.r2).contains(&y) };
        if !i1 {
            return Err("I1 violated".into());
        }
        if !heads(rule.r3).contains(&x) {
            return Err("I2 violated".into());
        }
        if !tails(rule.r3).contains(&z) {
            return Err("I3 violated".into());
        }
        let body_rel = if inst.atom == 1 { rule.r1 } else { rule.r2 };
        if typed.contains(&kg.relations().label(body_rel)) {
            let ty = |e| kg.entity_types(e).unwrap_or(&[]).to_vec();
            let (a, b) = (ty(y), ty(ybar));
            if !a.iter().any(|t| b.contains(t)) {
                return Err("I4 violated".into());
            }
        }

        if inst.cases.len() != 16 {
            return Err(format!("{} cases", inst.cases.len()));
        }
        use CaseKind as K;
        use SourceKind as S;
        let expect_fact = [(K::Inference, S::Inference), (K::Near, S::Near1), (K::Near, S::Near2), (K::Far, S::Far)];
        for (c, &(k, s)) in inst.cases.iter().zip(&expect_fact) {
            if (c.kind, c.source_kind) != (k, s) {
                return Err("fact cases out of order".into());
            }
            let orig = (k != K::Inference) as u8;
            if c.expected_label != 1 || c.original_label != orig {
                return Err("fact case labels".into());
            }
            if k != K::Inference && !fset.contains(&c.triple) {
                return Err("retained fact not in F".into());
            }
        }
        if inst.cases[0].triple != inst.inference {
            return Err("first case is not the inference".into());
        }
        let (n1, n2, far) = (inst.cases[1].triple, inst.cases[2].triple, inst.cases[3].triple);
        for n in [n1, n2] {
            if !shares_entity(n, cf) || n == cf || inst.context.contains(&n) {
                return Err("near fact outside the one-hop neighborhood".into());
            }
        }
        if n1 == n2 {
            return Err("near facts coincide".into());
        }
        if shares_entity(far, cf) {
            return Err("far fact inside the neighborhood".into());
        }

        let plus = inferred(&all, rules, cf);
        let forbidden = |t: &Triple| fset.contains(t) || plus.contains(t) || *t == cf;
        for (j, c) in inst.cases[4..].iter().enumerate() {
            let src = inst.cases[j / 3].triple;
            let kind = [K::HeadCorruption, K::RelationCorruption, K::TailCorruption][j % 3];
            if c.kind != kind || c.source_kind != inst.cases[j / 3].source_kind {
                return Err("corruption order".into());
            }
            if c.expected_label != 0 || c.original_label != 0 {
                return Err("corruption labels".into());
            }
            if forbidden(&c.triple) {
                return Err(format!("C3 violated by {:?}", c.triple));
            }
            let t = c.triple;
            let ok = match kind {
                K::HeadCorruption => {
                    let pool = heads(src.relation);
                    let any_constrained = pool.iter().any(|&e| e != src.head && !forbidden(&Triple { head: e, ..src }));
                    t.relation == src.relation
                        && t.tail == src.tail
                        && t.head != src.head
                        && (pool.contains(&t.head) != c.fallback)
                        && (c.fallback != any_constrained)
                }
                K::TailCorruption => {
                    let pool = tails(src.relation);
                    let any_constrained = pool.iter().any(|&e| e != src.tail && !forbidden(&Triple { tail: e, ..src }));
                    t.relation == src.relation
                        && t.head == src.head
                        && t.tail != src.tail
                        && (pool.contains(&t.tail) != c.fallback)
                        && (c.fallback != any_constrained)
                }
                _ => t.head == src.head && t.tail == src.tail && t.relation != src.relation && !c.fallback,
            };
            if !ok {
                return Err(format!("{kind:?} of {src:?} gave {t:?} (fallback {})", c.fallback));
            }
        }
        Ok(())
    }

    /// Checks every instance plus the dataset-level properties.
    pub fn dataset(
        kg: &KnowledgeGraph,
        rules: &[CompositionRule],
        typed: &[&str],
        valid: &[CfkgrInstance],
        test: &[CfkgrInstance],
    ) -> Result<(), String> {
        let mut seen = HashSet::new();
        for inst in valid.iter().chain(test) {
            instance(kg, rules, typed, inst).map_err(|e| format!("{}: {e}", inst.id))?;
            if !seen.insert((inst.rule_id.clone(), inst.atom, inst.cf)) {
                return Err(format!("{}: duplicate counterfactual", inst.id));
            }
        }
        let vcf: HashSet<Triple> = valid.iter().map(|i| i.cf).collect();
        if test.iter().any(|i| vcf.contains(&i.cf)) {
            return Err("validation and test share a counterfactual".into());
        }
        let vr: HashSet<&str> = valid.iter().map(|i| i.rule_id.as_str()).collect();
        if test.iter().any(|i| vr.contains(i.rule_id.as_str())) {
            return Err("a rule appears in both validation and test".into());
        }
        Ok(())
    }
}

/// Random graph with a few composition rules over its relations, typed
/// entities and a typed relation `r1`.
pub fn toy_benchmark_graph(seed: u64) -> (KnowledgeGraph, Vec<CompositionRule>) {
    let mut rng = SeedPath::new(seed).push("toy-kg").rng();
    let (ne, nr) = (40u32, 5u32);
    let mut set = BTreeSet::new();
    while set.len() < 260 {
        let t = Triple::new(rng.gen_range(0..ne), rng.gen_range(0..nr), rng.gen_range(0..ne));
        if t.head != t.tail {
            set.insert(t);
        }
    }
    let mut all: Vec<Triple> = set.into_iter().collect();
    all.shuffle(&mut rng);
    let test = all.split_off(all.len() - 20);
    let valid = all.split_off(all.len() - 20);
    let types = (0..ne)
        .map(|e| {
            let mut v = vec![format!("T{}", e % 3)];
            if e % 5 == 0 {
                v.push("T9".to_owned());
            }
            v
        })
        .collect();
    let kg = KnowledgeGraph::from_ids(ne as usize, nr as usize, all, valid, test)
        .unwrap()
        .with_entity_types(types)
        .unwrap();
    let rules = [(0, 1, 2), (1, 2, 3), (2, 3, 4), (3, 0, 1)]
        .iter()
        .enumerate()
        .map(|(i, &(r1, r2, r3))| CompositionRule {
            id: format!("R{i}"),
            r1,
            r2,
            r3,
            support: 10,
            pca_confidence: 0.5,
        })
        .collect();
    (kg, rules)
}

/// Second implementations of the metric and threshold definitions.
pub mod oracle {
    use cfkgr::metrics::LabeledPrediction;

    /// F1 from the four confusion counts of `(label, prediction)` pairs.
    pub fn f1(pairs: impl Iterator<Item = (u8, u8)>) -> f64 {
        let mut m = [[0usize; 2]; 2];
        for (y, p) in pairs {
            m[y as usize][p as usize] += 1;
        }
        let (tp, fp, fn_) = (m[1][1], m[0][1], m[1][0]);
        if tp + fp + fn_ == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    }

    pub fn overall_f1(p: &[LabeledPrediction]) -> f64 {
        f1(p.iter().map(|x| (x.label, x.prediction)))
    }

    pub fn changed_accuracy(p: &[LabeledPrediction]) -> Option<f64> {
        let changed: Vec<_> = p.iter().filter(|x| x.original_label != x.label).collect();
        if changed.is_empty() {
            return None;
        }
        let right = changed.iter().filter(|x| x.label == x.prediction).count();
        Some(right as f64 / changed.len() as f64)
    }

    pub fn unchanged_f1(p: &[LabeledPrediction]) -> f64 {
        f1(p.iter().filter(|x| x.original_label == x.label).map(|x| (x.label, x.prediction)))
    }

    /// Accuracy of the best threshold found by trying every midpoint between
    /// adjacent distinct scores and both infinities.
    pub fn best_sweep_accuracy(items: &[(f64, bool)]) -> usize {
        let mut scores: Vec<f64> = items.iter().map(|x| x.0).collect();
        scores.sort_by(f64::total_cmp);
        scores.dedup();
        let mut cands = vec![f64::NEG_INFINITY, f64::INFINITY];
        cands.extend(scores.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        cands
            .iter()
            .map(|&mu| items.iter().filter(|&&(s, y)| (s >= mu) == y).count())
            .max()
            .unwrap()
    }
}
