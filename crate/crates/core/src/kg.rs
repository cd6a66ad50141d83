//! Knowledge-graph storage: vocabularies, the train/valid/test fact splits,
//! and the indexes the generator and trainer query.
//!
//! A [`KnowledgeGraph`] is immutable once built. Ids are assigned by first
//! appearance in train, then valid, then test, then the negative files.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type EntityId = u32;
pub type RelationId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub const fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }

    pub fn touches(&self, entity: EntityId) -> bool {
        self.head == entity || self.tail == entity
    }
}

/// Which fact set a membership query consults.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Train,
    Full,
}

#[derive(Clone, Debug, Default)]
pub struct Vocab {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_labels(labels: Vec<String>) -> Self {
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect();
        Vocab { labels, index }
    }

    fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn id(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> &str {
        &self.labels[id as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Join indexes over one fact list: `(head, relation) -> tails` and
/// `(relation, tail) -> heads`.
#[derive(Clone, Debug, Default)]
pub struct FactIndex {
    tails: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    heads: HashMap<(RelationId, EntityId), Vec<EntityId>>,
    by_relation: Vec<Vec<Triple>>,
}

impl FactIndex {
    pub fn build(facts: &[Triple], num_relations: usize) -> Self {
        let mut index = FactIndex {
            by_relation: vec![Vec::new(); num_relations],
            ..Default::default()
        };
        for &t in facts {
            index.tails.entry((t.head, t.relation)).or_default().push(t.tail);
            index.heads.entry((t.relation, t.tail)).or_default().push(t.head);
            index.by_relation[t.relation as usize].push(t);
        }
        index
    }

    pub fn tails(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.tails.get(&(head, relation)).map_or(&[], Vec::as_slice)
    }

    pub fn heads(&self, relation: RelationId, tail: EntityId) -> &[EntityId] {
        self.heads.get(&(relation, tail)).map_or(&[], Vec::as_slice)
    }

    /// Facts with the given relation, in fact-list order.
    pub fn with_relation(&self, relation: RelationId) -> &[Triple] {
        self.by_relation
            .get(relation as usize)
            .map_or(&[], Vec::as_slice)
    }
}

/// Center triple and the edges a neighborhood query must never return.
#[derive(Clone, Debug)]
pub struct NeighborhoodQuery {
    pub center: Triple,
    pub excluded: Vec<Triple>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub valid_negatives: Option<usize>,
    pub test_negatives: Option<usize>,
    pub typed_entities: Option<usize>,
    /// Relations that never occur in the training split.
    pub relations_not_in_train: Vec<String>,
    /// Entities that never occur in the training split.
    pub entities_not_in_train: usize,
    /// Entity labels in the type file that occur in no split.
    pub unknown_typed_entities: Vec<String>,
}

/// Raw labeled input for [`KnowledgeGraph::from_labeled`].
#[derive(Clone, Debug, Default)]
pub struct LabeledSplits {
    pub train: Vec<[String; 3]>,
    pub valid: Vec<[String; 3]>,
    pub test: Vec<[String; 3]>,
    pub valid_negatives: Option<Vec<[String; 3]>>,
    pub test_negatives: Option<Vec<[String; 3]>>,
    pub entity_types: Option<Vec<[String; 2]>>,
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    valid_negatives: Option<Vec<Triple>>,
    test_negatives: Option<Vec<Triple>>,
    entity_types: Option<Vec<Vec<String>>>,
    /// train ++ valid ++ test
    facts: Vec<Triple>,
    full_set: HashSet<Triple>,
    train_set: HashSet<Triple>,
    full_index: FactIndex,
    train_index: FactIndex,
    heads_by_relation: Vec<Vec<EntityId>>,
    tails_by_relation: Vec<Vec<EntityId>>,
    /// Per entity, indexes into `facts` of every fact touching it.
    incident: Vec<Vec<u32>>,
    report: LoadReport,
}

/// Paths for [`load_kg`].
#[derive(Clone, Debug)]
pub struct KgPaths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    pub valid_negatives: Option<PathBuf>,
    pub test_negatives: Option<PathBuf>,
    pub entity_types: Option<PathBuf>,
}

impl KgPaths {
    /// CoDEx-style directory: `train.txt`, `valid.txt`, `test.txt`, and
    /// optionally `valid_negatives.txt`, `test_negatives.txt`,
    /// `entity_types.tsv`.
    pub fn from_dir(dir: &Path) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        KgPaths {
            train: dir.join("train.txt"),
            valid: dir.join("valid.txt"),
            test: dir.join("test.txt"),
            valid_negatives: opt("valid_negatives.txt"),
            test_negatives: opt("test_negatives.txt"),
            entity_types: opt("entity_types.tsv"),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_tsv<const N: usize>(path: &Path) -> Result<Vec<[String; N]>> {
    let text = read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != N || cols.iter().any(|c| c.is_empty()) {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: format!("expected {N} tab-separated columns, found {}", cols.len()),
            });
        }
        let mut row: [String; N] = std::array::from_fn(|_| String::new());
        for (slot, col) in row.iter_mut().zip(cols) {
            *slot = col.to_owned();
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a triple TSV file into label triples.
pub fn read_triples(path: &Path) -> Result<Vec<[String; 3]>> {
    parse_tsv::<3>(path)
}

pub fn load_kg(paths: &KgPaths) -> Result<KnowledgeGraph> {
    let train = read_triples(&paths.train)?;
    if train.is_empty() {
        return Err(Error::NoFacts(paths.train.display().to_string()));
    }
    let splits = LabeledSplits {
        train,
        valid: read_triples(&paths.valid)?,
        test: read_triples(&paths.test)?,
        valid_negatives: paths.valid_negatives.as_deref().map(read_triples).transpose()?,
        test_negatives: paths.test_negatives.as_deref().map(read_triples).transpose()?,
        entity_types: paths.entity_types.as_deref().map(parse_tsv::<2>).transpose()?,
    };
    KnowledgeGraph::from_labeled(splits)
}

impl KnowledgeGraph {
    pub fn from_labeled(splits: LabeledSplits) -> Result<Self> {
        let mut entities = Vocab::default();
        let mut relations = Vocab::default();
        let mut convert = |rows: &[[String; 3]]| -> Vec<Triple> {
            rows.iter()
                .map(|[h, r, t]| {
                    let head = entities.intern(h);
                    let relation = relations.intern(r);
                    let tail = entities.intern(t);
                    Triple::new(head, relation, tail)
                })
                .collect()
        };
        let train = convert(&splits.train);
        let valid = convert(&splits.valid);
        let test = convert(&splits.test);
        let valid_negatives = splits.valid_negatives.as_deref().map(&mut convert);
        let test_negatives = splits.test_negatives.as_deref().map(&mut convert);

        let mut unknown_typed = Vec::new();
        let entity_types = splits.entity_types.map(|rows| {
            let mut types = vec![Vec::new(); entities.len()];
            for [e, ty] in rows {
                match entities.id(&e) {
                    Some(id) => types[id as usize].push(ty),
                    None => unknown_typed.push(e),
                }
            }
            for t in &mut types {
                t.sort();
                t.dedup();
            }
            types
        });
        unknown_typed.sort();
        unknown_typed.dedup();

        let mut kg = Self::build(
            entities,
            relations,
            train,
            valid,
            test,
            valid_negatives,
            test_negatives,
            entity_types,
        )?;
        kg.report.unknown_typed_entities = unknown_typed;
        Ok(kg)
    }

    /// Builds a graph over integer ids with synthetic labels `e{i}` / `r{j}`.
    pub fn from_ids(
        num_entities: usize,
        num_relations: usize,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let entities = Vocab::from_labels((0..num_entities).map(|i| format!("e{i}")).collect());
        let relations =
            Vocab::from_labels((0..num_relations).map(|i| format!("r{i}")).collect());
        Self::build(entities, relations, train, valid, test, None, None, None)
    }

    /// Returns a copy with the given negatives attached.
    pub fn with_negatives(
        self,
        valid_negatives: Option<Vec<Triple>>,
        test_negatives: Option<Vec<Triple>>,
    ) -> Result<Self> {
        Self::build(
            self.entities,
            self.relations,
            self.train,
            self.valid,
            self.test,
            valid_negatives,
            test_negatives,
            self.entity_types,
        )
    }

    /// Returns a copy with per-entity type labels attached.
    pub fn with_entity_types(self, types: Vec<Vec<String>>) -> Result<Self> {
        if types.len() != self.entities.len() {
            return Err(Error::Config(format!(
                "{} type rows for {} entities",
                types.len(),
                self.entities.len()
            )));
        }
        Self::build(
            self.entities,
            self.relations,
            self.train,
            self.valid,
            self.test,
            self.valid_negatives,
            self.test_negatives,
            Some(types),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        entities: Vocab,
        relations: Vocab,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
        valid_negatives: Option<Vec<Triple>>,
        test_negatives: Option<Vec<Triple>>,
        entity_types: Option<Vec<Vec<String>>>,
    ) -> Result<Self> {
        if train.is_empty() && valid.is_empty() && test.is_empty() {
            return Err(Error::NoFacts("all splits are empty".into()));
        }
        let (ne, nr) = (entities.len(), relations.len());
        for t in train.iter().chain(&valid).chain(&test) {
            check_ids(*t, ne, nr)?;
        }

        let train_set: HashSet<Triple> = train.iter().copied().collect();
        let valid_set: HashSet<Triple> = valid.iter().copied().collect();
        for t in &valid {
            if train_set.contains(t) {
                return Err(disjoint(*t, "train", "valid"));
            }
        }
        for t in &test {
            if train_set.contains(t) {
                return Err(disjoint(*t, "train", "test"));
            }
            if valid_set.contains(t) {
                return Err(disjoint(*t, "valid", "test"));
            }
        }

        let facts: Vec<Triple> = train.iter().chain(&valid).chain(&test).copied().collect();
        let full_set: HashSet<Triple> = facts.iter().copied().collect();
        for (negs, split) in [(&valid_negatives, "valid"), (&test_negatives, "test")] {
            for t in negs.iter().flatten() {
                check_ids(*t, ne, nr)?;
                if full_set.contains(t) {
                    return Err(Error::NegativeIsFact { triple: *t, split });
                }
            }
        }

        let mut heads: Vec<BTreeSet<EntityId>> = vec![BTreeSet::new(); nr];
        let mut tails: Vec<BTreeSet<EntityId>> = vec![BTreeSet::new(); nr];
        let mut incident = vec![Vec::new(); ne];
        for (i, t) in facts.iter().enumerate() {
            heads[t.relation as usize].insert(t.head);
            tails[t.relation as usize].insert(t.tail);
            incident[t.head as usize].push(i as u32);
            if t.tail != t.head {
                incident[t.tail as usize].push(i as u32);
            }
        }

        let mut in_train_rel = vec![false; nr];
        let mut in_train_ent = vec![false; ne];
        for t in &train {
            in_train_rel[t.relation as usize] = true;
            in_train_ent[t.head as usize] = true;
            in_train_ent[t.tail as usize] = true;
        }
        let report = LoadReport {
            entities: ne,
            relations: nr,
            train: train.len(),
            valid: valid.len(),
            test: test.len(),
            valid_negatives: valid_negatives.as_ref().map(Vec::len),
            test_negatives: test_negatives.as_ref().map(Vec::len),
            typed_entities: entity_types
                .as_ref()
                .map(|t| t.iter().filter(|ts| !ts.is_empty()).count()),
            relations_not_in_train: (0..nr)
                .filter(|&r| !in_train_rel[r])
                .map(|r| relations.label(r as u32).to_owned())
                .collect(),
            entities_not_in_train: in_train_ent.iter().filter(|&&b| !b).count(),
            unknown_typed_entities: Vec::new(),
        };

        Ok(KnowledgeGraph {
            full_index: FactIndex::build(&facts, nr),
            train_index: FactIndex::build(&train, nr),
            heads_by_relation: heads.into_iter().map(|s| s.into_iter().collect()).collect(),
            tails_by_relation: tails.into_iter().map(|s| s.into_iter().collect()).collect(),
            entities,
            relations,
            train,
            valid,
            test,
            valid_negatives,
            test_negatives,
            entity_types,
            facts,
            full_set,
            train_set,
            incident,
            report,
        })
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn valid_negatives(&self) -> Option<&[Triple]> {
        self.valid_negatives.as_deref()
    }

    pub fn test_negatives(&self) -> Option<&[Triple]> {
        self.test_negatives.as_deref()
    }

    /// All facts F = train ∪ valid ∪ test, in that order.
    pub fn facts(&self) -> &[Triple] {
        &self.facts
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn full_index(&self) -> &FactIndex {
        &self.full_index
    }

    pub fn train_index(&self) -> &FactIndex {
        &self.train_index
    }

    pub fn has_entity_types(&self) -> bool {
        self.entity_types.is_some()
    }

    /// Sorted type labels of an entity, or `None` when no type file was loaded.
    pub fn entity_types(&self, entity: EntityId) -> Option<&[String]> {
        self.entity_types
            .as_ref()
            .map(|t| t[entity as usize].as_slice())
    }

    pub fn check(&self, triple: Triple) -> Result<()> {
        check_ids(triple, self.num_entities(), self.num_relations())
    }

    pub fn contains(&self, triple: Triple, scope: Scope) -> bool {
        match scope {
            Scope::Train => self.train_set.contains(&triple),
            Scope::Full => self.full_set.contains(&triple),
        }
    }

    pub fn is_fact(&self, triple: Triple) -> bool {
        self.full_set.contains(&triple)
    }

    /// Sorted entities occurring as head of `relation` anywhere in F.
    pub fn heads_of(&self, relation: RelationId) -> Result<&[EntityId]> {
        self.heads_by_relation
            .get(relation as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownRelation(relation.to_string()))
    }

    /// Sorted entities occurring as tail of `relation` anywhere in F.
    pub fn tails_of(&self, relation: RelationId) -> Result<&[EntityId]> {
        self.tails_by_relation
            .get(relation as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownRelation(relation.to_string()))
    }

    /// Facts of F touching `entity` on either side.
    pub fn incident(&self, entity: EntityId) -> impl Iterator<Item = Triple> + '_ {
        self.incident[entity as usize]
            .iter()
            .map(|&i| self.facts[i as usize])
    }

    /// Facts of F sharing an entity with the center's head or tail, minus the
    /// excluded edges and the center itself. Returned in fact order.
    pub fn one_hop(&self, query: &NeighborhoodQuery) -> Vec<Triple> {
        let c = query.center;
        let mut idx: Vec<u32> = self.incident[c.head as usize].clone();
        if c.tail != c.head {
            idx.extend_from_slice(&self.incident[c.tail as usize]);
        }
        idx.sort_unstable();
        idx.dedup();
        idx.into_iter()
            .map(|i| self.facts[i as usize])
            .filter(|t| *t != c && !query.excluded.contains(t))
            .collect()
    }

    /// Writes the graph back out in the TSV layout [`KgPaths::from_dir`] reads.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, triples: &[Triple]| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, self.format_triples(triples)).map_err(|e| Error::io(&path, e))
        };
        write("train.txt", &self.train)?;
        write("valid.txt", &self.valid)?;
        write("test.txt", &self.test)?;
        if let Some(n) = &self.valid_negatives {
            write("valid_negatives.txt", n)?;
        }
        if let Some(n) = &self.test_negatives {
            write("test_negatives.txt", n)?;
        }
        if let Some(types) = &self.entity_types {
            let mut out = String::new();
            for (e, ts) in types.iter().enumerate() {
                for ty in ts {
                    let _ = writeln!(out, "{}\t{}", self.entities.label(e as u32), ty);
                }
            }
            let path = dir.join("entity_types.tsv");
            fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn format_triples(&self, triples: &[Triple]) -> String {
        let mut out = String::new();
        for t in triples {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                self.entities.label(t.head),
                self.relations.label(t.relation),
                self.entities.label(t.tail)
            );
        }
        out
    }
}

fn check_ids(t: Triple, ne: usize, nr: usize) -> Result<()> {
    if t.head as usize >= ne || t.tail as usize >= ne {
        let id = t.head.max(t.tail) as usize;
        return Err(Error::OutOfRange {
            what: "entity",
            id,
            limit: ne,
        });
    }
    if t.relation as usize >= nr {
        return Err(Error::OutOfRange {
            what: "relation",
            id: t.relation as usize,
            limit: nr,
        });
    }
    Ok(())
}

fn disjoint(triple: Triple, first: &'static str, second: &'static str) -> Error {
    Error::SplitsNotDisjoint {
        triple,
        first,
        second,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(h: &str, r: &str, t: &str) -> [String; 3] {
        [h.into(), r.into(), t.into()]
    }

    fn toy() -> KnowledgeGraph {
        KnowledgeGraph::from_labeled(LabeledSplits {
            train: vec![row("a", "r", "b"), row("c", "r", "b"), row("b", "s", "d")],
            valid: vec![row("a", "s", "d")],
            test: vec![row("d", "t", "a")],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn first_appearance_ids() {
        let kg = toy();
        let labels: Vec<_> = kg.entities().labels().to_vec();
        assert_eq!(labels, ["a", "b", "c", "d"]);
        assert_eq!(kg.relations().labels(), ["r", "s", "t"]);
        assert_eq!(kg.report().relations_not_in_train, ["t"]);
    }

    #[test]
    fn heads_and_tails() {
        let kg = toy();
        let r = kg.relations().id("r").unwrap();
        assert_eq!(kg.heads_of(r).unwrap(), &[0, 2]);
        assert_eq!(kg.tails_of(r).unwrap(), &[1]);
        assert!(kg.heads_of(99).is_err());
    }

    #[test]
    fn relation_without_facts_has_empty_sets() {
        let kg = KnowledgeGraph::from_ids(3, 2, vec![Triple::new(0, 0, 1)], vec![], vec![])
            .unwrap();
        assert!(kg.heads_of(1).unwrap().is_empty());
        assert!(kg.tails_of(1).unwrap().is_empty());
    }

    #[test]
    fn contains_scopes() {
        let kg = toy();
        let train = kg.train()[0];
        let test = kg.test()[0];
        assert!(kg.contains(train, Scope::Train));
        assert!(!kg.contains(test, Scope::Train));
        assert!(kg.contains(test, Scope::Full));
        assert!(!kg.contains(Triple::new(3, 0, 3), Scope::Full));
    }

    #[test]
    fn duplicate_across_splits_rejected() {
        let err = KnowledgeGraph::from_labeled(LabeledSplits {
            train: vec![row("a", "r", "b"), row("b", "r", "c")],
            valid: vec![row("a", "r", "b")],
            test: vec![],
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("splits not disjoint"), "{err}");
    }

    #[test]
    fn empty_file_is_no_facts() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["train.txt", "valid.txt", "test.txt"] {
            fs::write(dir.path().join(f), "").unwrap();
        }
        let err = load_kg(&KgPaths::from_dir(dir.path())).unwrap_err();
        assert!(err.to_string().contains("no facts"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("train.txt"), "a\tr\tb\nbad line\n").unwrap();
        fs::write(dir.path().join("valid.txt"), "").unwrap();
        fs::write(dir.path().join("test.txt"), "").unwrap();
        match load_kg(&KgPaths::from_dir(dir.path())).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn negative_that_is_a_fact_rejected() {
        let err = KnowledgeGraph::from_labeled(LabeledSplits {
            train: vec![row("a", "r", "b")],
            valid: vec![row("b", "r", "a")],
            test: vec![],
            valid_negatives: Some(vec![row("a", "r", "b")]),
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::NegativeIsFact { .. }));
    }

    #[test]
    fn one_hop_star() {
        // star around x = 0
        let train = vec![
            Triple::new(0, 0, 1),
            Triple::new(0, 0, 2),
            Triple::new(3, 1, 0),
            Triple::new(4, 1, 5),
        ];
        let kg = KnowledgeGraph::from_ids(7, 3, train, vec![], vec![]).unwrap();
        let q = NeighborhoodQuery {
            center: Triple::new(0, 2, 6),
            excluded: vec![Triple::new(0, 0, 2)],
        };
        assert_eq!(
            kg.one_hop(&q),
            vec![Triple::new(0, 0, 1), Triple::new(3, 1, 0)]
        );
        let isolated = NeighborhoodQuery {
            center: Triple::new(6, 0, 6),
            excluded: vec![],
        };
        assert!(kg.one_hop(&isolated).is_empty());
    }

    #[test]
    fn round_trip_through_files() {
        let kg = KnowledgeGraph::from_labeled(LabeledSplits {
            train: vec![row("a", "r", "b"), row("c", "r", "b")],
            valid: vec![row("b", "s", "d")],
            test: vec![row("d", "t", "a")],
            valid_negatives: Some(vec![row("a", "s", "zz")]),
            entity_types: Some(vec![
                [String::from("a"), "city".into()],
                [String::from("b"), "country".into()],
                [String::from("a"), "place".into()],
            ]),
            ..Default::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        kg.write_dir(dir.path()).unwrap();
        let back = load_kg(&KgPaths::from_dir(dir.path())).unwrap();
        assert_eq!(back.entities().labels(), kg.entities().labels());
        assert_eq!(back.relations().labels(), kg.relations().labels());
        assert_eq!(back.facts(), kg.facts());
        assert_eq!(back.valid_negatives(), kg.valid_negatives());
        assert_eq!(back.entity_types(0), Some(&["city".to_owned(), "place".into()][..]));
    }
}
