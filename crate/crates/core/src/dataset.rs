//! JSONL dataset files: one record per test case, grouped by instance.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchgen::{CaseKind, CfkgrInstance, SourceKind, TestCase};
use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Triple};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub instance_id: String,
    pub rule_id: String,
    pub atom: u8,
    pub cf_head: String,
    pub cf_rel: String,
    pub cf_tail: String,
    pub context1_head: String,
    pub context1_rel: String,
    pub context1_tail: String,
    pub context2_head: String,
    pub context2_rel: String,
    pub context2_tail: String,
    pub head: String,
    pub rel: String,
    pub tail: String,
    pub kind: CaseKind,
    pub source_kind: SourceKind,
    pub expected_label: u8,
    pub original_label: u8,
    #[serde(default)]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_label: Option<u8>,
}

fn labels(kg: &KnowledgeGraph, t: Triple) -> [String; 3] {
    [
        kg.entities().label(t.head).to_owned(),
        kg.relations().label(t.relation).to_owned(),
        kg.entities().label(t.tail).to_owned(),
    ]
}

pub fn to_records(kg: &KnowledgeGraph, instances: &[CfkgrInstance]) -> Vec<CaseRecord> {
    let mut out = Vec::with_capacity(instances.len() * 16);
    for inst in instances {
        let [cf_head, cf_rel, cf_tail] = labels(kg, inst.cf);
        let [c1h, c1r, c1t] = labels(kg, inst.context[0]);
        let [c2h, c2r, c2t] = labels(kg, inst.context[1]);
        for case in &inst.cases {
            let [head, rel, tail] = labels(kg, case.triple);
            out.push(CaseRecord {
                instance_id: inst.id.clone(),
                rule_id: inst.rule_id.clone(),
                atom: inst.atom,
                cf_head: cf_head.clone(),
                cf_rel: cf_rel.clone(),
                cf_tail: cf_tail.clone(),
                context1_head: c1h.clone(),
                context1_rel: c1r.clone(),
                context1_tail: c1t.clone(),
                context2_head: c2h.clone(),
                context2_rel: c2r.clone(),
                context2_tail: c2t.clone(),
                head,
                rel,
                tail,
                kind: case.kind,
                source_kind: case.source_kind,
                expected_label: case.expected_label,
                original_label: case.original_label,
                fallback: case.fallback,
                human_label: case.human_label,
            });
        }
    }
    out
}

pub fn to_jsonl(kg: &KnowledgeGraph, instances: &[CfkgrInstance]) -> Result<String> {
    let mut out = String::new();
    for rec in to_records(kg, instances) {
        let _ = writeln!(out, "{}", serde_json::to_string(&rec)?);
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, kg: &KnowledgeGraph, instances: &[CfkgrInstance]) -> Result<()> {
    std::fs::write(path, to_jsonl(kg, instances)?).map_err(|e| Error::io(path, e))
}

fn resolve(kg: &KnowledgeGraph, h: &str, r: &str, t: &str) -> Result<Triple> {
    let ent = |l: &str| {
        kg.entities()
            .id(l)
            .ok_or_else(|| Error::UnknownEntity(l.to_owned()))
    };
    let rel = kg
        .relations()
        .id(r)
        .ok_or_else(|| Error::UnknownRelation(r.to_owned()))?;
    Ok(Triple::new(ent(h)?, rel, ent(t)?))
}

/// Groups records into instances in order of first appearance.
pub fn from_records(kg: &KnowledgeGraph, records: &[CaseRecord]) -> Result<Vec<CfkgrInstance>> {
    let mut order: Vec<CfkgrInstance> = Vec::new();
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for rec in records {
        let triple = resolve(kg, &rec.head, &rec.rel, &rec.tail)?;
        let case = TestCase {
            triple,
            kind: rec.kind,
            source_kind: rec.source_kind,
            expected_label: rec.expected_label,
            original_label: rec.original_label,
            fallback: rec.fallback,
            human_label: rec.human_label,
        };
        let idx = match pos.get(rec.instance_id.as_str()) {
            Some(&i) => i,
            None => {
                order.push(CfkgrInstance {
                    id: rec.instance_id.clone(),
                    rule_id: rec.rule_id.clone(),
                    atom: rec.atom,
                    cf: resolve(kg, &rec.cf_head, &rec.cf_rel, &rec.cf_tail)?,
                    context: [
                        resolve(kg, &rec.context1_head, &rec.context1_rel, &rec.context1_tail)?,
                        resolve(kg, &rec.context2_head, &rec.context2_rel, &rec.context2_tail)?,
                    ],
                    inference: triple,
                    cases: Vec::new(),
                });
                pos.insert(&rec.instance_id, order.len() - 1);
                order.len() - 1
            }
        };
        if case.kind == CaseKind::Inference {
            order[idx].inference = triple;
        }
        order[idx].cases.push(case);
    }
    Ok(order)
}

pub fn parse_jsonl(text: &str, path: &Path) -> Result<Vec<CaseRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_dataset(path: &Path, kg: &KnowledgeGraph) -> Result<Vec<CfkgrInstance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_records(kg, &parse_jsonl(&text, path)?)
}
