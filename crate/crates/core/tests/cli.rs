mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cfkgr::benchgen::format_rules;

fn cfkgr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfkgr"))
        .args(args)
        .env("CFKGR_THREADS", "1")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let (kg, rules) = common::toy_benchmark_graph(2);
        kg.write_dir(&dir.path().join("kg")).unwrap();
        std::fs::write(dir.path().join("rules.tsv"), format_rules(&rules, &kg)).unwrap();
        Workspace { dir }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train(&self, out: &str) -> Output {
        cfkgr(&[
            "train", "--kg", s(&self.p("kg")), "--out", s(&self.p(out)), "--kind", "complex", "--dim", "4",
            "--epochs", "3", "--negatives", "4", "--batch-size", "64", "--seed", "5",
        ])
    }
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_kg_exits_2_naming_the_path() {
    let o = cfkgr(&["train", "--kg", "/no/such/kg", "--out", "/tmp/unused.ckpt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/kg"));
}

#[test]
fn unknown_flag_fails() {
    let o = cfkgr(&["generate", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_subcommand_documents_its_flags() {
    for (cmd, flag) in [
        ("train", "--negatives"),
        ("tune-thresholds", "--synth"),
        ("generate", "--per-atom"),
        ("couldd-eval", "--samples"),
        ("couldd-tune", "--samples-grid"),
        ("filter-inferable", "--min-cover"),
        ("report", "--predictions"),
    ] {
        let o = cfkgr(&[cmd, "--help"]);
        ok(&o);
        assert!(String::from_utf8_lossy(&o.stdout).contains(flag), "{cmd} --help lacks {flag}");
    }
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_cfkgr"))
        .args(["train", "--kg", "x", "--out", "y"])
        .env("CFKGR_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CFKGR_THREADS"));
}

#[test]
fn full_pipeline() {
    let w = Workspace::new();

    // train: deterministic checkpoint, trace and load report
    ok(&w.train("a.ckpt"));
    ok(&w.train("b.ckpt"));
    let a = cfkgr::checkpoint::load(&w.p("a.ckpt")).unwrap();
    let b = cfkgr::checkpoint::load(&w.p("b.ckpt")).unwrap();
    assert_eq!(cfkgr::checkpoint::digest(&a), cfkgr::checkpoint::digest(&b));
    assert_eq!(std::fs::read(w.p("a.ckpt")).unwrap(), std::fs::read(w.p("b.ckpt")).unwrap());
    let trace = std::fs::read_to_string(w.p("a.ckpt.loss.csv")).unwrap();
    assert!(trace.starts_with("epoch,mean_loss,wall_seconds\n"));
    assert_eq!(trace.lines().count(), 4);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(w.p("a.ckpt.load.json")).unwrap()).unwrap();
    assert_eq!(report["entities"], 40);

    // thresholds need negatives or --synth
    let th = s(&w.p("t.json")).to_owned();
    let o = cfkgr(&["tune-thresholds", "--kg", s(&w.p("kg")), "--model", s(&w.p("a.ckpt")), "--out", &th]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--synth"));
    ok(&cfkgr(&["tune-thresholds", "--kg", s(&w.p("kg")), "--model", s(&w.p("a.ckpt")), "--out", &th, "--synth"]));
    let tj: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&th).unwrap()).unwrap();
    assert!(tj.get("global").is_some() && tj["per_relation"].is_object());

    // generate: record counts divisible by 16, reruns byte-identical
    let generate = |out: &str| {
        cfkgr(&[
            "generate", "--kg", s(&w.p("kg")), "--rules", s(&w.p("rules.tsv")), "--out-dir", s(&w.p(out)),
            "--per-atom", "4", "--valid-rules", "1", "--typed-relations", "r1", "--seed", "3",
        ])
    };
    ok(&generate("g1"));
    ok(&generate("g2"));
    for f in ["valid.jsonl", "test.jsonl", "diagnostics.json"] {
        assert_eq!(std::fs::read(w.p("g1").join(f)).unwrap(), std::fs::read(w.p("g2").join(f)).unwrap(), "{f}");
    }
    let test_lines = std::fs::read_to_string(w.p("g1/test.jsonl")).unwrap().lines().count();
    assert!(test_lines > 0);
    assert_eq!(test_lines % 16, 0);
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(w.p("g1/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["split"]["valid_rules"].as_array().unwrap().len(), 1);
    assert_eq!(diag["per_rule"].as_array().unwrap().len(), 4);

    // couldd-eval: five repeats plus mean and std
    let out = s(&w.p("couldd.json")).to_owned();
    ok(&cfkgr(&[
        "couldd-eval", "--kg", s(&w.p("kg")), "--model", s(&w.p("a.ckpt")), "--thresholds", &th,
        "--dataset", s(&w.p("g1/test.jsonl")), "--lr", "0.05", "--samples", "3", "--max-iters", "4",
        "--repeats", "5", "--negatives", "4", "--seed", "0", "--out", &out,
    ]));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["repeats"].as_array().unwrap().len(), 5);
    assert!(r["mean"]["overall_f1"].is_number() && r["std"]["overall_f1"].is_number());
    assert_eq!(r["baseline"]["n_cases"], test_lines);
    for rep in r["repeats"].as_array().unwrap() {
        for sc in rep["scenarios"].as_array().unwrap() {
            assert!(sc["iterations_used"].as_u64().unwrap() <= 4);
        }
    }

    // couldd-tune over a 2x2 grid
    let tune = s(&w.p("tune.json")).to_owned();
    ok(&cfkgr(&[
        "couldd-tune", "--kg", s(&w.p("kg")), "--model", s(&w.p("a.ckpt")), "--thresholds", &th,
        "--dataset", s(&w.p("g1/valid.jsonl")), "--lrs", "0.01,0.1", "--samples-grid", "0,3",
        "--max-iters", "2", "--repeats", "1", "--negatives", "4", "--out", &tune,
    ]));
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&tune).unwrap()).unwrap();
    assert_eq!(t["grid"].as_array().unwrap().len(), 4);

    // report: frozen-model metrics and per-case CSV
    let rep = s(&w.p("report.json")).to_owned();
    let csv = s(&w.p("pred.csv")).to_owned();
    ok(&cfkgr(&[
        "report", "--kg", s(&w.p("kg")), "--model", s(&w.p("a.ckpt")), "--thresholds", &th,
        "--dataset", s(&w.p("g1/test.jsonl")), "--out", &rep, "--predictions", &csv,
    ]));
    let rj: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(rj, r["baseline"]);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), test_lines + 1);

    // filter-inferable
    let filt = s(&w.p("filtered.tsv")).to_owned();
    ok(&cfkgr(&["filter-inferable", "--kg", s(&w.p("kg")), "--rules", s(&w.p("rules.tsv")), "--min-cover", "1", "--out", &filt]));
    let fj: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(w.p("filtered.tsv.rules.json")).unwrap()).unwrap();
    assert_eq!(fj["per_rule"].as_array().unwrap().len(), 4);
    assert_eq!(
        std::fs::read_to_string(&filt).unwrap().lines().count() as u64,
        fj["triples"].as_u64().unwrap()
    );
}
