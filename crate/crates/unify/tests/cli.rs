use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trek_core::unify::{EdgeDecision, EdgeVerdict, LatentDecision, LatentVerdict};
use trek_core::CiCatalog;
use trek_unify::report::{CandidatesReport, PlanReport, PruneView, TreksReport, VerifyReport};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn graph(name: &str) -> String {
    fixtures().join(format!("{name}.graph")).display().to_string()
}

fn manifest(name: &str) -> String {
    fixtures().join(name).join("manifest.tsv").display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trek-unify")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json<T: serde::de::DeserializeOwned>(args: &[&str]) -> T {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    serde_json::from_str(&ok(&a)).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_population_data_regenerates_exactly() {
    for name in ["case_one", "case_two", "case_three", "case_three_latent", "redundant_edge", "redundant_edge_direct", "eight_node"] {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().display().to_string();
        ok(&["simulate", &graph(name), "--population", "--dir", &d]);
        assert_eq!(files(dir.path()), files(&fixtures().join(name)), "{name}");
    }
}

#[test]
fn sampling_is_reproducible_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let sim = |sub: &str, seed: &str| {
        let d = dir.path().join(sub);
        ok(&["simulate", &graph("case_one"), "--n", "500", "--seed", seed, "--dir", d.to_str().unwrap()]);
        files(&d)
    };
    let a = sim("a", "7");
    assert_eq!(a, sim("b", "7"));
    assert_ne!(a, sim("c", "8"));
    assert!(String::from_utf8_lossy(&a.iter().find(|f| f.0 == "manifest.tsv").unwrap().1).contains("samples"));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let m = manifest("case_two");
    let with = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_trek-unify"))
            .args(["prune", &m, "--format", "json"])
            .env("TREK_UNIFY_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(with("1"), with("4"));
}

#[test]
fn treks_between_named_variables() {
    let none: TreksReport = json(&["treks", &graph("case_one"), "X", "Y"]);
    assert!(none.treks.is_empty());
    assert_eq!(none.trek_correlation, 0.0);
    let r: TreksReport = json(&["treks", &graph("case_two"), "X", "Y"]);
    assert_eq!(r.treks.len(), 1);
    assert!((r.trek_correlation - 0.216).abs() < 1e-12);
    assert!((r.trek_correlation - r.implied_correlation).abs() < 1e-12);
    assert!(ok(&["treks", &graph("case_two"), "A", "Y"]).contains("A -> C -> Y"));
}

#[test]
fn verify_random_and_given_graphs() {
    let r: VerifyReport = json(&["verify", "--seed", "3"]);
    assert_eq!(r.nodes, 8);
    assert!(r.max_deviation <= 1e-9);
    let r: VerifyReport = json(&["verify", &graph("eight_node")]);
    assert_eq!(r.pairs, 28);
    assert!(r.max_deviation <= 1e-9);
}

#[test]
fn ci_and_candidates() {
    let cat: CiCatalog = json(&["ci", &manifest("case_one")]);
    assert_eq!(cat.statements.len(), 18);
    let c: CandidatesReport = json(&["candidates", &manifest("case_one")]);
    assert_eq!(c.candidates.len(), 9);
    let forbidden: CandidatesReport = json(&["candidates", &manifest("case_one"), "--forbid", "A,B"]);
    assert_eq!(forbidden.candidates.len(), 3);
    assert!(forbidden.candidates.iter().all(|c| !c.encoding.contains("A->B")));
}

#[test]
fn prune_and_refine_case_one() {
    let dir = tempfile::tempdir().unwrap();
    let (ab, cb) = (dir.path().join("ab"), dir.path().join("cb"));
    for (d, spec) in [(&ab, "ab:A,B"), (&cb, "cb:C,B")] {
        let body = ok(&["simulate", &graph("case_one"), "--population", "--marginal", spec, "--dir", d.to_str().unwrap()]);
        assert!(body.contains("population"));
    }
    // the graph's own marginals are included by simulate, so keep only the new one
    for (d, id) in [(&ab, "ab"), (&cb, "cb")] {
        let p = d.join("manifest.tsv");
        let text = std::fs::read_to_string(&p).unwrap();
        let kept: String = text.lines().filter(|l| l.starts_with(id)).map(|l| format!("{l}\n")).collect();
        std::fs::write(&p, kept).unwrap();
    }
    let v: PruneView = json(&[
        "prune",
        &manifest("case_one"),
        "--add",
        ab.join("manifest.tsv").to_str().unwrap(),
        "--add",
        cb.join("manifest.tsv").to_str().unwrap(),
    ]);
    assert_eq!(v.classes, 9);
    assert_eq!(v.refinements.len(), 2);
    assert_eq!(v.alive, 1);
    let survivor = v.candidates.iter().find(|c| c.status == trek_core::unify::Status::Alive).unwrap();
    assert_eq!(survivor.encoding, "A->X,C->Y,X->B,Y->B");
    assert!(survivor.members.iter().any(|m| m == "X->A,X->B,Y->B,Y->C"));
    let text = ok(&["prune", &manifest("case_one")]);
    assert!(text.starts_with("9 equivalence classes over {A, B, C, X, Y}: 4 alive"));
}

#[test]
fn latent_and_edge_checks() {
    let roles = ["--roles", "X1,X2,X3,X4"];
    let v: LatentVerdict = json(&[&["latent-check", &manifest("case_three")][..], &roles].concat());
    assert_eq!(v.verdict, LatentDecision::NoExtraConnection);
    let v: LatentVerdict = json(&[&["latent-check", &manifest("case_three_latent")][..], &roles].concat());
    assert_eq!(v.verdict, LatentDecision::ExtraConnection);
    let orders = ["--left-order", "X1,X2,X4", "--right-order", "X1,X3,X4"];
    let e: EdgeVerdict = json(&[&["edge-check", &manifest("redundant_edge")][..], &orders].concat());
    assert_eq!(e.decision, EdgeDecision::Remove);
    let e: EdgeVerdict = json(&[&["edge-check", &manifest("redundant_edge_direct")][..], &orders].concat());
    assert_eq!(e.decision, EdgeDecision::Keep);
    let v: PruneView = json(&[&["prune", &manifest("case_three"), "--latent", "X1,X2,X3,X4"][..], &orders].concat());
    assert!(v.latent.is_some() && v.edge.is_some());
}

#[test]
fn plan_ranks_measurements() {
    let p: PlanReport = json(&["plan", &manifest("eight_node")]);
    assert_eq!(p.plan.proposals[0].variables, ["B", "C", "F"]);
    assert!(p.tests.iter().all(|t| t.result.is_none() && !t.missing.is_empty()));
    let text = ok(&["plan", &manifest("eight_node"), "--anchors", "X,Y", "--budget", "2"]);
    assert!(text.contains("hypothesis X - A - C - F"));
    assert!(text.contains("1. measure {B, F}"));
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.txt");
    assert_eq!(ok(&["verify", &graph("case_two"), "--out", p.to_str().unwrap()]), "");
    assert!(std::fs::read_to_string(&p).unwrap().contains("max |trek sum - implied|"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["treks", &graph("case_one"), "X"]).status.code(), Some(1));
    assert_eq!(run(&["verify", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["ci", &manifest("case_one"), "--alpha", "2"]).status.code(), Some(1));
    assert_eq!(run(&["plan", &manifest("eight_node"), "--budget", "1"]).status.code(), Some(1));
    let unknown = run(&["treks", &graph("case_one"), "X", "Q"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).starts_with("error: "));
    assert_eq!(run(&["ci", "/nonexistent/manifest.tsv"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.graph");
    std::fs::write(&bad, "X -> A 0.3\nX => B\n").unwrap();
    let out = run(&["verify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.graph:2:"));
}
