//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failures are reported, not hidden. Set `TREK_ACCEPTANCE_STRICT=1` to turn
//! any FAIL into a non-zero exit status.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use trek_core::unify::{
    latent_check, prune_pipeline, redundant_edge_check, triangle_from_correlation, EdgeDecision, LatentDecision,
    LatentRoles, PruneOptions, PruneReport, Sequential, Tolerance,
};
use trek_core::{
    build_correlation_table, implied_covariance, random_weighted_dag, MarginalDataset, NoiseSpec, SampleSize,
    WeightedDag,
};
use trek_unify::cli::verify_model;
use trek_unify::graph_file::{read_graph, GraphSpec};
use trek_unify::simulate::simulate_marginals;

type Outcome = (bool, String);

fn fixture(name: &str) -> GraphSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.graph"));
    read_graph(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn population(spec: &GraphSpec) -> (WeightedDag, Vec<MarginalDataset>) {
    let w = spec.weighted().unwrap();
    let ms = simulate_marginals(&w, &spec.marginals, None, NoiseSpec::default(), 0).unwrap();
    (w, ms)
}

fn extra(w: &WeightedDag, vars: &[&str]) -> MarginalDataset {
    let corr = implied_covariance(w).unwrap();
    MarginalDataset::from_correlation(vars.concat(), corr.restrict(vars).unwrap(), SampleSize::Population).unwrap()
}

fn truth_alive(report: &PruneReport, w: &WeightedDag) -> bool {
    report.candidates.iter().any(|c| c.is_alive() && c.contains(w.dag()))
}

fn trek_identity() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut models, mut seed) = (0.0f64, 0usize, 0u64);
    while models < 200 {
        let nodes = 2 + models % 7;
        seed += 1;
        let Ok(w) = random_weighted_dag(nodes, 0.4, 0.8, seed) else { continue };
        worst = worst.max(verify_model(&w).unwrap().max_deviation);
        models += 1;
    }
    let elapsed = start.elapsed();
    (
        worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("max deviation {worst:.2e} over {models} models in {:.2} s", elapsed.as_secs_f64()),
    )
}

fn case_one_enumeration() -> Outcome {
    let (_, ms) = population(&fixture("case_one"));
    let r = prune_pipeline(&ms, &PruneOptions::default()).unwrap();
    let n = r.candidates.len();
    (n == 5, format!("{n} equivalence classes, expected 5"))
}

fn case_one_pruning() -> Outcome {
    let (w, ms) = population(&fixture("case_one"));
    let mut r = prune_pipeline(&ms, &PruneOptions::default()).unwrap();
    let alive = r.alive().count();
    let truth = truth_alive(&r, &w);
    r.refine(&extra(&w, &["A", "B"]), &Sequential).unwrap();
    let after_ab = r.alive().count();
    r.refine(&extra(&w, &["C", "B"]), &Sequential).unwrap();
    let after_cb = r.alive().count();
    let truth_final = truth_alive(&r, &w);
    (
        alive <= 2 && truth && after_ab < alive && truth_final,
        format!(
            "{alive} alive after pruning (expected at most 2, true class {}), {after_ab} after {{A,B}}, {after_cb} after {{C,B}}",
            if truth { "kept" } else { "lost" }
        ),
    )
}

fn case_two() -> Outcome {
    let (w, ms) = population(&fixture("case_two"));
    let r = prune_pipeline(&ms, &PruneOptions::default()).unwrap();
    let alive = r.alive().count();
    let truth = truth_alive(&r, &w);
    (
        alive == 3 && truth,
        format!("{alive} alive of {} classes (expected 3), true class {}", r.candidates.len(), if truth { "kept" } else { "lost" }),
    )
}

fn case_three() -> Outcome {
    let roles = LatentRoles::new("X1", "X2", "X3", "X4");
    let tol = Tolerance::default();
    let (_, ms) = population(&fixture("case_three"));
    let plain = latent_check(&build_correlation_table(&ms).unwrap(), &roles, tol).unwrap();
    let (_, ms) = population(&fixture("case_three_latent"));
    let hidden = latent_check(&build_correlation_table(&ms).unwrap(), &roles, tol).unwrap();
    let coef_err = match (plain.a24, plain.a34) {
        (Some(a), Some(b)) => (a - 0.3).abs().max((b - 0.2).abs()),
        _ => f64::INFINITY,
    };
    let ok = plain.residual <= 1e-9
        && plain.verdict == LatentDecision::NoExtraConnection
        && coef_err <= 1e-9
        && hidden.residual >= 0.01
        && hidden.verdict == LatentDecision::ExtraConnection;
    (
        ok,
        format!(
            "no latent: residual {:.2e}, coefficient error {coef_err:.2e}; latent: residual {:.4}",
            plain.residual, hidden.residual
        ),
    )
}

fn edge_decision(name: &str) -> (EdgeDecision, f64) {
    let (_, ms) = population(&fixture(name));
    let table = build_correlation_table(&ms).unwrap();
    let left = triangle_from_correlation(&ms[0].correlation().unwrap().0, ["X1", "X2", "X4"]).unwrap();
    let right = triangle_from_correlation(&ms[1].correlation().unwrap().0, ["X1", "X3", "X4"]).unwrap();
    let v = redundant_edge_check(&left, &right, &table, Tolerance::default()).unwrap();
    (v.decision, v.residual)
}

fn redundant_edge() -> Outcome {
    let (without, r0) = edge_decision("redundant_edge");
    let (with, r1) = edge_decision("redundant_edge_direct");
    (
        without == EdgeDecision::Remove && with == EdgeDecision::Keep,
        format!("without direct edge: {without:?} (residual {r0:.2e}); with direct edge 0.25: {with:?} (residual {r1:.4})"),
    )
}

fn planner() -> Outcome {
    let spec = fixture("eight_node");
    let (w, ms) = population(&spec);
    let tol = Tolerance::default();
    let table = build_correlation_table(&ms).unwrap();
    let p = trek_core::plan(&table, &["X", "Y"], 3, tol).unwrap();
    let top = p.proposals.first().map(|q| q.variables.clone()).unwrap_or_default();
    let has_cf = top.iter().any(|v| v == "C") && top.iter().any(|v| v == "F");
    let mut more = ms.clone();
    more.push(extra(&w, &["B", "F", "C"]));
    more.push(extra(&w, &["E", "F"]));
    let extended = build_correlation_table(&more).unwrap();
    let wanted = ["chain X-A-C-F", "two-trek B~F via X,Y", "second-trek E on B~F via Y"];
    let mut worst = 0.0f64;
    let mut passed = 0;
    for id in wanted {
        if let Some(t) = p.tests.iter().find(|t| t.id == id) {
            if let Ok(r) = t.run(&extended, tol) {
                worst = worst.max(r.residual);
                if r.pass && r.residual <= 1e-9 {
                    passed += 1;
                }
            }
        }
    }
    (
        has_cf && passed == wanted.len(),
        format!("top proposal {{{}}}; {passed}/3 trek tests pass, max residual {worst:.2e}", top.join(", ")),
    )
}

fn decisions(r: &PruneReport) -> Vec<(String, bool)> {
    r.candidates.iter().map(|c| (c.encoding(), c.is_alive())).collect()
}

fn robustness() -> Outcome {
    let start = Instant::now();
    let spec = fixture("case_one");
    let (w, ms) = population(&spec);
    let reference = decisions(&prune_pipeline(&ms, &PruneOptions::default()).unwrap());
    let matches = (0u64..100)
        .into_par_iter()
        .filter(|&seed| {
            let Ok(ms) = simulate_marginals(&w, &spec.marginals, Some(100_000), NoiseSpec::default(), seed) else {
                return false;
            };
            // a cross-marginal contradiction is a mismatch, not a crash
            prune_pipeline(&ms, &PruneOptions::default()).is_ok_and(|r| decisions(&r) == reference)
        })
        .count();
    let elapsed = start.elapsed();
    (
        matches >= 95 && elapsed < Duration::from_secs(120),
        format!("{matches}/100 seeds match the population decisions at n = 100000, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn soundness() -> Outcome {
    let topologies: [(&str, &[&[&str]]); 3] = [
        ("case_one", &[&["A", "B"], &["C", "B"]]),
        ("case_two", &[&["A", "B"], &["C", "B"]]),
        ("case_three", &[]),
    ];
    let (mut runs, mut lost, mut seed) = (0usize, Vec::new(), 0u64);
    while runs < 100 {
        let spec = fixture(topologies[runs % 3].0);
        let base = spec.weighted().unwrap();
        seed += 1;
        let mut rng = seed;
        let mut next = || {
            rng = trek_unify::simulate::marginal_seed(rng, 0);
            let u = (rng >> 11) as f64 / (1u64 << 53) as f64;
            let a = -0.8 + 1.6 * u;
            if a == 0.0 { 0.5 } else { a }
        };
        let edges: Vec<(String, String, f64)> = base.weighted_edges().into_iter().map(|(a, b, _)| (a, b, next())).collect();
        let e: Vec<(&str, &str, f64)> = edges.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), *c)).collect();
        let Ok(w) = WeightedDag::from_edges(base.names().iter().cloned(), &e) else { continue };
        runs += 1;
        let ms = simulate_marginals(&w, &spec.marginals, None, NoiseSpec::default(), 0).unwrap();
        let mut opts = PruneOptions::default();
        if w.names().len() == 4 {
            opts.latent = Some(LatentRoles::new("X1", "X2", "X3", "X4"));
        }
        let ok = match prune_pipeline(&ms, &opts) {
            Ok(mut r) => {
                let mut ok = truth_alive(&r, &w);
                for vars in topologies[(runs - 1) % 3].1 {
                    ok &= r.refine(&extra(&w, vars), &Sequential).is_ok() && truth_alive(&r, &w);
                }
                ok
            }
            Err(_) => false,
        };
        if !ok {
            lost.push(runs);
        }
    }
    (lost.is_empty(), format!("generating class survived in {}/{runs} random models", runs - lost.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("trek rule identity on random DAGs", trek_identity),
        ("case one enumeration count", case_one_enumeration),
        ("case one pruning and refinement", case_one_pruning),
        ("case two survivors", case_two),
        ("case three latent check", case_three),
        ("redundant edge check", redundant_edge),
        ("measurement planner", planner),
        ("sample-mode robustness", robustness),
        ("pruning soundness", soundness),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let (ok, detail) = run();
        if !ok {
            failed += 1;
        }
        println!("{} | {name} | {detail}", if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("TREK_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
