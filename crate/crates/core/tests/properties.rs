use std::collections::BTreeMap;

use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use trek_core::unify::{
    enumerate_candidates, latent_check, prune_pipeline, LatentRoles, Outcome, PruneOptions, Sequential, Tolerance,
};
use trek_core::*;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("V{i}")).collect()
}

/// A DAG over `V0..Vn` with edges only from lower to higher index.
fn build(n: usize, edges: &[(usize, usize, f64)]) -> Result<WeightedDag> {
    let nm = names(n);
    let dag = Dag::new(nm.clone(), edges.iter().map(|&(i, j, _)| (nm[i].clone(), nm[j].clone())))?;
    let coeff: BTreeMap<(String, String), f64> =
        edges.iter().map(|&(i, j, a)| ((nm[i].clone(), nm[j].clone()), a)).collect();
    calibrate_standardized(dag, &coeff)
}

fn coefficient() -> impl Strategy<Value = f64> {
    prop_oneof![-0.8..-0.05f64, 0.05..0.8f64]
}

prop_compose! {
    fn random_model(max_nodes: usize)(n in 2..=max_nodes)
        (n in Just(n), slots in prop::collection::vec((prop::bool::weighted(0.4), coefficient()), n * (n - 1) / 2))
        -> (usize, Vec<(usize, usize, f64)>)
    {
        let mut edges = Vec::new();
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if slots[k].0 {
                    edges.push((i, j, slots[k].1));
                }
                k += 1;
            }
        }
        (n, edges)
    }
}

fn subsets(items: &[String]) -> Vec<Vec<String>> {
    (0u32..(1 << items.len()))
        .map(|m| items.iter().enumerate().filter(|&(k, _)| m & (1 << k) != 0).map(|(_, v)| v.clone()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn trek_rule_matches_matrix_oracle((n, edges) in random_model(8)) {
        let w = build(n, &edges);
        prop_assume!(w.is_ok());
        let w = w.unwrap();
        let corr = implied_covariance(&w).unwrap();
        for (i, x) in w.names().iter().enumerate() {
            for y in &w.names()[i + 1..] {
                let t = trek_correlation(&w, x, y).unwrap();
                prop_assert!((t - corr.get(x, y).unwrap()).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn d_separation_implies_vanishing_partial((n, edges) in random_model(6)) {
        let w = build(n, &edges);
        prop_assume!(w.is_ok());
        let w = w.unwrap();
        let corr = implied_covariance(&w).unwrap();
        let nm = w.names().to_vec();
        for (i, x) in nm.iter().enumerate() {
            for y in &nm[i + 1..] {
                let rest: Vec<String> = nm.iter().filter(|v| *v != x && *v != y).cloned().collect();
                for z in subsets(&rest) {
                    if d_separated(w.dag(), x, y, &z).unwrap() {
                        prop_assert!(partial_correlation(&corr, x, y, &z).unwrap().abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn treks_are_distinct_and_valid((n, edges) in random_model(7)) {
        let w = build(n, &edges);
        prop_assume!(w.is_ok());
        let w = w.unwrap();
        let nm = w.names().to_vec();
        for (i, x) in nm.iter().enumerate() {
            for y in &nm[i + 1..] {
                let treks = enumerate_treks(w.dag(), x, y).unwrap();
                for t in &treks {
                    prop_assert!(t.validate(w.dag()).is_ok());
                }
                for (a, t) in treks.iter().enumerate() {
                    prop_assert!(treks[a + 1..].iter().all(|u| u != t));
                }
                // a trek exists iff x and y are marginally d-connected
                let none: [&str; 0] = [];
                prop_assert_eq!(treks.is_empty(), d_separated(w.dag(), x, y, &none).unwrap());
            }
        }
    }

    #[test]
    fn equivalence_classes_partition((n, edges) in random_model(4), extra in prop::collection::vec(random_model(4), 6)) {
        let nm = names(4);
        let mk = |edges: &[(usize, usize, f64)]| Dag::new(nm.clone(), edges.iter().map(|&(i, j, _)| (nm[i].clone(), nm[j].clone()))).unwrap();
        let _ = n;
        let mut graphs = vec![mk(&edges)];
        graphs.extend(extra.iter().map(|(_, e)| mk(e)));
        let classes = equivalence_classes(&graphs).unwrap();
        let total: usize = classes.iter().map(Vec::len).sum();
        prop_assert_eq!(total, graphs.len());
        for g in &graphs {
            let hits = classes.iter().filter(|c| c.iter().any(|h| h.canonical_encoding() == g.canonical_encoding())).count();
            prop_assert!(hits >= 1);
        }
        for (i, a) in classes.iter().enumerate() {
            for b in &classes[i + 1..] {
                prop_assert!(!markov_equivalent(&a[0], &b[0]).unwrap());
            }
            for m in a {
                prop_assert!(markov_equivalent(&a[0], m).unwrap());
            }
        }
    }

    #[test]
    fn extract_ci_reproduces_d_separation((n, edges) in random_model(5), cut in 2usize..=4) {
        let w = build(n, &edges);
        prop_assume!(w.is_ok());
        let w = w.unwrap();
        let corr = implied_covariance(&w).unwrap();
        let nm = w.names().to_vec();
        let k = cut.min(nm.len());
        let sets = [nm[..k].to_vec(), nm[nm.len() - k..].to_vec()];
        let marginals: Vec<MarginalDataset> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| MarginalDataset::from_correlation(format!("m{i}"), corr.restrict(s).unwrap(), SampleSize::Population).unwrap())
            .collect();
        let cat = extract_ci(&marginals, 0.01);
        prop_assume!(cat.is_ok());
        for s in cat.unwrap().statements {
            prop_assert_eq!(s.is_independent(), d_separated(w.dag(), &s.x, &s.y, &s.given).unwrap());
        }
        let table = build_correlation_table(&marginals).unwrap();
        for (i, x) in nm.iter().enumerate() {
            for y in &nm[i + 1..] {
                let together = sets.iter().any(|s| s.contains(x) && s.contains(y));
                prop_assert_eq!(table.is_known(x, y), together);
            }
        }
    }

    #[test]
    fn empty_conditioning_is_the_entry((n, edges) in random_model(5)) {
        let w = build(n, &edges);
        prop_assume!(w.is_ok());
        let corr = implied_covariance(&w.unwrap()).unwrap();
        let none: [&str; 0] = [];
        for (i, x) in corr.variables().iter().enumerate() {
            for y in &corr.variables()[i + 1..] {
                prop_assert_eq!(partial_correlation(&corr, x, y, &none).unwrap(), corr.get(x, y).unwrap());
            }
        }
    }

    #[test]
    fn sampling_is_deterministic((n, edges) in random_model(4), seed in any::<u64>()) {
        let w = build(n, &edges);
        prop_assume!(w.is_ok());
        let w = w.unwrap();
        let a = sample(&w, 50, NoiseSpec::default(), seed);
        let b = sample(&w, 50, NoiseSpec::default(), seed);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ci_test_is_monotone_in_n(r in prop_oneof![-0.9..-0.01f64, 0.01..0.9f64]) {
        let corr = CorrelationMatrix::new(vec!["a".into(), "b".into()], vec![vec![1.0, r], vec![r, 1.0]]).unwrap();
        let none: [&str; 0] = [];
        let mut n = 10u64;
        let mut dependent_seen = false;
        while n < 1 << 40 {
            let s = ci_test(&corr, SampleSize::Finite(n), "a", "b", &none, 0.01).unwrap();
            if dependent_seen {
                prop_assert!(!s.is_independent());
            }
            dependent_seen |= !s.is_independent();
            n *= 4;
        }
        prop_assert!(dependent_seen);
    }

    #[test]
    fn latent_coefficients_solve_their_equations(a12 in coefficient(), a13 in coefficient(), a24 in coefficient(), a34 in coefficient()) {
        let w = WeightedDag::from_edges(["X1", "X2", "X3", "X4"], &[("X1", "X2", a12), ("X1", "X3", a13), ("X2", "X4", a24), ("X3", "X4", a34)]);
        prop_assume!(w.is_ok());
        let corr = implied_covariance(&w.unwrap()).unwrap();
        let ms = [["X1", "X2", "X4"], ["X1", "X3", "X4"]]
            .iter()
            .enumerate()
            .map(|(i, s)| MarginalDataset::from_correlation(format!("m{i}"), corr.restrict(s).unwrap(), SampleSize::Population).unwrap())
            .collect::<Vec<_>>();
        let table = build_correlation_table(&ms).unwrap();
        let v = latent_check(&table, &LatentRoles::new("X1", "X2", "X3", "X4"), Tolerance::default()).unwrap();
        prop_assume!(v.a24.is_some());
        let (b24, b34) = (v.a24.unwrap(), v.a34.unwrap());
        let r = |a: &str, b: &str| table.rho(a, b).unwrap();
        let k = r("X1", "X2") * r("X1", "X3");
        prop_assert!((r("X2", "X4") - (b24 + k * b34)).abs() < 1e-12);
        prop_assert!((r("X3", "X4") - (b34 + k * b24)).abs() < 1e-12);
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn draw_coefficient(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let a = -0.8 + 1.6 * uniform(rng);
        if a != 0.0 {
            return a;
        }
    }
}

#[test]
fn d_connection_gives_nonvanishing_partials() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut checked, mut failures) = (0usize, 0usize);
    for _ in 0..300 {
        let n = 3 + (rng.next_u64() % 3) as usize;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if uniform(&mut rng) < 0.4 {
                    edges.push((i, j, draw_coefficient(&mut rng)));
                }
            }
        }
        let Ok(w) = build(n, &edges) else { continue };
        let corr = implied_covariance(&w).unwrap();
        let nm = w.names().to_vec();
        for (i, x) in nm.iter().enumerate() {
            for y in &nm[i + 1..] {
                let rest: Vec<String> = nm.iter().filter(|v| *v != x && *v != y).cloned().collect();
                for z in subsets(&rest) {
                    if !d_separated(w.dag(), x, y, &z).unwrap() {
                        checked += 1;
                        if partial_correlation(&corr, x, y, &z).unwrap().abs() <= 1e-6 {
                            failures += 1;
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 1000);
    assert!((failures as f64) < 1e-3 * checked as f64, "{failures} of {checked}");
}

#[test]
fn sample_correlations_converge() {
    let w = WeightedDag::from_edges(
        ["X", "A", "B", "C"],
        &[("X", "A", 0.6), ("X", "B", -0.5), ("A", "C", 0.4), ("B", "C", 0.3)],
    )
    .unwrap();
    let truth = implied_covariance(&w).unwrap();
    for n in [10_000usize, 100_000] {
        let mut ok = 0;
        for seed in 0..20 {
            let t = sample(&w, n, NoiseSpec::default(), seed);
            let emp = empirical_correlation(&t).unwrap();
            if emp.max_abs_diff(&truth).unwrap() <= 4.0 / (n as f64).sqrt() {
                ok += 1;
            }
        }
        assert!(ok >= 19, "n={n}: {ok}/20");
    }
}

fn population(w: &WeightedDag, sets: &[&[&str]]) -> Vec<MarginalDataset> {
    let corr = implied_covariance(w).unwrap();
    sets.iter()
        .enumerate()
        .map(|(i, s)| MarginalDataset::from_correlation(format!("m{i}"), corr.restrict(s).unwrap(), SampleSize::Population).unwrap())
        .collect()
}

fn assert_consistent_ledgers(cands: &[unify::Candidate]) {
    for c in cands {
        let violated = c.ledger.iter().any(|e| e.outcome == Outcome::Violated);
        assert_eq!(violated, !c.is_alive(), "{}", c.encoding());
    }
}

#[test]
fn pruning_never_removes_the_generating_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let topologies: [(&[&str], &[(&str, &str)], &[&[&str]]); 3] = [
        (
            &["X", "Y", "A", "B", "C"],
            &[("X", "A"), ("X", "B"), ("Y", "B"), ("Y", "C")],
            &[&["X", "Y", "A"], &["X", "Y", "B"], &["X", "Y", "C"]],
        ),
        (
            &["X", "Y", "A", "B", "C"],
            &[("X", "A"), ("A", "C"), ("C", "Y"), ("X", "B"), ("Y", "B")],
            &[&["X", "Y", "A"], &["X", "Y", "B"], &["X", "Y", "C"]],
        ),
        (
            &["X1", "X2", "X3", "X4"],
            &[("X1", "X2"), ("X1", "X3"), ("X2", "X4"), ("X3", "X4")],
            &[&["X1", "X2", "X4"], &["X1", "X3", "X4"]],
        ),
    ];
    let mut runs = 0;
    while runs < 36 {
        let (nodes, edges, sets) = topologies[runs % 3];
        let e: Vec<(&str, &str, f64)> = edges.iter().map(|&(a, b)| (a, b, draw_coefficient(&mut rng))).collect();
        let Ok(w) = WeightedDag::from_edges(nodes.iter().copied(), &e) else { continue };
        runs += 1;
        let mut opts = PruneOptions::default();
        if nodes.len() == 4 {
            opts.latent = Some(LatentRoles::new("X1", "X2", "X3", "X4"));
        }
        let mut report = prune_pipeline(&population(&w, sets), &opts).unwrap();
        let truth = |r: &unify::PruneReport| r.candidates.iter().find(|c| c.contains(w.dag())).map(|c| c.is_alive());
        assert_eq!(truth(&report), Some(true), "run {runs}: {:?}", w.weighted_edges());
        assert_consistent_ledgers(&report.candidates);
        if nodes.len() == 5 {
            let before: Vec<bool> = report.candidates.iter().map(|c| c.is_alive()).collect();
            let corr = implied_covariance(&w).unwrap();
            for extra in [["A", "B"], ["C", "B"]] {
                let m = MarginalDataset::from_correlation(extra.concat(), corr.restrict(&extra).unwrap(), SampleSize::Population).unwrap();
                report.refine(&m, &Sequential).unwrap();
            }
            for (c, was) in report.candidates.iter().zip(before) {
                assert!(was || !c.is_alive());
            }
            assert_eq!(truth(&report), Some(true));
            assert_consistent_ledgers(&report.candidates);
        }
    }
}

#[test]
fn enumeration_ignores_input_order() {
    let w = WeightedDag::from_edges(
        ["X", "Y", "A", "B", "C"],
        &[("X", "A", 0.4), ("A", "C", 0.5), ("C", "Y", -0.6), ("X", "B", 0.3), ("Y", "B", 0.7)],
    )
    .unwrap();
    let mut ms = population(&w, &[&["X", "Y", "A"], &["X", "Y", "B"], &["X", "Y", "C"]]);
    let vars = ["A", "B", "C", "X", "Y"];
    let cat = extract_ci(&ms, 0.01).unwrap();
    let base: Vec<String> = enumerate_candidates(&vars, &cat, &[], true).unwrap().iter().map(|c| c.encoding()).collect();
    ms.reverse();
    let mut reversed = extract_ci(&ms, 0.01).unwrap();
    reversed.statements.reverse();
    let mut rev_vars = vars;
    rev_vars.reverse();
    let other: Vec<String> = enumerate_candidates(&rev_vars, &reversed, &[], true).unwrap().iter().map(|c| c.encoding()).collect();
    assert_eq!(base, other);
}
