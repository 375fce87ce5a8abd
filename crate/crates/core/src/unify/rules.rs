//! Trek-rule constraints applied to candidate classes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dsep::d_separated_idx;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::marginal::{marginal_ci, CiCatalog, MarginalDataset, Pair, PartialCorrelationTable};
use crate::stats::CiStatement;

use super::candidate::{Candidate, LedgerEntry, RuleId};
use super::expr::{ConstraintKind, CorrExpr, Outcome, Tolerance, TrekConstraint};

/// Runs a closure over every candidate. Implementations may work in
/// parallel; each candidate is touched by exactly one call.
pub trait Executor {
    fn for_each(&self, candidates: &mut [Candidate], f: &(dyn Fn(&mut Candidate) + Sync));
}

/// In-order, single-threaded execution.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn for_each(&self, candidates: &mut [Candidate], f: &(dyn Fn(&mut Candidate) + Sync)) {
        candidates.iter_mut().for_each(f);
    }
}

/// Settings shared by every rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleSettings {
    pub alpha: f64,
    pub tolerance: Tolerance,
    pub faithfulness: bool,
}

impl Default for RuleSettings {
    fn default() -> Self {
        RuleSettings {
            alpha: crate::stats::DEFAULT_ALPHA,
            tolerance: Tolerance::default(),
            faithfulness: true,
        }
    }
}

/// A constraint the candidate implies, ready to be evaluated.
struct Check {
    rule: RuleId,
    constraint: TrekConstraint,
    description: String,
    /// When set, the candidate is violated if the constraint *holds*.
    contradicted_by_holding: bool,
}

fn sep(g: &Dag, u: usize, v: usize, given: Option<usize>) -> bool {
    let mut z = vec![false; g.len()];
    if let Some(m) = given {
        z[m] = true;
    }
    d_separated_idx(g, u, v, &z)
}

/// Triples `(u, v, m)` with `u < v` not measured together in one marginal.
/// Relations inside a single marginal are already settled by its CI tests.
fn cross_marginal_triples(g: &Dag, table: &PartialCorrelationTable) -> Vec<(usize, usize, usize)> {
    let n = g.len();
    let mut out = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            for m in 0..n {
                if m == u || m == v {
                    continue;
                }
                if table.co_measured(&[g.name(u), g.name(v), g.name(m)]) {
                    continue;
                }
                out.push((u, v, m));
            }
        }
    }
    out
}

fn mediation_checks(g: &Dag, table: &PartialCorrelationTable) -> Vec<Check> {
    let mut out = Vec::new();
    for (u, v, m) in cross_marginal_triples(g, table) {
        if sep(g, u, v, None) || !sep(g, u, v, Some(m)) {
            continue;
        }
        let (un, vn, mn) = (g.name(u), g.name(v), g.name(m));
        for (a, b) in [(un, mn), (mn, vn)] {
            out.push(Check {
                rule: RuleId::MediationInequality,
                constraint: TrekConstraint::new(
                    format!("R3 {un}~{vn} via {mn}: |rho({un},{vn})| <= |rho({a},{b})|"),
                    ConstraintKind::Inequality,
                    CorrExpr::abs_rho(un, vn),
                    CorrExpr::abs_rho(a, b),
                ),
                description: format!("{mn} lies on every trek between {un} and {vn}"),
                contradicted_by_holding: false,
            });
        }
    }
    out
}

fn factorization_checks(g: &Dag, table: &PartialCorrelationTable, faithfulness: bool) -> Vec<Check> {
    let mut out = Vec::new();
    for (u, v, m) in cross_marginal_triples(g, table) {
        let (un, vn, mn) = (g.name(u), g.name(v), g.name(m));
        let signed = || {
            (
                CorrExpr::rho(un, vn),
                CorrExpr::Prod(vec![CorrExpr::rho(un, mn), CorrExpr::rho(mn, vn)]),
            )
        };
        let key = format!("R4 {un}~{vn} via {mn}");
        if sep(g, u, v, Some(m)) {
            if sep(g, u, v, None) {
                continue;
            }
            let (sl, sr) = signed();
            out.push(Check {
                rule: RuleId::ChainOrder,
                constraint: TrekConstraint::new(
                    key,
                    ConstraintKind::Factorization,
                    CorrExpr::abs_rho(un, vn),
                    CorrExpr::Prod(vec![CorrExpr::abs_rho(un, mn), CorrExpr::abs_rho(mn, vn)]),
                )
                .with_signed(sl, sr),
                description: format!("{mn} separates {un} and {vn}, so their correlation factors through {mn}"),
                contradicted_by_holding: false,
            });
        } else if faithfulness {
            let c = TrekConstraint::new(key, ConstraintKind::Factorization, signed().0, signed().1);
            if c.missing(table).is_empty() {
                out.push(Check {
                    rule: RuleId::ChainOrder,
                    constraint: c,
                    description: format!(
                        "{un} and {vn} stay connected given {mn}, so their correlation must not factor through {mn}"
                    ),
                    contradicted_by_holding: true,
                });
            }
        }
    }
    out
}

fn record_checks(c: &mut Candidate, checks: Vec<Check>, table: &PartialCorrelationTable, tol: Tolerance) {
    for check in checks {
        let ev = check.constraint.evaluate(table, tol);
        let outcome = match (&ev.outcome, check.contradicted_by_holding) {
            (Outcome::Deferred { .. }, _) | (_, false) => ev.outcome.clone(),
            (Outcome::Satisfied, true) => Outcome::Violated,
            (Outcome::Violated, true) => Outcome::Satisfied,
        };
        let description = if check.contradicted_by_holding {
            format!("{}; checked {} = {}", check.description, check.constraint.lhs, check.constraint.rhs)
        } else {
            format!("{}; requires {}", check.description, check.constraint.describe())
        };
        c.record(LedgerEntry {
            rule: check.rule,
            key: check.constraint.id.clone(),
            description,
            evidence: ev.to_string(),
            outcome,
        });
    }
}

/// Rule R3: where a candidate puts `M` on every trek between `U` and `V`,
/// `|rho(U,V)| <= |rho(U,M)|` and `|rho(U,V)| <= |rho(M,V)|`. Constraints over
/// unknown pairs are recorded as deferred.
pub fn mediation_inequality_prune(
    candidates: &mut [Candidate],
    table: &PartialCorrelationTable,
    tol: Tolerance,
    exec: &dyn Executor,
) {
    exec.for_each(candidates, &|c| {
        if c.is_alive() {
            let checks = mediation_checks(&c.graph, table);
            record_checks(c, checks, table, tol);
        }
    });
}

/// Rule R4: a candidate that separates `U` and `V` by `M` needs
/// `rho(U,V) = rho(U,M) rho(M,V)`. Under faithfulness, a candidate that keeps
/// them connected given `M` is ruled out when that factorization holds.
pub fn chain_order_prune(
    candidates: &mut [Candidate],
    table: &PartialCorrelationTable,
    tol: Tolerance,
    faithfulness: bool,
    exec: &dyn Executor,
) {
    exec.for_each(candidates, &|c| {
        if c.is_alive() {
            let checks = factorization_checks(&c.graph, table, faithfulness);
            record_checks(c, checks, table, tol);
        }
    });
}

/// Rules R1 and R2: the candidate must reproduce each CI statement.
pub fn catalog_prune(candidates: &mut [Candidate], statements: &[CiStatement], faithfulness: bool, exec: &dyn Executor) {
    exec.for_each(candidates, &|c| {
        if !c.is_alive() {
            return;
        }
        for s in statements {
            let separated = match crate::dsep::d_separated(&c.graph, &s.x, &s.y, &s.given) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let ok = if s.is_independent() {
                separated || !faithfulness
            } else {
                !separated
            };
            let (rule, what) = if s.given.is_empty() {
                (
                    RuleId::NoTrek,
                    if s.is_independent() { "no trek" } else { "a trek" },
                )
            } else {
                (
                    RuleId::Collider,
                    if s.is_independent() {
                        "a separating set"
                    } else {
                        "an open path"
                    },
                )
            };
            c.record(LedgerEntry {
                rule,
                key: format!("{rule} {s}"),
                description: format!("{s} (from {}) needs {what}", s.source),
                evidence: format!("p={:.4} graph {}", s.p_value, if separated { "separates" } else { "connects" }),
                outcome: if ok { Outcome::Satisfied } else { Outcome::Violated },
            });
        }
    });
}

/// Relative position of `a` and `c` on a trek from `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainPosition {
    CBetween,
    ABetween,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOrder {
    pub verdict: ChainPosition,
    /// `| |rho(x,a)| - |rho(a,c)||rho(x,c)| |`.
    pub residual_c_between: f64,
    /// `| |rho(x,c)| - |rho(a,c)||rho(x,a)| |`.
    pub residual_a_between: f64,
    pub note: Option<String>,
}

/// Decides which of `a`, `c` lies between `x` and the other by the two factorizations.
pub fn chain_order(table: &PartialCorrelationTable, x: &str, a: &str, c: &str, tol: Tolerance) -> Result<ChainOrder> {
    for (p, q) in [(x, a), (x, c), (a, c)] {
        let r = table.rho(p, q)?;
        if r.abs() <= tol.abs {
            return Err(Error::ZeroCorrelation(p.to_string(), q.to_string()));
        }
    }
    let c_between = TrekConstraint::new(
        "c-between",
        ConstraintKind::Factorization,
        CorrExpr::abs_rho(x, a),
        CorrExpr::Prod(vec![CorrExpr::abs_rho(a, c), CorrExpr::abs_rho(x, c)]),
    )
    .evaluate(table, tol);
    let a_between = TrekConstraint::new(
        "a-between",
        ConstraintKind::Factorization,
        CorrExpr::abs_rho(x, c),
        CorrExpr::Prod(vec![CorrExpr::abs_rho(a, c), CorrExpr::abs_rho(x, a)]),
    )
    .evaluate(table, tol);
    let (verdict, note) = match (c_between.passed(), a_between.passed()) {
        (true, false) => (ChainPosition::CBetween, None),
        (false, true) => (ChainPosition::ABetween, None),
        (true, true) => (
            ChainPosition::Neither,
            Some("both factorizations hold within tolerance".to_string()),
        ),
        (false, false) => (ChainPosition::Neither, None),
    };
    Ok(ChainOrder {
        verdict,
        residual_c_between: c_between.residual,
        residual_a_between: a_between.residual,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RefineSummary {
    pub new_pairs: Vec<Pair>,
    pub new_statements: usize,
    pub newly_ruled_out: Vec<String>,
}

/// Adds a marginal, then re-checks every alive candidate: the new CI
/// statements first, then all trek constraints, including those deferred
/// before for lack of a pair.
pub fn refine_with_new_marginal(
    candidates: &mut [Candidate],
    table: &mut PartialCorrelationTable,
    catalog: &mut CiCatalog,
    marginal: &MarginalDataset,
    settings: &RuleSettings,
    exec: &dyn Executor,
) -> Result<RefineSummary> {
    if let Some(c) = candidates.first() {
        for v in &marginal.variables {
            if c.graph.index_of(v).is_err() {
                return Err(Error::Structure(format!(
                    "marginal `{}` introduces `{v}`, which the candidates do not contain; enumerate again",
                    marginal.id
                )));
            }
        }
    }
    if catalog.exhaustive.iter().any(|(id, _)| *id == marginal.id) {
        return Err(Error::DuplicateId(marginal.id.clone()));
    }
    let statements = marginal_ci(marginal, settings.alpha)?;
    let mut trial_table = table.clone();
    let new_pairs = trial_table.extend_with(marginal)?;
    catalog.extend(statements.clone())?;
    catalog.exhaustive.push((marginal.id.clone(), true));
    *table = trial_table;

    let alive_before: Vec<bool> = candidates.iter().map(Candidate::is_alive).collect();
    catalog_prune(candidates, &statements, settings.faithfulness, exec);
    mediation_inequality_prune(candidates, table, settings.tolerance, exec);
    chain_order_prune(candidates, table, settings.tolerance, settings.faithfulness, exec);
    let newly_ruled_out = candidates
        .iter()
        .zip(alive_before)
        .filter(|(c, was)| *was && !c.is_alive())
        .map(|(c, _)| c.encoding())
        .collect();
    Ok(RefineSummary {
        new_pairs,
        new_statements: statements.len(),
        newly_ruled_out,
    })
}
