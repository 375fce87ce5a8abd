//! Choosing the next marginal to measure, and the trek tests it makes possible.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::{Pair, PartialCorrelationTable};
use crate::unify::{eval_with_se, ConstraintKind, CorrExpr, Evaluation, Tolerance, TrekConstraint};

/// A suspected trek from `endpoints.0` to `endpoints.1` through `interior`, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrekHypothesis {
    pub endpoints: (String, String),
    pub interior: Vec<String>,
    /// `|rho(anchor, v)|` for every interior node and the far endpoint.
    pub evidence: Vec<(String, OrderedAbs)>,
}

/// An `f64` magnitude that can live in `Eq` types; compared by bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedAbs(pub f64);

impl Eq for OrderedAbs {}

impl TrekHypothesis {
    pub fn anchor(&self) -> &str {
        &self.endpoints.0
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoints.1
    }

    /// All nodes from anchor to endpoint.
    pub fn nodes(&self) -> Vec<&str> {
        let mut out = vec![self.endpoints.0.as_str()];
        out.extend(self.interior.iter().map(String::as_str));
        out.push(&self.endpoints.1);
        out
    }

    /// Number of edges on the hypothesized trek.
    pub fn len(&self) -> usize {
        self.interior.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn differs(table: &PartialCorrelationTable, a: &Pair, b: &Pair, tol: Tolerance) -> bool {
    let diff = CorrExpr::Rho(a.clone()).abs().sub(CorrExpr::Rho(b.clone()).abs());
    match eval_with_se(&diff, table) {
        Ok((d, se)) => d.abs() > tol.threshold(se),
        Err(_) => false,
    }
}

fn nonzero(table: &PartialCorrelationTable, a: &str, b: &str, tol: Tolerance) -> Option<bool> {
    let (v, se) = eval_with_se(&CorrExpr::rho(a, b), table).ok()?;
    Some(v.abs() > tol.threshold(se))
}

/// Chains of strictly decreasing `|rho(anchor, .)|`, one node per magnitude level.
///
/// Nodes tied within tolerance form a level; each maximal chain picks one node
/// per level. A chain is dropped when a node correlated with another anchor
/// that is independent of this one precedes a node uncorrelated with it,
/// since such a node cannot sit upstream on a trek from this anchor. Chains
/// need at least one interior node.
pub fn hypothesize_treks<S: AsRef<str>>(
    table: &PartialCorrelationTable,
    anchors: &[S],
    tol: Tolerance,
) -> Vec<TrekHypothesis> {
    let anchor_names: BTreeSet<&str> = anchors.iter().map(AsRef::as_ref).collect();
    let mut out = Vec::new();
    for u in anchors.iter().map(AsRef::as_ref) {
        let mut scored: Vec<(String, f64)> = table
            .union_variables()
            .iter()
            .filter(|w| !anchor_names.contains(w.as_str()))
            .filter(|w| nonzero(table, u, w, tol) == Some(true))
            .map(|w| (w.clone(), table.rho(u, w).expect("known").abs()))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut levels: Vec<Vec<(String, f64)>> = Vec::new();
        for item in scored {
            let tied = levels.last().is_some_and(|lvl| {
                !differs(table, &Pair::new(u, &lvl[0].0), &Pair::new(u, &item.0), tol)
            });
            if tied {
                levels.last_mut().expect("nonempty").push(item);
            } else {
                levels.push(vec![item]);
            }
        }
        if levels.len() < 2 {
            continue;
        }
        let others: Vec<&str> = anchor_names
            .iter()
            .copied()
            .filter(|&o| o != u && nonzero(table, u, o, tol) == Some(false))
            .collect();
        let mut choice = vec![0usize; levels.len()];
        loop {
            let chain: Vec<&(String, f64)> = choice.iter().zip(&levels).map(|(&i, l)| &l[i]).collect();
            let consistent = others.iter().all(|o| {
                let dep: Vec<Option<bool>> = chain.iter().map(|(w, _)| nonzero(table, w, o, tol)).collect();
                // no dependent node may come before an independent one
                let first_indep_after_dep = dep
                    .iter()
                    .position(|d| *d == Some(true))
                    .is_some_and(|i| dep[i..].contains(&Some(false)));
                !first_indep_after_dep
            });
            if consistent {
                let (last, interior) = chain.split_last().expect("two levels");
                out.push(TrekHypothesis {
                    endpoints: (u.to_string(), last.0.clone()),
                    interior: interior.iter().map(|(w, _)| w.clone()).collect(),
                    evidence: chain.iter().map(|(w, r)| (w.clone(), OrderedAbs(*r))).collect(),
                });
            }
            // odometer over one node per level
            let mut k = levels.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                choice[k] += 1;
                if choice[k] < levels[k].len() {
                    break;
                }
                choice[k] = 0;
                if k == 0 {
                    k = usize::MAX;
                    break;
                }
            }
            if k == usize::MAX {
                break;
            }
        }
    }
    out
}

/// Result of one of the planner's ratio tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrekTestResult {
    pub pass: bool,
    /// Largest residual among the evaluated equations.
    pub residual: f64,
    pub checks: Vec<(String, Evaluation)>,
    pub diagnostic: Option<String>,
}

fn require(table: &PartialCorrelationTable, pairs: &[(&str, &str)]) -> Result<()> {
    for (a, b) in pairs {
        table.rho(a, b)?;
    }
    Ok(())
}

fn require_nonzero(table: &PartialCorrelationTable, pairs: &[(&str, &str)], tol: Tolerance) -> Result<()> {
    for (a, b) in pairs {
        if table.rho(a, b)?.abs() <= tol.abs {
            return Err(Error::ZeroCorrelation(a.to_string(), b.to_string()));
        }
    }
    Ok(())
}

fn factorization(u: &str, m: &str, v: &str) -> TrekConstraint {
    TrekConstraint::new(
        format!("|rho({u},{v})| = |rho({u},{m})| |rho({m},{v})|"),
        ConstraintKind::Factorization,
        CorrExpr::abs_rho(u, v),
        CorrExpr::Prod(vec![CorrExpr::abs_rho(u, m), CorrExpr::abs_rho(m, v)]),
    )
    .with_signed(
        CorrExpr::rho(u, v),
        CorrExpr::Prod(vec![CorrExpr::rho(u, m), CorrExpr::rho(m, v)]),
    )
}

fn summarize(checks: Vec<(String, Evaluation)>, diagnostic: Option<String>) -> TrekTestResult {
    let pass = diagnostic.is_none() && checks.iter().all(|(_, e)| e.passed());
    let residual = checks.iter().map(|(_, e)| e.residual).fold(0.0, f64::max);
    TrekTestResult {
        pass,
        residual,
        checks,
        diagnostic,
    }
}

/// Tests whether the interior nodes lie, in order, on the unique trek between the endpoints.
///
/// The required equation is `|rho(U,V)| = |rho(U,L)| |rho(L,V)|` for the last
/// interior node `L`, the ratio form that does not need the correlations
/// between interior nodes. Every other triple along the chain whose three
/// correlations are known is checked the same way. With no interior nodes
/// the test passes vacuously.
pub fn chain_membership_test(
    table: &PartialCorrelationTable,
    trek: &TrekHypothesis,
    tol: Tolerance,
) -> Result<TrekTestResult> {
    let nodes = trek.nodes();
    let Some(last) = trek.interior.last() else {
        return Ok(summarize(Vec::new(), None));
    };
    let (u, v) = (trek.anchor(), trek.endpoint());
    require(table, &[(u, v), (u, last), (last, v)])?;
    require_nonzero(table, &[(u, &trek.interior[0]), (last, v)], tol)?;
    let mut checks = Vec::new();
    let core = factorization(u, last, v);
    checks.push((core.id.clone(), core.evaluate(table, tol)));
    let k = nodes.len();
    for i in 0..k {
        for j in (i + 1)..k {
            for l in (j + 1)..k {
                if (i, j, l) == (0, k - 2, k - 1) {
                    continue;
                }
                let c = factorization(nodes[i], nodes[j], nodes[l]);
                if c.missing(table).is_empty() {
                    checks.push((c.id.clone(), c.evaluate(table, tol)));
                }
            }
        }
    }
    Ok(summarize(checks, None))
}

/// Tests `|rho(B,F)| = |rho(X,B)||rho(X,F)| + |rho(Y,B)||rho(Y,F)|`: one trek
/// between `b` and `f` through each anchor and no other.
pub fn two_trek_decomposition_test(
    table: &PartialCorrelationTable,
    b: &str,
    f: &str,
    via: (&str, &str),
    tol: Tolerance,
) -> Result<TrekTestResult> {
    let (x, y) = via;
    require(table, &[(b, f), (x, b), (x, f), (y, b), (y, f)])?;
    let c = TrekConstraint::new(
        format!("|rho({b},{f})| = |rho({x},{b})| |rho({x},{f})| + |rho({y},{b})| |rho({y},{f})|"),
        ConstraintKind::Factorization,
        CorrExpr::abs_rho(b, f),
        CorrExpr::Sum(vec![
            CorrExpr::Prod(vec![CorrExpr::abs_rho(x, b), CorrExpr::abs_rho(x, f)]),
            CorrExpr::Prod(vec![CorrExpr::abs_rho(y, b), CorrExpr::abs_rho(y, f)]),
        ]),
    )
    .with_signed(
        CorrExpr::rho(b, f),
        CorrExpr::Sum(vec![
            CorrExpr::Prod(vec![CorrExpr::rho(x, b), CorrExpr::rho(x, f)]),
            CorrExpr::Prod(vec![CorrExpr::rho(y, b), CorrExpr::rho(y, f)]),
        ]),
    );
    let ev = c.evaluate(table, tol);
    Ok(summarize(vec![(c.id, ev)], None))
}

/// Names for the second-trek test: `b` and `f` joined by a trek through `x`
/// and another through `y`, with `e` suspected on the latter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecondTrekRoles {
    pub b: String,
    pub f: String,
    pub x: String,
    pub y: String,
    pub e: String,
}

/// Tests whether `e` lies on the trek from `b` to `f` through `y`:
/// `(|rho(B,F)| - |rho(X,B)||rho(X,F)|) / (|rho(B,Y)||rho(Y,E)|) = |rho(E,F)|`.
///
/// The numerator is what remains of `rho(B,F)` after removing the trek
/// through `x`. It must be positive for a second trek to exist.
pub fn second_trek_membership_test(
    table: &PartialCorrelationTable,
    roles: &SecondTrekRoles,
    tol: Tolerance,
) -> Result<TrekTestResult> {
    let SecondTrekRoles { b, f, x, y, e } = roles;
    require(table, &[(b, f), (x, b), (x, f), (b, y), (y, e), (e, f)])?;
    require_nonzero(table, &[(b, y), (y, e)], tol)?;
    let numerator = CorrExpr::abs_rho(b, f).sub(CorrExpr::Prod(vec![CorrExpr::abs_rho(x, b), CorrExpr::abs_rho(x, f)]));
    let (num, se) = eval_with_se(&numerator, table)?;
    let c = TrekConstraint::new(
        format!("(|rho({b},{f})| - |rho({x},{b})| |rho({x},{f})|) / (|rho({b},{y})| |rho({y},{e})|) = |rho({e},{f})|"),
        ConstraintKind::Factorization,
        numerator.div(CorrExpr::Prod(vec![CorrExpr::abs_rho(b, y), CorrExpr::abs_rho(y, e)])),
        CorrExpr::abs_rho(e, f),
    );
    let ev = c.evaluate(table, tol);
    let diagnostic = (num <= tol.threshold(se)).then(|| {
        format!("nothing of rho({b},{f}) is left for a trek through {y} (remainder {num:.3e})")
    });
    Ok(summarize(vec![(c.id, ev)], diagnostic))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "test")]
pub enum PlannedKind {
    ChainMembership { hypothesis: TrekHypothesis },
    TwoTrek { b: String, f: String, x: String, y: String },
    SecondTrek { roles: SecondTrekRoles },
}

/// A planner test and the pairs it needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTest {
    pub id: String,
    pub kind: PlannedKind,
    pub required: Vec<Pair>,
    /// Edges on the longest trek the test is about.
    pub trek_length: usize,
}

impl PlannedTest {
    pub fn missing(&self, table: &PartialCorrelationTable) -> Vec<Pair> {
        self.required.iter().filter(|p| table.entry(p).is_none()).cloned().collect()
    }

    pub fn run(&self, table: &PartialCorrelationTable, tol: Tolerance) -> Result<TrekTestResult> {
        match &self.kind {
            PlannedKind::ChainMembership { hypothesis } => chain_membership_test(table, hypothesis, tol),
            PlannedKind::TwoTrek { b, f, x, y } => two_trek_decomposition_test(table, b, f, (x, y), tol),
            PlannedKind::SecondTrek { roles } => second_trek_membership_test(table, roles, tol),
        }
    }
}

fn pairs_of(list: &[(&str, &str)]) -> Vec<Pair> {
    let set: BTreeSet<Pair> = list.iter().map(|(a, b)| Pair::new(*a, *b)).collect();
    set.into_iter().collect()
}

/// Every test suggested by the hypotheses: chain membership for each
/// hypothesis, and for two hypotheses from independent anchors that end at
/// the same node `F`, the two-trek test for each node `B` correlated with
/// both anchors plus the second-trek test for each interior node.
pub fn planned_tests(hypotheses: &[TrekHypothesis], table: &PartialCorrelationTable, tol: Tolerance) -> Vec<PlannedTest> {
    let mut out = Vec::new();
    for h in hypotheses {
        if let Some(last) = h.interior.last() {
            out.push(PlannedTest {
                id: format!("chain {}", h.nodes().join("-")),
                kind: PlannedKind::ChainMembership { hypothesis: h.clone() },
                required: pairs_of(&[(h.anchor(), h.endpoint()), (h.anchor(), last), (last, h.endpoint())]),
                trek_length: h.len(),
            });
        }
    }
    let mut seen_two = BTreeSet::new();
    for hx in hypotheses {
        for hy in hypotheses {
            let (x, y, f) = (hx.anchor(), hy.anchor(), hx.endpoint());
            if x == y || f != hy.endpoint() || nonzero(table, x, y, tol) != Some(false) {
                continue;
            }
            let len = 1 + hx.len().max(hy.len());
            for b in table.union_variables() {
                let b = b.as_str();
                if [x, y, f].contains(&b) || nonzero(table, x, b, tol) != Some(true) || nonzero(table, y, b, tol) != Some(true) {
                    continue;
                }
                let key = (b.to_string(), f.to_string(), x.min(y).to_string(), x.max(y).to_string());
                if seen_two.insert(key) {
                    out.push(PlannedTest {
                        id: format!("two-trek {b}~{f} via {},{}", x.min(y), x.max(y)),
                        kind: PlannedKind::TwoTrek {
                            b: b.into(),
                            f: f.into(),
                            x: x.min(y).into(),
                            y: x.max(y).into(),
                        },
                        required: pairs_of(&[(b, f), (x, b), (x, f), (y, b), (y, f)]),
                        trek_length: len,
                    });
                }
                for e in &hy.interior {
                    out.push(PlannedTest {
                        id: format!("second-trek {e} on {b}~{f} via {y}"),
                        kind: PlannedKind::SecondTrek {
                            roles: SecondTrekRoles {
                                b: b.into(),
                                f: f.into(),
                                x: x.into(),
                                y: y.into(),
                                e: e.clone(),
                            },
                        },
                        required: pairs_of(&[(b, f), (x, b), (x, f), (b, y), (y, e), (e, f)]),
                        trek_length: len,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementProposal {
    pub variables: Vec<String>,
    pub enabled_tests: Vec<String>,
    pub score: usize,
    /// Longest trek among the enabled tests.
    pub longest_trek: usize,
}

/// Ranks variable sets of size 2 to `budget` by how many deferred tests
/// they would make evaluable.
///
/// Sets already measured together, or adding no unknown pair, are skipped,
/// as are sets enabling nothing. Ties go to the set covering the longest
/// trek, then the smaller set, then the lexicographically first.
pub fn propose_measurements(
    tests: &[PlannedTest],
    table: &PartialCorrelationTable,
    budget: usize,
) -> Result<Vec<MeasurementProposal>> {
    if budget < 2 {
        return Err(Error::Structure(format!("budget must be at least 2, got {budget}")));
    }
    let deferred: Vec<(&PlannedTest, Vec<Pair>)> = tests
        .iter()
        .map(|t| (t, t.missing(table)))
        .filter(|(_, m)| !m.is_empty())
        .collect();
    if deferred.is_empty() {
        return Ok(Vec::new());
    }
    let vars: Vec<&str> = table.union_variables().iter().map(String::as_str).collect();
    let mut out = Vec::new();
    for size in 2..=budget.min(vars.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let set: Vec<&str> = idx.iter().map(|&i| vars[i]).collect();
            let mut new_pairs = BTreeSet::new();
            for (i, a) in set.iter().enumerate() {
                for b in &set[i + 1..] {
                    if !table.is_known(a, b) {
                        new_pairs.insert(Pair::new(*a, *b));
                    }
                }
            }
            if !new_pairs.is_empty() && !table.co_measured(&set) {
                let enabled: Vec<&PlannedTest> = deferred
                    .iter()
                    .filter(|(_, m)| m.iter().all(|p| new_pairs.contains(p)))
                    .map(|(t, _)| *t)
                    .collect();
                if !enabled.is_empty() {
                    out.push(MeasurementProposal {
                        variables: set.iter().map(|s| s.to_string()).collect(),
                        enabled_tests: enabled.iter().map(|t| t.id.clone()).collect(),
                        score: enabled.len(),
                        longest_trek: enabled.iter().map(|t| t.trek_length).max().unwrap_or(0),
                    });
                }
            }
            // next combination in lexicographic order
            let mut k = size;
            while k > 0 && idx[k - 1] == vars.len() - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for j in k..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(b.longest_trek.cmp(&a.longest_trek))
            .then(a.variables.len().cmp(&b.variables.len()))
            .then_with(|| a.variables.cmp(&b.variables))
    });
    Ok(out)
}

/// Hypotheses, their tests, and ranked proposals in one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub hypotheses: Vec<TrekHypothesis>,
    pub tests: Vec<PlannedTest>,
    pub proposals: Vec<MeasurementProposal>,
}

pub fn plan<S: AsRef<str>>(
    table: &PartialCorrelationTable,
    anchors: &[S],
    budget: usize,
    tol: Tolerance,
) -> Result<Plan> {
    let hypotheses = hypothesize_treks(table, anchors, tol);
    let tests = planned_tests(&hypotheses, table, tol);
    let proposals = propose_measurements(&tests, table, budget)?;
    Ok(Plan {
        hypotheses,
        tests,
        proposals,
    })
}
