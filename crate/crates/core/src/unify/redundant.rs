//! Testing whether an edge between the ends of two oriented triangles is redundant.
//!
//! Each triangle is a directed graph over one marginal, as returned by a
//! non-Gaussian orientation method. The left one covers `{X1, X2, X4}` with
//! `X1 -> X2 -> X4`, the right one `{X1, X3, X4}` with `X1 -> X3 -> X4`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::marginal::{Pair, PartialCorrelationTable};
use crate::weighted::WeightedDag;

use super::candidate::{Candidate, LedgerEntry, RuleId};
use super::expr::{eval_with_se, CorrExpr, Outcome, Tolerance};
use super::rules::Executor;

/// An edge of a marginal graph; undirected edges carry no orientation yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalEdge {
    pub from: String,
    pub to: String,
    pub directed: bool,
    pub coefficient: Option<f64>,
}

/// A possibly partially oriented graph estimated from one marginal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MarginalGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<MarginalEdge>,
}

impl MarginalGraph {
    /// The graph as a weighted DAG; fails on unoriented edges or missing coefficients.
    pub fn oriented(&self) -> Result<WeightedDag> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if !e.directed {
                return Err(Error::UndirectedEdge(e.from.clone(), e.to.clone()));
            }
            let a = e
                .coefficient
                .ok_or_else(|| Error::MissingCoefficient(e.from.clone(), e.to.clone()))?;
            edges.push((e.from.as_str(), e.to.as_str(), a));
        }
        WeightedDag::from_edges(self.nodes.iter().cloned(), &edges)
    }
}

impl From<&WeightedDag> for MarginalGraph {
    fn from(w: &WeightedDag) -> Self {
        MarginalGraph {
            nodes: w.names().to_vec(),
            edges: w
                .weighted_edges()
                .into_iter()
                .map(|(from, to, a)| MarginalEdge {
                    from,
                    to,
                    directed: true,
                    coefficient: Some(a),
                })
                .collect(),
        }
    }
}

/// Standardized regression coefficients of a fully ordered triangle
/// `s -> m`, `s -> t`, `m -> t` over a marginal correlation matrix.
///
/// This is what an orientation method returns once it has found the causal
/// order. Edges whose coefficient vanishes are left out.
pub fn triangle_from_correlation(corr: &CorrelationMatrix, order: [&str; 3]) -> Result<MarginalGraph> {
    let [s, m, t] = order;
    let r_sm = corr.get(s, m)?;
    let r_st = corr.get(s, t)?;
    let r_mt = corr.get(m, t)?;
    let det = 1.0 - r_sm * r_sm;
    if det.abs() < 1e-12 {
        return Err(Error::SingularConditioning(f64::INFINITY));
    }
    let b_st = (r_st - r_sm * r_mt) / det;
    let b_mt = (r_mt - r_sm * r_st) / det;
    let edges = [(s, m, r_sm), (s, t, b_st), (m, t, b_mt)]
        .into_iter()
        .filter(|&(_, _, a)| a.abs() > 1e-12)
        .map(|(from, to, a)| MarginalEdge {
            from: from.to_string(),
            to: to.to_string(),
            directed: true,
            coefficient: Some(a),
        })
        .collect();
    Ok(MarginalGraph {
        nodes: vec![s.to_string(), m.to_string(), t.to_string()],
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeDecision {
    Keep,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeVerdict {
    pub decision: EdgeDecision,
    pub x1: String,
    pub x2: String,
    pub x3: String,
    pub x4: String,
    pub a12: f64,
    pub a24: f64,
    pub a13: f64,
    pub a34: f64,
    /// `|rho14 - (a12 a24 + a13 a34)|`.
    pub residual: f64,
    pub threshold: f64,
}

fn coefficient(w: &WeightedDag, p: &str, c: &str) -> Option<f64> {
    w.coefficient(w.dag().index_of(p).ok()?, w.dag().index_of(c).ok()?)
}

/// Identifies `X1..X4` from the two triangles and compares `rho14` with the
/// sum over the two identified treks. Remove the `X1 - X4` edge iff the
/// residual is within tolerance (inclusive).
pub fn redundant_edge_check(
    left: &MarginalGraph,
    right: &MarginalGraph,
    table: &PartialCorrelationTable,
    tol: Tolerance,
) -> Result<EdgeVerdict> {
    let wl = left.oriented()?;
    let wr = right.oriented()?;
    if wl.names().len() != 3 || wr.names().len() != 3 {
        return Err(Error::Structure("each marginal graph must have exactly three nodes".into()));
    }
    let common: Vec<&String> = wl.names().iter().filter(|n| wr.names().contains(n)).collect();
    if common.len() != 2 {
        return Err(Error::Structure("the two triangles must share exactly two nodes".into()));
    }
    let x2 = wl.names().iter().find(|n| !common.contains(n)).expect("three nodes").clone();
    let x3 = wr.names().iter().find(|n| !common.contains(n)).expect("three nodes").clone();
    let roles = [(common[0], common[1]), (common[1], common[0])]
        .into_iter()
        .find(|(s, t)| {
            coefficient(&wl, s, &x2).is_some()
                && coefficient(&wl, &x2, t).is_some()
                && coefficient(&wr, s, &x3).is_some()
                && coefficient(&wr, &x3, t).is_some()
        })
        .ok_or_else(|| {
            Error::Structure(format!(
                "triangles do not contain two treks {0} -> {x2} -> {1} and {0} -> {x3} -> {1} in either direction",
                common[0], common[1]
            ))
        })?;
    let (x1, x4) = (roles.0.clone(), roles.1.clone());
    let a12 = coefficient(&wl, &x1, &x2).expect("checked");
    let a24 = coefficient(&wl, &x2, &x4).expect("checked");
    let a13 = coefficient(&wr, &x1, &x3).expect("checked");
    let a34 = coefficient(&wr, &x3, &x4).expect("checked");
    table.rho(&x1, &x4)?;
    let predicted = a12 * a24 + a13 * a34;
    let (diff, se) = eval_with_se(
        &CorrExpr::Sum(vec![CorrExpr::Rho(Pair::new(x1.clone(), x4.clone())), CorrExpr::Const(-predicted)]),
        table,
    )?;
    let residual = diff.abs();
    let threshold = tol.threshold(se);
    Ok(EdgeVerdict {
        decision: if residual <= threshold {
            EdgeDecision::Remove
        } else {
            EdgeDecision::Keep
        },
        x1,
        x2,
        x3,
        x4,
        a12,
        a24,
        a13,
        a34,
        residual,
        threshold,
    })
}

/// Rule R6: once the edge is found redundant, candidates adjacent on `X1 - X4` are ruled out.
pub fn apply_edge_verdict(candidates: &mut [Candidate], verdict: &EdgeVerdict, exec: &dyn Executor) {
    exec.for_each(candidates, &|c| {
        if !c.is_alive() {
            return;
        }
        let (Ok(i1), Ok(i4)) = (c.graph.index_of(&verdict.x1), c.graph.index_of(&verdict.x4)) else {
            return;
        };
        let adjacent = c.graph.adjacent(i1, i4);
        let violated = verdict.decision == EdgeDecision::Remove && adjacent;
        c.record(LedgerEntry {
            rule: RuleId::RedundantEdge,
            key: format!("R6 {}~{}", verdict.x1, verdict.x4),
            description: format!(
                "rho({},{}) {} the treks through {} and {}",
                verdict.x1,
                verdict.x4,
                match verdict.decision {
                    EdgeDecision::Remove => "is fully explained by",
                    EdgeDecision::Keep => "exceeds",
                },
                verdict.x2,
                verdict.x3
            ),
            evidence: format!("residual={:.3e} threshold={:.3e}", verdict.residual, verdict.threshold),
            outcome: if violated { Outcome::Violated } else { Outcome::Satisfied },
        });
    });
}
