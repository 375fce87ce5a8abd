//! Detecting an unmeasured connection between two children of a common parent.
//!
//! Structure assumed: `X1 -> X2`, `X1 -> X3`, `X2 -> X4`, `X3 -> X4`, with
//! `X2` and `X3` not adjacent. Only `{X1, X2, X4}` and `{X1, X3, X4}` need to
//! have been measured.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::marginal::PartialCorrelationTable;

use super::candidate::{Candidate, LedgerEntry, RuleId};
use super::expr::{eval_with_se, CorrExpr, Outcome, Tolerance};
use super::rules::Executor;

/// Below this `|1 - k^2|` the linear solve is abandoned.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentRoles {
    pub x1: String,
    pub x2: String,
    pub x3: String,
    pub x4: String,
}

impl LatentRoles {
    pub fn new(x1: &str, x2: &str, x3: &str, x4: &str) -> Self {
        LatentRoles {
            x1: x1.into(),
            x2: x2.into(),
            x3: x3.into(),
            x4: x4.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentDecision {
    NoExtraConnection,
    ExtraConnection,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVerdict {
    pub roles: LatentRoles,
    pub verdict: LatentDecision,
    /// `|rho14 - (rho12 a24 + rho13 a34)|`; zero when degenerate.
    pub residual: f64,
    pub threshold: f64,
    pub a24: Option<f64>,
    pub a34: Option<f64>,
}

/// Solves for `a24`, `a34` from `rho24` and `rho34` with `rho23 = rho12 rho13`,
/// then compares the implied `rho14` with the measured one.
pub fn latent_check(table: &PartialCorrelationTable, roles: &LatentRoles, tol: Tolerance) -> Result<LatentVerdict> {
    let (x1, x2, x3, x4) = (&roles.x1, &roles.x2, &roles.x3, &roles.x4);
    let r = |a: &str, b: &str| CorrExpr::rho(a, b);
    for (a, b) in [(x1, x2), (x1, x3), (x1, x4), (x2, x4), (x3, x4)] {
        table.rho(a, b)?;
    }
    let k = CorrExpr::Prod(vec![r(x1, x2), r(x1, x3)]);
    let kv = k.eval(table)?;
    let det = 1.0 - kv * kv;
    if det.abs() < DEGENERACY_TOL {
        return Ok(LatentVerdict {
            roles: roles.clone(),
            verdict: LatentDecision::Degenerate,
            residual: 0.0,
            threshold: tol.abs,
            a24: None,
            a34: None,
        });
    }
    let den = CorrExpr::Sum(vec![CorrExpr::Const(1.0), CorrExpr::Prod(vec![k.clone(), k.clone()]).neg()]);
    let a24 = CorrExpr::Sum(vec![r(x2, x4), CorrExpr::Prod(vec![k.clone(), r(x3, x4)]).neg()]).div(den.clone());
    let a34 = CorrExpr::Sum(vec![r(x3, x4), CorrExpr::Prod(vec![k, r(x2, x4)]).neg()]).div(den);
    let predicted = CorrExpr::Sum(vec![
        CorrExpr::Prod(vec![r(x1, x2), a24.clone()]),
        CorrExpr::Prod(vec![r(x1, x3), a34.clone()]),
    ]);
    let (diff, se) = eval_with_se(&r(x1, x4).sub(predicted), table)?;
    let residual = diff.abs();
    let threshold = tol.threshold(se);
    Ok(LatentVerdict {
        roles: roles.clone(),
        verdict: if residual <= threshold {
            LatentDecision::NoExtraConnection
        } else {
            LatentDecision::ExtraConnection
        },
        residual,
        threshold,
        a24: Some(a24.eval(table)?),
        a34: Some(a34.eval(table)?),
    })
}

/// Rule R5. Applies to candidates containing the assumed skeleton: an extra
/// connection rules out those separating `X2` and `X3` given `X1`; its
/// absence rules out those that do not.
pub fn apply_latent_verdict(candidates: &mut [Candidate], verdict: &LatentVerdict, exec: &dyn Executor) {
    if verdict.verdict == LatentDecision::Degenerate {
        return;
    }
    exec.for_each(candidates, &|c| {
        if !c.is_alive() {
            return;
        }
        let g = &c.graph;
        let idx: Vec<usize> = [&verdict.roles.x1, &verdict.roles.x2, &verdict.roles.x3, &verdict.roles.x4]
            .iter()
            .filter_map(|v| g.index_of(v).ok())
            .collect();
        let [i1, i2, i3, i4] = idx[..] else { return };
        if ![(i1, i2), (i1, i3), (i2, i4), (i3, i4)].iter().all(|&(a, b)| g.adjacent(a, b)) {
            return;
        }
        let mut z = vec![false; g.len()];
        z[i1] = true;
        let separated = crate::dsep::d_separated_idx(g, i2, i3, &z);
        let extra = verdict.verdict == LatentDecision::ExtraConnection;
        let roles = &verdict.roles;
        c.record(LedgerEntry {
            rule: RuleId::LatentResidual,
            key: format!("R5 {}~{} given {}", roles.x2, roles.x3, roles.x1),
            description: format!(
                "residual equation for rho({},{}) {} an extra connection between {} and {}",
                roles.x1,
                roles.x4,
                if extra { "indicates" } else { "rules out" },
                roles.x2,
                roles.x3
            ),
            evidence: format!("residual={:.3e} threshold={:.3e}", verdict.residual, verdict.threshold),
            outcome: if separated == extra {
                Outcome::Violated
            } else {
                Outcome::Satisfied
            },
        });
    });
}
