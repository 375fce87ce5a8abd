//! The staged pruning run: CI extraction, enumeration, trek-rule pruning and
//! the optional residual checks.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::{build_correlation_table, extract_ci, CiCatalog, MarginalDataset, Pair, PartialCorrelationTable};

use super::candidate::{enumerate_candidates, Candidate, LedgerEntry};
use super::latent::{apply_latent_verdict, latent_check, LatentRoles, LatentVerdict};
use super::redundant::{apply_edge_verdict, redundant_edge_check, EdgeVerdict, MarginalGraph};
use super::rules::{
    chain_order_prune, mediation_inequality_prune, refine_with_new_marginal, Executor, RefineSummary, RuleSettings,
    Sequential,
};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PruneOptions {
    pub settings: RuleSettings,
    /// Pairs that may never be adjacent.
    pub forbidden: Vec<Pair>,
    pub latent: Option<LatentRoles>,
    /// Oriented triangles over `{X1, X2, X4}` and `{X1, X3, X4}`.
    pub edge_check: Option<(MarginalGraph, MarginalGraph)>,
}

/// A deferred constraint of an alive candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeferredConstraint {
    pub candidate: String,
    pub key: String,
    pub missing: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub union_variables: Vec<String>,
    pub catalog: CiCatalog,
    pub table: PartialCorrelationTable,
    /// Sorted by the canonical encoding of each class representative.
    pub candidates: Vec<Candidate>,
    pub latent: Option<LatentVerdict>,
    pub edge: Option<EdgeVerdict>,
    pub settings: RuleSettings,
}

impl PruneReport {
    pub fn alive(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.is_alive())
    }

    pub fn ruled_out(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| !c.is_alive())
    }

    pub fn deferred(&self) -> Vec<DeferredConstraint> {
        let mut out = Vec::new();
        for c in self.alive() {
            for e in c.deferred() {
                if let super::expr::Outcome::Deferred { missing } = &e.outcome {
                    out.push(DeferredConstraint {
                        candidate: c.encoding(),
                        key: e.key.clone(),
                        missing: missing.clone(),
                    });
                }
            }
        }
        out
    }

    /// Every ledger entry with the encoding of the candidate carrying it.
    pub fn ledger(&self) -> impl Iterator<Item = (String, &LedgerEntry)> {
        self.candidates
            .iter()
            .flat_map(|c| c.ledger.iter().map(move |e| (c.encoding(), e)))
    }

    pub fn refine(&mut self, marginal: &MarginalDataset, exec: &dyn Executor) -> Result<RefineSummary> {
        refine_with_new_marginal(
            &mut self.candidates,
            &mut self.table,
            &mut self.catalog,
            marginal,
            &self.settings,
            exec,
        )
    }
}

pub fn prune_pipeline(marginals: &[MarginalDataset], options: &PruneOptions) -> Result<PruneReport> {
    prune_pipeline_with(marginals, options, &Sequential)
}

/// Runs every stage, distributing per-candidate work through `exec`.
pub fn prune_pipeline_with(
    marginals: &[MarginalDataset],
    options: &PruneOptions,
    exec: &dyn Executor,
) -> Result<PruneReport> {
    if marginals.is_empty() {
        return Err(Error::NoMarginals);
    }
    let settings = options.settings;
    crate::stats::check_alpha(settings.alpha)?;
    let catalog = extract_ci(marginals, settings.alpha)?;
    let table = build_correlation_table(marginals)?;
    let union_variables: Vec<String> = table.union_variables().iter().cloned().collect();
    let mut candidates = enumerate_candidates(&union_variables, &catalog, &options.forbidden, settings.faithfulness)?;

    mediation_inequality_prune(&mut candidates, &table, settings.tolerance, exec);
    chain_order_prune(&mut candidates, &table, settings.tolerance, settings.faithfulness, exec);

    let latent = match &options.latent {
        Some(roles) => {
            let v = latent_check(&table, roles, settings.tolerance)?;
            apply_latent_verdict(&mut candidates, &v, exec);
            Some(v)
        }
        None => None,
    };
    let edge = match &options.edge_check {
        Some((left, right)) => {
            let v = redundant_edge_check(left, right, &table, settings.tolerance)?;
            apply_edge_verdict(&mut candidates, &v, exec);
            Some(v)
        }
        None => None,
    };
    Ok(PruneReport {
        union_variables,
        catalog,
        table,
        candidates,
        latent,
        edge,
        settings,
    })
}
