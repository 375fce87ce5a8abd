//! Unifying marginal models: candidate enumeration and trek-rule pruning.

mod candidate;
mod expr;
mod latent;
mod pipeline;
mod redundant;
mod rules;

pub use candidate::{
    enumerate_candidates, Candidate, LedgerEntry, RuleId, Status, MAX_VARIABLES, MAX_VARIABLES_UNFAITHFUL,
};
pub use expr::{eval_with_se, ConstraintKind, CorrExpr, Evaluation, Outcome, Tolerance, TrekConstraint, SAMPLE_Z};
pub use latent::{apply_latent_verdict, latent_check, LatentDecision, LatentRoles, LatentVerdict, DEGENERACY_TOL};
pub use pipeline::{prune_pipeline, prune_pipeline_with, DeferredConstraint, PruneOptions, PruneReport};
pub use redundant::{
    apply_edge_verdict, redundant_edge_check, triangle_from_correlation, EdgeDecision, EdgeVerdict, MarginalEdge,
    MarginalGraph,
};
pub use rules::{
    catalog_prune, chain_order, chain_order_prune, mediation_inequality_prune, refine_with_new_marginal,
    ChainOrder, ChainPosition, Executor, RefineSummary, RuleSettings, Sequential,
};
