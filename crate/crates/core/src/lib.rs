//! Linear structural equation models over overlapping marginal datasets:
//! treks and the correlations they imply, d-separation, Markov equivalence,
//! simulation, conditional-independence testing, candidate unification and
//! measurement planning.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corr;
mod dsep;
pub mod equivalence;
pub mod error;
pub mod graph;
mod linalg;
pub mod marginal;
pub mod planner;
pub mod sample;
pub mod stats;
pub mod treks;
pub mod unify;
pub mod weighted;

pub use corr::{partial_correlation, CorrelationMatrix};
pub use dsep::d_separated;
pub use equivalence::{equivalence_classes, markov_equivalent, pattern, Pattern};
pub use error::{Error, Result};
pub use graph::Dag;
pub use marginal::{
    build_correlation_table, extract_ci, CiCatalog, MarginalDataset, Pair, PartialCorrelationTable, Payload,
    TableEntry,
};
pub use planner::{
    chain_membership_test, hypothesize_treks, plan, planned_tests, propose_measurements, second_trek_membership_test,
    two_trek_decomposition_test, MeasurementProposal, Plan, PlannedTest, SecondTrekRoles, TrekHypothesis, TrekTestResult,
};
pub use sample::{empirical_correlation, random_weighted_dag, sample, NoiseFamily, NoiseSpec, SampleTable};
pub use stats::{ci_test, collider_signature, CiStatement, SampleSize, Verdict};
pub use treks::{enumerate_treks, trek_correlation, Trek};
pub use weighted::{calibrate_standardized, implied_covariance, WeightedDag};
