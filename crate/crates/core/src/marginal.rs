//! Marginal datasets, the CI statements they support, and the correlations
//! they make known.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::sample::{empirical_correlation, SampleTable};
use crate::stats::{ci_test, CiStatement, SampleSize, POPULATION_TOL};

/// z multiplier for the 99% radius used when reconciling overlapping estimates.
pub const OVERLAP_Z: f64 = 2.576;

/// Unordered variable pair, stored with the smaller name first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair(String, String);

impl Pair {
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Pair {
        let (x, y) = (x.into(), y.into());
        if x <= y {
            Pair(x, y)
        } else {
            Pair(y, x)
        }
    }

    pub fn first(&self) -> &str {
        &self.0
    }

    pub fn second(&self) -> &str {
        &self.1
    }

    pub fn contains(&self, v: &str) -> bool {
        self.0 == v || self.1 == v
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Payload {
    Samples { table: SampleTable },
    Correlation { matrix: CorrelationMatrix, n: SampleSize },
}

/// A dataset over a subset of the variables of the shared causal system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDataset {
    pub id: String,
    pub variables: Vec<String>,
    pub payload: Payload,
}

impl MarginalDataset {
    pub fn new(id: impl Into<String>, variables: Vec<String>, payload: Payload) -> Result<Self> {
        let id = id.into();
        let declared: BTreeSet<&String> = variables.iter().collect();
        if declared.len() != variables.len() {
            return Err(Error::VariableMismatch {
                id,
                detail: "duplicate variable".to_string(),
            });
        }
        let carried: BTreeSet<&String> = match &payload {
            Payload::Samples { table } => table.variables().iter().collect(),
            Payload::Correlation { matrix, .. } => matrix.variables().iter().collect(),
        };
        if declared != carried {
            return Err(Error::VariableMismatch {
                detail: format!("declared {:?} but payload carries {:?}", declared, carried),
                id,
            });
        }
        if variables.len() < 2 {
            return Err(Error::VariableMismatch {
                id,
                detail: "a marginal needs at least two variables".to_string(),
            });
        }
        Ok(MarginalDataset { id, variables, payload })
    }

    pub fn from_samples(id: impl Into<String>, table: SampleTable) -> Result<Self> {
        let vars = table.variables().to_vec();
        Self::new(id, vars, Payload::Samples { table })
    }

    pub fn from_correlation(id: impl Into<String>, matrix: CorrelationMatrix, n: SampleSize) -> Result<Self> {
        let vars = matrix.variables().to_vec();
        Self::new(id, vars, Payload::Correlation { matrix, n })
    }

    /// Correlation matrix over `variables` (declared order) and its sample size.
    pub fn correlation(&self) -> Result<(CorrelationMatrix, SampleSize)> {
        let (full, n) = match &self.payload {
            Payload::Samples { table } => (
                empirical_correlation(table)?,
                SampleSize::Finite(table.n_rows() as u64),
            ),
            Payload::Correlation { matrix, n } => (matrix.clone(), *n),
        };
        Ok((full.restrict(&self.variables)?, n))
    }

    /// Same data, but every statistic treated as an exact population value.
    pub fn into_population(self) -> Result<Self> {
        let (matrix, _) = self.correlation()?;
        Self::from_correlation(self.id, matrix, SampleSize::Population)
    }
}

/// Rejects collections with repeated ids.
pub fn validate_collection(marginals: &[MarginalDataset]) -> Result<()> {
    let mut ids = BTreeSet::new();
    for m in marginals {
        if !ids.insert(m.id.as_str()) {
            return Err(Error::DuplicateId(m.id.clone()));
        }
    }
    Ok(())
}

/// Every CI statement extracted from a collection of marginals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CiCatalog {
    pub statements: Vec<CiStatement>,
    /// Marginal id and whether every pair/conditioning set in it was tested.
    pub exhaustive: Vec<(String, bool)>,
}

impl CiCatalog {
    /// Builds a catalog, rejecting contradictory duplicates.
    pub fn from_statements(statements: Vec<CiStatement>) -> Result<Self> {
        let mut cat = CiCatalog::default();
        cat.extend(statements)?;
        Ok(cat)
    }

    pub fn extend(&mut self, statements: Vec<CiStatement>) -> Result<()> {
        let mut seen: BTreeMap<(String, String, Vec<String>), bool> = self
            .statements
            .iter()
            .map(|s| (s.key(), s.is_independent()))
            .collect();
        for s in &statements {
            if s.x == s.y || s.given.contains(&s.x) || s.given.contains(&s.y) || !(0.0..=1.0).contains(&s.p_value) {
                return Err(Error::Structure(format!("malformed statement {s}")));
            }
            if let Some(prev) = seen.insert(s.key(), s.is_independent()) {
                if prev != s.is_independent() {
                    let (a, b, g) = s.key();
                    return Err(Error::ContradictoryStatements(format!("{a}, {b} | {{{}}}", g.join(","))));
                }
            }
        }
        self.statements.extend(statements);
        Ok(())
    }

    /// All variables mentioned by any statement.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for s in &self.statements {
            out.insert(s.x.clone());
            out.insert(s.y.clone());
            out.extend(s.given.iter().cloned());
        }
        out
    }
}

/// Tests every pair against every conditioning subset of the remaining variables of one marginal.
pub fn marginal_ci(marginal: &MarginalDataset, alpha: f64) -> Result<Vec<CiStatement>> {
    let (corr, n) = marginal.correlation()?;
    let vars = &marginal.variables;
    let mut out = Vec::new();
    for i in 0..vars.len() {
        for j in (i + 1)..vars.len() {
            let rest: Vec<&String> = vars.iter().enumerate().filter(|&(k, _)| k != i && k != j).map(|(_, v)| v).collect();
            let mut subsets: Vec<Vec<&String>> = (0u32..(1 << rest.len()))
                .map(|mask| {
                    rest.iter()
                        .enumerate()
                        .filter(|&(k, _)| mask & (1 << k) != 0)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
            for given in subsets {
                let mut s = ci_test(&corr, n, &vars[i], &vars[j], &given, alpha)?;
                s.source = marginal.id.clone();
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// CI statements from every marginal, exhaustive within each.
pub fn extract_ci(marginals: &[MarginalDataset], alpha: f64) -> Result<CiCatalog> {
    validate_collection(marginals)?;
    let mut catalog = CiCatalog::default();
    for m in marginals {
        catalog.extend(marginal_ci(m, alpha)?)?;
        catalog.exhaustive.push((m.id.clone(), true));
    }
    Ok(catalog)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub value: f64,
    pub n: SampleSize,
    pub source: String,
}

/// A reconciled correlation for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub value: f64,
    pub n: SampleSize,
}

/// Correlations known from at least one marginal. Pairs never measured
/// together are absent, never zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PartialCorrelationTable {
    known: BTreeMap<Pair, TableEntry>,
    contributions: BTreeMap<Pair, Vec<Contribution>>,
    union_variables: BTreeSet<String>,
}

impl PartialCorrelationTable {
    pub fn get(&self, a: &str, b: &str) -> Option<TableEntry> {
        self.known.get(&Pair::new(a, b)).copied()
    }

    pub fn entry(&self, pair: &Pair) -> Option<TableEntry> {
        self.known.get(pair).copied()
    }

    /// Known correlation of `a` and `b`, or `UnknownPair`.
    pub fn rho(&self, a: &str, b: &str) -> Result<f64> {
        self.get(a, b)
            .map(|e| e.value)
            .ok_or_else(|| Error::UnknownPair(a.to_string(), b.to_string()))
    }

    pub fn is_known(&self, a: &str, b: &str) -> bool {
        self.known.contains_key(&Pair::new(a, b))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Pair, &TableEntry)> {
        self.known.iter()
    }

    pub fn union_variables(&self) -> &BTreeSet<String> {
        &self.union_variables
    }

    pub fn contributions(&self, pair: &Pair) -> &[Contribution] {
        self.contributions.get(pair).map(Vec::as_slice).unwrap_or(&[])
    }

    /// True when some single marginal measured all of `vars` together.
    pub fn co_measured(&self, vars: &[&str]) -> bool {
        if vars.len() < 2 {
            return vars.iter().all(|v| self.union_variables.contains(*v));
        }
        let sources = |a: &str, b: &str| -> BTreeSet<&str> {
            self.contributions(&Pair::new(a, b)).iter().map(|c| c.source.as_str()).collect()
        };
        let mut common = sources(vars[0], vars[1]);
        for (i, a) in vars.iter().enumerate() {
            for b in &vars[i + 1..] {
                let s = sources(a, b);
                common.retain(|x| s.contains(x));
            }
        }
        !common.is_empty()
    }

    /// True when every known entry is a population value.
    pub fn is_population(&self) -> bool {
        self.known.values().all(|e| e.n.is_population())
    }

    /// Overwrites one entry. Intended for sensitivity analysis and tests.
    pub fn set(&mut self, pair: Pair, entry: TableEntry) {
        self.union_variables.insert(pair.0.clone());
        self.union_variables.insert(pair.1.clone());
        self.known.insert(pair, entry);
    }

    /// Adds a marginal's correlations and returns the pairs that were previously unknown.
    pub fn extend_with(&mut self, marginal: &MarginalDataset) -> Result<Vec<Pair>> {
        let (corr, n) = marginal.correlation()?;
        let vars = &marginal.variables;
        let mut new_pairs = Vec::new();
        let mut touched = Vec::new();
        for i in 0..vars.len() {
            for j in (i + 1)..vars.len() {
                let pair = Pair::new(vars[i].clone(), vars[j].clone());
                if !self.known.contains_key(&pair) {
                    new_pairs.push(pair.clone());
                }
                self.contributions.entry(pair.clone()).or_default().push(Contribution {
                    value: corr.at(i, j),
                    n,
                    source: marginal.id.clone(),
                });
                touched.push(pair);
            }
        }
        for pair in touched {
            let entry = reconcile(&pair, &self.contributions[&pair])?;
            self.known.insert(pair, entry);
        }
        self.union_variables.extend(vars.iter().cloned());
        Ok(new_pairs)
    }
}

fn z_radius(n: SampleSize) -> f64 {
    match n {
        SampleSize::Population => 0.0,
        SampleSize::Finite(n) if n > 3 => 1.0 / (n as f64 - 3.0),
        SampleSize::Finite(_) => f64::INFINITY,
    }
}

/// Inverse-variance weighted Fisher-z average, after checking pairwise agreement.
fn reconcile(pair: &Pair, items: &[Contribution]) -> Result<TableEntry> {
    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            let disagree = if a.n.is_population() && b.n.is_population() {
                (a.value - b.value).abs() > POPULATION_TOL
            } else {
                let gap = (libm::atanh(a.value.clamp(-1.0, 1.0)) - libm::atanh(b.value.clamp(-1.0, 1.0))).abs();
                gap > OVERLAP_Z * libm::sqrt(z_radius(a.n) + z_radius(b.n))
            };
            if disagree {
                return Err(Error::InconsistentOverlap {
                    a: pair.0.clone(),
                    b: pair.1.clone(),
                    first: a.value,
                    second: b.value,
                });
            }
        }
    }
    if let Some(p) = items.iter().find(|c| c.n.is_population()) {
        return Ok(TableEntry {
            value: p.value,
            n: SampleSize::Population,
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut total = 0u64;
    for c in items {
        let SampleSize::Finite(n) = c.n else { unreachable!() };
        let w = (n as f64 - 3.0).max(1e-12);
        num += w * libm::atanh(c.value.clamp(-1.0 + 1e-15, 1.0 - 1e-15));
        den += w;
        total += n;
    }
    Ok(TableEntry {
        value: libm::tanh(num / den),
        n: SampleSize::Finite(total),
    })
}

/// Pairwise correlations known across all marginals.
pub fn build_correlation_table(marginals: &[MarginalDataset]) -> Result<PartialCorrelationTable> {
    if marginals.is_empty() {
        return Err(Error::NoMarginals);
    }
    validate_collection(marginals)?;
    let mut table = PartialCorrelationTable::default();
    for m in marginals {
        table.extend_with(m)?;
    }
    Ok(table)
}
