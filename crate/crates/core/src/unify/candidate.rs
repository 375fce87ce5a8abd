//! Candidate unified graphs and their exhaustive enumeration.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::dsep::{d_separated_idx, Adjacency};
use crate::equivalence::{pattern, Pattern};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::marginal::{CiCatalog, Pair};

use super::expr::Outcome;

/// Largest union variable set searched when faithfulness is enforced.
pub const MAX_VARIABLES: usize = 7;
/// Limit without faithfulness, where independences no longer prune adjacencies.
pub const MAX_VARIABLES_UNFAITHFUL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "R1-no-trek")]
    NoTrek,
    #[serde(rename = "R2-collider")]
    Collider,
    #[serde(rename = "R3-mediation-inequality")]
    MediationInequality,
    #[serde(rename = "R4-chain-order")]
    ChainOrder,
    #[serde(rename = "R5-latent-residual")]
    LatentResidual,
    #[serde(rename = "R6-redundant-edge")]
    RedundantEdge,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::NoTrek => "R1-no-trek",
            RuleId::Collider => "R2-collider",
            RuleId::MediationInequality => "R3-mediation-inequality",
            RuleId::ChainOrder => "R4-chain-order",
            RuleId::LatentResidual => "R5-latent-residual",
            RuleId::RedundantEdge => "R6-redundant-edge",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub rule: RuleId,
    /// Identifies the constraint; re-evaluations share the key.
    pub key: String,
    pub description: String,
    pub evidence: String,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Alive,
    RuledOut,
}

/// One Markov equivalence class of unified graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Representative: the member with the smallest canonical encoding.
    pub graph: Dag,
    pub members: Vec<Dag>,
    pub status: Status,
    pub ledger: Vec<LedgerEntry>,
}

impl Candidate {
    pub fn new(mut members: Vec<Dag>) -> Self {
        members.sort_by_cached_key(Dag::canonical_encoding);
        Candidate {
            graph: members[0].clone(),
            members,
            status: Status::Alive,
            ledger: Vec::new(),
        }
    }

    pub fn encoding(&self) -> String {
        self.graph.canonical_encoding()
    }

    pub fn is_alive(&self) -> bool {
        self.status == Status::Alive
    }

    pub fn pattern(&self) -> Pattern {
        pattern(&self.graph)
    }

    /// Appends an entry unless the latest entry with the same key already has
    /// the same outcome. A violation rules the candidate out for good.
    pub fn record(&mut self, entry: LedgerEntry) {
        let latest = self.ledger.iter().rev().find(|e| e.key == entry.key);
        if latest.is_some_and(|e| e.outcome == entry.outcome) {
            return;
        }
        if entry.outcome.is_violated() {
            self.status = Status::RuledOut;
        }
        self.ledger.push(entry);
    }

    /// Entries whose latest evaluation is still deferred.
    pub fn deferred(&self) -> Vec<&LedgerEntry> {
        let mut latest: BTreeMap<&str, &LedgerEntry> = BTreeMap::new();
        for e in &self.ledger {
            latest.insert(e.key.as_str(), e);
        }
        latest.into_values().filter(|e| e.outcome.is_deferred()).collect()
    }

    pub fn violations(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.ledger.iter().filter(|e| e.outcome.is_violated())
    }

    /// True when some member of the class equals `dag` up to node order.
    pub fn contains(&self, dag: &Dag) -> bool {
        self.graph.same_node_set(dag) && pattern(dag) == self.pattern()
    }
}

struct Work {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Adjacency for Work {
    fn node_count(&self) -> usize {
        self.parents.len()
    }

    fn parents_of(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    fn children_of(&self, v: usize) -> &[usize] {
        &self.children[v]
    }
}

impl Work {
    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.parents.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for &c in &self.children[v] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    fn add(&mut self, p: usize, c: usize) {
        self.parents[c].push(p);
        self.children[p].push(c);
    }

    fn remove(&mut self, p: usize, c: usize) {
        self.parents[c].pop();
        self.children[p].pop();
    }
}

type Stmt = (usize, usize, Vec<bool>);

struct Search<'a> {
    pairs: Vec<(usize, usize)>,
    indep: &'a [Stmt],
    dep: &'a [Stmt],
    work: Work,
    edges: Vec<(usize, usize)>,
    found: Vec<Vec<(usize, usize)>>,
}

impl Search<'_> {
    fn independences_hold(&self) -> bool {
        self.indep.iter().all(|(x, y, z)| d_separated_idx(&self.work, *x, *y, z))
    }

    fn run(&mut self, k: usize) {
        if k == self.pairs.len() {
            if self.dep.iter().all(|(x, y, z)| !d_separated_idx(&self.work, *x, *y, z)) {
                self.found.push(self.edges.clone());
            }
            return;
        }
        self.run(k + 1);
        let (u, v) = self.pairs[k];
        for (p, c) in [(u, v), (v, u)] {
            // adding p -> c closes a cycle iff c already reaches p
            if self.work.reaches(c, p) {
                continue;
            }
            self.work.add(p, c);
            self.edges.push((p, c));
            // d-connection only grows with edges, so a violated independence stays violated
            if self.independences_hold() {
                self.run(k + 1);
            }
            self.edges.pop();
            self.work.remove(p, c);
        }
    }
}

/// All DAGs over `union_vars` whose d-separations agree with `catalog`,
/// grouped into Markov equivalence classes.
///
/// Every dependent statement must be d-connected in the graph. With
/// `faithfulness`, every independent statement must also be d-separated;
/// without it independences are not required to show up graphically. Pairs in
/// `forbidden` are never adjacent. Classes are sorted by the canonical
/// encoding of their representative. An empty result means no DAG fits.
pub fn enumerate_candidates<S: AsRef<str>>(
    union_vars: &[S],
    catalog: &CiCatalog,
    forbidden: &[Pair],
    faithfulness: bool,
) -> Result<Vec<Candidate>> {
    let names: Vec<String> = union_vars
        .iter()
        .map(|s| s.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let limit = if faithfulness { MAX_VARIABLES } else { MAX_VARIABLES_UNFAITHFUL };
    if names.len() > limit {
        return Err(Error::TooManyVariables {
            got: names.len(),
            limit,
        });
    }
    let idx = |v: &str| -> Result<usize> {
        names
            .binary_search_by(|n| n.as_str().cmp(v))
            .map_err(|_| Error::UnknownVariable(v.to_string()))
    };
    for p in forbidden {
        idx(p.first())?;
        idx(p.second())?;
    }

    let mut by_key: BTreeMap<(String, String, Vec<String>), bool> = BTreeMap::new();
    for s in &catalog.statements {
        if let Some(prev) = by_key.insert(s.key(), s.is_independent()) {
            if prev != s.is_independent() {
                // contradictory evidence: nothing can satisfy both
                return Ok(Vec::new());
            }
        }
    }
    let mut indep = Vec::new();
    let mut dep = Vec::new();
    let mut blocked = BTreeSet::new();
    for ((x, y, given), independent) in by_key {
        let (xi, yi) = (idx(&x)?, idx(&y)?);
        let mut z = vec![false; names.len()];
        for g in &given {
            z[idx(g)?] = true;
        }
        if independent {
            if faithfulness {
                blocked.insert((xi.min(yi), xi.max(yi)));
                indep.push((xi, yi, z));
            }
        } else {
            dep.push((xi, yi, z));
        }
    }
    for p in forbidden {
        let (a, b) = (idx(p.first())?, idx(p.second())?);
        blocked.insert((a.min(b), a.max(b)));
    }

    let n = names.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !blocked.contains(&(i, j)) {
                pairs.push((i, j));
            }
        }
    }
    let mut search = Search {
        pairs,
        indep: &indep,
        dep: &dep,
        work: Work {
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
        },
        edges: Vec::new(),
        found: Vec::new(),
    };
    if search.independences_hold() {
        search.run(0);
    }

    let mut classes: BTreeMap<Pattern, Vec<Dag>> = BTreeMap::new();
    for edges in search.found {
        let dag = Dag::from_index_edges(names.clone(), &edges)?;
        classes.entry(pattern(&dag)).or_default().push(dag);
    }
    let mut out: Vec<Candidate> = classes.into_values().map(Candidate::new).collect();
    out.sort_by_cached_key(Candidate::encoding);
    Ok(out)
}
