//! Directed acyclic graphs over named variables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A directed acyclic graph whose nodes are named variables.
///
/// Node indices follow declaration order. Parent and child lists are kept
/// sorted so that every traversal is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DagRepr", into = "DagRepr")]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DagRepr {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
}

impl TryFrom<DagRepr> for Dag {
    type Error = Error;

    fn try_from(repr: DagRepr) -> Result<Self> {
        Dag::new(repr.nodes, repr.edges)
    }
}

impl From<Dag> for DagRepr {
    fn from(dag: Dag) -> Self {
        let edges = dag.named_edges();
        DagRepr {
            nodes: dag.names,
            edges,
        }
    }
}

impl Dag {
    /// Builds a graph from node names and `(parent, child)` name pairs.
    pub fn new<N, S, E, T>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = S>,
        S: Into<String>,
        E: IntoIterator<Item = (T, T)>,
        T: AsRef<str>,
    {
        let names: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let index = name_index(&names)?;
        let mut pairs = Vec::new();
        for (p, c) in edges {
            let (p, c) = (p.as_ref(), c.as_ref());
            let pi = *index
                .get(p)
                .ok_or_else(|| Error::UnknownVariable(p.to_string()))?;
            let ci = *index
                .get(c)
                .ok_or_else(|| Error::UnknownVariable(c.to_string()))?;
            pairs.push((pi, ci));
        }
        Self::from_index_edges(names, &pairs)
    }

    /// Graph with the given nodes and no edges.
    pub fn empty<N, S>(nodes: N) -> Result<Self>
    where
        N: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(nodes, core::iter::empty::<(&str, &str)>())
    }

    /// Builds a graph from edges given as node indices into `names`.
    pub fn from_index_edges(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        name_index(&names)?;
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(p, c) in edges {
            if p >= n || c >= n {
                return Err(Error::UnknownVariable(format!("#{}", p.max(c))));
            }
            if p == c {
                return Err(Error::SelfLoop(names[p].clone()));
            }
            if !seen.insert((p, c)) {
                return Err(Error::DuplicateEdge(names[p].clone(), names[c].clone()));
            }
            parents[c].push(p);
            children[p].push(c);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let order = topological_sort(&parents, &children).map_err(|v| Error::Cycle(names[v].clone()))?;
        Ok(Dag {
            names,
            parents,
            children,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.children[parent].binary_search(&child).is_ok()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// All edges as `(parent, child)` index pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (p, cs) in self.children.iter().enumerate() {
            out.extend(cs.iter().map(|&c| (p, c)));
        }
        out
    }

    /// All edges as `(parent, child)` names, sorted by name.
    pub fn named_edges(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .edges()
            .into_iter()
            .map(|(p, c)| (self.names[p].clone(), self.names[c].clone()))
            .collect();
        out.sort();
        out
    }

    /// Canonical edge-list encoding, e.g. `A->B,X->A`. Independent of node order.
    pub fn canonical_encoding(&self) -> String {
        let edges = self.named_edges();
        let mut out = String::new();
        for (i, (p, c)) in edges.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(p);
            out.push_str("->");
            out.push_str(c);
        }
        out
    }

    /// A topological order (parents before children), smallest index first among ties.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// `mask[v]` is true iff `v` is reachable from `start` along directed edges (including `start`).
    pub fn descendants_mask(&self, start: usize) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack = vec![start];
        mask[start] = true;
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if !mask[c] {
                    mask[c] = true;
                    stack.push(c);
                }
            }
        }
        mask
    }

    /// `mask[v]` is true iff `v` is an ancestor of some seed (seeds included).
    pub fn ancestors_mask(&self, seeds: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        for &s in seeds {
            mask[s] = true;
        }
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !mask[p] {
                    mask[p] = true;
                    stack.push(p);
                }
            }
        }
        mask
    }

    /// True when both graphs declare the same node names, in any order.
    pub fn same_node_set(&self, other: &Dag) -> bool {
        let a: BTreeSet<&String> = self.names.iter().collect();
        let b: BTreeSet<&String> = other.names.iter().collect();
        a == b
    }

    /// Re-expresses this graph with node indices following `names`.
    pub fn reindexed(&self, names: &[String]) -> Result<Dag> {
        if names.len() != self.len() {
            return Err(Error::NodeSetMismatch);
        }
        let mut map = vec![0usize; self.len()];
        for (old, name) in self.names.iter().enumerate() {
            map[old] = names
                .iter()
                .position(|n| n == name)
                .ok_or(Error::NodeSetMismatch)?;
        }
        let edges: Vec<(usize, usize)> = self.edges().into_iter().map(|(p, c)| (map[p], map[c])).collect();
        Dag::from_index_edges(names.to_vec(), &edges)
    }
}

fn name_index(names: &[String]) -> Result<BTreeMap<&str, usize>> {
    let mut index = BTreeMap::new();
    for (i, n) in names.iter().enumerate() {
        if n.trim().is_empty() {
            return Err(Error::EmptyName);
        }
        if index.insert(n.as_str(), i).is_some() {
            return Err(Error::DuplicateVariable(n.clone()));
        }
    }
    Ok(index)
}

/// Kahn's algorithm; on failure returns a node that lies on a cycle.
fn topological_sort(parents: &[Vec<usize>], children: &[Vec<usize>]) -> core::result::Result<Vec<usize>, usize> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&v| indegree[v] > 0).unwrap_or(0))
    }
}
