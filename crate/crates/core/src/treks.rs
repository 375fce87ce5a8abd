//! Trek enumeration and trek-rule correlations.
//!
//! A trek between `x` and `y` is a pair of directed paths out of a common
//! source that end at `x` and `y` and meet only at the source. When the source
//! is one of the terminals, that side is empty and the trek is an ordinary
//! directed path. For standardized linear models, the correlation of `x` and
//! `y` is the sum over treks of the product of edge coefficients.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::weighted::WeightedDag;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trek {
    pub source: String,
    /// Directed path `source -> ... -> x`, starting with `source`.
    pub left: Vec<String>,
    /// Directed path `source -> ... -> y`, starting with `source`.
    pub right: Vec<String>,
}

impl Trek {
    pub fn terminals(&self) -> (&str, &str) {
        (
            self.left.last().map(String::as_str).unwrap_or(&self.source),
            self.right.last().map(String::as_str).unwrap_or(&self.source),
        )
    }

    /// Number of edges on the trek.
    pub fn len(&self) -> usize {
        self.left.len() + self.right.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Edges as `(parent, child)` name pairs, left side first.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        self.left
            .windows(2)
            .chain(self.right.windows(2))
            .map(|w| (w[0].as_str(), w[1].as_str()))
            .collect()
    }

    /// Checks the structural invariants against `dag`.
    pub fn validate(&self, dag: &Dag) -> Result<()> {
        let bad = |msg: &str| Err(Error::Structure(msg.to_string()));
        if self.left.first() != Some(&self.source) || self.right.first() != Some(&self.source) {
            return bad("trek sides must start at the source");
        }
        if self.left.len() == 1 && self.right.len() == 1 {
            return bad("trek has two empty sides");
        }
        let (x, y) = self.terminals();
        if x == y {
            return bad("trek terminals coincide");
        }
        for v in &self.left[1..] {
            if self.right.contains(v) {
                return bad("trek sides intersect away from the source");
            }
        }
        for (p, c) in self.edges() {
            if !dag.has_edge(dag.index_of(p)?, dag.index_of(c)?) {
                return bad("trek uses a non-edge");
            }
        }
        Ok(())
    }
}

/// Every directed path from `from` to `to`, each as a node list starting at `from`.
fn directed_paths(dag: &Dag, from: usize, to: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let reaches = dag.ancestors_mask(&[to]);
    if !reaches[from] {
        return out;
    }
    let mut path = vec![from];
    walk(dag, to, &reaches, &mut path, &mut out);
    out
}

fn walk(dag: &Dag, to: usize, reaches: &[bool], path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let v = *path.last().expect("nonempty path");
    if v == to {
        out.push(path.clone());
        return;
    }
    for &c in dag.children(v) {
        if reaches[c] {
            path.push(c);
            walk(dag, to, reaches, path, out);
            path.pop();
        }
    }
}

/// Index-level treks as `(left, right)` paths.
pub(crate) fn trek_paths(dag: &Dag, x: usize, y: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    for s in 0..dag.len() {
        let lefts = directed_paths(dag, s, x);
        if lefts.is_empty() {
            continue;
        }
        let rights = directed_paths(dag, s, y);
        for l in &lefts {
            for r in &rights {
                if l[1..].iter().all(|v| !r[1..].contains(v)) {
                    out.push((l.clone(), r.clone()));
                }
            }
        }
    }
    out
}

fn check_pair(dag: &Dag, x: &str, y: &str) -> Result<(usize, usize)> {
    let xi = dag.index_of(x)?;
    let yi = dag.index_of(y)?;
    if xi == yi {
        return Err(Error::SameVariable(x.to_string()));
    }
    Ok((xi, yi))
}

/// All treks between `x` and `y`, sorted by source, then left path, then right path.
pub fn enumerate_treks(dag: &Dag, x: &str, y: &str) -> Result<Vec<Trek>> {
    let (xi, yi) = check_pair(dag, x, y)?;
    let names = |p: &[usize]| p.iter().map(|&v| dag.name(v).to_string()).collect::<Vec<_>>();
    let mut treks: Vec<Trek> = trek_paths(dag, xi, yi)
        .into_iter()
        .map(|(l, r)| Trek {
            source: dag.name(l[0]).to_string(),
            left: names(&l),
            right: names(&r),
        })
        .collect();
    treks.sort();
    Ok(treks)
}

/// Trek-rule correlation: the sum over treks of the product of coefficients.
pub fn trek_correlation(wdag: &WeightedDag, x: &str, y: &str) -> Result<f64> {
    let dag = wdag.dag();
    let (xi, yi) = check_pair(dag, x, y)?;
    let product = |p: &[usize]| -> f64 {
        p.windows(2)
            .map(|w| wdag.coefficient(w[0], w[1]).expect("path edge"))
            .product()
    };
    Ok(trek_paths(dag, xi, yi)
        .iter()
        .map(|(l, r)| product(l) * product(r))
        .sum())
}
