//! Linear structural equation models over standardized variables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::linalg::Matrix;

/// Smallest disturbance variance accepted; anything below is treated as a deterministic relation.
pub const MIN_DISTURBANCE_VAR: f64 = 1e-9;

/// A DAG with a standardized coefficient on every edge and the disturbance
/// variances that make every variable have unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightedRepr", into = "WeightedRepr")]
pub struct WeightedDag {
    dag: Dag,
    /// `coeff[v][k]` belongs to the edge `parents(v)[k] -> v`.
    coeff: Vec<Vec<f64>>,
    disturbance_var: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightedRepr {
    nodes: Vec<String>,
    edges: Vec<(String, String, f64)>,
}

impl TryFrom<WeightedRepr> for WeightedDag {
    type Error = Error;

    fn try_from(r: WeightedRepr) -> Result<Self> {
        let edges: Vec<(&str, &str, f64)> = r.edges.iter().map(|(p, c, a)| (p.as_str(), c.as_str(), *a)).collect();
        WeightedDag::from_edges(r.nodes, &edges)
    }
}

impl From<WeightedDag> for WeightedRepr {
    fn from(w: WeightedDag) -> Self {
        let edges = w.weighted_edges();
        WeightedRepr {
            nodes: w.dag.names().to_vec(),
            edges,
        }
    }
}

/// Computes disturbance variances so that every variable has implied variance one.
///
/// Nodes are processed in topological order. For node `v` with parent
/// coefficient vector `a` and parent covariance block `S`, the disturbance
/// variance is `1 - a' S a`.
pub fn calibrate_standardized(dag: Dag, coeff: &BTreeMap<(String, String), f64>) -> Result<WeightedDag> {
    let n = dag.len();
    let mut per_parent: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut used = 0usize;
    for v in 0..n {
        let mut row = Vec::with_capacity(dag.parents(v).len());
        for &p in dag.parents(v) {
            let key = (dag.name(p).to_string(), dag.name(v).to_string());
            let a = *coeff
                .get(&key)
                .ok_or_else(|| Error::MissingCoefficient(key.0.clone(), key.1.clone()))?;
            if !a.is_finite() || a == 0.0 {
                return Err(Error::InvalidCoefficient {
                    parent: key.0,
                    child: key.1,
                    value: a,
                });
            }
            used += 1;
            row.push(a);
        }
        per_parent.push(row);
    }
    if used != coeff.len() {
        for (p, c) in coeff.keys() {
            let ok = match (dag.index_of(p), dag.index_of(c)) {
                (Ok(pi), Ok(ci)) => dag.has_edge(pi, ci),
                _ => false,
            };
            if !ok {
                return Err(Error::StrayCoefficient(p.clone(), c.clone()));
            }
        }
    }

    // Covariance among already-processed nodes, filled in topological order.
    let mut cov = Matrix::zeros(n, n);
    let mut done = vec![false; n];
    let mut disturbance_var = vec![0.0; n];
    for &v in dag.topological_order() {
        let parents = dag.parents(v);
        let a = &per_parent[v];
        let mut explained = 0.0;
        for (i, &p) in parents.iter().enumerate() {
            for (j, &q) in parents.iter().enumerate() {
                explained += a[i] * a[j] * cov[(p, q)];
            }
        }
        let dv = 1.0 - explained;
        if !(dv >= MIN_DISTURBANCE_VAR) {
            return Err(Error::StandardizationInfeasible {
                node: dag.name(v).to_string(),
                variance: dv,
            });
        }
        disturbance_var[v] = dv;
        for u in 0..n {
            if !done[u] {
                continue;
            }
            let c: f64 = parents.iter().zip(a).map(|(&p, &ap)| ap * cov[(p, u)]).sum();
            cov[(v, u)] = c;
            cov[(u, v)] = c;
        }
        cov[(v, v)] = 1.0;
        done[v] = true;
    }

    Ok(WeightedDag {
        dag,
        coeff: per_parent,
        disturbance_var,
    })
}

impl WeightedDag {
    /// Builds and calibrates a model from node names and `(parent, child, coefficient)` triples.
    pub fn from_edges<N, S>(nodes: N, edges: &[(&str, &str, f64)]) -> Result<Self>
    where
        N: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let dag = Dag::new(nodes, edges.iter().map(|&(p, c, _)| (p, c)))?;
        let coeff = edges
            .iter()
            .map(|&(p, c, a)| ((p.to_string(), c.to_string()), a))
            .collect();
        calibrate_standardized(dag, &coeff)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn names(&self) -> &[String] {
        self.dag.names()
    }

    /// Coefficient of `parent -> child`, if that edge exists.
    pub fn coefficient(&self, parent: usize, child: usize) -> Option<f64> {
        self.dag
            .parents(child)
            .iter()
            .position(|&p| p == parent)
            .map(|k| self.coeff[child][k])
    }

    /// Coefficients of `v`'s parents, aligned with `dag().parents(v)`.
    pub fn parent_coefficients(&self, v: usize) -> &[f64] {
        &self.coeff[v]
    }

    pub fn disturbance_var(&self, v: usize) -> f64 {
        self.disturbance_var[v]
    }

    pub fn weighted_edges(&self) -> Vec<(String, String, f64)> {
        let mut out: Vec<(String, String, f64)> = (0..self.dag.len())
            .flat_map(|v| {
                self.dag
                    .parents(v)
                    .iter()
                    .zip(&self.coeff[v])
                    .map(move |(&p, &a)| (self.dag.name(p).to_string(), self.dag.name(v).to_string(), a))
            })
            .collect();
        out.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        out
    }
}

/// Full implied covariance of the linear system `X = B X + e`.
///
/// Solved as `(I - B)^-1 Omega (I - B)^-T` with `Omega` the diagonal of
/// disturbance variances. This path never looks at treks, so it serves as an
/// independent check of trek-rule sums.
pub fn implied_covariance(wdag: &WeightedDag) -> Result<CorrelationMatrix> {
    let n = wdag.dag.len();
    let mut i_minus_b = Matrix::identity(n);
    for v in 0..n {
        for (&p, &a) in wdag.dag.parents(v).iter().zip(&wdag.coeff[v]) {
            i_minus_b[(v, p)] -= a;
        }
    }
    let m = i_minus_b
        .inverse()
        .ok_or_else(|| Error::Structure("I - B is singular".to_string()))?;
    let mut omega = Matrix::zeros(n, n);
    for v in 0..n {
        omega[(v, v)] = wdag.disturbance_var[v];
    }
    let sigma = m.mul(&omega).mul(&m.transpose());
    let rows = (0..n).map(|i| (0..n).map(|j| sigma[(i, j)]).collect()).collect();
    CorrelationMatrix::new(wdag.dag.names().to_vec(), rows)
}
