//! Correlation matrices and partial correlations.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const SYMMETRY_TOL: f64 = 1e-12;
/// Largest condition number accepted for a conditioning submatrix.
pub const MAX_CONDITION: f64 = 1e10;

/// A symmetric matrix of correlations with unit diagonal, labelled by variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorrRepr", into = "CorrRepr")]
pub struct CorrelationMatrix {
    variables: Vec<String>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CorrRepr {
    variables: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<CorrRepr> for CorrelationMatrix {
    type Error = Error;

    fn try_from(r: CorrRepr) -> Result<Self> {
        CorrelationMatrix::new(r.variables, r.values)
    }
}

impl From<CorrelationMatrix> for CorrRepr {
    fn from(m: CorrelationMatrix) -> Self {
        let values = m.rows();
        CorrRepr {
            variables: m.variables,
            values,
        }
    }
}

impl CorrelationMatrix {
    /// Validates and builds a matrix from rows.
    ///
    /// Off-diagonal asymmetry up to 1e-12 is averaged away, the diagonal must be
    /// within 1e-12 of one and is then set to exactly one, and entries within
    /// 1e-12 outside `[-1, 1]` are clamped.
    pub fn new(variables: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = variables.len();
        let mut seen = alloc::collections::BTreeSet::new();
        for v in &variables {
            if v.is_empty() {
                return Err(Error::EmptyName);
            }
            if !seen.insert(v.as_str()) {
                return Err(Error::DuplicateVariable(v.clone()));
            }
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidCorrelation(format!("expected a {n}x{n} matrix")));
        }
        let mut values = Vec::with_capacity(n * n);
        for r in &rows {
            values.extend_from_slice(r);
        }
        for i in 0..n {
            let d = values[i * n + i];
            if !d.is_finite() || (d - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidCorrelation(format!(
                    "diagonal entry for `{}` is {d}",
                    variables[i]
                )));
            }
            values[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidCorrelation("non-finite entry".to_string()));
                }
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidCorrelation(format!(
                        "asymmetric entries for ({}, {}): {a} vs {b}",
                        variables[i], variables[j]
                    )));
                }
                let mut v = 0.5 * (a + b);
                if v.abs() > 1.0 + SYMMETRY_TOL {
                    return Err(Error::InvalidCorrelation(format!(
                        "entry for ({}, {}) is {v}, outside [-1, 1]",
                        variables[i], variables[j]
                    )));
                }
                v = v.clamp(-1.0, 1.0);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(CorrelationMatrix { variables, values })
    }

    pub fn identity(variables: Vec<String>) -> Result<Self> {
        let n = variables.len();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(variables, rows)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn get(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.at(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n).map(|i| self.values[i * n..(i + 1) * n].to_vec()).collect()
    }

    /// The sub-matrix over `vars`, in the given order.
    pub fn restrict<S: AsRef<str>>(&self, vars: &[S]) -> Result<Self> {
        let idx: Vec<usize> = vars
            .iter()
            .map(|v| self.index_of(v.as_ref()))
            .collect::<Result<_>>()?;
        let rows = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| self.at(i, j)).collect())
            .collect();
        Self::new(vars.iter().map(|v| v.as_ref().to_string()).collect(), rows)
    }

    /// Largest absolute elementwise difference to `other` over shared variables.
    pub fn max_abs_diff(&self, other: &CorrelationMatrix) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, a) in self.variables.iter().enumerate() {
            for (j, b) in self.variables.iter().enumerate() {
                worst = worst.max((self.at(i, j) - other.get(a, b)?).abs());
            }
        }
        Ok(worst)
    }

    pub(crate) fn submatrix(&self, idx: &[usize]) -> Matrix {
        let k = idx.len();
        let mut m = Matrix::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self.at(i, j);
            }
        }
        m
    }
}

/// Partial correlation of `x` and `y` given `given`.
///
/// Computed from the residual covariance `S_ab - S_aZ S_ZZ^-1 S_Zb` of the pair
/// after conditioning. With an empty conditioning set this returns the stored
/// correlation unchanged.
pub fn partial_correlation<S: AsRef<str>>(corr: &CorrelationMatrix, x: &str, y: &str, given: &[S]) -> Result<f64> {
    let xi = corr.index_of(x)?;
    let yi = corr.index_of(y)?;
    if xi == yi {
        return Err(Error::SameVariable(x.to_string()));
    }
    let mut zi = Vec::with_capacity(given.len());
    for g in given {
        let g = g.as_ref();
        let i = corr.index_of(g)?;
        if i == xi || i == yi {
            return Err(Error::EndpointConditioned(g.to_string()));
        }
        if !zi.contains(&i) {
            zi.push(i);
        }
    }
    partial_correlation_idx(corr, xi, yi, &zi)
}

pub(crate) fn partial_correlation_idx(corr: &CorrelationMatrix, xi: usize, yi: usize, zi: &[usize]) -> Result<f64> {
    if zi.is_empty() {
        return Ok(corr.at(xi, yi));
    }
    let szz = corr.submatrix(zi);
    let eig = szz.symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if lo <= 0.0 || hi / lo > MAX_CONDITION {
        return Err(Error::SingularConditioning(if lo <= 0.0 { f64::INFINITY } else { hi / lo }));
    }
    let inv = szz.inverse().ok_or(Error::SingularConditioning(f64::INFINITY))?;
    let k = zi.len();
    let residual = |a: usize, b: usize| {
        let mut s = corr.at(a, b);
        for p in 0..k {
            for q in 0..k {
                s -= corr.at(a, zi[p]) * inv[(p, q)] * corr.at(zi[q], b);
            }
        }
        s
    };
    let cxx = residual(xi, xi);
    let cyy = residual(yi, yi);
    let cxy = residual(xi, yi);
    if cxx <= 1e-15 || cyy <= 1e-15 {
        return Err(Error::SingularConditioning(f64::INFINITY));
    }
    Ok((cxy / libm::sqrt(cxx * cyy)).clamp(-1.0, 1.0))
}
