//! Simulating data from a standardized linear model and estimating correlations.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::weighted::WeightedDag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    /// Non-Gaussian default.
    #[default]
    Uniform,
    Laplace,
}

impl core::str::FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseFamily::Gaussian),
            "uniform" => Ok(NoiseFamily::Uniform),
            "laplace" => Ok(NoiseFamily::Laplace),
            other => Err(Error::Structure(alloc::format!("unknown noise family `{other}`"))),
        }
    }
}

/// Disturbance distribution: zero mean, scaled to each node's calibrated variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily) -> Self {
        NoiseSpec { family }
    }
}

/// Observations in row-major order, one column per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTable {
    variables: Vec<String>,
    values: Vec<f64>,
    seed: u64,
}

impl SampleTable {
    pub fn new(variables: Vec<String>, rows: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let p = variables.len();
        if p == 0 {
            return Err(Error::Structure("sample table has no columns".to_string()));
        }
        if rows.is_empty() {
            return Err(Error::TooFewRows { min: 1, got: 0 });
        }
        let mut values = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Structure(alloc::format!(
                    "row {} has {} values, expected {p}",
                    i + 1,
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Structure(alloc::format!("row {} has a missing or non-finite value", i + 1)));
            }
            values.extend_from_slice(r);
        }
        Ok(SampleTable { variables, values, seed })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.variables.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.variables.len();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.variables.len()).copied()
    }

    /// The table restricted to `vars`, in the given order.
    pub fn restrict<S: AsRef<str>>(&self, vars: &[S]) -> Result<Self> {
        let idx: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.variables
                    .iter()
                    .position(|c| c == v.as_ref())
                    .ok_or_else(|| Error::UnknownVariable(v.as_ref().to_string()))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            values.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(SampleTable {
            variables: vars.iter().map(|v| v.as_ref().to_string()).collect(),
            values,
            seed: self.seed,
        })
    }
}

fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    // 53 random bits in [0, 1)
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn unit_noise(family: NoiseFamily, rng: &mut ChaCha8Rng) -> f64 {
    match family {
        NoiseFamily::Gaussian => {
            let u1 = 1.0 - unit_uniform(rng);
            let u2 = unit_uniform(rng);
            libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
        }
        NoiseFamily::Uniform => (2.0 * unit_uniform(rng) - 1.0) * libm::sqrt(3.0),
        NoiseFamily::Laplace => {
            // scale 1/sqrt(2) gives unit variance
            let u = unit_uniform(rng) - 0.5;
            let b = core::f64::consts::FRAC_1_SQRT_2;
            let tail = 1.0 - 2.0 * u.abs();
            -b * u.signum() * libm::log(if tail > 0.0 { tail } else { f64::MIN_POSITIVE })
        }
    }
}

/// A random model over `V0..V{nodes-1}`: each forward pair `Vi -> Vj` (`i < j`)
/// is an edge with probability `edge_prob`, with a coefficient uniform in
/// `[-max_abs, max_abs]` (exact zeros redrawn). Draws that cannot be
/// standardized come back as `StandardizationInfeasible`; callers retry with
/// another seed.
pub fn random_weighted_dag(nodes: usize, edge_prob: f64, max_abs: f64, seed: u64) -> Result<WeightedDag> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..nodes).map(|i| alloc::format!("V{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            if unit_uniform(&mut rng) < edge_prob {
                let a = loop {
                    let a = (2.0 * unit_uniform(&mut rng) - 1.0) * max_abs;
                    if a != 0.0 {
                        break a;
                    }
                };
                edges.push((i, j, a));
            }
        }
    }
    let triples: Vec<(&str, &str, f64)> = edges.iter().map(|&(i, j, a)| (names[i].as_str(), names[j].as_str(), a)).collect();
    WeightedDag::from_edges(names.iter().cloned(), &triples)
}

/// Draws `n` observations by evaluating the structural equations in topological order.
///
/// Output is a pure function of `(wdag, n, noise, seed)`.
pub fn sample(wdag: &WeightedDag, n: usize, noise: NoiseSpec, seed: u64) -> SampleTable {
    let dag = wdag.dag();
    let p = dag.len();
    let n = n.max(1);
    let scale: Vec<f64> = (0..p).map(|v| libm::sqrt(wdag.disturbance_var(v))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n * p];
    for i in 0..n {
        let row = &mut values[i * p..(i + 1) * p];
        for &v in dag.topological_order() {
            let mut x = scale[v] * unit_noise(noise.family, &mut rng);
            for (&par, &a) in dag.parents(v).iter().zip(wdag.parent_coefficients(v)) {
                x += a * row[par];
            }
            row[v] = x;
        }
    }
    SampleTable {
        variables: dag.names().to_vec(),
        values,
        seed,
    }
}

/// Product-moment correlation of the table's columns.
pub fn empirical_correlation(table: &SampleTable) -> Result<CorrelationMatrix> {
    let n = table.n_rows();
    if n < 3 {
        return Err(Error::TooFewRows { min: 3, got: n });
    }
    let p = table.variables.len();
    let means: Vec<f64> = (0..p).map(|j| table.column(j).sum::<f64>() / n as f64).collect();
    let mut cross = vec![0.0; p * p];
    for i in 0..n {
        let row = table.row(i);
        for a in 0..p {
            let da = row[a] - means[a];
            for b in a..p {
                cross[a * p + b] += da * (row[b] - means[b]);
            }
        }
    }
    for j in 0..p {
        if !(cross[j * p + j] > 0.0) {
            return Err(Error::DegenerateColumn(table.variables[j].clone()));
        }
    }
    let rows = (0..p)
        .map(|a| {
            (0..p)
                .map(|b| {
                    if a == b {
                        1.0
                    } else {
                        let (i, j) = if a < b { (a, b) } else { (b, a) };
                        (cross[i * p + j] / libm::sqrt(cross[i * p + i] * cross[j * p + j])).clamp(-1.0, 1.0)
                    }
                })
                .collect()
        })
        .collect();
    CorrelationMatrix::new(table.variables.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_table() {
        let w = WeightedDag::from_edges(["X", "Y"], &[("X", "Y", 0.5)]).unwrap();
        for fam in [NoiseFamily::Gaussian, NoiseFamily::Uniform, NoiseFamily::Laplace] {
            let a = sample(&w, 100, NoiseSpec::new(fam), 7);
            let b = sample(&w, 100, NoiseSpec::new(fam), 7);
            assert_eq!(a, b);
            let c = sample(&w, 100, NoiseSpec::new(fam), 8);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn self_and_shifted_copies_correlate_perfectly() {
        let rows = (0..10).map(|i| vec![i as f64, i as f64 + 5.0, (i * i) as f64]).collect();
        let t = SampleTable::new(vec!["A".into(), "B".into(), "C".into()], rows, 0).unwrap();
        let c = empirical_correlation(&t).unwrap();
        assert_eq!(c.get("A", "A").unwrap(), 1.0);
        assert!((c.get("A", "B").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_short_tables() {
        let rows = (0..5).map(|i| vec![i as f64, 2.0]).collect();
        let t = SampleTable::new(vec!["A".into(), "B".into()], rows, 0).unwrap();
        assert!(matches!(empirical_correlation(&t), Err(Error::DegenerateColumn(c)) if c == "B"));
        let t = SampleTable::new(vec!["A".into()], vec![vec![1.0], vec![2.0]], 0).unwrap();
        assert!(matches!(empirical_correlation(&t), Err(Error::TooFewRows { .. })));
        assert!(SampleTable::new(vec!["A".into()], vec![vec![f64::NAN]], 0).is_err());
    }

    #[test]
    fn noise_has_unit_variance() {
        let w = WeightedDag::from_edges(["X"], &[]).unwrap();
        for fam in [NoiseFamily::Gaussian, NoiseFamily::Uniform, NoiseFamily::Laplace] {
            let t = sample(&w, 200_000, NoiseSpec::new(fam), 11);
            let n = t.n_rows() as f64;
            let mean = t.column(0).sum::<f64>() / n;
            let var = t.column(0).map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 0.01, "{fam:?} mean {mean}");
            assert!((var - 1.0).abs() < 0.02, "{fam:?} var {var}");
        }
    }
}
