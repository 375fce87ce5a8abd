//! Fisher-z conditional independence tests and related statistics.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corr::{partial_correlation, CorrelationMatrix};
use crate::error::{Error, Result};

/// Absolute tolerance for equalities evaluated on population correlations.
pub const POPULATION_TOL: f64 = 1e-9;
/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Sample size behind a correlation estimate. `Population` means exact values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSize {
    Population,
    Finite(u64),
}

impl SampleSize {
    pub fn is_population(self) -> bool {
        matches!(self, SampleSize::Population)
    }

    /// Sum of two sample sizes; population absorbs everything.
    pub fn combine(self, other: SampleSize) -> SampleSize {
        match (self, other) {
            (SampleSize::Finite(a), SampleSize::Finite(b)) => SampleSize::Finite(a + b),
            _ => SampleSize::Population,
        }
    }

    /// Standard error of a correlation `r` by the delta method on Fisher's z,
    /// `(1 - r^2) / sqrt(n - 3 - k)` with `k` conditioning variables. Zero in population mode.
    pub fn correlation_se(self, r: f64, conditioning: usize) -> f64 {
        match self {
            SampleSize::Population => 0.0,
            SampleSize::Finite(n) => {
                let dof = n as f64 - 3.0 - conditioning as f64;
                if dof <= 0.0 {
                    f64::INFINITY
                } else {
                    (1.0 - r * r) / libm::sqrt(dof)
                }
            }
        }
    }
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Population => f.write_str("population"),
            SampleSize::Finite(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Independent,
    Dependent,
}

/// One conditional (in)dependence finding from a marginal dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiStatement {
    pub x: String,
    pub y: String,
    pub given: Vec<String>,
    pub verdict: Verdict,
    pub p_value: f64,
    pub source: String,
}

impl CiStatement {
    /// `(x, y, given)` with `x <= y` and `given` sorted, for duplicate detection.
    pub fn key(&self) -> (String, String, Vec<String>) {
        let (a, b) = if self.x <= self.y {
            (self.x.clone(), self.y.clone())
        } else {
            (self.y.clone(), self.x.clone())
        };
        let mut given = self.given.clone();
        given.sort();
        (a, b, given)
    }

    pub fn is_independent(&self) -> bool {
        self.verdict == Verdict::Independent
    }
}

impl fmt::Display for CiStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.verdict {
            Verdict::Independent => "_||_",
            Verdict::Dependent => "not _||_",
        };
        write!(f, "{} {} {}", self.x, rel, self.y)?;
        if !self.given.is_empty() {
            write!(f, " | {}", self.given.join(","))?;
        }
        Ok(())
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// Standard normal quantile (Acklam's rational approximation plus one Halley step).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let lo = 0.02425;
    let x = if p < lo {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lo {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * libm::sqrt(2.0 * core::f64::consts::PI) * libm::exp(x * x / 2.0);
    x - u / (1.0 + x * u / 2.0)
}

/// Two-sided standard-normal critical value for level `alpha`.
pub fn critical_value(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(normal_quantile(1.0 - alpha / 2.0))
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Fisher-z statistic and two-sided p-value for a (partial) correlation.
pub fn fisher_z(r: f64, n: u64, conditioning: usize) -> Result<(f64, f64)> {
    if n <= conditioning as u64 + 3 {
        return Err(Error::InsufficientSample { n, given: conditioning });
    }
    let dof = (n - conditioning as u64 - 3) as f64;
    let stat = libm::sqrt(dof) * libm::atanh(r.clamp(-1.0, 1.0)).abs();
    let p = if stat.is_finite() {
        libm::erfc(stat / core::f64::consts::SQRT_2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok((stat, p))
}

/// Tests `x _||_ y | given` from a correlation matrix.
///
/// With a finite sample the verdict is independent iff the Fisher-z statistic
/// is at most the two-sided critical value for `alpha`. In population mode the
/// verdict is independent iff `|r| <= 1e-9`, and the reported p-value is 1.
pub fn ci_test<S: AsRef<str>>(
    corr: &CorrelationMatrix,
    n: SampleSize,
    x: &str,
    y: &str,
    given: &[S],
    alpha: f64,
) -> Result<CiStatement> {
    check_alpha(alpha)?;
    let r = partial_correlation(corr, x, y, given)?;
    let (verdict, p_value) = match n {
        SampleSize::Population => (
            if r.abs() <= POPULATION_TOL {
                Verdict::Independent
            } else {
                Verdict::Dependent
            },
            1.0,
        ),
        SampleSize::Finite(n) => {
            let (stat, p) = fisher_z(r, n, given.len())?;
            let crit = critical_value(alpha)?;
            (
                if stat <= crit {
                    Verdict::Independent
                } else {
                    Verdict::Dependent
                },
                p,
            )
        }
    };
    Ok(CiStatement {
        x: x.to_string(),
        y: y.to_string(),
        given: given.iter().map(|g| g.as_ref().to_string()).collect(),
        verdict,
        p_value,
        source: String::new(),
    })
}

/// True iff, for each variable of a three-variable matrix, the correlation of
/// the other two changes when conditioning on it.
///
/// A change is significant when `|partial - marginal|` exceeds
/// `z_crit * sqrt(se_marginal^2 + se_partial^2)`, or `1e-9` in population mode.
pub fn collider_signature(corr: &CorrelationMatrix, n: SampleSize, alpha: f64) -> Result<bool> {
    if corr.len() != 3 {
        return Err(Error::ArityMismatch(corr.len()));
    }
    let crit = critical_value(alpha)?;
    let v = corr.variables();
    for (a, b, c) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let marginal = corr.at(a, b);
        let partial = partial_correlation(corr, &v[a], &v[b], &[&v[c]])?;
        let diff = (partial - marginal).abs();
        let threshold = match n {
            SampleSize::Population => POPULATION_TOL,
            SampleSize::Finite(_) => {
                let s1 = n.correlation_se(marginal, 0);
                let s2 = n.correlation_se(partial, 1);
                crit * libm::sqrt(s1 * s1 + s2 * s2)
            }
        };
        if diff <= threshold {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pair(r: f64) -> CorrelationMatrix {
        CorrelationMatrix::new(
            vec!["X".into(), "Y".into()],
            vec![vec![1.0, r], vec![r, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn quantiles() {
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((critical_value(0.01).unwrap() - 2.575_829_303_548_901).abs() < 1e-12);
        assert!((normal_quantile(1e-6) + 4.753_424_308_822_899).abs() < 1e-9);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn zero_correlation_is_independent() {
        let s = ci_test::<&str>(&pair(0.0), SampleSize::Finite(50), "X", "Y", &[], 0.01).unwrap();
        assert_eq!(s.verdict, Verdict::Independent);
        assert!((s.p_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn strong_correlation_large_n_is_dependent() {
        let s = ci_test::<&str>(&pair(0.5), SampleSize::Finite(100_000), "X", "Y", &[], 0.01).unwrap();
        assert_eq!(s.verdict, Verdict::Dependent);
        // z = atanh(0.5) * sqrt(99_997) is about 173.7
        let (z, _) = fisher_z(0.5, 100_000, 0).unwrap();
        assert!((z - libm::atanh(0.5) * libm::sqrt(99_997.0)).abs() < 1e-9);
    }

    #[test]
    fn weak_correlation_small_n_is_independent() {
        let s = ci_test::<&str>(&pair(0.01), SampleSize::Finite(400), "X", "Y", &[], 0.01).unwrap();
        assert_eq!(s.verdict, Verdict::Independent);
        let (z, _) = fisher_z(0.01, 400, 0).unwrap();
        assert!((z - 0.199_2).abs() < 1e-3);
    }

    #[test]
    fn population_mode_uses_tolerance() {
        let s = ci_test::<&str>(&pair(1e-12), SampleSize::Population, "X", "Y", &[], 0.01).unwrap();
        assert_eq!(s.verdict, Verdict::Independent);
        assert_eq!(s.p_value, 1.0);
        let s = ci_test::<&str>(&pair(1e-6), SampleSize::Population, "X", "Y", &[], 0.01).unwrap();
        assert_eq!(s.verdict, Verdict::Dependent);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(
            ci_test::<&str>(&pair(0.2), SampleSize::Finite(3), "X", "Y", &[], 0.01),
            Err(Error::InsufficientSample { .. })
        ));
        assert!(matches!(
            ci_test::<&str>(&pair(0.2), SampleSize::Finite(30), "X", "Y", &[], 1.5),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(matches!(
            collider_signature(&pair(0.2), SampleSize::Population, 0.01),
            Err(Error::ArityMismatch(2))
        ));
    }

    #[test]
    fn independent_triple_has_no_signature() {
        let m = CorrelationMatrix::identity(vec!["A".into(), "B".into(), "C".into()]).unwrap();
        assert!(!collider_signature(&m, SampleSize::Population, 0.01).unwrap());
        assert!(!collider_signature(&m, SampleSize::Finite(1000), 0.01).unwrap());
    }
}
