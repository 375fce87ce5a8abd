//! Symbolic correlation expressions and the equality/inequality constraints
//! built from them.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::{Pair, PartialCorrelationTable};
use crate::stats::POPULATION_TOL;

/// Two-sided 99% normal quantile.
pub const SAMPLE_Z: f64 = 2.576;

/// An arithmetic expression over pairwise correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrExpr {
    Const(f64),
    Rho(Pair),
    Abs(Box<CorrExpr>),
    Neg(Box<CorrExpr>),
    Sum(Vec<CorrExpr>),
    Prod(Vec<CorrExpr>),
    Div(Box<CorrExpr>, Box<CorrExpr>),
}

impl CorrExpr {
    pub fn rho(a: &str, b: &str) -> CorrExpr {
        CorrExpr::Rho(Pair::new(a, b))
    }

    pub fn abs_rho(a: &str, b: &str) -> CorrExpr {
        CorrExpr::Abs(Box::new(CorrExpr::rho(a, b)))
    }

    pub fn abs(self) -> CorrExpr {
        CorrExpr::Abs(Box::new(self))
    }

    pub fn neg(self) -> CorrExpr {
        CorrExpr::Neg(Box::new(self))
    }

    pub fn div(self, den: CorrExpr) -> CorrExpr {
        CorrExpr::Div(Box::new(self), Box::new(den))
    }

    pub fn sub(self, other: CorrExpr) -> CorrExpr {
        CorrExpr::Sum(alloc::vec![self, other.neg()])
    }

    pub fn pairs(&self) -> BTreeSet<Pair> {
        let mut out = BTreeSet::new();
        self.collect_pairs(&mut out);
        out
    }

    fn collect_pairs(&self, out: &mut BTreeSet<Pair>) {
        match self {
            CorrExpr::Const(_) => {}
            CorrExpr::Rho(p) => {
                out.insert(p.clone());
            }
            CorrExpr::Abs(e) | CorrExpr::Neg(e) => e.collect_pairs(out),
            CorrExpr::Sum(es) | CorrExpr::Prod(es) => es.iter().for_each(|e| e.collect_pairs(out)),
            CorrExpr::Div(a, b) => {
                a.collect_pairs(out);
                b.collect_pairs(out);
            }
        }
    }

    /// Value of the expression; `UnknownPair` if a referenced pair is missing.
    pub fn eval(&self, table: &PartialCorrelationTable) -> Result<f64> {
        Ok(self.dual(table)?.value)
    }

    fn dual(&self, table: &PartialCorrelationTable) -> Result<Dual> {
        Ok(match self {
            CorrExpr::Const(c) => Dual::constant(*c),
            CorrExpr::Rho(p) => {
                let e = table
                    .entry(p)
                    .ok_or_else(|| Error::UnknownPair(p.first().into(), p.second().into()))?;
                let mut grad = BTreeMap::new();
                grad.insert(p.clone(), 1.0);
                Dual { value: e.value, grad }
            }
            CorrExpr::Abs(e) => {
                let d = e.dual(table)?;
                if d.value < 0.0 {
                    d.scale(-1.0)
                } else {
                    d
                }
            }
            CorrExpr::Neg(e) => e.dual(table)?.scale(-1.0),
            CorrExpr::Sum(es) => {
                let mut acc = Dual::constant(0.0);
                for e in es {
                    acc = acc.add(&e.dual(table)?);
                }
                acc
            }
            CorrExpr::Prod(es) => {
                let mut acc = Dual::constant(1.0);
                for e in es {
                    acc = acc.mul(&e.dual(table)?);
                }
                acc
            }
            CorrExpr::Div(a, b) => {
                let (a, b) = (a.dual(table)?, b.dual(table)?);
                let inv = 1.0 / b.value;
                let value = a.value * inv;
                // d(a/b) = da/b - a db/b^2
                let db = b.scale(-value * inv);
                a.scale(inv).add(&db).with_value(value)
            }
        })
    }
}

impl fmt::Display for CorrExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrExpr::Const(c) => write!(f, "{c}"),
            CorrExpr::Rho(p) => write!(f, "rho({},{})", p.first(), p.second()),
            CorrExpr::Abs(e) => write!(f, "|{e}|"),
            CorrExpr::Neg(e) => write!(f, "-({e})"),
            CorrExpr::Sum(es) => {
                f.write_str("(")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
            CorrExpr::Prod(es) => {
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            CorrExpr::Div(a, b) => write!(f, "({a})/({b})"),
        }
    }
}

/// Value plus gradient with respect to each referenced correlation.
#[derive(Debug, Clone)]
struct Dual {
    value: f64,
    grad: BTreeMap<Pair, f64>,
}

impl Dual {
    fn constant(value: f64) -> Dual {
        Dual {
            value,
            grad: BTreeMap::new(),
        }
    }

    fn with_value(mut self, value: f64) -> Dual {
        self.value = value;
        self
    }

    fn scale(mut self, k: f64) -> Dual {
        self.value *= k;
        self.grad.values_mut().for_each(|g| *g *= k);
        self
    }

    fn add(mut self, other: &Dual) -> Dual {
        self.value += other.value;
        for (p, g) in &other.grad {
            *self.grad.entry(p.clone()).or_insert(0.0) += g;
        }
        self
    }

    fn mul(self, other: &Dual) -> Dual {
        let value = self.value * other.value;
        let a = self.value;
        self.scale(other.value)
            .add(&Dual {
                value: 0.0,
                grad: other.grad.iter().map(|(p, g)| (p.clone(), g * a)).collect(),
            })
            .with_value(value)
    }

    /// Delta-method standard error, treating the correlations as independent estimates.
    fn standard_error(&self, table: &PartialCorrelationTable) -> f64 {
        let var: f64 = self
            .grad
            .iter()
            .map(|(p, g)| {
                let e = table.entry(p).expect("evaluated pairs are known");
                let se = e.n.correlation_se(e.value, 0);
                g * g * se * se
            })
            .sum();
        libm::sqrt(var)
    }
}

/// Acceptance band for constraint checks: `abs + z * se`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub z: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: POPULATION_TOL,
            z: SAMPLE_Z,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64) -> Result<Self> {
        if !(abs > 0.0 && abs.is_finite()) {
            return Err(Error::InvalidTolerance(abs));
        }
        Ok(Tolerance { abs, z: SAMPLE_Z })
    }

    pub fn threshold(&self, se: f64) -> f64 {
        self.abs + self.z * se
    }
}

/// Value of `expr` with its delta-method standard error.
pub fn eval_with_se(expr: &CorrExpr, table: &PartialCorrelationTable) -> Result<(f64, f64)> {
    let d = expr.dual(table)?;
    let se = d.standard_error(table);
    Ok((d.value, se))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `lhs <= rhs`.
    Inequality,
    /// `lhs = rhs` where one side is a product of correlations along a trek.
    Factorization,
    /// `lhs = rhs` where one side is a solved structural prediction.
    ResidualEquation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum Outcome {
    Satisfied,
    Violated,
    Deferred { missing: Vec<Pair> },
}

impl Outcome {
    pub fn is_violated(&self) -> bool {
        matches!(self, Outcome::Violated)
    }

    pub fn is_deferred(&self) -> bool {
        matches!(self, Outcome::Deferred { .. })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Satisfied => f.write_str("satisfied"),
            Outcome::Violated => f.write_str("violated"),
            Outcome::Deferred { missing } => {
                f.write_str("deferred (missing")?;
                for p in missing {
                    write!(f, " {p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A checkable relation between correlations implied by a trek structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrekConstraint {
    pub id: String,
    pub kind: ConstraintKind,
    pub lhs: CorrExpr,
    pub rhs: CorrExpr,
    /// Signed counterpart, enforced only when every referenced value is a population value.
    pub signed: Option<(CorrExpr, CorrExpr)>,
}

/// Numeric result of checking one constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub outcome: Outcome,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|` for equations, `lhs - rhs` for inequalities.
    pub residual: f64,
    pub threshold: f64,
    pub signed_residual: Option<f64>,
    pub population: bool,
}

impl Evaluation {
    fn deferred(missing: Vec<Pair>) -> Self {
        Evaluation {
            outcome: Outcome::Deferred { missing },
            lhs: f64::NAN,
            rhs: f64::NAN,
            residual: f64::NAN,
            threshold: f64::NAN,
            signed_residual: None,
            population: false,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Satisfied
    }
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Outcome::Deferred { .. } = self.outcome {
            return write!(f, "{}", self.outcome);
        }
        write!(
            f,
            "lhs={:.6} rhs={:.6} residual={:.3e} threshold={:.3e}",
            self.lhs, self.rhs, self.residual, self.threshold
        )?;
        if let Some(s) = self.signed_residual {
            write!(f, " signed_residual={s:.3e}")?;
        }
        Ok(())
    }
}

impl TrekConstraint {
    pub fn new(id: impl Into<String>, kind: ConstraintKind, lhs: CorrExpr, rhs: CorrExpr) -> Self {
        TrekConstraint {
            id: id.into(),
            kind,
            lhs,
            rhs,
            signed: None,
        }
    }

    pub fn with_signed(mut self, lhs: CorrExpr, rhs: CorrExpr) -> Self {
        self.signed = Some((lhs, rhs));
        self
    }

    pub fn pairs(&self) -> BTreeSet<Pair> {
        let mut out = self.lhs.pairs();
        out.extend(self.rhs.pairs());
        if let Some((l, r)) = &self.signed {
            out.extend(l.pairs());
            out.extend(r.pairs());
        }
        out
    }

    /// Pairs referenced by the constraint that the table does not know.
    pub fn missing(&self, table: &PartialCorrelationTable) -> Vec<Pair> {
        self.pairs().into_iter().filter(|p| table.entry(p).is_none()).collect()
    }

    pub fn describe(&self) -> String {
        let op = match self.kind {
            ConstraintKind::Inequality => "<=",
            _ => "=",
        };
        format!("{} {op} {}", self.lhs, self.rhs)
    }

    pub fn evaluate(&self, table: &PartialCorrelationTable, tol: Tolerance) -> Evaluation {
        let missing = self.missing(table);
        if !missing.is_empty() {
            return Evaluation::deferred(missing);
        }
        let population = self.pairs().iter().all(|p| table.entry(p).is_some_and(|e| e.n.is_population()));
        let diff = self.lhs.clone().sub(self.rhs.clone());
        let (d, se) = eval_with_se(&diff, table).expect("all pairs known");
        let lhs = self.lhs.eval(table).expect("all pairs known");
        let rhs = self.rhs.eval(table).expect("all pairs known");
        let threshold = tol.threshold(se);
        let (residual, mut ok) = match self.kind {
            ConstraintKind::Inequality => (d, d <= threshold),
            _ => (d.abs(), d.abs() <= threshold),
        };
        let mut signed_residual = None;
        if let Some((sl, sr)) = &self.signed {
            let sdiff = sl.clone().sub(sr.clone());
            let (s, sse) = eval_with_se(&sdiff, table).expect("all pairs known");
            signed_residual = Some(s.abs());
            if population && s.abs() > tol.threshold(sse) {
                ok = false;
            }
        }
        Evaluation {
            outcome: if ok { Outcome::Satisfied } else { Outcome::Violated },
            lhs,
            rhs,
            residual,
            threshold,
            signed_residual,
            population,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::TableEntry;
    use crate::stats::SampleSize;
    use alloc::vec;

    fn table(entries: &[(&str, &str, f64, SampleSize)]) -> PartialCorrelationTable {
        let mut t = PartialCorrelationTable::default();
        for &(a, b, v, n) in entries {
            t.set(Pair::new(a, b), TableEntry { value: v, n });
        }
        t
    }

    #[test]
    fn gradient_of_product_and_ratio() {
        let n = SampleSize::Finite(1003);
        let t = table(&[("X", "A", 0.6, n), ("A", "C", 0.5, n)]);
        let e = CorrExpr::Prod(vec![CorrExpr::rho("X", "A"), CorrExpr::rho("A", "C")]);
        let (v, se) = eval_with_se(&e, &t).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
        let s1 = (1.0 - 0.36) / 1000f64.sqrt();
        let s2 = (1.0 - 0.25) / 1000f64.sqrt();
        let want = ((0.5 * s1).powi(2) + (0.6 * s2).powi(2)).sqrt();
        assert!((se - want).abs() < 1e-15);

        let r = CorrExpr::rho("X", "A").div(CorrExpr::rho("A", "C"));
        let (v, se) = eval_with_se(&r, &t).unwrap();
        assert!((v - 1.2).abs() < 1e-12);
        let want = ((s1 / 0.5).powi(2) + (0.6 / 0.25 * s2).powi(2)).sqrt();
        assert!((se - want).abs() < 1e-12);
    }

    #[test]
    fn deferred_when_pair_unknown() {
        let t = table(&[("X", "A", 0.6, SampleSize::Population)]);
        let c = TrekConstraint::new(
            "c",
            ConstraintKind::Inequality,
            CorrExpr::abs_rho("X", "B"),
            CorrExpr::abs_rho("X", "A"),
        );
        match c.evaluate(&t, Tolerance::default()).outcome {
            Outcome::Deferred { missing } => assert_eq!(missing, vec![Pair::new("B", "X")]),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn inequality_and_signed_factorization() {
        let p = SampleSize::Population;
        let t = table(&[("X", "A", 0.3, p), ("X", "B", 0.7, p), ("A", "B", -0.21, p)]);
        let ineq = TrekConstraint::new(
            "r3",
            ConstraintKind::Inequality,
            CorrExpr::abs_rho("X", "B"),
            CorrExpr::abs_rho("X", "A"),
        );
        assert!(ineq.evaluate(&t, Tolerance::default()).outcome.is_violated());
        let fac = TrekConstraint::new(
            "r4",
            ConstraintKind::Factorization,
            CorrExpr::abs_rho("A", "B"),
            CorrExpr::Prod(vec![CorrExpr::abs_rho("X", "A"), CorrExpr::abs_rho("X", "B")]),
        );
        assert!(fac.evaluate(&t, Tolerance::default()).passed());
        let signed = fac.with_signed(
            CorrExpr::rho("A", "B"),
            CorrExpr::Prod(vec![CorrExpr::rho("X", "A"), CorrExpr::rho("X", "B")]),
        );
        let ev = signed.evaluate(&t, Tolerance::default());
        assert!(ev.outcome.is_violated());
        assert!((ev.signed_residual.unwrap() - 0.42).abs() < 1e-12);
    }

    #[test]
    fn sample_mode_ignores_sign() {
        let n = SampleSize::Finite(10_000);
        let t = table(&[("X", "A", 0.3, n), ("X", "B", 0.7, n), ("A", "B", -0.21, n)]);
        let c = TrekConstraint::new(
            "r4",
            ConstraintKind::Factorization,
            CorrExpr::abs_rho("A", "B"),
            CorrExpr::Prod(vec![CorrExpr::abs_rho("X", "A"), CorrExpr::abs_rho("X", "B")]),
        )
        .with_signed(
            CorrExpr::rho("A", "B"),
            CorrExpr::Prod(vec![CorrExpr::rho("X", "A"), CorrExpr::rho("X", "B")]),
        );
        let ev = c.evaluate(&t, Tolerance::default());
        assert!(ev.passed());
        assert!(!ev.population);
    }

    #[test]
    fn tolerance_must_be_positive() {
        assert!(Tolerance::new(0.0).is_err());
        assert!(Tolerance::new(f64::NAN).is_err());
        assert!(Tolerance::new(1e-6).is_ok());
    }
}
