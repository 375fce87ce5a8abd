//! Report types for every subcommand, with JSON (serde) and text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use trek_core::marginal::TableEntry;
use trek_core::planner::{Plan, TrekTestResult};
use trek_core::unify::{
    Candidate, DeferredConstraint, EdgeDecision, EdgeVerdict, LatentDecision, LatentVerdict, LedgerEntry, Outcome,
    PruneReport, RefineSummary, RuleSettings, Status,
};
use trek_core::{CiCatalog, Pair};

pub trait Render {
    fn text(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub manifest: String,
    /// `(id, variables, rows)`; rows is `None` for population matrices.
    pub marginals: Vec<(String, Vec<String>, Option<usize>)>,
}

impl Render for SimulateReport {
    fn text(&self) -> String {
        let mut out = format!("manifest: {}\n", self.manifest);
        for (id, vars, rows) in &self.marginals {
            let size = rows.map_or("population".to_string(), |n| format!("{n} rows"));
            writeln!(out, "  {id}: {{{}}} {size}", vars.join(", ")).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrekView {
    pub source: String,
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreksReport {
    pub x: String,
    pub y: String,
    pub treks: Vec<TrekView>,
    pub trek_correlation: f64,
    pub implied_correlation: f64,
}

fn side(path: &[String]) -> String {
    path.join(" -> ")
}

impl Render for TreksReport {
    fn text(&self) -> String {
        let mut out = format!("treks between {} and {}: {}\n", self.x, self.y, self.treks.len());
        for t in &self.treks {
            let shape = match (t.left.len(), t.right.len()) {
                (1, _) => side(&t.right),
                (_, 1) => side(&t.left),
                _ => format!("{} <- {} -> {}", side(&t.left[1..].iter().rev().cloned().collect::<Vec<_>>()), t.source, side(&t.right[1..])),
            };
            writeln!(out, "  {shape}  product {:.6}", t.product).unwrap();
        }
        writeln!(out, "trek-rule correlation {:.12}", self.trek_correlation).unwrap();
        writeln!(out, "implied correlation   {:.12}", self.implied_correlation).unwrap();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub nodes: usize,
    pub edges: usize,
    pub pairs: usize,
    pub max_deviation: f64,
    pub worst_pair: Option<(String, String)>,
}

impl Render for VerifyReport {
    fn text(&self) -> String {
        let worst = self
            .worst_pair
            .as_ref()
            .map_or(String::new(), |(a, b)| format!(" at ({a}, {b})"));
        format!(
            "{} nodes, {} edges, {} pairs\nmax |trek sum - implied| = {:.3e}{worst}\n",
            self.nodes, self.edges, self.pairs, self.max_deviation
        )
    }
}

impl Render for CiCatalog {
    fn text(&self) -> String {
        let mut out = String::new();
        for s in &self.statements {
            writeln!(out, "[{}] {s}  p={:.4}", s.source, s.p_value).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub encoding: String,
    pub members: Vec<String>,
    pub status: Status,
    pub ledger: Vec<LedgerEntry>,
}

impl From<&Candidate> for CandidateView {
    fn from(c: &Candidate) -> Self {
        CandidateView {
            encoding: c.encoding(),
            members: c.members.iter().map(|m| m.canonical_encoding()).collect(),
            status: c.status,
            ledger: c.ledger.clone(),
        }
    }
}

fn render_candidate(out: &mut String, c: &CandidateView, with_ledger: bool) {
    let tag = match c.status {
        Status::Alive => "alive",
        Status::RuledOut => "ruled out",
    };
    let edges = if c.encoding.is_empty() { "(no edges)" } else { &c.encoding };
    writeln!(out, "[{tag}] {edges}  ({} member DAGs)", c.members.len()).unwrap();
    if with_ledger {
        for e in &c.ledger {
            let outcome = match &e.outcome {
                Outcome::Satisfied => "satisfied".to_string(),
                Outcome::Violated => "VIOLATED".to_string(),
                Outcome::Deferred { missing } => format!(
                    "deferred, needs {}",
                    missing.iter().map(Pair::to_string).collect::<Vec<_>>().join(" ")
                ),
            };
            writeln!(out, "    {} {}: {}  [{}]", e.rule, outcome, e.description, e.evidence).unwrap();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatesReport {
    pub union_variables: Vec<String>,
    pub faithfulness: bool,
    pub candidates: Vec<CandidateView>,
}

impl Render for CandidatesReport {
    fn text(&self) -> String {
        let mut out = format!(
            "{} equivalence classes over {{{}}}{}\n",
            self.candidates.len(),
            self.union_variables.join(", "),
            if self.faithfulness { "" } else { " (faithfulness relaxed)" }
        );
        for c in &self.candidates {
            render_candidate(&mut out, c, false);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneView {
    pub union_variables: Vec<String>,
    pub settings: RuleSettings,
    pub known_pairs: Vec<(Pair, TableEntry)>,
    pub classes: usize,
    pub alive: usize,
    pub candidates: Vec<CandidateView>,
    pub deferred: Vec<DeferredConstraint>,
    pub latent: Option<LatentVerdict>,
    pub edge: Option<EdgeVerdict>,
    /// One summary per marginal added after the initial run.
    pub refinements: Vec<(String, RefineSummary)>,
}

impl PruneView {
    pub fn new(report: &PruneReport, refinements: Vec<(String, RefineSummary)>) -> Self {
        PruneView {
            union_variables: report.union_variables.clone(),
            settings: report.settings,
            known_pairs: report.table.pairs().map(|(p, e)| (p.clone(), *e)).collect(),
            classes: report.candidates.len(),
            alive: report.alive().count(),
            candidates: report.candidates.iter().map(CandidateView::from).collect(),
            deferred: report.deferred(),
            latent: report.latent.clone(),
            edge: report.edge.clone(),
            refinements,
        }
    }
}

impl Render for PruneView {
    fn text(&self) -> String {
        let mut out = format!(
            "{} equivalence classes over {{{}}}: {} alive, {} ruled out\n",
            self.classes,
            self.union_variables.join(", "),
            self.alive,
            self.classes - self.alive
        );
        for (id, r) in &self.refinements {
            writeln!(
                out,
                "added {id}: {} new pairs, {} new statements, {} newly ruled out",
                r.new_pairs.len(),
                r.new_statements,
                r.newly_ruled_out.len()
            )
            .unwrap();
        }
        if let Some(l) = &self.latent {
            out.push_str(&l.text());
        }
        if let Some(e) = &self.edge {
            out.push_str(&e.text());
        }
        for c in &self.candidates {
            render_candidate(&mut out, c, true);
        }
        if !self.deferred.is_empty() {
            out.push_str("deferred constraints of alive classes:\n");
            for d in &self.deferred {
                let missing: Vec<String> = d.missing.iter().map(Pair::to_string).collect();
                writeln!(out, "  {}  needs {}", d.key, missing.join(" ")).unwrap();
            }
        }
        out
    }
}

impl Render for LatentVerdict {
    fn text(&self) -> String {
        let r = &self.roles;
        let verdict = match self.verdict {
            LatentDecision::NoExtraConnection => "no extra connection",
            LatentDecision::ExtraConnection => "extra connection",
            LatentDecision::Degenerate => "degenerate (cannot solve)",
        };
        let coef = match (self.a24, self.a34) {
            (Some(a), Some(b)) => format!(" a24={a:.6} a34={b:.6}"),
            _ => String::new(),
        };
        format!(
            "latent check {}~{} given {} (via {}): {verdict}, residual {:.3e} threshold {:.3e}{coef}\n",
            r.x2, r.x3, r.x1, r.x4, self.residual, self.threshold
        )
    }
}

impl Render for EdgeVerdict {
    fn text(&self) -> String {
        let d = match self.decision {
            EdgeDecision::Keep => "keep",
            EdgeDecision::Remove => "remove",
        };
        format!(
            "edge {}-{} (treks via {} and {}): {d}, residual {:.3e} threshold {:.3e}\n",
            self.x1, self.x4, self.x2, self.x3, self.residual, self.threshold
        )
    }
}

/// A planned test with its outcome once evaluable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStatus {
    pub id: String,
    pub missing: Vec<Pair>,
    pub result: Option<TrekTestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub plan: Plan,
    pub tests: Vec<TestStatus>,
}

impl Render for PlanReport {
    fn text(&self) -> String {
        let mut out = String::new();
        for h in &self.plan.hypotheses {
            writeln!(out, "hypothesis {}", h.nodes().join(" - ")).unwrap();
        }
        for t in &self.tests {
            match &t.result {
                Some(r) => writeln!(
                    out,
                    "test {}: {} (residual {:.3e}){}",
                    t.id,
                    if r.pass { "pass" } else { "fail" },
                    r.residual,
                    r.diagnostic.as_ref().map_or(String::new(), |d| format!(" {d}"))
                ),
                None => writeln!(
                    out,
                    "test {}: deferred, needs {}",
                    t.id,
                    t.missing.iter().map(Pair::to_string).collect::<Vec<_>>().join(" ")
                ),
            }
            .unwrap();
        }
        if self.plan.proposals.is_empty() {
            out.push_str("no measurement would enable a deferred test\n");
        }
        for (rank, p) in self.plan.proposals.iter().enumerate() {
            writeln!(
                out,
                "{}. measure {{{}}}: score {}, longest trek {}: {}",
                rank + 1,
                p.variables.join(", "),
                p.score,
                p.longest_trek,
                p.enabled_tests.join("; ")
            )
            .unwrap();
        }
        out
    }
}
