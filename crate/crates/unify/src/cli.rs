//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use trek_core::marginal::validate_collection;
use trek_core::planner::plan;
use trek_core::unify::{
    enumerate_candidates, latent_check, prune_pipeline_with, redundant_edge_check, triangle_from_correlation,
    Executor, LatentRoles, MarginalGraph, PruneOptions, RuleSettings, Tolerance,
};
use trek_core::{
    build_correlation_table, enumerate_treks, extract_ci, implied_covariance, random_weighted_dag, trek_correlation,
    CorrelationMatrix, MarginalDataset, NoiseFamily, NoiseSpec, Pair, PartialCorrelationTable, WeightedDag,
};

use crate::error::{Error, Result};
use crate::exec::Parallel;
use crate::graph_file::read_graph;
use crate::manifest::load_marginals;
use crate::report::{
    CandidateView, CandidatesReport, PlanReport, PruneView, Render, SimulateReport, TestStatus, TrekView, TreksReport,
    VerifyReport,
};
use crate::simulate::{simulate_marginals, write_marginals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "trek-unify", version, about = "Unify overlapping marginal datasets of a linear causal system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Level of the conditional-independence tests.
    #[arg(long, global = true, default_value_t = 0.01)]
    pub alpha: f64,
    /// Absolute tolerance of equality checks (sample mode adds 2.576 standard errors).
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Treat every marginal as exact population correlations.
    #[arg(long, global = true)]
    pub population: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Do not require independences to be d-separations.
    #[arg(long, global = true)]
    pub no_faithfulness: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw marginal datasets from a graph file and write them with a manifest.
    Simulate {
        graph: PathBuf,
        /// Output directory for the CSV files and manifest.tsv.
        #[arg(long)]
        dir: PathBuf,
        /// Rows per marginal; required unless --population.
        #[arg(long)]
        n: Option<usize>,
        /// Extra marginal `id:V1,V2,...`; defaults to the graph file's marginals.
        #[arg(long = "marginal")]
        marginals: Vec<String>,
        #[arg(long, default_value = "uniform")]
        noise: String,
    },
    /// List treks between two variables and their trek-rule correlation.
    Treks { graph: PathBuf, x: String, y: String },
    /// Compare trek sums with the matrix-implied correlations for every pair.
    Verify {
        /// Graph file; omit to use a random graph.
        graph: Option<PathBuf>,
        /// Node count of the random graph.
        #[arg(long, default_value_t = 8)]
        nodes: usize,
        #[arg(long, default_value_t = 0.4)]
        edge_prob: f64,
    },
    /// Conditional-independence statements of every marginal.
    Ci { manifest: PathBuf },
    /// Markov equivalence classes consistent with the marginals.
    Candidates {
        manifest: PathBuf,
        #[command(flatten)]
        forbid: Forbid,
    },
    /// Enumerate, then prune with the trek rules.
    Prune {
        manifest: PathBuf,
        #[command(flatten)]
        forbid: Forbid,
        /// Run the latent check with roles `X1,X2,X3,X4`.
        #[arg(long)]
        latent: Option<String>,
        #[command(flatten)]
        triangles: Triangles,
        /// Manifest of marginals to add afterwards, in order.
        #[arg(long)]
        add: Vec<PathBuf>,
    },
    /// Test for an unmeasured connection between X2 and X3.
    LatentCheck {
        manifest: PathBuf,
        /// Roles `X1,X2,X3,X4`.
        #[arg(long)]
        roles: String,
    },
    /// Test whether the X1-X4 edge of two oriented triangles is redundant.
    EdgeCheck {
        manifest: PathBuf,
        #[command(flatten)]
        triangles: Triangles,
    },
    /// Hypothesize treks and rank future measurements.
    Plan {
        manifest: PathBuf,
        /// Anchor variables; defaults to those measured in every marginal.
        #[arg(long)]
        anchors: Option<String>,
        #[arg(long, default_value_t = 3)]
        budget: usize,
    },
}

#[derive(Debug, Args)]
pub struct Forbid {
    /// Pair `A,B` that may never be adjacent; repeatable.
    #[arg(long = "forbid")]
    pub pairs: Vec<String>,
}

#[derive(Debug, Args)]
pub struct Triangles {
    /// Graph file of the triangle over {X1, X2, X4}.
    #[arg(long)]
    pub left_graph: Option<PathBuf>,
    #[arg(long)]
    pub right_graph: Option<PathBuf>,
    /// Causal order `X1,X2,X4` to orient the left triangle from the data.
    #[arg(long)]
    pub left_order: Option<String>,
    #[arg(long)]
    pub right_order: Option<String>,
}

fn names(list: &str, expected: Option<usize>, flag: &str) -> Result<Vec<String>> {
    let out: Vec<String> = list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if let Some(k) = expected {
        if out.len() != k {
            return Err(Error::Usage(format!("--{flag} expects {k} comma-separated names, got `{list}`")));
        }
    }
    Ok(out)
}

fn forbidden(f: &Forbid) -> Result<Vec<Pair>> {
    f.pairs
        .iter()
        .map(|p| {
            let v = names(p, Some(2), "forbid")?;
            Ok(Pair::new(v[0].clone(), v[1].clone()))
        })
        .collect()
}

fn table_matrix(table: &PartialCorrelationTable, vars: &[String]) -> Result<CorrelationMatrix> {
    let mut rows = vec![vec![1.0; vars.len()]; vars.len()];
    for i in 0..vars.len() {
        for j in 0..vars.len() {
            if i != j {
                rows[i][j] = table.rho(&vars[i], &vars[j])?;
            }
        }
    }
    Ok(CorrelationMatrix::new(vars.to_vec(), rows)?)
}

impl Triangles {
    fn resolve(&self, table: &PartialCorrelationTable) -> Result<Option<(MarginalGraph, MarginalGraph)>> {
        let side = |graph: &Option<PathBuf>, order: &Option<String>, flag: &str| -> Result<Option<MarginalGraph>> {
            match (graph, order) {
                (Some(_), Some(_)) => Err(Error::Usage(format!("give either --{flag}-graph or --{flag}-order"))),
                (Some(p), None) => Ok(Some(read_graph(p)?.graph)),
                (None, Some(o)) => {
                    let vars = names(o, Some(3), &format!("{flag}-order"))?;
                    let m = table_matrix(table, &vars)?;
                    Ok(Some(triangle_from_correlation(&m, [&vars[0], &vars[1], &vars[2]])?))
                }
                (None, None) => Ok(None),
            }
        };
        match (side(&self.left_graph, &self.left_order, "left")?, side(&self.right_graph, &self.right_order, "right")?) {
            (Some(l), Some(r)) => Ok(Some((l, r))),
            (None, None) => Ok(None),
            _ => Err(Error::Usage("both triangles are needed".into())),
        }
    }
}

struct Context {
    alpha: f64,
    tolerance: Tolerance,
    population: bool,
    faithfulness: bool,
    seed: u64,
}

impl Context {
    fn settings(&self) -> RuleSettings {
        RuleSettings {
            alpha: self.alpha,
            tolerance: self.tolerance,
            faithfulness: self.faithfulness,
        }
    }

    fn marginals(&self, manifest: &Path) -> Result<Vec<MarginalDataset>> {
        let ms = load_marginals(manifest)?;
        if self.population {
            return ms
                .into_iter()
                .map(|m| Ok(m.into_population()?))
                .collect();
        }
        Ok(ms)
    }
}

fn emit<T: Serialize + Render>(value: &T, format: Format) -> Result<String> {
    Ok(match format {
        Format::Text => value.text(),
        Format::Json => serde_json::to_string_pretty(value)? + "\n",
    })
}

fn treks_report(w: &WeightedDag, x: &str, y: &str) -> Result<TreksReport> {
    let corr = implied_covariance(w)?;
    let dag = w.dag();
    let treks = enumerate_treks(dag, x, y)?
        .into_iter()
        .map(|t| {
            let product = t
                .edges()
                .iter()
                .map(|(p, c)| {
                    let (pi, ci) = (dag.index_of(p).expect("trek node"), dag.index_of(c).expect("trek node"));
                    w.coefficient(pi, ci).expect("trek edge")
                })
                .product();
            TrekView {
                source: t.source,
                left: t.left,
                right: t.right,
                product,
            }
        })
        .collect();
    Ok(TreksReport {
        x: x.into(),
        y: y.into(),
        treks,
        trek_correlation: trek_correlation(w, x, y)?,
        implied_correlation: corr.get(x, y)?,
    })
}

/// Largest `|trek sum - implied|` over all pairs of `w`.
pub fn verify_model(w: &WeightedDag) -> Result<VerifyReport> {
    let corr = implied_covariance(w)?;
    let names = w.names();
    let mut report = VerifyReport {
        nodes: names.len(),
        edges: w.dag().edge_count(),
        pairs: 0,
        max_deviation: 0.0,
        worst_pair: None,
    };
    for (i, x) in names.iter().enumerate() {
        for y in &names[i + 1..] {
            let d = (trek_correlation(w, x, y)? - corr.get(x, y)?).abs();
            report.pairs += 1;
            if report.worst_pair.is_none() || d > report.max_deviation {
                report.max_deviation = d;
                report.worst_pair = Some((x.clone(), y.clone()));
            }
        }
    }
    Ok(report)
}

fn dispatch(cli: &Cli, exec: &dyn Executor) -> Result<String> {
    if !(cli.alpha > 0.0 && cli.alpha < 1.0) {
        return Err(Error::Usage(format!("--alpha must lie in (0, 1), got {}", cli.alpha)));
    }
    let tolerance = Tolerance::new(cli.tol).map_err(|_| Error::Usage(format!("--tol must be positive, got {}", cli.tol)))?;
    let ctx = Context {
        alpha: cli.alpha,
        tolerance,
        population: cli.population,
        faithfulness: !cli.no_faithfulness,
        seed: cli.seed,
    };
    let format = cli.format;
    match &cli.command {
        Command::Simulate {
            graph,
            dir,
            n,
            marginals,
            noise,
        } => {
            let spec = read_graph(graph)?;
            let w = spec.weighted()?;
            let family: NoiseFamily = noise.parse().map_err(|_| Error::Usage(format!("unknown --noise `{noise}`")))?;
            let mut sets = spec.marginals.clone();
            for m in marginals {
                let (id, vars) = m
                    .split_once(':')
                    .ok_or_else(|| Error::Usage(format!("--marginal expects `id:V1,V2,...`, got `{m}`")))?;
                sets.push((id.to_string(), names(vars, None, "marginal")?));
            }
            if sets.is_empty() {
                return Err(Error::Usage("no marginals: add `marginal` lines or --marginal".into()));
            }
            let rows = match (n, ctx.population) {
                (_, true) => None,
                (Some(n), false) => Some(*n),
                (None, false) => return Err(Error::Usage("--n is required unless --population".into())),
            };
            let ms = simulate_marginals(&w, &sets, rows, NoiseSpec::new(family), ctx.seed)?;
            let manifest = write_marginals(dir, &ms)?;
            emit(
                &SimulateReport {
                    manifest: manifest.display().to_string(),
                    marginals: ms.iter().map(|m| (m.id.clone(), m.variables.clone(), rows)).collect(),
                },
                format,
            )
        }
        Command::Treks { graph, x, y } => {
            let w = read_graph(graph)?.weighted()?;
            emit(&treks_report(&w, x, y)?, format)
        }
        Command::Verify { graph, nodes, edge_prob } => {
            let w = match graph {
                Some(p) => read_graph(p)?.weighted()?,
                None => {
                    if !(0.0..=1.0).contains(edge_prob) {
                        return Err(Error::Usage(format!("--edge-prob must lie in [0, 1], got {edge_prob}")));
                    }
                    // infeasible draws are rejected by moving to the next seed
                    (0u64..)
                        .map(|k| random_weighted_dag(*nodes, *edge_prob, 0.8, ctx.seed.wrapping_add(k)))
                        .find_map(|r| r.ok())
                        .expect("an empty graph is always feasible")
                }
            };
            emit(&verify_model(&w)?, format)
        }
        Command::Ci { manifest } => {
            let ms = ctx.marginals(manifest)?;
            emit(&extract_ci(&ms, ctx.alpha)?, format)
        }
        Command::Candidates { manifest, forbid } => {
            let ms = ctx.marginals(manifest)?;
            let cat = extract_ci(&ms, ctx.alpha)?;
            let table = build_correlation_table(&ms)?;
            let vars: Vec<String> = table.union_variables().iter().cloned().collect();
            let cands = enumerate_candidates(&vars, &cat, &forbidden(forbid)?, ctx.faithfulness)?;
            emit(
                &CandidatesReport {
                    union_variables: vars,
                    faithfulness: ctx.faithfulness,
                    candidates: cands.iter().map(CandidateView::from).collect(),
                },
                format,
            )
        }
        Command::Prune {
            manifest,
            forbid,
            latent,
            triangles,
            add,
        } => {
            let ms = ctx.marginals(manifest)?;
            let table = build_correlation_table(&ms)?;
            let opts = PruneOptions {
                settings: ctx.settings(),
                forbidden: forbidden(forbid)?,
                latent: latent
                    .as_deref()
                    .map(|r| names(r, Some(4), "latent").map(|v| LatentRoles::new(&v[0], &v[1], &v[2], &v[3])))
                    .transpose()?,
                edge_check: triangles.resolve(&table)?,
            };
            let mut report = prune_pipeline_with(&ms, &opts, exec)?;
            let mut refinements = Vec::new();
            let mut seen = ms;
            for extra in add {
                for m in ctx.marginals(extra)? {
                    seen.push(m.clone());
                    validate_collection(&seen)?;
                    let summary = report.refine(&m, exec)?;
                    refinements.push((m.id, summary));
                }
            }
            emit(&PruneView::new(&report, refinements), format)
        }
        Command::LatentCheck { manifest, roles } => {
            let ms = ctx.marginals(manifest)?;
            let table = build_correlation_table(&ms)?;
            let v = names(roles, Some(4), "roles")?;
            emit(&latent_check(&table, &LatentRoles::new(&v[0], &v[1], &v[2], &v[3]), ctx.tolerance)?, format)
        }
        Command::EdgeCheck { manifest, triangles } => {
            let ms = ctx.marginals(manifest)?;
            let table = build_correlation_table(&ms)?;
            let (l, r) = triangles
                .resolve(&table)?
                .ok_or_else(|| Error::Usage("edge-check needs both triangles".into()))?;
            emit(&redundant_edge_check(&l, &r, &table, ctx.tolerance)?, format)
        }
        Command::Plan {
            manifest,
            anchors,
            budget,
        } => {
            if *budget < 2 {
                return Err(Error::Usage(format!("--budget must be at least 2, got {budget}")));
            }
            let ms = ctx.marginals(manifest)?;
            let table = build_correlation_table(&ms)?;
            let anchors = match anchors {
                Some(a) => names(a, None, "anchors")?,
                None => table
                    .union_variables()
                    .iter()
                    .filter(|v| ms.iter().all(|m| m.variables.contains(v)))
                    .cloned()
                    .collect(),
            };
            let p = plan(&table, &anchors, *budget, ctx.tolerance)?;
            let tests = p
                .tests
                .iter()
                .map(|t| {
                    let missing = t.missing(&table);
                    let result = if missing.is_empty() { Some(t.run(&table, ctx.tolerance)?) } else { None };
                    Ok(TestStatus {
                        id: t.id.clone(),
                        missing,
                        result,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            emit(&PlanReport { plan: p, tests }, format)
        }
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let exec = Parallel::from_env();
    let result = dispatch(&cli, &exec).and_then(|body| {
        match &cli.out {
            Some(path) => std::fs::write(path, body).map_err(|e| Error::io(path, e)),
            None => std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| Error::io("<stdout>", e)),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
