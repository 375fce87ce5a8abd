//! Plain-text graph files.
//!
//! ```text
//! # comment
//! node X Y            declares nodes (edges declare them too)
//! X -> A 0.3          directed edge with coefficient
//! A -- B              undirected edge, for partially oriented marginal graphs
//! marginal m1 X Y A   a variable set to simulate or measure
//! ```

use std::fmt::Write as _;
use std::path::Path;

use trek_core::unify::{MarginalEdge, MarginalGraph};
use trek_core::WeightedDag;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphSpec {
    pub graph: MarginalGraph,
    /// `(id, variables)` in file order.
    pub marginals: Vec<(String, Vec<String>)>,
}

impl GraphSpec {
    /// The graph as a standardized linear model.
    pub fn weighted(&self) -> Result<WeightedDag> {
        Ok(self.graph.oriented()?)
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn parse_graph(text: &str, origin: &str) -> Result<GraphSpec> {
    let mut spec = GraphSpec::default();
    let declare = |nodes: &mut Vec<String>, name: &str, line: usize| -> Result<()> {
        if !valid_name(name) {
            return Err(Error::parse(origin, line, format!("invalid node name `{name}`")));
        }
        if !nodes.iter().any(|n| n == name) {
            nodes.push(name.to_string());
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.as_slice() {
            ["node", names @ ..] if !names.is_empty() => {
                for n in names {
                    declare(&mut spec.graph.nodes, n, line)?;
                }
            }
            ["marginal", id, vars @ ..] => {
                if vars.len() < 2 {
                    return Err(Error::parse(origin, line, "a marginal needs at least two variables"));
                }
                if spec.marginals.iter().any(|(m, _)| m == id) {
                    return Err(Error::parse(origin, line, format!("duplicate marginal `{id}`")));
                }
                for v in vars {
                    if !valid_name(v) {
                        return Err(Error::parse(origin, line, format!("invalid node name `{v}`")));
                    }
                }
                spec.marginals.push((id.to_string(), vars.iter().map(|v| v.to_string()).collect()));
            }
            [from, arrow @ ("->" | "--"), to, rest @ ..] if rest.len() <= 1 => {
                let directed = *arrow == "->";
                let coefficient = match rest.first() {
                    None => None,
                    Some(t) => Some(
                        t.parse::<f64>()
                            .map_err(|_| Error::parse(origin, line, format!("bad coefficient `{t}`")))?,
                    ),
                };
                if !directed && coefficient.is_some() {
                    return Err(Error::parse(origin, line, "undirected edges take no coefficient"));
                }
                declare(&mut spec.graph.nodes, from, line)?;
                declare(&mut spec.graph.nodes, to, line)?;
                spec.graph.edges.push(MarginalEdge {
                    from: from.to_string(),
                    to: to.to_string(),
                    directed,
                    coefficient,
                });
            }
            _ => return Err(Error::parse(origin, line, format!("cannot parse `{content}`"))),
        }
    }
    for (id, vars) in &spec.marginals {
        if let Some(v) = vars.iter().find(|v| !spec.graph.nodes.contains(v)) {
            return Err(Error::Model(trek_core::Error::VariableMismatch {
                id: id.clone(),
                detail: format!("`{v}` is not a node of the graph"),
            }));
        }
    }
    Ok(spec)
}

pub fn read_graph(path: &Path) -> Result<GraphSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph(&text, &path.display().to_string())
}

/// Renders a graph in the file format; parses back to the same graph.
pub fn render_graph(spec: &GraphSpec) -> String {
    let mut out = String::new();
    writeln!(out, "node {}", spec.graph.nodes.join(" ")).unwrap();
    for e in &spec.graph.edges {
        match (e.directed, e.coefficient) {
            (true, Some(a)) => writeln!(out, "{} -> {} {}", e.from, e.to, a),
            (true, None) => writeln!(out, "{} -> {}", e.from, e.to),
            (false, _) => writeln!(out, "{} -- {}", e.from, e.to),
        }
        .unwrap();
    }
    for (id, vars) in &spec.marginals {
        writeln!(out, "marginal {id} {}", vars.join(" ")).unwrap();
    }
    out
}
