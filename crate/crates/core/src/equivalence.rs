//! Markov equivalence via skeletons and unshielded colliders.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Dag;

/// Skeleton plus unshielded colliders, expressed with node names so that
/// graphs with different node orders compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    pub skeleton: Vec<(String, String)>,
    pub colliders: Vec<(String, String, String)>,
}

pub fn pattern(dag: &Dag) -> Pattern {
    let mut skeleton: Vec<(String, String)> = dag
        .edges()
        .into_iter()
        .map(|(p, c)| ordered(dag.name(p), dag.name(c)))
        .collect();
    skeleton.sort();
    let mut colliders = Vec::new();
    for v in 0..dag.len() {
        let ps = dag.parents(v);
        for (i, &a) in ps.iter().enumerate() {
            for &b in &ps[i + 1..] {
                if !dag.adjacent(a, b) {
                    let (a, b) = ordered(dag.name(a), dag.name(b));
                    colliders.push((a, String::from(dag.name(v)), b));
                }
            }
        }
    }
    colliders.sort();
    Pattern { skeleton, colliders }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.into(), b.into())
    } else {
        (b.into(), a.into())
    }
}

/// True iff the graphs share a skeleton and their unshielded colliders.
pub fn markov_equivalent(d1: &Dag, d2: &Dag) -> Result<bool> {
    if !d1.same_node_set(d2) {
        return Err(Error::NodeSetMismatch);
    }
    Ok(pattern(d1) == pattern(d2))
}

/// Partitions `graphs` into Markov equivalence classes.
///
/// Members of a class are sorted by canonical edge encoding and classes are
/// ordered by their smallest member.
pub fn equivalence_classes(graphs: &[Dag]) -> Result<Vec<Vec<Dag>>> {
    if let Some(first) = graphs.first() {
        if graphs.iter().any(|g| !g.same_node_set(first)) {
            return Err(Error::NodeSetMismatch);
        }
    }
    let mut keyed: Vec<(Pattern, String, &Dag)> = graphs
        .iter()
        .map(|g| (pattern(g), g.canonical_encoding(), g))
        .collect();
    keyed.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    let mut classes: Vec<Vec<Dag>> = Vec::new();
    let mut last: Option<&Pattern> = None;
    for (p, _, g) in &keyed {
        if last == Some(p) {
            classes.last_mut().expect("open class").push((*g).clone());
        } else {
            classes.push(alloc::vec![(*g).clone()]);
            last = Some(p);
        }
    }
    classes.sort_by(|a, b| a[0].canonical_encoding().cmp(&b[0].canonical_encoding()));
    Ok(classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(edges: &[(&str, &str)]) -> Dag {
        Dag::new(["X", "Y", "Z"], edges.iter().copied()).unwrap()
    }

    #[test]
    fn chains_and_colliders() {
        let fwd = g(&[("X", "Y"), ("Y", "Z")]);
        let back = g(&[("Y", "X"), ("Z", "Y")]);
        let coll = g(&[("X", "Y"), ("Z", "Y")]);
        assert!(markov_equivalent(&fwd, &back).unwrap());
        assert!(!markov_equivalent(&fwd, &coll).unwrap());
        assert!(markov_equivalent(&coll, &coll).unwrap());
        let classes = equivalence_classes(&[fwd, back, coll]).unwrap();
        assert_eq!(classes.len(), 2);
    }

    #[test]
    fn two_node_orientations_share_a_class() {
        let a = Dag::new(["X", "Y"], [("X", "Y")]).unwrap();
        let b = Dag::new(["X", "Y"], [("Y", "X")]).unwrap();
        assert_eq!(equivalence_classes(&[a, b]).unwrap().len(), 1);
    }

    #[test]
    fn node_set_mismatch() {
        let a = Dag::empty(["X", "Y"]).unwrap();
        let b = Dag::empty(["X", "Z"]).unwrap();
        assert!(matches!(markov_equivalent(&a, &b), Err(Error::NodeSetMismatch)));
        assert!(matches!(equivalence_classes(&[a, b]), Err(Error::NodeSetMismatch)));
    }
}
