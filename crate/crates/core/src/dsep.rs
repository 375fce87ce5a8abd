//! d-separation.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Dag;

/// Read access to directed adjacency lists, shared by [`Dag`] and the search graphs.
pub(crate) trait Adjacency {
    fn node_count(&self) -> usize;
    fn parents_of(&self, v: usize) -> &[usize];
    fn children_of(&self, v: usize) -> &[usize];
}

impl Adjacency for Dag {
    fn node_count(&self) -> usize {
        self.len()
    }

    fn parents_of(&self, v: usize) -> &[usize] {
        self.parents(v)
    }

    fn children_of(&self, v: usize) -> &[usize] {
        self.children(v)
    }
}

/// Nodes d-connected to `x` given the conditioning mask `z` (Bayes-ball reachability).
pub(crate) fn reachable<G: Adjacency>(g: &G, x: usize, z: &[bool]) -> Vec<bool> {
    let n = g.node_count();
    let mut anc = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| z[v]).collect();
    for &v in &stack {
        anc[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &p in g.parents_of(v) {
            if !anc[p] {
                anc[p] = true;
                stack.push(p);
            }
        }
    }

    // visited[2v] = arrived from a child (moving up), visited[2v+1] = arrived from a parent.
    let mut visited = vec![false; 2 * n];
    let mut out = vec![false; n];
    let mut queue = vec![(x, true)];
    while let Some((v, up)) = queue.pop() {
        let slot = 2 * v + usize::from(!up);
        if visited[slot] {
            continue;
        }
        visited[slot] = true;
        if !z[v] {
            out[v] = true;
        }
        if up {
            if !z[v] {
                queue.extend(g.parents_of(v).iter().map(|&p| (p, true)));
                queue.extend(g.children_of(v).iter().map(|&c| (c, false)));
            }
        } else {
            if !z[v] {
                queue.extend(g.children_of(v).iter().map(|&c| (c, false)));
            }
            if anc[v] {
                queue.extend(g.parents_of(v).iter().map(|&p| (p, true)));
            }
        }
    }
    out
}

pub(crate) fn d_separated_idx<G: Adjacency>(g: &G, x: usize, y: usize, z: &[bool]) -> bool {
    !reachable(g, x, z)[y]
}

/// True iff every path between `x` and `y` is blocked by `z`.
pub fn d_separated<S: AsRef<str>>(dag: &Dag, x: &str, y: &str, z: &[S]) -> Result<bool> {
    let xi = dag.index_of(x)?;
    let yi = dag.index_of(y)?;
    if xi == yi {
        return Err(Error::SameVariable(x.to_string()));
    }
    let mut mask = vec![false; dag.len()];
    for v in z {
        let v = v.as_ref();
        let i = dag.index_of(v)?;
        if i == xi || i == yi {
            return Err(Error::EndpointConditioned(v.to_string()));
        }
        mask[i] = true;
    }
    Ok(d_separated_idx(dag, xi, yi, &mask))
}
