//! Parallel candidate evaluation on a rayon pool.

use rayon::prelude::*;
use trek_core::unify::{Candidate, Executor};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "TREK_UNIFY_THREADS";

pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `threads == 0` lets rayon pick.
    pub fn with_threads(threads: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        Parallel { pool }
    }

    /// Honors `TREK_UNIFY_THREADS`; unset or unparsable means rayon's default.
    pub fn from_env() -> Self {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        Self::with_threads(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn for_each(&self, candidates: &mut [Candidate], f: &(dyn Fn(&mut Candidate) + Sync)) {
        self.pool.install(|| candidates.par_iter_mut().for_each(f));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use trek_core::unify::{enumerate_candidates, Sequential};
    use trek_core::CiCatalog;

    #[test]
    fn matches_sequential() {
        let vars = ["a", "b", "c"];
        let mut seq = enumerate_candidates(&vars, &CiCatalog::default(), &[], true).unwrap();
        let mut par = seq.clone();
        let mark = |c: &mut Candidate| {
            if c.graph.edge_count() == 2 {
                c.status = trek_core::unify::Status::RuledOut;
            }
        };
        Sequential.for_each(&mut seq, &mark);
        Parallel::with_threads(3).for_each(&mut par, &mark);
        assert_eq!(seq, par);
        assert_eq!(Parallel::with_threads(2).threads(), 2);
    }
}
