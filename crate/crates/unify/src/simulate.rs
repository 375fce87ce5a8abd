//! Drawing marginal datasets from a graph and writing them with a manifest.

use std::path::{Path, PathBuf};

use trek_core::{implied_covariance, sample, MarginalDataset, NoiseSpec, Payload, SampleSize, WeightedDag};

use crate::data::{write_correlation, write_samples};
use crate::error::{Error, Result};
use crate::manifest::{render_manifest, Kind, ManifestEntry};

/// Seed for the `index`-th marginal, so each marginal is an independent draw.
pub fn marginal_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One dataset per `(id, variables)`: `n` rows of simulated data, or the
/// population correlation matrix when `n` is `None`.
pub fn simulate_marginals(
    w: &WeightedDag,
    marginals: &[(String, Vec<String>)],
    n: Option<usize>,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Vec<MarginalDataset>> {
    let corr = implied_covariance(w)?;
    marginals
        .iter()
        .enumerate()
        .map(|(i, (id, vars))| {
            Ok(match n {
                None => MarginalDataset::from_correlation(id.clone(), corr.restrict(vars)?, SampleSize::Population)?,
                Some(n) => {
                    let table = sample(w, n, noise, marginal_seed(seed, i)).restrict(vars)?;
                    MarginalDataset::from_samples(id.clone(), table)?
                }
            })
        })
        .collect()
}

/// Writes `<id>.csv` per marginal plus `manifest.tsv`; returns the manifest path.
pub fn write_marginals(dir: &Path, marginals: &[MarginalDataset]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for m in marginals {
        let file = format!("{}.csv", m.id);
        let path = dir.join(&file);
        let (kind, n) = match &m.payload {
            Payload::Samples { table } => {
                write_samples(&path, table)?;
                (Kind::Samples, Some(SampleSize::Finite(table.n_rows() as u64)))
            }
            Payload::Correlation { matrix, n } => {
                write_correlation(&path, matrix)?;
                (Kind::Corr, Some(*n))
            }
        };
        entries.push(ManifestEntry {
            id: m.id.clone(),
            kind,
            path: file,
            n,
        });
    }
    let manifest = dir.join("manifest.tsv");
    std::fs::write(&manifest, render_manifest(&entries)).map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}
