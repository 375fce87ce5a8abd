//! Manifest files list marginals, one per line:
//! `id <TAB> samples|corr <TAB> path [<TAB> n]`.
//!
//! Paths are relative to the manifest. `corr` entries need `n`, either a
//! positive integer or `inf` for population values; for `samples` it is
//! optional and must match the row count when given.

use std::fmt::Write as _;
use std::path::Path;

use trek_core::marginal::validate_collection;
use trek_core::{MarginalDataset, SampleSize};

use crate::data::{read_correlation, read_samples};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Samples,
    Corr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: Kind,
    pub path: String,
    pub n: Option<SampleSize>,
}

fn parse_n(s: &str) -> Option<SampleSize> {
    match s {
        "inf" => Some(SampleSize::Population),
        _ => s.parse::<u64>().ok().filter(|&n| n > 0).map(SampleSize::Finite),
    }
}

pub fn parse_manifest(text: &str, origin: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::parse(origin, line, "expected `id<TAB>kind<TAB>path[<TAB>n]`"));
        }
        let kind = match fields[1] {
            "samples" => Kind::Samples,
            "corr" => Kind::Corr,
            other => return Err(Error::parse(origin, line, format!("unknown kind `{other}`"))),
        };
        let n = match fields.get(3) {
            Some(s) => Some(parse_n(s).ok_or_else(|| Error::parse(origin, line, format!("bad sample size `{s}`")))?),
            None if kind == Kind::Corr => return Err(Error::parse(origin, line, "corr entries need a sample size")),
            None => None,
        };
        if fields[0].is_empty() {
            return Err(Error::parse(origin, line, "empty id"));
        }
        out.push(ManifestEntry {
            id: fields[0].to_string(),
            kind,
            path: fields[2].to_string(),
            n,
        });
    }
    Ok(out)
}

pub fn render_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let kind = match e.kind {
            Kind::Samples => "samples",
            Kind::Corr => "corr",
        };
        write!(out, "{}\t{kind}\t{}", e.id, e.path).unwrap();
        match e.n {
            Some(SampleSize::Population) => out.push_str("\tinf"),
            Some(SampleSize::Finite(n)) => write!(out, "\t{n}").unwrap(),
            None => {}
        }
        out.push('\n');
    }
    out
}

/// Reads every marginal listed in the manifest, in file order.
pub fn load_marginals(manifest: &Path) -> Result<Vec<MarginalDataset>> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let origin = manifest.display().to_string();
    let base = manifest.parent().unwrap_or(Path::new("."));
    let entries = parse_manifest(&text, &origin)?;
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let path = base.join(&e.path);
        let m = match e.kind {
            Kind::Samples => {
                let table = read_samples(&path)?;
                if let Some(SampleSize::Finite(n)) = e.n {
                    if n as usize != table.n_rows() {
                        return Err(Error::Model(trek_core::Error::VariableMismatch {
                            id: e.id,
                            detail: format!("manifest says {n} rows, file has {}", table.n_rows()),
                        }));
                    }
                }
                MarginalDataset::from_samples(e.id, table)?
            }
            Kind::Corr => MarginalDataset::from_correlation(e.id, read_correlation(&path)?, e.n.expect("checked"))?,
        };
        out.push(m);
    }
    validate_collection(&out)?;
    Ok(out)
}
