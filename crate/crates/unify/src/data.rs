//! CSV files: sample tables (header of variable names, one row per draw) and
//! correlation matrices (header of variable names, one row per variable).

use std::path::Path;

use trek_core::{CorrelationMatrix, SampleTable};

use crate::error::{Error, Result};

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let origin = path.display().to_string();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::parse(origin.clone(), line, format!("`{field}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn read_samples(path: &Path) -> Result<SampleTable> {
    let (header, rows) = read_rows(path)?;
    Ok(SampleTable::new(header, rows, 0)?)
}

pub fn read_correlation(path: &Path) -> Result<CorrelationMatrix> {
    let (header, rows) = read_rows(path)?;
    Ok(CorrelationMatrix::new(header, rows)?)
}

fn write_rows<'a>(path: &Path, header: &[String], rows: impl Iterator<Item = &'a [f64]>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_samples(path: &Path, table: &SampleTable) -> Result<()> {
    write_rows(path, table.variables(), (0..table.n_rows()).map(|i| table.row(i)))
}

pub fn write_correlation(path: &Path, matrix: &CorrelationMatrix) -> Result<()> {
    let rows = matrix.rows();
    write_rows(path, matrix.variables(), rows.iter().map(Vec::as_slice))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = CorrelationMatrix::new(vec!["a".into(), "b".into()], vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let p = dir.path().join("c.csv");
        write_correlation(&p, &m).unwrap();
        assert_eq!(read_correlation(&p).unwrap(), m);
        let t = SampleTable::new(vec!["x".into(), "y".into()], vec![vec![0.1, -2.5], vec![1e-7, 3.0]], 0).unwrap();
        let p = dir.path().join("s.csv");
        write_samples(&p, &t).unwrap();
        assert_eq!(read_samples(&p).unwrap(), t);
    }

    #[test]
    fn bad_cells_report_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "x,y\n1,2\n3,oops\n").unwrap();
        let e = read_samples(&p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
    }
}
