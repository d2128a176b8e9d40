//! CSV tables and JSON documents.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use roml_core::{DMatrix, Dataset};

/// Rows of a CSV file with header `x1..xd[,y]`.
pub struct Table {
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<f64>>,
}

impl Table {
    pub fn d(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Appends a constant-1 column when `intercept` is set.
    pub fn design(&self, intercept: bool) -> Vec<Vec<f64>> {
        self.features
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if intercept {
                    r.push(1.0);
                }
                r
            })
            .collect()
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = rdr.headers().with_context(|| format!("{}: reading header", path.display()))?.clone();
    let has_y = header.iter().last() == Some("y");
    let d = header.len() - usize::from(has_y);
    for (k, name) in header.iter().take(d).enumerate() {
        if name != format!("x{}", k + 1) {
            bail!("{}: line 1: expected column `x{}`, found `{name}`", path.display(), k + 1);
        }
    }
    if d == 0 {
        bail!("{}: no feature columns", path.display());
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("{}: malformed record", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            bail!("{}: line {line}: expected {} fields, found {}", path.display(), header.len(), rec.len());
        }
        let mut row = Vec::with_capacity(d);
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .with_context(|| format!("{}: line {line}, column {}: `{field}` is not a number", path.display(), k + 1))?;
            if k < d {
                row.push(v);
            } else {
                labels.push(v);
            }
        }
        features.push(row);
    }
    if features.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(Table {
        features,
        labels: has_y.then_some(labels),
    })
}

pub fn write_table(path: &Path, features: &DMatrix<f64>, labels: Option<&[f64]>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = (1..=features.ncols()).map(|k| format!("x{k}")).collect();
    if labels.is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    for i in 0..features.nrows() {
        let mut rec: Vec<String> = features.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(y) = labels {
            rec.push(format!("{}", y[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_dataset(path: &Path, data: &Dataset, columns: usize) -> Result<()> {
    let x = data.features().columns(0, columns).into_owned();
    write_table(path, &x, Some(data.labels().as_slice()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(file).with_context(|| format!("parsing {}", path.display()))
}

/// A square matrix from a headerless CSV file.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: line {line}: not a number", path.display()))?;
        rows.push(row);
    }
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        bail!("{}: expected a square matrix", path.display());
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let x = DMatrix::from_row_slice(3, 2, &[0.1, -2.5e-7, 1.0 / 3.0, 4.0, -0.0, 1e300]);
        write_table(&a, &x, Some(&[0.7, -1.25, 2.0 / 7.0])).unwrap();
        let t = read_table(&a).unwrap();
        let rows: Vec<f64> = t.features.concat();
        write_table(&b, &DMatrix::from_row_slice(3, 2, &rows), t.labels.as_deref()).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "x1,x2,y\n1,2,3\n1,2\n").unwrap();
        assert!(read_table(&p).is_err());
    }
}
