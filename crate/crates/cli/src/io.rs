//! CSV and JSON files. Floats are written in shortest round-trip form, so
//! parsing a written file reproduces every value bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hcd::{DenseMatrix, DenseVector, Dictionary, Problem};

/// `prefix` followed by `name`, with the parent directory created.
pub fn output_path(prefix: &str, name: &str) -> Result<PathBuf> {
    let path = PathBuf::from(format!("{prefix}{name}"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating output directory {}", parent.display()))?;
    }
    Ok(path)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Matrix as `rows` lines of comma-separated values under a `c0,c1,...` header.
pub fn write_matrix(path: &Path, m: &DenseMatrix<f64>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record((0..m.cols()).map(|j| format!("c{j}")))?;
    for i in 0..m.rows() {
        w.write_record((0..m.cols()).map(|j| fmt_f64(m.get(i, j))))?;
    }
    w.flush()?;
    Ok(())
}

/// Vector as `index,value` rows.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "value"])?;
    for (i, x) in v.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*x)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn fmt_f64(x: f64) -> String {
    // Debug formatting is the shortest string that parses back to `x`
    format!("{x:?}")
}

fn parse_f64(field: &str, path: &Path, row: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .with_context(|| format!("{}: row {row}: not a number: {field:?}", path.display()))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        rows.push(
            rec.iter()
                .map(|f| parse_f64(f, path, i + 1))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    DenseMatrix::from_rows(&rows).with_context(|| format!("in {}", path.display()))
}

/// Reads the `value` column of an `index,value` file.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let col = r
        .headers()?
        .iter()
        .position(|h| h.trim() == "value")
        .with_context(|| format!("{}: missing `value` column", path.display()))?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.with_context(|| format!("reading {}", path.display()))?;
            let field = rec
                .get(col)
                .with_context(|| format!("{}: row {} is short", path.display(), i + 1))?;
            parse_f64(field, path, i + 1)
        })
        .collect()
}

/// Loads a problem written by `gen` (or by hand) from `prefix`.
///
/// With `normalize`, columns are rescaled to unit norm and the truth is
/// multiplied by the old norms so that `D a*` is unchanged.
pub fn read_problem(prefix: &str, normalize: bool) -> Result<Problem<f64>> {
    let path = |name: &str| PathBuf::from(format!("{prefix}{name}"));
    let matrix = read_matrix(&path("dictionary.csv"))?;
    let signal = read_vector(&path("signal.csv"))?;
    let truth_path = path("truth.csv");
    let mut truth = if truth_path.exists() {
        Some(read_vector(&truth_path)?)
    } else {
        None
    };

    let dictionary = if normalize {
        let (m, norms) = hcd::normalize_columns(&matrix)?;
        if let Some(t) = &mut truth {
            if t.len() == norms.len() {
                t.iter_mut().zip(norms.iter()).for_each(|(a, n)| *a *= n);
            }
        }
        Dictionary::new(m)
    } else {
        let dict = Dictionary::new(matrix);
        dict.check_normalized()
            .context("dictionary columns must have unit norm (pass --normalize to rescale)")?;
        dict
    };
    let truth = truth.map(DenseVector::from_vec).transpose()?;
    Ok(Problem::new(dictionary, DenseVector::from_vec(signal)?, truth)?)
}
