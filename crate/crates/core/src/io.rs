//! CSV formats.
//!
//! Datasets: header with `z`, `sigma` (> 0), optional `mu`, optional `index`
//! (defaults to row order) and covariates `x0 .. x{d-1}`. Unknown columns are
//! ignored with a warning. Empty or non-numeric cells are hard errors that name
//! the (1-based) data row.
//!
//! External predictions: `index,prediction`.
//!
//! Counts: `events,population` plus any numeric columns, which are carried
//! along as covariates.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::regressors::PredictionTable;
use crate::simulate::{CountRecord, Dataset};

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::data(Some(i + 1), e.to_string()))?;
            rows.push(rec);
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| Error::data(None, format!("missing required column `{name}`")))
    }

    fn cell(&self, row: usize, col: usize) -> Result<&str> {
        let v = self.rows[row].get(col).unwrap_or("");
        if v.is_empty() {
            return Err(Error::data(Some(row + 1), format!("missing value in column `{}`", self.header[col])));
        }
        Ok(v)
    }

    fn real(&self, row: usize, col: usize) -> Result<f64> {
        let v = self.cell(row, col)?;
        let x: f64 = v.parse().map_err(|_| {
            Error::data(Some(row + 1), format!("`{}` = {v:?} is not a number", self.header[col]))
        })?;
        if !x.is_finite() {
            return Err(Error::data(Some(row + 1), format!("`{}` = {v} is not finite", self.header[col])));
        }
        Ok(x)
    }

    fn count(&self, row: usize, col: usize) -> Result<u64> {
        let v = self.cell(row, col)?;
        v.parse().map_err(|_| {
            Error::data(
                Some(row + 1),
                format!("`{}` = {v:?} is not a non-negative integer", self.header[col]),
            )
        })
    }
}

/// Covariate columns `x0, x1, ...` in numeric order; they must be contiguous.
fn covariate_columns(header: &[String]) -> Result<Vec<usize>> {
    let mut found: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(c, h)| {
            let digits = h.strip_prefix('x')?;
            (!digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
                .then(|| digits.parse().ok().map(|j| (j, c)))
                .flatten()
        })
        .collect();
    found.sort();
    for (expected, (j, _)) in found.iter().enumerate() {
        if *j != expected {
            return Err(Error::data(None, format!("covariate columns must be x0..x{{d-1}}; x{expected} is missing")));
        }
    }
    Ok(found.into_iter().map(|(_, c)| c).collect())
}

/// Reads a dataset CSV.
pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let t = Table::read(input)?;
    let z_col = t.require("z")?;
    let s_col = t.require("sigma")?;
    let mu_col = t.column("mu");
    let idx_col = t.column("index");
    let x_cols = covariate_columns(&t.header)?;
    for (c, h) in t.header.iter().enumerate() {
        let known = [Some(z_col), Some(s_col), mu_col, idx_col].contains(&Some(c)) || x_cols.contains(&c);
        if !known {
            log::warn!("ignoring unknown column `{h}`");
        }
    }
    let n = t.rows.len();
    if n == 0 {
        return Err(Error::data(None, "dataset has no rows"));
    }
    let d = x_cols.len();
    let mut x = Array2::zeros((n, d));
    let mut z = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut mu = mu_col.map(|_| Vec::with_capacity(n));
    let mut index = Vec::with_capacity(n);
    let mut seen = std::collections::HashSet::with_capacity(n);
    for r in 0..n {
        z.push(t.real(r, z_col)?);
        let s = t.real(r, s_col)?;
        if s <= 0.0 {
            return Err(Error::data(Some(r + 1), format!("sigma = {s} must be > 0")));
        }
        sigma.push(s);
        if let (Some(c), Some(mu)) = (mu_col, mu.as_mut()) {
            mu.push(t.real(r, c)?);
        }
        for (j, &c) in x_cols.iter().enumerate() {
            x[[r, j]] = t.real(r, c)?;
        }
        let id = match idx_col {
            Some(c) => t.count(r, c)? as usize,
            None => r,
        };
        if !seen.insert(id) {
            return Err(Error::data(Some(r + 1), format!("duplicate index {id}")));
        }
        index.push(id);
    }
    Ok(Dataset { index, x, z, sigma, mu })
}

/// Writes a dataset CSV: `index,x0..,z,sigma[,mu]`.
pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = data.dim();
    let mut header = vec!["index".to_string()];
    header.extend((0..d).map(|j| format!("x{j}")));
    header.extend(["z".to_string(), "sigma".to_string()]);
    if data.mu.is_some() {
        header.push("mu".to_string());
    }
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec = vec![data.index[i].to_string()];
        rec.extend(data.x.row(i).iter().map(f64::to_string));
        rec.push(data.z[i].to_string());
        rec.push(data.sigma[i].to_string());
        if let Some(mu) = &data.mu {
            rec.push(mu[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `index,prediction` CSV.
pub fn read_predictions<R: Read>(input: R) -> Result<PredictionTable> {
    let t = Table::read(input)?;
    let (ic, pc) = (t.require("index")?, t.require("prediction")?);
    let pairs = (0..t.rows.len())
        .map(|r| Ok((t.count(r, ic)? as usize, t.real(r, pc)?)))
        .collect::<Result<Vec<_>>>()?;
    PredictionTable::from_pairs(pairs)
}

/// Count data with pass-through covariates.
#[derive(Debug, Clone)]
pub struct CountsFile {
    pub records: Vec<CountRecord>,
    pub covariate_names: Vec<String>,
    pub covariates: Array2<f64>,
}

/// Reads a counts CSV with `events,population` and numeric covariate columns.
pub fn read_counts<R: Read>(input: R) -> Result<CountsFile> {
    let t = Table::read(input)?;
    let (ec, pc) = (t.require("events")?, t.require("population")?);
    let cov: Vec<usize> = (0..t.header.len()).filter(|&c| c != ec && c != pc).collect();
    let n = t.rows.len();
    let mut covariates = Array2::zeros((n, cov.len()));
    let mut records = Vec::with_capacity(n);
    for r in 0..n {
        records.push(CountRecord {
            events: t.count(r, ec)?,
            population: t.count(r, pc)?,
        });
        for (j, &c) in cov.iter().enumerate() {
            covariates[[r, j]] = t.real(r, c)?;
        }
    }
    Ok(CountsFile {
        records,
        covariate_names: cov.iter().map(|&c| t.header[c].clone()).collect(),
        covariates,
    })
}
