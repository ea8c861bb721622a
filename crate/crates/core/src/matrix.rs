use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named, row-major feature matrix with its regression target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
    target: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, values: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = target.len();
        if values.len() != n_rows * n_cols {
            return Err(Error::Schema(format!(
                "{} values do not fill {n_rows} rows of {n_cols} columns",
                values.len()
            )));
        }
        Ok(Self { columns, n_rows, values, target })
    }

    /// Builds from rows; every row must have `columns.len()` entries.
    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>], target: Vec<f64>) -> Result<Self> {
        if rows.len() != target.len() {
            return Err(Error::Schema(format!("{} rows but {} targets", rows.len(), target.len())));
        }
        let mut values = Vec::with_capacity(rows.len() * columns.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::Schema(format!("row {i} has {} values, expected {}", row.len(), columns.len())));
            }
            values.extend_from_slice(row);
        }
        Self::new(columns, values, target)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let n = self.columns.len();
        self.values[row * n + col] = v;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.columns.len();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    /// Copy with the given rows, in the given order (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let n = self.columns.len();
        let mut values = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            columns: self.columns.clone(),
            n_rows: rows.len(),
            values,
            target: rows.iter().map(|&r| self.target[r]).collect(),
        }
    }

    /// Copy keeping only the named columns, in the given order.
    pub fn select_columns(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::Schema(format!("no column {n:?}"))))
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n_rows * idx.len());
        for r in 0..self.n_rows {
            values.extend(idx.iter().map(|&c| self.get(r, c)));
        }
        Ok(Self {
            columns: names.iter().map(|s| s.to_string()).collect(),
            n_rows: self.n_rows,
            values,
            target: self.target.clone(),
        })
    }

    /// Copy without columns whose name satisfies `drop`.
    pub fn without_columns(&self, drop: impl Fn(&str) -> bool) -> Self {
        let keep: Vec<&str> = self.columns.iter().map(String::as_str).filter(|c| !drop(c)).collect();
        self.select_columns(&keep).expect("kept columns exist")
    }

    pub fn with_column(&self, name: &str, column: &[f64]) -> Result<Self> {
        if column.len() != self.n_rows {
            return Err(Error::Schema(format!("column {name:?} has {} values for {} rows", column.len(), self.n_rows)));
        }
        if self.column_index(name).is_some() {
            return Err(Error::Schema(format!("column {name:?} already exists")));
        }
        let n = self.columns.len();
        let mut values = Vec::with_capacity(self.n_rows * (n + 1));
        for r in 0..self.n_rows {
            values.extend_from_slice(self.row(r));
            values.push(column[r]);
        }
        let mut columns = self.columns.clone();
        columns.push(name.to_string());
        Ok(Self { columns, n_rows: self.n_rows, values, target: self.target.clone() })
    }

    pub fn with_target(mut self, target: Vec<f64>) -> Result<Self> {
        if target.len() != self.n_rows {
            return Err(Error::Schema(format!("{} targets for {} rows", target.len(), self.n_rows)));
        }
        self.target = target;
        Ok(self)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        header.push("target");
        w.write_record(&header)?;
        for r in 0..self.n_rows {
            let mut rec: Vec<String> = self.row(r).iter().map(f64::to_string).collect();
            rec.push(self.target[r].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a matrix written by [`FeatureMatrix::write_csv`] (last column is the target).
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        if header.iter().last() != Some("target") {
            return Err(Error::Schema("feature matrix file must end with a `target` column".into()));
        }
        let columns: Vec<String> = header.iter().take(header.len() - 1).map(str::to_string).collect();
        let mut values = Vec::new();
        let mut target = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let mut nums = rec.iter().map(|f| {
                f.parse::<f64>().map_err(|_| Error::InvalidRecord(format!("bad number {f:?}")))
            });
            for _ in 0..columns.len() {
                values.push(nums.next().ok_or_else(|| Error::Schema("short row".into()))??);
            }
            target.push(nums.next().ok_or_else(|| Error::Schema("short row".into()))??);
        }
        Self::new(columns, values, target)
    }
}
