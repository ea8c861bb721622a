//! Model-comparison tables.
//!
//! A result file is a CSV with the header in [`RESULT_HEADER`]; each row is
//! one model variant evaluated on one area and noise characteristic, with a
//! flag telling whether noise columns were used. The report concatenates
//! result files and marks the lowest MAE and the lowest MAPE.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RESULT_HEADER: [&str; 7] = ["model", "area", "characteristic", "radius_m", "noise", "mae", "mape"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub area: String,
    pub characteristic: String,
    pub radius_m: f64,
    pub noise: bool,
    pub mae: f64,
    pub mape: f64,
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_file(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let mut buf = Vec::new();
    write_results(&mut buf, rows)?;
    crate::io::write_atomic(path, &buf)
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(RESULT_HEADER) {
        return Err(Error::Schema(format!(
            "result file columns {:?} do not match {RESULT_HEADER:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let rows = reader.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

pub fn read_results_file(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    read_results(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ResultRow>,
    pub best_mae: Vec<bool>,
    pub best_mape: Vec<bool>,
}

/// Concatenates result sets and marks the minimum of each metric column
/// (all tied rows are marked).
pub fn build_table(results: Vec<Vec<ResultRow>>) -> Result<ComparisonTable> {
    let rows: Vec<ResultRow> = results.into_iter().flatten().collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData("no result rows to report".into()));
    }
    let min = |f: fn(&ResultRow) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    let (mae_min, mape_min) = (min(|r| r.mae), min(|r| r.mape));
    let best_mae = rows.iter().map(|r| r.mae == mae_min).collect();
    let best_mape = rows.iter().map(|r| r.mape == mape_min).collect();
    Ok(ComparisonTable { rows, best_mae, best_mape })
}

impl ComparisonTable {
    /// Fixed-width text; `*` marks the best value of a column.
    pub fn to_text(&self) -> String {
        let mut cells: Vec<[String; 7]> = vec![RESULT_HEADER.map(str::to_string)];
        for (i, r) in self.rows.iter().enumerate() {
            let mark = |best: bool| if best { "*" } else { "" };
            cells.push([
                r.model.clone(),
                r.area.clone(),
                r.characteristic.clone(),
                r.radius_m.to_string(),
                if r.noise { "yes".into() } else { "no".into() },
                format!("{:.2}{}", r.mae, mark(self.best_mae[i])),
                format!("{:.3}{}", r.mape, mark(self.best_mape[i])),
            ]);
        }
        let widths: Vec<usize> = (0..7).map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| if c >= 5 { format!("{s:>w$}", w = widths[c]) } else { format!("{s:<w$}", w = widths[c]) })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = RESULT_HEADER.to_vec();
        header.extend(["best_mae", "best_mape"]);
        w.write_record(&header)?;
        for (i, r) in self.rows.iter().enumerate() {
            w.write_record([
                r.model.clone(),
                r.area.clone(),
                r.characteristic.clone(),
                r.radius_m.to_string(),
                r.noise.to_string(),
                r.mae.to_string(),
                r.mape.to_string(),
                self.best_mae[i].to_string(),
                self.best_mape[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
