//! CSV artifacts. Floats are written with Rust's shortest round-trip
//! formatting, so every file reads back to the exact values written.

use std::fs;
use std::path::{Path, PathBuf};

use smoothsgd_core::optimizer::StepView;

use crate::error::{Error, Result};

/// One persisted step of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub stage: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    /// 0 on the final record, where no noise is drawn.
    pub noise_norm: f64,
    pub dist2: Option<f64>,
    pub out_of_box: bool,
}

impl TrajectoryRow {
    pub fn from_view(v: &StepView<'_>) -> Self {
        TrajectoryRow {
            t: v.t,
            stage: v.stage,
            x: v.x.to_vec(),
            f: v.f,
            grad_norm: v.grad_norm,
            noise_norm: v.noise.map_or(0.0, |w| w.iter().map(|a| a * a).sum::<f64>().sqrt()),
            dist2: v.dist2,
            out_of_box: v.out_of_box,
        }
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Indexed column names `{prefix}_0 .. {prefix}_{d-1}`.
pub fn indexed(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|i| format!("{prefix}_{i}")).collect()
}

/// A CSV file as header plus string cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<String>) -> Self {
        Table {
            headers,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let headers = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Table { headers, rows })
    }
}

pub fn trajectory_headers(d: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "stage".to_string()];
    h.extend(indexed("x", d));
    h.extend(["f", "grad_norm", "noise_norm", "dist2", "out_of_box"].map(String::from));
    h
}

pub fn trajectory_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("trial_{index}.csv"))
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow], d: usize) -> Result<()> {
    let mut table = Table::new(trajectory_headers(d));
    for r in rows {
        let mut cells = vec![r.t.to_string(), r.stage.to_string()];
        cells.extend(r.x.iter().map(|v| fmt_f64(*v)));
        cells.push(fmt_f64(r.f));
        cells.push(fmt_f64(r.grad_norm));
        cells.push(fmt_f64(r.noise_norm));
        cells.push(fmt_opt(r.dist2));
        cells.push(r.out_of_box.to_string());
        table.push(cells);
    }
    table.write(path)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let table = Table::read(path)?;
    let d = table
        .headers
        .len()
        .checked_sub(7)
        .filter(|d| table.headers == trajectory_headers(*d))
        .ok_or_else(|| Error::CsvField {
            path: path.into(),
            row: 0,
            field: "header".into(),
        })?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let bad = |field: &str| Error::CsvField {
                path: path.into(),
                row: i + 1,
                field: field.into(),
            };
            let num = |j: usize| row[j].parse::<f64>().map_err(|_| bad(&table.headers[j]));
            Ok(TrajectoryRow {
                t: row[0].parse().map_err(|_| bad("t"))?,
                stage: row[1].parse().map_err(|_| bad("stage"))?,
                x: (0..d).map(|j| num(2 + j)).collect::<Result<_>>()?,
                f: num(2 + d)?,
                grad_norm: num(3 + d)?,
                noise_norm: num(4 + d)?,
                dist2: if row[5 + d].is_empty() { None } else { Some(num(5 + d)?) },
                out_of_box: row[6 + d].parse().map_err(|_| bad("out_of_box"))?,
            })
        })
        .collect()
}

/// Parses a float cell (empty cells are `None`).
pub fn parse_cell(cell: &str) -> Option<f64> {
    if cell.is_empty() {
        None
    } else {
        cell.parse().ok()
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            TrajectoryRow {
                t: 0,
                stage: 0,
                x: vec![0.1, -1.0 / 3.0],
                f: 1e-300,
                grad_norm: 2.5,
                noise_norm: 0.123456789012345,
                dist2: Some(0.3),
                out_of_box: false,
            },
            TrajectoryRow {
                t: 1,
                stage: 1,
                x: vec![7.0, f64::MIN_POSITIVE],
                f: -0.0,
                grad_norm: 0.0,
                noise_norm: 0.0,
                dist2: None,
                out_of_box: true,
            },
        ];
        let path = trajectory_path(dir.path(), 3);
        write_trajectory(&path, &rows, 2).unwrap();
        assert_eq!(read_trajectory(&path).unwrap(), rows);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,stage,x_0,x_1,f,grad_norm,noise_norm,dist2,out_of_box\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.push(vec!["1".into(), "2".into()]);
        t.write(&path).unwrap();
        assert_eq!(Table::read(&path).unwrap(), t);
        assert!(read_trajectory(&path).is_err());
    }
}
