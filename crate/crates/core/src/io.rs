//! CSV and JSON helpers shared by the persistence formats.
//!
//! Floats are written with Rust's shortest round-trip representation so
//! a write/read cycle reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Result, RomError};
use crate::ode::Trajectory;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Writes a numeric table with the given header.
pub fn write_table<P, I>(path: P, header: &[String], rows: I) -> Result<()>
where
    P: AsRef<Path>,
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt_f64(*x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric table, returning the header and the rows.
pub fn read_table<P: AsRef<Path>>(path: P) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(RomError::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| RomError::Format {
                    path: path.display().to_string(),
                    reason: format!("bad number {s:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(RomError::Format {
                path: path.display().to_string(),
                reason: format!("row has {} fields, header has {}", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_json<P: AsRef<Path>, T: Serialize>(path: P, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<P: AsRef<Path>, T: DeserializeOwned>(path: P) -> Result<T> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(RomError::MissingArtifact(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes `t,<prefix>_0,...` with one row per sample.
pub fn write_trajectory<P: AsRef<Path>>(path: P, traj: &Trajectory, prefix: &str) -> Result<()> {
    let mut header = vec!["t".to_owned()];
    header.extend((0..traj.dim()).map(|i| format!("{prefix}_{i}")));
    let rows = traj.times.iter().zip(traj.states.rows()).map(|(t, row)| {
        let mut v = Vec::with_capacity(row.len() + 1);
        v.push(*t);
        v.extend(row.iter().copied());
        v
    });
    write_table(path, &header, rows)
}

pub fn read_trajectory<P: AsRef<Path>>(path: P) -> Result<Trajectory> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    if header.first().map(String::as_str) != Some("t") {
        return Err(RomError::Format {
            path: path.display().to_string(),
            reason: "first column must be `t`".into(),
        });
    }
    let dim = header.len() - 1;
    let mut states = Array2::zeros((rows.len(), dim));
    let mut times = Vec::with_capacity(rows.len());
    for (j, row) in rows.iter().enumerate() {
        times.push(row[0]);
        for i in 0..dim {
            states[[j, i]] = row[i + 1];
        }
    }
    Trajectory::new(times, states)
}
