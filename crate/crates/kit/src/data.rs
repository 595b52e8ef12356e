//! Observation files: CSV with a header naming `x1..xd` and `y` in any order.

use std::fs::File;
use std::path::Path;

use pile_core::points::PointSet;

use crate::{KitError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub points: PointSet,
    pub values: Vec<f64>,
    /// Rows skipped because a required field was NaN.
    pub dropped: usize,
}

pub fn read_observations(path: &Path, dim: usize) -> Result<Observations> {
    let file = File::open(path).map_err(|e| KitError::io(path, e))?;
    parse_observations(file, dim).map_err(|e| match e {
        KitError::Data(msg) => KitError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads observations, locating columns by header name. Extra columns are
/// ignored; rows with a NaN coordinate or value are dropped and counted.
pub fn parse_observations(reader: impl std::io::Read, dim: usize) -> Result<Observations> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let wanted: Vec<String> = (1..=dim).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
    let columns = wanted
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| KitError::Data(format!("missing column `{name}`")))
        })
        .collect::<Result<Vec<usize>>>()?;

    let mut points = PointSet::new(dim);
    let mut values = Vec::new();
    let mut dropped = 0;
    let mut row = vec![0.0; dim + 1];
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        for (slot, &c) in row.iter_mut().zip(&columns) {
            let field = record.get(c).unwrap_or("");
            *slot = field
                .parse::<f64>()
                .map_err(|_| KitError::Data(format!("row {}: `{field}` is not a number", line + 2)))?;
        }
        if row.iter().any(|v| v.is_nan()) {
            dropped += 1;
            continue;
        }
        if let Some(v) = row.iter().find(|v| v.is_infinite()) {
            return Err(KitError::Data(format!("row {}: non-finite value {v}", line + 2)));
        }
        points.push(&row[..dim])?;
        values.push(row[dim]);
    }
    Ok(Observations { points, values, dropped })
}
