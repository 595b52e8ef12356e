//! CSV, JSON and binary artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pile_core::gram::PhysicsNodes;
use pile_core::linalg::Matrix;
use pile_core::operators::Region;
use pile_core::selection::{Landscape, SweepResult};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::experiments::Field;
use crate::{KitError, Result};

/// Shortest form for integers and 17 significant digits otherwise.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{v}")
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| KitError::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| KitError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub const SWEEP_COLUMNS: [&str; 28] = [
    "param",
    "value",
    "h",
    "theta",
    "s",
    "scale",
    "gamma",
    "rho",
    "eta",
    "pile_mean",
    "pile_std",
    "quad_term",
    "logdet_term",
    "const_term",
    "data_raw",
    "data_raw_std",
    "phys_raw",
    "phys_raw_std",
    "data_rel",
    "data_rel_std",
    "phys_rel",
    "phys_rel_std",
    "fit_norm",
    "jitter",
    "clamped",
    "diverged",
    "argmin",
    "error",
];

/// One row per grid value; PILE components are averaged over datasets.
pub fn write_sweep(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SWEEP_COLUMNS)?;
    for (i, row) in sweep.rows.iter().enumerate() {
        let mut rec = vec![sweep.param.name().to_string(), fmt_float(row.value)];
        match &row.outcome {
            Ok(cell) => {
                let k = cell.hyper.kernel;
                let t = cell.hyper.temperatures;
                for name in ["h", "theta", "s", "scale"] {
                    rec.push(opt(k.param(name)));
                }
                rec.extend([t.gamma, t.rho, t.eta].map(fmt_float));
                rec.push(fmt_float(cell.pile.mean));
                rec.push(fmt_float(cell.pile.std));
                let count = cell.reports.len() as f64;
                let avg = |f: fn(&pile_core::evidence::PileReport) -> f64| cell.reports.iter().map(f).sum::<f64>() / count;
                rec.push(fmt_float(avg(|r| r.quad_term)));
                rec.push(fmt_float(avg(|r| r.logdet_term)));
                rec.push(fmt_float(avg(|r| r.const_term)));
                match cell.errors {
                    Some(e) => {
                        for s in [e.data_raw, e.phys_raw, e.data_rel, e.phys_rel] {
                            rec.push(fmt_float(s.mean));
                            rec.push(fmt_float(s.std));
                        }
                    }
                    None => rec.extend(std::iter::repeat_n(String::new(), 8)),
                }
                rec.push(opt(cell.fit_norm.map(|s| s.mean)));
                rec.push(fmt_float(cell.jitter));
                rec.push(cell.clamped.to_string());
            }
            Err(_) => rec.extend(std::iter::repeat_n(String::new(), 21)),
        }
        rec.push(row.diverged.to_string());
        rec.push((sweep.argmin == Some(i)).to_string());
        rec.push(row.outcome.as_ref().err().map(|e| e.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| KitError::io(path, e))
}

pub fn write_landscape(path: &Path, landscape: &Landscape) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["theta", "s", "score", "argmin"])?;
    for (i, theta) in landscape.thetas.iter().enumerate() {
        for (j, s) in landscape.ss.iter().enumerate() {
            w.write_record([
                fmt_float(*theta),
                fmt_float(*s),
                opt(landscape.score(i, j)),
                (landscape.argmin == (i, j)).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| KitError::io(path, e))
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    let mut w = csv_writer(path)?;
    let dim = field.points.dim();
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend(["f", "df", "truth", "truth_df"].map(String::from));
    w.write_record(&header)?;
    for (k, x) in field.points.iter().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|v| fmt_float(*v)).collect();
        rec.extend([field.value[k], field.physics[k], field.truth[k], field.truth_physics[k]].map(fmt_float));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| KitError::io(path, e))
}

/// Physics nodes with their weights, region and operator.
pub fn write_nodes(path: &Path, nodes: &PhysicsNodes, targets: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = (1..=nodes.dim()).map(|i| format!("x{i}")).collect();
    header.extend(["weight", "region", "target", "operator"].map(String::from));
    w.write_record(&header)?;
    for j in 0..nodes.len() {
        let mut rec: Vec<String> = nodes.points().point(j).iter().map(|v| fmt_float(*v)).collect();
        rec.push(fmt_float(nodes.weights()[j]));
        rec.push(match nodes.regions()[j] {
            Region::Interior => "interior".to_string(),
            Region::Segment(id) => format!("segment{id}"),
        });
        rec.push(opt(targets.get(j).copied()));
        let op: Vec<String> = nodes.operator(j).iter().map(|t| format!("{} {}", t.index, t.coefficient)).collect();
        rec.push(op.join("; "));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| KitError::io(path, e))
}

/// Values at points: `x1..xd` followed by one column per named series.
pub fn write_values(path: &Path, points: &pile_core::points::PointSet, series: &[(&str, &[f64])]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = (1..=points.dim()).map(|i| format!("x{i}")).collect();
    header.extend(series.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    for (k, x) in points.iter().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|v| fmt_float(*v)).collect();
        rec.extend(series.iter().map(|(_, v)| fmt_float(v[k])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| KitError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).map_err(|e| KitError::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| KitError::io(path, e))?;
    out.flush().map_err(|e| KitError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| KitError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Row and column counts as little-endian `u64`, then the entries as
/// row-major little-endian `f64`.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let file = File::create(path).map_err(|e| KitError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut put = |bytes: &[u8]| out.write_all(bytes).map_err(|e| KitError::io(path, e));
    put(&(m.rows() as u64).to_le_bytes())?;
    put(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        put(&v.to_le_bytes())?;
    }
    out.flush().map_err(|e| KitError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| KitError::io(path, e))?;
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(8 * i..8 * i + 8)
            .map(|b| b.try_into().expect("eight bytes"))
            .ok_or_else(|| KitError::Data(format!("{}: truncated matrix file", path.display())))
    };
    let rows = u64::from_le_bytes(word(0)?) as usize;
    let cols = u64::from_le_bytes(word(1)?) as usize;
    if bytes.len() != 16 + 8 * rows * cols {
        return Err(KitError::Data(format!("{}: expected {rows}x{cols} entries", path.display())));
    }
    let data = (0..rows * cols).map(|i| word(i + 2).map(f64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_row_major(rows, cols, data)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub command: String,
    pub spec_sha256: String,
    pub seeds: Vec<u64>,
    pub parameters: Vec<(String, f64)>,
    pub files: Vec<String>,
    pub versions: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, spec_text: &str, seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_string(),
            spec_sha256: sha256_hex(spec_text.as_bytes()),
            seeds,
            parameters: Vec::new(),
            files: Vec::new(),
            versions: vec![
                ("pile-kit".to_string(), env!("CARGO_PKG_VERSION").to_string()),
                ("pile-core".to_string(), pile_core::VERSION.to_string()),
            ],
        }
    }
}

/// Collects the files written into one output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    pub manifest: Manifest,
}

impl OutputDir {
    pub fn create(root: &Path, manifest: Manifest) -> Result<Self> {
        ensure_dir(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    /// Path for `name`, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.manifest.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.root.join("manifest.json");
        write_json(&path, &self.manifest)?;
        Ok(path)
    }
}
