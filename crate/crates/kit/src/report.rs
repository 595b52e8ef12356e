//! Artifacts of the benchmark runs.

use std::path::Path;

use pile_core::metrics::{ErrorReport, Stats};
use pile_core::selection::{Hyper, Selection};
use serde::{Deserialize, Serialize};

use crate::experiments::{characteristic_angle, reduce_angle, selected_cell, ConvectionRun, PoissonRun};
use crate::output::{write_field, write_json, write_landscape, write_nodes, write_sweep, Manifest, OutputDir};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub param: String,
    pub selected: f64,
    pub argmin: usize,
    pub pile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub hyper: Hyper,
    pub stages: Vec<StageSummary>,
    pub pile: Option<Stats>,
    pub errors: Option<ErrorReport>,
    pub fit_norm: Option<Stats>,
}

impl SelectionSummary {
    pub fn new(selection: &Selection) -> Self {
        let stages = selection
            .stages
            .iter()
            .filter_map(|s| {
                let i = s.argmin?;
                Some(StageSummary {
                    param: s.param.name().to_string(),
                    selected: s.rows[i].value,
                    argmin: i,
                    pile: s.rows[i].pile(),
                })
            })
            .collect();
        let cell = selected_cell(selection);
        Self {
            hyper: selection.hyper,
            stages,
            pile: cell.map(|c| c.pile),
            errors: cell.and_then(|c| c.errors),
            fit_norm: cell.and_then(|c| c.fit_norm),
        }
    }
}

fn write_stages(out: &mut OutputDir, prefix: &str, selection: &Selection) -> Result<()> {
    for stage in &selection.stages {
        let path = out.file(&format!("{prefix}sweep_{}.csv", stage.param.name()));
        write_sweep(&path, stage)?;
    }
    Ok(())
}

/// Sweep CSVs for each stage, field dumps, the selected model and a summary.
pub fn emit_poisson(run: &PoissonRun, dir: &Path, spec_text: &str, seeds: &[u64]) -> Result<()> {
    let mut out = OutputDir::create(dir, Manifest::new("poisson", spec_text, seeds.to_vec()))?;
    write_stages(&mut out, "", &run.selection)?;
    for f in &run.fields {
        write_field(&out.file(&format!("field_{}.csv", f.label)), f)?;
    }
    let physics = run.spec.physics()?;
    write_nodes(&out.file("nodes.csv"), &physics.nodes, &physics.targets)?;
    write_json(&out.file("model.json"), &run.model)?;
    write_json(&out.file("summary.json"), &SelectionSummary::new(&run.selection))?;
    out.finish()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvectionSummary {
    pub beta: f64,
    pub isotropic: SelectionSummary,
    pub landscape_theta: f64,
    pub landscape_s: f64,
    /// `theta*` reduced modulo `π` into `(−π/2, π/2]`.
    pub reduced_theta: f64,
    pub characteristic_theta: f64,
    pub anisotropic: SelectionSummary,
}

impl ConvectionSummary {
    pub fn new(run: &ConvectionRun, beta: f64) -> Self {
        Self {
            beta,
            isotropic: SelectionSummary::new(&run.isotropic),
            landscape_theta: run.landscape.theta(),
            landscape_s: run.landscape.s(),
            reduced_theta: reduce_angle(run.landscape.theta()),
            characteristic_theta: characteristic_angle(beta),
            anisotropic: SelectionSummary::new(&run.anisotropic),
        }
    }
}

pub fn emit_convection(run: &ConvectionRun, beta: f64, dir: &Path, spec_text: &str, seeds: &[u64]) -> Result<()> {
    let mut manifest = Manifest::new("convection", spec_text, seeds.to_vec());
    manifest.parameters.push(("beta".to_string(), beta));
    let mut out = OutputDir::create(dir, manifest)?;
    write_stages(&mut out, "isotropic_", &run.isotropic)?;
    write_landscape(&out.file("landscape.csv"), &run.landscape)?;
    write_stages(&mut out, "anisotropic_", &run.anisotropic)?;
    for f in &run.fields {
        write_field(&out.file(&format!("field_{}.csv", f.label)), f)?;
    }
    let physics = run.spec.physics()?;
    write_nodes(&out.file("nodes.csv"), &physics.nodes, &physics.targets)?;
    write_json(&out.file("model.json"), &run.model)?;
    write_json(&out.file("summary.json"), &ConvectionSummary::new(run, beta))?;
    out.finish()?;
    Ok(())
}
