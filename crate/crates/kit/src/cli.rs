//! The `pile-kit` command line.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pile_core::gram::GramSystem;
use pile_core::kernels::{KernelFamily, KernelSpec};
use pile_core::metrics::NormMode;
use pile_core::quadrature::{interior_rule, WeightMode};
use pile_core::selection::{
    datafree_kernel_select, linspace, sequential_select, sweep, Dataset, Evaluation, Hyper, Param, Problem, SweepGrid,
};

use crate::data::{parse_observations, read_observations};
use crate::experiments::{run_convection, run_poisson, ConvectionConfig, FittedModel, PoissonConfig, CONVECTION_SPEC, POISSON_SPEC};
use crate::output::{write_json, write_landscape, write_matrix, write_nodes, write_sweep, write_values, Manifest, OutputDir};
use crate::report::{emit_convection, emit_poisson, SelectionSummary};
use crate::spec::{parse_operator, ProblemSpec};
use crate::{KitError, Result};

#[derive(Debug, Parser)]
#[command(name = "pile-kit", version, about = "Physics-informed kernel regression with log-evidence model selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Problem spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Observation CSV with columns x1..xd and y; simulated from the spec's truth if absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the spec's observation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Transport speed, bound to `beta` in the spec.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at the spec's hyperparameters and write the model.
    Fit(Common),
    /// Print the PILE of the spec's hyperparameters.
    Score(Common),
    /// Sweep one hyperparameter, or several in sequence.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `name=log:lo:hi:count`, `name=lin:lo:hi:count` or `name=v1,v2,...`; repeat for sequential selection.
        #[arg(long = "grid", required = true, allow_hyphen_values = true)]
        grids: Vec<String>,
    },
    /// Data-free landscape over the anisotropic kernel's angle and aspect.
    Datafree {
        #[command(flatten)]
        common: Common,
        /// Grids for `theta` and `s` (defaults: 65 angles on [-π, π], 11 aspects on [0.5, 1.5]).
        #[arg(long = "grid", allow_hyphen_values = true)]
        grids: Vec<String>,
    },
    /// Reproduce the Poisson benchmark.
    Poisson {
        #[command(flatten)]
        common: Common,
        /// Number of noise replicates.
        #[arg(long, default_value_t = 20)]
        replicates: u64,
    },
    /// Reproduce the transport benchmark.
    Convection {
        #[command(flatten)]
        common: Common,
        /// Number of noise replicates.
        #[arg(long, default_value_t = 5)]
        replicates: u64,
    },
    /// Evaluate a saved model at points.
    Predict {
        /// Model JSON written by `fit`, `poisson` or `convection`.
        #[arg(long)]
        model: PathBuf,
        /// CSV with columns x1..xd.
        #[arg(long)]
        points: PathBuf,
        /// Output channel in `op` syntax, e.g. `laplacian` or `(1,0) 1; (0,1) 2`.
        #[arg(long, default_value = "identity")]
        op: String,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        /// Output CSV.
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
}

/// `name=log:lo:hi:count` (exponents of ten), `name=lin:lo:hi:count` or `name=v1,v2,...`.
pub fn parse_grid(text: &str) -> Result<SweepGrid> {
    let usage = |msg: &str| KitError::Usage(format!("grid `{text}`: {msg}"));
    let (name, body) = text.split_once('=').ok_or_else(|| usage("expected name=values"))?;
    let param = Param::from_name(name.trim()).map_err(|e| usage(&e.to_string()))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(&format!("`{s}` is not a number")));
    let grid = if let Some(rest) = body.strip_prefix("log:").or_else(|| body.strip_prefix("lin:")) {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, count] = parts[..] else {
            return Err(usage("expected lo:hi:count"));
        };
        let count: usize = count.trim().parse().map_err(|_| usage("count must be a positive integer"))?;
        if body.starts_with("log:") {
            SweepGrid::log_spaced(param, num(lo)?, num(hi)?, count)
        } else {
            SweepGrid::linear(param, num(lo)?, num(hi)?, count)
        }
    } else {
        SweepGrid::new(param, body.split(',').map(num).collect::<Result<_>>()?)
    };
    grid.map_err(|e| usage(&e.to_string()))
}

fn params(beta: Option<f64>) -> Vec<(&'static str, f64)> {
    beta.map(|b| vec![("beta", b)]).unwrap_or_default()
}

fn load_spec(common: &Common, default: Option<&str>) -> Result<(String, ProblemSpec)> {
    let text = match (&common.spec, default) {
        (Some(path), _) => fs::read_to_string(path).map_err(|e| KitError::io(path, e))?,
        (None, Some(text)) => text.to_string(),
        (None, None) => return Err(KitError::Usage("--spec is required".into())),
    };
    let mut spec = ProblemSpec::parse_with(&text, &params(common.beta))?;
    if let Some(seed) = common.seed {
        spec.obs.seed = seed;
    }
    Ok((text, spec))
}

/// One dataset, read from `--data` or simulated from the spec's truth, with
/// an evaluation rule when the truth is known.
fn load_problem(common: &Common, spec: &ProblemSpec) -> Result<Problem> {
    let physics = spec.physics()?;
    let seed = spec.obs.seed;
    let (observations, dataset) = match &common.data {
        Some(path) => {
            let obs = read_observations(path, spec.dim())?;
            if obs.dropped > 0 {
                eprintln!("{}: dropped {} rows containing NaN", path.display(), obs.dropped);
            }
            let r = spec.simulate_targets(&physics, seed);
            (obs.points, Dataset { y: obs.values, r })
        }
        None => {
            let truth = spec
                .truth
                .clone()
                .ok_or_else(|| KitError::Usage("the spec has no `truth`; pass --data".into()))?;
            let points = spec.observation_points()?;
            let ds = spec.simulate(&|x| truth.eval(x), &points, &physics, seed);
            (points, ds)
        }
    };
    let evaluation = match &spec.truth {
        Some(truth) => {
            let rule = interior_rule(&spec.domain, spec.quad.per_axis.max(30), WeightMode::Corrected)?;
            let (t, g) = (truth.clone(), spec.forcing.clone());
            let ev = Evaluation::new(rule, move |x| t.eval(x), move |x| g.eval(x), spec.interior.clone(), NormMode::NormSquared);
            // A homogeneous equation has a zero right-hand side; fall back to ‖f‖.
            let (norm, norm_op) = ev.norms();
            Some(if norm_op > 0.0 { ev } else { ev.with_physics_norm(norm) })
        }
        None => None,
    };
    Ok(Problem {
        hyper: Hyper {
            kernel: spec.kernel,
            temperatures: spec.temperatures,
        },
        observations,
        nodes: physics.nodes,
        datasets: vec![dataset],
        evaluation,
    })
}

fn manifest(command: &str, text: &str, spec: &ProblemSpec, common: &Common) -> Manifest {
    let mut m = Manifest::new(command, text, vec![spec.obs.seed]);
    if let Some(b) = common.beta {
        m.parameters.push(("beta".into(), b));
    }
    m
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(common) => fit(&common),
        Command::Score(common) => score(&common),
        Command::Sweep { common, grids } => run_sweep(&common, &grids),
        Command::Datafree { common, grids } => datafree(&common, &grids),
        Command::Poisson { common, replicates } => poisson(&common, replicates),
        Command::Convection { common, replicates } => convection(&common, replicates),
        Command::Predict {
            model,
            points,
            op,
            beta,
            out,
        } => predict(&model, &points, &op, beta, &out),
    }
}

fn fit(common: &Common) -> Result<()> {
    let (text, spec) = load_spec(common, None)?;
    let problem = load_problem(common, &spec)?;
    let model = FittedModel::fit(&problem, &problem.hyper, &problem.datasets[0])?;
    let cell = problem.evaluate(&problem.hyper)?;
    let mut out = OutputDir::create(&common.out, manifest("fit", &text, &spec, common))?;
    write_json(&out.file("model.json"), &model)?;
    write_json(&out.file("score.json"), &cell.reports[0])?;
    if let Some(errors) = cell.errors {
        write_json(&out.file("errors.json"), &errors)?;
    }
    let physics = spec.physics()?;
    write_nodes(&out.file("nodes.csv"), &physics.nodes, &problem.datasets[0].r)?;
    let gram = GramSystem::assemble(&problem.hyper.kernel, &problem.observations, &problem.nodes)?;
    write_matrix(&out.file("gram.bin"), gram.joint())?;
    out.finish()?;
    Ok(())
}

fn score(common: &Common) -> Result<()> {
    let (text, spec) = load_spec(common, None)?;
    let problem = load_problem(common, &spec)?;
    let cell = problem.evaluate(&problem.hyper)?;
    println!("{}", serde_json::to_string_pretty(&cell.reports[0])?);
    let mut out = OutputDir::create(&common.out, manifest("score", &text, &spec, common))?;
    write_json(&out.file("score.json"), &cell.reports[0])?;
    out.finish()?;
    Ok(())
}

fn run_sweep(common: &Common, grids: &[String]) -> Result<()> {
    let (text, spec) = load_spec(common, None)?;
    let problem = load_problem(common, &spec)?;
    let grids = grids.iter().map(|g| parse_grid(g)).collect::<Result<Vec<_>>>()?;
    let mut out = OutputDir::create(&common.out, manifest("sweep", &text, &spec, common))?;
    if let [grid] = &grids[..] {
        let result = sweep(grid, &problem);
        write_sweep(&out.file(&format!("sweep_{}.csv", grid.param().name())), &result)?;
    } else {
        let order: Vec<Param> = grids.iter().map(|g| g.param()).collect();
        let selection = sequential_select(&order, &grids, &problem)?;
        for stage in &selection.stages {
            write_sweep(&out.file(&format!("sweep_{}.csv", stage.param.name())), stage)?;
        }
        write_json(&out.file("summary.json"), &SelectionSummary::new(&selection))?;
    }
    out.finish()?;
    Ok(())
}

fn datafree(common: &Common, grids: &[String]) -> Result<()> {
    let (text, spec) = load_spec(common, None)?;
    if spec.dim() != 2 {
        return Err(KitError::Usage("the anisotropic family needs a 2-D domain".into()));
    }
    let mut thetas = linspace(-PI, PI, 65);
    let mut ss = linspace(0.5, 1.5, 11);
    for g in grids {
        let grid = parse_grid(g)?;
        match grid.param() {
            Param::Theta => thetas = grid.values().to_vec(),
            Param::S => ss = grid.values().to_vec(),
            other => return Err(KitError::Usage(format!("datafree grids are theta and s, not `{other}`"))),
        }
    }
    let base = match spec.kernel.family() {
        KernelFamily::Anisotropic { .. } => spec.kernel,
        KernelFamily::Rbf { .. } => KernelSpec::anisotropic(0.0, 1.0)?,
    };
    let physics = spec.physics()?;
    let t = spec.temperatures;
    let landscape = datafree_kernel_select(&thetas, &ss, &base, &physics.nodes, t.eta, t.rho)?;
    println!("theta* = {}, s* = {}", landscape.theta(), landscape.s());
    let mut out = OutputDir::create(&common.out, manifest("datafree", &text, &spec, common))?;
    write_landscape(&out.file("landscape.csv"), &landscape)?;
    out.finish()?;
    Ok(())
}

fn seeds(base: u64, count: u64) -> Result<Vec<u64>> {
    if count < 2 {
        return Err(KitError::Usage("at least two replicates are required".into()));
    }
    Ok((base..base + count).collect())
}

fn poisson(common: &Common, replicates: u64) -> Result<()> {
    let (text, spec) = load_spec(common, Some(POISSON_SPEC))?;
    let cfg = PoissonConfig {
        seeds: seeds(spec.obs.seed, replicates)?,
        ..PoissonConfig::default()
    };
    let run = run_poisson(&spec, &cfg)?;
    emit_poisson(&run, &common.out, &text, &cfg.seeds)?;
    print_summary(&SelectionSummary::new(&run.selection));
    Ok(())
}

fn convection(common: &Common, replicates: u64) -> Result<()> {
    let beta = common
        .beta
        .ok_or_else(|| KitError::Usage("--beta is required (the benchmark's speed is not fixed by default)".into()))?;
    if !beta.is_finite() {
        return Err(KitError::Usage("--beta must be finite".into()));
    }
    let (text, spec) = load_spec(common, Some(CONVECTION_SPEC))?;
    let cfg = ConvectionConfig {
        seeds: seeds(spec.obs.seed, replicates)?,
        ..ConvectionConfig::new(beta)
    };
    let run = run_convection(&spec, &cfg)?;
    emit_convection(&run, beta, &common.out, &text, &cfg.seeds)?;
    println!("isotropic:");
    print_summary(&SelectionSummary::new(&run.isotropic));
    println!("theta* = {}, s* = {}", run.landscape.theta(), run.landscape.s());
    println!("anisotropic:");
    print_summary(&SelectionSummary::new(&run.anisotropic));
    Ok(())
}

fn print_summary(s: &SelectionSummary) {
    for stage in &s.stages {
        println!("  {} = {} (PILE {})", stage.param, stage.selected, stage.pile);
    }
    if let Some(e) = s.errors {
        println!("  data_rel = {}, phys_rel = {}", e.data_rel.mean, e.phys_rel.mean);
    }
}

fn predict(model_path: &Path, points_path: &Path, op: &str, beta: Option<f64>, out: &Path) -> Result<()> {
    let model: FittedModel = crate::output::read_json(model_path)?;
    let dim = model.observations.dim();
    let text = fs::read_to_string(points_path).map_err(|e| KitError::io(points_path, e))?;
    // Reuse the observation reader with a dummy value column.
    let mut padded = String::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        padded.push_str(line);
        padded.push_str(if i == 0 { ",y\n" } else { ",0\n" });
    }
    let points = parse_observations(padded.as_bytes(), dim)?.points;
    let channel = parse_operator(op, dim, &params(beta))?;
    let values = model.predict(&channel, &points)?;
    write_values(out, &points, &[("prediction", &values)])
}

/// Sizes the global rayon pool from `PILE_KIT_THREADS` when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("PILE_KIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| KitError::Usage(format!("PILE_KIT_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| KitError::Usage(format!("cannot size the thread pool: {e}")))
}
