//! The Poisson and transport benchmark runs.

use std::f64::consts::PI;

use pile_core::gram::{assemble_sigma, GramSystem};
use pile_core::kernels::KernelSpec;
use pile_core::metrics::NormMode;
use pile_core::operators::{identity, OperatorTerm};
use pile_core::points::PointSet;
use pile_core::quadrature::{interior_rule, WeightMode};
use pile_core::selection::{
    datafree_kernel_select, linspace, sequential_select, CellResult, Dataset, Evaluation, Hyper, Landscape, Param,
    Problem, Selection, SweepGrid, SweepResult,
};
use pile_core::solver::{stack_targets, FitCoefficients, Posterior};

use crate::reference::{self, PoissonReference};
use crate::spec::ProblemSpec;
use crate::Result;

pub const POISSON_SPEC: &str = include_str!("../specs/poisson.spec");
pub const CONVECTION_SPEC: &str = include_str!("../specs/convection.spec");

/// Posterior mean of one channel pair on a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub label: String,
    pub hyper: Hyper,
    pub points: PointSet,
    pub value: Vec<f64>,
    pub physics: Vec<f64>,
    pub truth: Vec<f64>,
    pub truth_physics: Vec<f64>,
}

/// A fitted model that can be serialized and reloaded.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FittedModel {
    pub hyper: Hyper,
    pub observations: PointSet,
    pub nodes: pile_core::gram::PhysicsNodes,
    pub coefficients: FitCoefficients,
}

impl FittedModel {
    pub fn fit(problem: &Problem, hyper: &Hyper, dataset: &Dataset) -> Result<Self> {
        let gram = GramSystem::assemble(&hyper.kernel, &problem.observations, &problem.nodes)?;
        let sigma = assemble_sigma(&gram, &hyper.temperatures)?;
        let ytilde = stack_targets(&gram, &dataset.y, &dataset.r)?;
        let coefficients = pile_core::solver::fit_gp(&sigma, &ytilde)?;
        Ok(Self {
            hyper: *hyper,
            observations: problem.observations.clone(),
            nodes: problem.nodes.clone(),
            coefficients,
        })
    }

    pub fn gram(&self) -> Result<GramSystem> {
        Ok(GramSystem::assemble(&self.hyper.kernel, &self.observations, &self.nodes)?)
    }

    /// Predictions of `channel` at `points`.
    pub fn predict(&self, channel: &[OperatorTerm], points: &PointSet) -> Result<Vec<f64>> {
        let gram = self.gram()?;
        points
            .iter()
            .map(|x| pile_core::solver::predict(&gram, &self.coefficients, channel, x).map_err(Into::into))
            .collect()
    }
}

/// Posterior means of `f̂` and `channel f̂` for one dataset.
pub fn field(
    problem: &Problem,
    hyper: &Hyper,
    dataset: &Dataset,
    channel: &[OperatorTerm],
    label: &str,
    truth: &dyn Fn(&[f64]) -> f64,
    truth_physics: &dyn Fn(&[f64]) -> f64,
) -> Result<Field> {
    let points = match &problem.evaluation {
        Some(ev) => ev.rule().points().clone(),
        None => problem.observations.clone(),
    };
    let gram = problem.assemble(&hyper.kernel)?;
    let sigma = assemble_sigma(&gram, &hyper.temperatures)?;
    let ytilde = stack_targets(&gram, &dataset.y, &dataset.r)?;
    let post = Posterior::new(&gram, &sigma, &ytilde)?;
    let id = identity(points.dim());
    let mut value = Vec::with_capacity(points.len());
    let mut physics = Vec::with_capacity(points.len());
    for x in points.iter() {
        value.push(post.mean(&id, x)?);
        physics.push(post.mean(channel, x)?);
    }
    Ok(Field {
        label: label.to_string(),
        hyper: *hyper,
        truth: points.iter().map(truth).collect(),
        truth_physics: points.iter().map(truth_physics).collect(),
        points,
        value,
        physics,
    })
}

/// The cell at the selected hyperparameters (the final stage's winner).
pub fn selected_cell(selection: &Selection) -> Option<&CellResult> {
    selection.stages.last()?.best()?.cell()
}

/// Builds the selection problem shared by both benchmarks.
fn build_problem(
    spec: &ProblemSpec,
    seeds: &[u64],
    truth: &dyn Fn(&[f64]) -> f64,
    evaluation: Evaluation,
) -> Result<Problem> {
    let physics = spec.physics()?;
    let observations = spec.observation_points()?;
    let datasets = seeds.iter().map(|&s| spec.simulate(truth, &observations, &physics, s)).collect();
    Ok(Problem {
        hyper: Hyper {
            kernel: spec.kernel,
            temperatures: spec.temperatures,
        },
        observations,
        nodes: physics.nodes,
        datasets,
        evaluation: Some(evaluation),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonConfig {
    pub seeds: Vec<u64>,
    pub modes: usize,
    pub eval_per_axis: usize,
    pub order: Vec<Param>,
    pub grids: Vec<SweepGrid>,
    /// Grid steps between the selected bandwidth and the under- and
    /// over-smoothed field dumps.
    pub dump_offset: usize,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            seeds: (0..20).collect(),
            modes: reference::DEFAULT_MODES,
            eval_per_axis: 30,
            order: vec![Param::H, Param::Rho, Param::Gamma],
            grids: vec![
                SweepGrid::log_spaced(Param::H, -1.5, 0.5, 25).expect("valid grid"),
                SweepGrid::log_spaced(Param::Rho, -6.0, 0.0, 13).expect("valid grid"),
                SweepGrid::log_spaced(Param::Gamma, -4.0, 2.0, 13).expect("valid grid"),
            ],
            dump_offset: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoissonRun {
    pub spec: ProblemSpec,
    pub problem: Problem,
    pub selection: Selection,
    pub fields: Vec<Field>,
    pub model: FittedModel,
}

impl PoissonRun {
    pub fn stage(&self, param: Param) -> Option<&SweepResult> {
        self.selection.stages.iter().find(|s| s.param == param)
    }
}

pub fn run_poisson(spec: &ProblemSpec, cfg: &PoissonConfig) -> Result<PoissonRun> {
    let truth = PoissonReference::new(cfg.modes);
    let f = |x: &[f64]| truth.value(x);
    let g = |x: &[f64]| reference::forcing(x);
    let rule = interior_rule(&spec.domain, cfg.eval_per_axis, WeightMode::Corrected)?;
    let evaluation = Evaluation::new(rule, f, g, spec.interior.clone(), NormMode::NormSquared);
    let problem = build_problem(spec, &cfg.seeds, &f, evaluation)?;
    let selection = sequential_select(&cfg.order, &cfg.grids, &problem)?;

    let mut fields = Vec::new();
    if let Some(h_stage) = selection.stages.iter().find(|s| s.param == Param::H) {
        let best = h_stage.argmin.expect("selection succeeded");
        let last = h_stage.rows.len() - 1;
        let picks = [
            ("under", best.saturating_sub(cfg.dump_offset)),
            ("selected", best),
            ("over", (best + cfg.dump_offset).min(last)),
        ];
        for (label, i) in picks {
            let hyper = selection.hyper.with(Param::H, h_stage.rows[i].value)?;
            fields.push(field(&problem, &hyper, &problem.datasets[0], &spec.interior, label, &f, &g)?);
        }
    }
    let model = FittedModel::fit(&problem, &selection.hyper, &problem.datasets[0])?;
    Ok(PoissonRun {
        spec: spec.clone(),
        problem,
        selection,
        fields,
        model,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvectionConfig {
    pub beta: f64,
    pub seeds: Vec<u64>,
    pub eval_per_axis: usize,
    pub h_grid: SweepGrid,
    pub rho_grid: SweepGrid,
    pub gamma_grid: SweepGrid,
    pub thetas: Vec<f64>,
    pub ss: Vec<f64>,
    /// Length scale of the anisotropic family while scanning `(θ, s)`.
    pub scale: f64,
    /// Length scales tried for the winning shape.
    pub scale_grid: SweepGrid,
}

impl ConvectionConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            seeds: (0..5).collect(),
            eval_per_axis: 30,
            h_grid: SweepGrid::log_spaced(Param::H, -1.5, 0.5, 17).expect("valid grid"),
            rho_grid: SweepGrid::log_spaced(Param::Rho, -6.0, 0.0, 13).expect("valid grid"),
            gamma_grid: SweepGrid::log_spaced(Param::Gamma, -4.0, 0.0, 9).expect("valid grid"),
            thetas: linspace(-PI, PI, 65),
            ss: linspace(0.5, 1.5, 11),
            scale: 1.0,
            scale_grid: SweepGrid::log_spaced(Param::Scale, -1.5, 0.5, 17).expect("valid grid"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvectionRun {
    pub spec: ProblemSpec,
    pub problem: Problem,
    pub isotropic: Selection,
    pub landscape: Landscape,
    pub anisotropic: Selection,
    pub fields: Vec<Field>,
    pub model: FittedModel,
}

/// Angle of the characteristic direction `(1, β)` of `∂_t + β ∂_x`.
pub fn characteristic_angle(beta: f64) -> f64 {
    beta.atan()
}

/// Representative of `theta` modulo `π` in `(−π/2, π/2]`.
pub fn reduce_angle(theta: f64) -> f64 {
    let r = theta - PI * (theta / PI).round();
    if r <= -PI / 2.0 {
        r + PI
    } else {
        r
    }
}

/// `‖∇f‖` of `sin(x − βt)` on `[0, 1] × [0, 2π]`, used to normalize the
/// physics error because the transport residual of the truth is zero.
pub fn convection_physics_norm(beta: f64) -> f64 {
    ((1.0 + beta * beta) * PI).sqrt()
}

pub fn run_convection(spec: &ProblemSpec, cfg: &ConvectionConfig) -> Result<ConvectionRun> {
    let beta = cfg.beta;
    let truth = |x: &[f64]| (x[1] - beta * x[0]).sin();
    let zero = |_: &[f64]| 0.0;
    let rule = interior_rule(&spec.domain, cfg.eval_per_axis, WeightMode::Corrected)?;
    let evaluation = Evaluation::new(rule, truth, zero, spec.interior.clone(), NormMode::NormSquared)
        .with_physics_norm(convection_physics_norm(beta));
    let mut problem = build_problem(spec, &cfg.seeds, &truth, evaluation)?;

    let grids = [cfg.h_grid.clone(), cfg.rho_grid.clone(), cfg.gamma_grid.clone()];
    let isotropic = sequential_select(&[Param::H, Param::Rho, Param::Gamma], &grids, &problem)?;

    let t = spec.temperatures;
    let base = KernelSpec::anisotropic(0.0, 1.0)?.with_param("scale", cfg.scale)?;
    let landscape = datafree_kernel_select(&cfg.thetas, &cfg.ss, &base, &problem.nodes, t.eta, t.rho)?;
    let winner = base.with_param("theta", landscape.theta())?.with_param("s", landscape.s())?;
    problem.hyper.kernel = winner;
    let grids = [cfg.scale_grid.clone(), cfg.rho_grid.clone(), cfg.gamma_grid.clone()];
    let anisotropic = sequential_select(&[Param::Scale, Param::Rho, Param::Gamma], &grids, &problem)?;

    let ds = &problem.datasets[0];
    let fields = vec![
        field(&problem, &isotropic.hyper, ds, &spec.interior, "isotropic", &truth, &zero)?,
        field(&problem, &anisotropic.hyper, ds, &spec.interior, "anisotropic", &truth, &zero)?,
    ];
    let model = FittedModel::fit(&problem, &anisotropic.hyper, ds)?;
    Ok(ConvectionRun {
        spec: spec.clone(),
        problem,
        isotropic,
        landscape,
        anisotropic,
        fields,
        model,
    })
}
