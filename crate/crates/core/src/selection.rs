//! Grid-search model selection by PILE.

use core::fmt;

use crate::evidence::{data_free_pile, pile_from_factor, PileReport};
use crate::gram::{factor_symmetric, GramSystem, PhysicsNodes, SigmaMatrix, Temperatures};
use crate::kernels::KernelSpec;
use crate::metrics::{l2_norm, normalize, ppl2g_values, ErrorReport, ErrorSample, NormMode, Stats};
use crate::operators::{self, OperatorTerm};
use crate::points::PointSet;
use crate::prelude::*;
use crate::quadrature::QuadratureRule;
use crate::solver::{stack_targets, MarginalBatch};
use crate::{Error, Result};

/// PILE values above this (or non-finite) are flagged as diverged.
pub const DIVERGENCE_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Param {
    H,
    Rho,
    Gamma,
    Eta,
    Theta,
    S,
    /// Length scale of the anisotropic family.
    Scale,
}

impl Param {
    pub const ALL: [Param; 7] = [Param::H, Param::Rho, Param::Gamma, Param::Eta, Param::Theta, Param::S, Param::Scale];

    pub fn name(self) -> &'static str {
        match self {
            Param::H => "h",
            Param::Rho => "rho",
            Param::Gamma => "gamma",
            Param::Eta => "eta",
            Param::Theta => "theta",
            Param::S => "s",
            Param::Scale => "scale",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::invalid("param", alloc::format!("unknown hyperparameter `{name}`")))
    }

    pub fn is_positive(self) -> bool {
        self != Param::Theta
    }

    /// Whether changing the parameter changes the kernel (and so the Gram matrix).
    pub fn is_kernel(self) -> bool {
        matches!(self, Param::H | Param::Theta | Param::S | Param::Scale)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Values of one hyperparameter, ascending.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepGrid {
    param: Param,
    values: Vec<f64>,
}

impl SweepGrid {
    pub fn new(param: Param, mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("grid", "at least one value is required"));
        }
        if values.iter().any(|v| !v.is_finite() || (param.is_positive() && *v <= 0.0)) {
            return Err(Error::invalid("grid", alloc::format!("invalid value for `{param}`")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { param, values })
    }

    /// `count` values `10^e` for `e` evenly spaced in `[lo_exp, hi_exp]`.
    pub fn log_spaced(param: Param, lo_exp: f64, hi_exp: f64, count: usize) -> Result<Self> {
        Self::new(param, linspace(lo_exp, hi_exp, count).into_iter().map(|e| 10f64.powf(e)).collect())
    }

    pub fn linear(param: Param, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(param, linspace(lo, hi, count))
    }

    pub fn param(&self) -> Param {
        self.param
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Kernel plus temperatures: everything a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyper {
    pub kernel: KernelSpec,
    pub temperatures: Temperatures,
}

impl Hyper {
    pub fn get(&self, p: Param) -> Option<f64> {
        match p {
            Param::Rho => Some(self.temperatures.rho),
            Param::Gamma => Some(self.temperatures.gamma),
            Param::Eta => Some(self.temperatures.eta),
            Param::H | Param::Theta | Param::S | Param::Scale => self.kernel.param(p.name()),
        }
    }

    pub fn with(&self, p: Param, value: f64) -> Result<Self> {
        let mut out = *self;
        match p {
            Param::Rho => out.temperatures.rho = value,
            Param::Gamma => out.temperatures.gamma = value,
            Param::Eta => out.temperatures.eta = value,
            Param::H | Param::Theta | Param::S | Param::Scale => out.kernel = self.kernel.with_param(p.name(), value)?,
        }
        out.temperatures.validate()?;
        Ok(out)
    }
}

/// One draw of observation values and physics targets.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    pub y: Vec<f64>,
    pub r: Vec<f64>,
}

/// Truth values on an evaluation rule, for PPL2-G errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    rule: QuadratureRule,
    truth: Vec<f64>,
    truth_op: Vec<f64>,
    channel: Vec<OperatorTerm>,
    norm: f64,
    norm_op: f64,
    mode: NormMode,
}

impl Evaluation {
    /// `channel` is the operator whose output is compared with `truth_op`.
    pub fn new(
        rule: QuadratureRule,
        truth: impl Fn(&[f64]) -> f64,
        truth_op: impl Fn(&[f64]) -> f64,
        channel: Vec<OperatorTerm>,
        mode: NormMode,
    ) -> Self {
        let values: Vec<f64> = rule.points().iter().map(&truth).collect();
        let op_values: Vec<f64> = rule.points().iter().map(&truth_op).collect();
        let norm = l2_norm(&rule, truth);
        let norm_op = l2_norm(&rule, truth_op);
        Self {
            rule,
            truth: values,
            truth_op: op_values,
            channel,
            norm,
            norm_op,
            mode,
        }
    }

    /// Overrides the physics-error normalizer (needed when `‖Df‖ = 0`).
    pub fn with_physics_norm(mut self, norm_op: f64) -> Self {
        self.norm_op = norm_op;
        self
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn norms(&self) -> (f64, f64) {
        (self.norm, self.norm_op)
    }
}

/// Everything needed to fit and score a model at given hyperparameters.
#[derive(Debug, Clone)]
pub struct Problem {
    pub hyper: Hyper,
    pub observations: PointSet,
    pub nodes: PhysicsNodes,
    pub datasets: Vec<Dataset>,
    pub evaluation: Option<Evaluation>,
}

/// Scores of one hyperparameter setting across all datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub hyper: Hyper,
    pub pile: Stats,
    pub reports: Vec<PileReport>,
    pub errors: Option<ErrorReport>,
    /// `‖f̂‖` on the evaluation rule, over datasets.
    pub fit_norm: Option<Stats>,
    pub jitter: f64,
    /// Variances below `−1e-10` clamped to zero.
    pub clamped: usize,
}

impl Problem {
    pub fn assemble(&self, kernel: &KernelSpec) -> Result<GramSystem> {
        GramSystem::assemble(kernel, &self.observations, &self.nodes)
    }

    /// Fits every dataset at `hyper` and scores it.
    pub fn evaluate(&self, hyper: &Hyper) -> Result<CellResult> {
        let gram = self.assemble(&hyper.kernel)?;
        self.evaluate_with(&gram, hyper)
    }

    /// As [`Self::evaluate`] with a Gram matrix already assembled for `hyper.kernel`.
    pub fn evaluate_with(&self, gram: &GramSystem, hyper: &Hyper) -> Result<CellResult> {
        if self.datasets.is_empty() {
            return Err(Error::invalid("datasets", "at least one dataset is required"));
        }
        let t = hyper.temperatures;
        let sigma = SigmaMatrix::from_joint(gram.joint(), gram.n(), gram.weights(), t)?;
        let (chol, _, jitter) = factor_symmetric(sigma.matrix())?;
        let mut reports = Vec::with_capacity(self.datasets.len());
        let mut coefs = Vec::with_capacity(self.datasets.len());
        for ds in &self.datasets {
            let ytilde = stack_targets(gram, &ds.y, &ds.r)?;
            reports.push(pile_from_factor(&chol, &ytilde, gram.n(), t)?);
            coefs.push(chol.solve(&ytilde));
        }
        let pile = Stats::from_samples(&reports.iter().map(|r| r.pile).collect::<Vec<_>>());
        let (mut errors, mut fit_norm, mut clamped) = (None, None, 0);
        if let Some(ev) = &self.evaluation {
            let pts = ev.rule.points();
            let w = ev.rule.weights();
            let id = operators::identity(gram.kernel().dim());
            let mut clamp = |vs: Vec<f64>| -> Vec<f64> {
                vs.into_iter()
                    .map(|v| {
                        if v < -crate::solver::VARIANCE_SLACK {
                            clamped += 1;
                        }
                        v.max(0.0)
                    })
                    .collect()
            };
            let data_batch = MarginalBatch::new(gram, &chol, &id, pts)?;
            let data_var = clamp(data_batch.variances(t.eta));
            let phys_batch = MarginalBatch::new(gram, &chol, &ev.channel, pts)?;
            let phys_var = clamp(phys_batch.variances(t.eta));
            let mut samples = Vec::with_capacity(coefs.len());
            let mut norms = Vec::with_capacity(coefs.len());
            for c in &coefs {
                let mean = data_batch.means(c);
                let phys_mean = phys_batch.means(c);
                let data_raw = ppl2g_values(w, &mean, &data_var, &ev.truth)?;
                let phys_raw = ppl2g_values(w, &phys_mean, &phys_var, &ev.truth_op)?;
                samples.push(ErrorSample {
                    data_raw,
                    phys_raw,
                    data_rel: normalize(data_raw, ev.norm, ev.mode)?,
                    phys_rel: normalize(phys_raw, ev.norm_op, ev.mode)?,
                });
                norms.push(w.iter().zip(&mean).map(|(w, m)| w * m * m).sum::<f64>().sqrt());
            }
            errors = Some(ErrorReport::from_samples(&samples, ev.rule.len()));
            fit_norm = Some(Stats::from_samples(&norms));
        }
        Ok(CellResult {
            hyper: *hyper,
            pile,
            reports,
            errors,
            fit_norm,
            jitter,
            clamped,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: core::result::Result<CellResult, Error>,
    pub diverged: bool,
}

impl SweepRow {
    pub fn cell(&self) -> Option<&CellResult> {
        self.outcome.as_ref().ok()
    }

    /// Mean PILE, or NaN for a failed cell.
    pub fn pile(&self) -> f64 {
        self.cell().map_or(f64::NAN, |c| c.pile.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: Param,
    pub rows: Vec<SweepRow>,
    pub argmin: Option<usize>,
}

impl SweepResult {
    pub fn best(&self) -> Option<&SweepRow> {
        self.argmin.map(|i| &self.rows[i])
    }
}

pub fn is_diverged(pile: f64) -> bool {
    !pile.is_finite() || pile > DIVERGENCE_CAP
}

/// Index of the smallest value among those not excluded; ties go to the
/// larger index.
pub fn argmin_last(values: impl IntoIterator<Item = Option<f64>>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| v <= b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

fn map_cells<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "rayon"))]
    {
        (0..count).map(f).collect()
    }
}

/// One fit and score per grid value, all other hyperparameters from `problem.hyper`.
pub fn sweep(grid: &SweepGrid, problem: &Problem) -> SweepResult {
    let param = grid.param();
    let shared = if param.is_kernel() {
        None
    } else {
        Some(problem.assemble(&problem.hyper.kernel))
    };
    let rows = map_cells(grid.values().len(), |i| {
        let value = grid.values()[i];
        let outcome = problem.hyper.with(param, value).and_then(|hyper| match &shared {
            Some(Ok(gram)) => problem.evaluate_with(gram, &hyper),
            Some(Err(e)) => Err(e.clone()),
            None => problem.evaluate(&hyper),
        });
        let diverged = outcome.as_ref().map_or(true, |c| is_diverged(c.pile.mean));
        SweepRow {
            value,
            outcome,
            diverged,
        }
    });
    let argmin = argmin_last(rows.iter().map(|r| (!r.diverged).then(|| r.pile())));
    SweepResult { param, rows, argmin }
}

/// Default coordinate order.
pub const DEFAULT_ORDER: [Param; 3] = [Param::H, Param::Rho, Param::Gamma];

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub hyper: Hyper,
    pub stages: Vec<SweepResult>,
}

/// Coordinate-wise PILE minimization in the given order, each stage fixing
/// the winners of earlier ones.
pub fn sequential_select(order: &[Param], grids: &[SweepGrid], problem: &Problem) -> Result<Selection> {
    if order.is_empty() {
        return Err(Error::invalid("order", "at least one stage is required"));
    }
    let mut current = problem.clone();
    let mut stages = Vec::with_capacity(order.len());
    for &param in order {
        let grid = grids
            .iter()
            .find(|g| g.param() == param)
            .ok_or_else(|| Error::invalid("grids", alloc::format!("no grid for `{param}`")))?;
        let result = sweep(grid, &current);
        let best = result.best().ok_or_else(|| Error::AllDiverged(param.name().to_string()))?;
        current.hyper = current.hyper.with(param, best.value)?;
        stages.push(result);
    }
    Ok(Selection {
        hyper: current.hyper,
        stages,
    })
}

/// Data-free PILE landscape over `(θ, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub thetas: Vec<f64>,
    pub ss: Vec<f64>,
    /// Row-major over `(θ, s)`; `None` where factorization failed.
    pub scores: Vec<Option<f64>>,
    pub argmin: (usize, usize),
}

impl Landscape {
    pub fn score(&self, i: usize, j: usize) -> Option<f64> {
        self.scores[i * self.ss.len() + j]
    }

    pub fn theta(&self) -> f64 {
        self.thetas[self.argmin.0]
    }

    pub fn s(&self) -> f64 {
        self.ss[self.argmin.1]
    }
}

/// Data-free score `log det(I + (ηρ)⁻¹W^½GW^½)` of one kernel on the nodes.
pub fn data_free_score(kernel: &KernelSpec, nodes: &PhysicsNodes, eta: f64, rho: f64) -> Result<f64> {
    let gram = GramSystem::assemble(kernel, &PointSet::new(kernel.dim()), nodes)?;
    Ok(data_free_pile(gram.joint(), gram.weights(), eta, rho)?.normalized_score)
}

/// Evaluates the data-free score of the anisotropic family on every `(θ, s)`
/// cell. `base` supplies the length scale.
pub fn datafree_kernel_select(
    theta_grid: &[f64],
    s_grid: &[f64],
    base: &KernelSpec,
    nodes: &PhysicsNodes,
    eta: f64,
    rho: f64,
) -> Result<Landscape> {
    if theta_grid.is_empty() || s_grid.is_empty() {
        return Err(Error::invalid("grid", "theta and s grids must be non-empty"));
    }
    let ns = s_grid.len();
    let scores = map_cells(theta_grid.len() * ns, |c| {
        let (theta, s) = (theta_grid[c / ns], s_grid[c % ns]);
        base.with_param("theta", theta)
            .and_then(|k| k.with_param("s", s))
            .and_then(|k| data_free_score(&k, nodes, eta, rho))
            .ok()
            .filter(|v| v.is_finite())
    });
    let best = argmin_last(scores.iter().copied()).ok_or_else(|| Error::AllDiverged("theta,s".to_string()))?;
    Ok(Landscape {
        thetas: theta_grid.to_vec(),
        ss: s_grid.to_vec(),
        scores,
        argmin: (best / ns, best % ns),
    })
}
