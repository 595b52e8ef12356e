//! Posterior-predictive L² generalization (PPL2-G) errors.
//!
//! For a Gaussian marginal `N(μ(z), σ²(z))` and truth `t(z)`,
//! `E[(f̂(z) − t(z))²] = (μ(z) − t(z))² + σ²(z)`, integrated against a rule.

use crate::operators::OperatorTerm;
use crate::prelude::*;
use crate::quadrature::QuadratureRule;
use crate::solver::Posterior;
use crate::{Error, Result};

/// `Σ_j w_j [(μ_j − t_j)² + σ²_j]`.
pub fn ppl2g_values(weights: &[f64], means: &[f64], variances: &[f64], truth: &[f64]) -> Result<f64> {
    let len = weights.len();
    for got in [means.len(), variances.len(), truth.len()] {
        if got != len {
            return Err(Error::DimensionMismatch { expected: len, got });
        }
    }
    Ok((0..len)
        .map(|j| {
            let bias = means[j] - truth[j];
            weights[j] * (bias * bias + variances[j])
        })
        .sum())
}

/// PPL2-G of one channel of a posterior against a truth function.
pub fn ppl2g(
    post: &Posterior<'_>,
    truth: impl Fn(&[f64]) -> f64,
    rule: &QuadratureRule,
    channel: &[OperatorTerm],
) -> Result<f64> {
    let (means, vars) = post.marginals(channel, rule.points())?;
    let truth: Vec<f64> = rule.points().iter().map(&truth).collect();
    if let Some(t) = truth.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid("truth", alloc::format!("not evaluable at a node (got {t})")));
    }
    ppl2g_values(rule.weights(), &means, &vars, &truth)
}

/// `(Σ_j w_j f(z_j)²)^½`.
pub fn l2_norm(rule: &QuadratureRule, f: impl Fn(&[f64]) -> f64) -> f64 {
    rule.integrate(|z| {
        let v = f(z);
        v * v
    })
    .sqrt()
}

/// Denominator used to turn a raw error into a relative one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NormMode {
    /// Divide by `‖f‖`.
    Norm,
    /// Divide by `‖f‖²`, matching the units of the squared error.
    #[default]
    NormSquared,
}

pub fn normalize(raw: f64, truth_norm: f64, mode: NormMode) -> Result<f64> {
    if !(truth_norm.is_finite() && truth_norm > 0.0) {
        return Err(Error::invalid("truth_norm", "must be positive and finite"));
    }
    Ok(match mode {
        NormMode::Norm => raw / truth_norm,
        NormMode::NormSquared => raw / (truth_norm * truth_norm),
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
}

impl Stats {
    /// Sample statistics (denominator `k − 1`; a single sample has std 0).
    pub fn from_samples(xs: &[f64]) -> Self {
        let k = xs.len();
        if k == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let shift = xs[0];
        let mean = shift + xs.iter().map(|x| x - shift).sum::<f64>() / k as f64;
        let std = if k < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

/// Errors of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorSample {
    pub data_raw: f64,
    pub phys_raw: f64,
    pub data_rel: f64,
    pub phys_rel: f64,
}

/// Errors aggregated over replicates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorReport {
    pub data_raw: Stats,
    pub phys_raw: Stats,
    pub data_rel: Stats,
    pub phys_rel: Stats,
    pub m_eval: usize,
}

impl ErrorReport {
    pub fn from_samples(samples: &[ErrorSample], m_eval: usize) -> Self {
        let col = |f: fn(&ErrorSample) -> f64| Stats::from_samples(&samples.iter().map(f).collect::<Vec<_>>());
        Self {
            data_raw: col(|s| s.data_raw),
            phys_raw: col(|s| s.phys_raw),
            data_rel: col(|s| s.data_rel),
            phys_rel: col(|s| s.phys_rel),
            m_eval,
        }
    }
}

/// Runs `experiment` once per seed, in seed order, and summarizes PILE and errors.
pub fn replicate(
    seeds: &[u64],
    m_eval: usize,
    experiment: impl Fn(u64) -> Result<(f64, ErrorSample)>,
) -> Result<(Stats, ErrorReport)> {
    if seeds.len() < 2 {
        return Err(Error::invalid("seeds", "at least two seeds are required"));
    }
    let mut piles = Vec::with_capacity(seeds.len());
    let mut samples = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (p, e) = experiment(seed)?;
        piles.push(p);
        samples.push(e);
    }
    Ok((Stats::from_samples(&piles), ErrorReport::from_samples(&samples, m_eval)))
}
