//! Fitting and posterior prediction.
//!
//! Two routes produce the expansion coefficients `c = (α, β)` of
//! `f̂ = Σ_i c_i (Id ⊗ L_i)k(·, p_i)`:
//!
//! * [`fit_krr`] minimizes the empirical risk
//!   `(1/(γn))‖Y − Kα − Hβ‖² + (1/ρ)‖W^½(Hᵀα + Gβ − R)‖² + (1/η)cᵀMc`,
//!   whose normal equations reduce to `(M + diag(γn/η, ρ/(ηw_j))) c = Ỹ`;
//! * [`fit_gp`] solves `Σ c = Ỹ` for the Gaussian-process posterior mean.
//!
//! The two agree under [`krr_to_gp`].

use core::sync::atomic::{AtomicUsize, Ordering};

use crate::gram::{chol_logdet, GramSystem, SigmaMatrix, Temperatures};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::operators::OperatorTerm;
use crate::points::PointSet;
use crate::prelude::*;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservationSet {
    pub points: PointSet,
    pub values: Vec<f64>,
}

impl ObservationSet {
    pub fn new(points: PointSet, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        Ok(Self { points, values })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            points: PointSet::new(dim),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Targets `r_j` for `A f(z_j)`, one per physics node.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhysicsTargets(pub Vec<f64>);

impl PhysicsTargets {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Route {
    Krr,
    Gp,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitCoefficients {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub temperatures: Temperatures,
    pub route: Route,
    pub jitter: f64,
}

impl FitCoefficients {
    pub fn stacked(&self) -> Vec<f64> {
        let mut c = self.alpha.clone();
        c.extend_from_slice(&self.beta);
        c
    }

    fn split(c: Vec<f64>, n: usize, temperatures: Temperatures, route: Route, jitter: f64) -> Self {
        let mut alpha = c;
        let beta = alpha.split_off(n);
        Self {
            alpha,
            beta,
            temperatures,
            route,
            jitter,
        }
    }
}

/// `Ỹ = (Y, R + offsets)`, where the offsets undo an absorbed forcing.
pub fn stack_targets(gram: &GramSystem, y: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    if y.len() != gram.n() {
        return Err(Error::DimensionMismatch {
            expected: gram.n(),
            got: y.len(),
        });
    }
    if r.len() != gram.m() {
        return Err(Error::DimensionMismatch {
            expected: gram.m(),
            got: r.len(),
        });
    }
    let mut out = y.to_vec();
    out.extend(r.iter().zip(gram.nodes().offsets()).map(|(r, g)| r + g));
    Ok(out)
}

/// GP temperatures reproducing the ridge fit at `t` with `n` observations.
pub fn krr_to_gp(t: &Temperatures, n: usize) -> Temperatures {
    // With no observations the data temperature is inert; keep it positive.
    Temperatures {
        gamma: t.gamma * n.max(1) as f64 / t.eta,
        rho: t.rho / t.eta,
        eta: 1.0,
    }
}

pub fn fit_krr(gram: &GramSystem, obs: &ObservationSet, targets: &PhysicsTargets, t: &Temperatures) -> Result<FitCoefficients> {
    t.validate()?;
    let ytilde = stack_targets(gram, &obs.values, &targets.0)?;
    let sigma = SigmaMatrix::from_joint(gram.joint(), gram.n(), gram.weights(), krr_to_gp(t, gram.n()))?;
    let (chol, _, jitter) = chol_logdet(&sigma)?;
    Ok(FitCoefficients::split(chol.solve(&ytilde), gram.n(), *t, Route::Krr, jitter))
}

pub fn fit_gp(s: &SigmaMatrix, ytilde: &[f64]) -> Result<FitCoefficients> {
    if ytilde.len() != s.n() + s.m() {
        return Err(Error::DimensionMismatch {
            expected: s.n() + s.m(),
            got: ytilde.len(),
        });
    }
    let (chol, _, jitter) = chol_logdet(s)?;
    Ok(FitCoefficients::split(chol.solve(ytilde), s.n(), s.temperatures(), Route::Gp, jitter))
}

/// `(C f̂)(x)` for the query operator `C` (the identity gives `f̂`).
pub fn predict(gram: &GramSystem, c: &FitCoefficients, channel: &[OperatorTerm], x: &[f64]) -> Result<f64> {
    if c.alpha.len() != gram.n() || c.beta.len() != gram.m() {
        return Err(Error::DimensionMismatch {
            expected: gram.size(),
            got: c.alpha.len() + c.beta.len(),
        });
    }
    let s = gram.cross(channel, x)?;
    Ok(dot(&s[..gram.n()], &c.alpha) + dot(&s[gram.n()..], &c.beta))
}

/// Value of the empirical-risk quadratic at coefficients `c`.
///
/// `physics_sign` multiplies `Gβ` inside the physics residual; the consistent
/// choice is `+1`.
pub fn risk_quadratic(
    gram: &GramSystem,
    obs: &ObservationSet,
    targets: &PhysicsTargets,
    t: &Temperatures,
    c: &FitCoefficients,
    physics_sign: f64,
) -> Result<f64> {
    let (n, m) = (gram.n(), gram.m());
    let ytilde = stack_targets(gram, &obs.values, &targets.0)?;
    let stacked = c.stacked();
    let joint = gram.joint();
    let mut data = 0.0;
    for (i, yi) in ytilde.iter().enumerate().take(n) {
        let fi = dot(joint.row(i), &stacked);
        data += (yi - fi) * (yi - fi);
    }
    let mut phys = 0.0;
    for j in 0..m {
        let row = joint.row(n + j);
        let af = dot(&row[..n], &c.alpha) + physics_sign * dot(&row[n..], &c.beta);
        let res = af - ytilde[n + j];
        phys += gram.weights()[j] * res * res;
    }
    let reg = dot(&stacked, &joint.mul_vec(&stacked));
    let data_term = if n == 0 { 0.0 } else { data / (t.gamma * n as f64) };
    Ok(data_term + phys / t.rho + reg / t.eta)
}

/// Gradient of [`risk_quadratic`] (with the `+` sign) at `c`.
pub fn risk_gradient(
    gram: &GramSystem,
    obs: &ObservationSet,
    targets: &PhysicsTargets,
    t: &Temperatures,
    c: &FitCoefficients,
) -> Result<Vec<f64>> {
    let (n, size) = (gram.n(), gram.size());
    let ytilde = stack_targets(gram, &obs.values, &targets.0)?;
    let stacked = c.stacked();
    let joint = gram.joint();
    let fitted = joint.mul_vec(&stacked);
    let mut scaled = vec![0.0; size];
    for i in 0..size {
        let resid = fitted[i] - ytilde[i];
        scaled[i] = if i < n {
            2.0 * resid / (t.gamma * n as f64)
        } else {
            2.0 * gram.weights()[i - n] * resid / t.rho
        };
    }
    let mut grad = joint.mul_vec(&scaled);
    for (g, f) in grad.iter_mut().zip(&fitted) {
        *g += 2.0 * f / t.eta;
    }
    Ok(grad)
}

/// Gaussian-process posterior conditioned on `Ỹ` through `Σ`.
///
/// Mean `ςᵀΣ⁻¹Ỹ`, covariance `η((C₁⊗C₂)k(x,y) − ς₁ᵀΣ⁻¹ς₂)`.
#[derive(Debug)]
pub struct Posterior<'a> {
    gram: &'a GramSystem,
    chol: Cholesky,
    weights: Vec<f64>,
    eta: f64,
    clamped: AtomicUsize,
}

/// Round-off allowance below zero before a variance is counted as clamped.
pub const VARIANCE_SLACK: f64 = 1e-10;

impl<'a> Posterior<'a> {
    pub fn new(gram: &'a GramSystem, sigma: &SigmaMatrix, ytilde: &[f64]) -> Result<Self> {
        let (chol, _, _) = chol_logdet(sigma)?;
        Self::from_factor(gram, chol, sigma.temperatures().eta, ytilde)
    }

    /// Reuses a factor of `Σ` computed elsewhere.
    pub fn from_factor(gram: &'a GramSystem, chol: Cholesky, eta: f64, ytilde: &[f64]) -> Result<Self> {
        if chol.dim() != gram.size() || ytilde.len() != gram.size() {
            return Err(Error::DimensionMismatch {
                expected: gram.size(),
                got: ytilde.len(),
            });
        }
        let weights = chol.solve(ytilde);
        Ok(Self {
            gram,
            chol,
            weights,
            eta,
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn gram(&self) -> &GramSystem {
        self.gram
    }

    /// `Σ⁻¹Ỹ`.
    pub fn coefficients(&self) -> &[f64] {
        &self.weights
    }

    pub fn factor(&self) -> &Cholesky {
        &self.chol
    }

    pub fn mean(&self, channel: &[OperatorTerm], x: &[f64]) -> Result<f64> {
        Ok(dot(&self.gram.cross(channel, x)?, &self.weights))
    }

    pub fn cov(&self, c1: &[OperatorTerm], x: &[f64], c2: &[OperatorTerm], y: &[f64]) -> Result<f64> {
        let prior = self.gram.prior(c1, x, c2, y)?;
        let mut s1 = self.gram.cross(c1, x)?;
        let mut s2 = self.gram.cross(c2, y)?;
        self.chol.solve_lower_in_place(&mut s1);
        self.chol.solve_lower_in_place(&mut s2);
        Ok(self.eta * (prior - dot(&s1, &s2)))
    }

    /// Marginal variance, clamped at zero. Values below `−VARIANCE_SLACK`
    /// are counted by [`Self::clamped_count`].
    pub fn variance(&self, channel: &[OperatorTerm], x: &[f64]) -> Result<f64> {
        let v = self.cov(channel, x, channel, x)?;
        Ok(self.clamp(v))
    }

    fn clamp(&self, v: f64) -> f64 {
        if v < 0.0 {
            if v < -VARIANCE_SLACK {
                self.clamped.fetch_add(1, Ordering::Relaxed);
            }
            0.0
        } else {
            v
        }
    }

    pub fn clamped_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Means and clamped variances of one channel at many points.
    pub fn marginals(&self, channel: &[OperatorTerm], points: &PointSet) -> Result<(Vec<f64>, Vec<f64>)> {
        let batch = MarginalBatch::new(self.gram, &self.chol, channel, points)?;
        let means = batch.means(&self.weights);
        let vars = batch.variances(self.eta).into_iter().map(|v| self.clamp(v)).collect();
        Ok((means, vars))
    }
}

/// Cross-covariances of a batch of query points, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct MarginalBatch {
    cross: Matrix,
    whitened: Matrix,
    prior: Vec<f64>,
}

impl MarginalBatch {
    pub fn new(gram: &GramSystem, chol: &Cholesky, channel: &[OperatorTerm], points: &PointSet) -> Result<Self> {
        let (size, count) = (gram.size(), points.len());
        let mut cross = Matrix::zeros(size, count);
        let mut prior = Vec::with_capacity(count);
        for (e, x) in points.iter().enumerate() {
            let s = gram.cross(channel, x)?;
            for (i, v) in s.into_iter().enumerate() {
                cross[(i, e)] = v;
            }
            prior.push(gram.prior(channel, x, channel, x)?);
        }
        let mut whitened = cross.clone();
        chol.solve_lower_columns(&mut whitened);
        Ok(Self { cross, whitened, prior })
    }

    pub fn len(&self) -> usize {
        self.prior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prior.is_empty()
    }

    /// `ςᵀ c` at every point.
    pub fn means(&self, c: &[f64]) -> Vec<f64> {
        self.cross.tr_mul_vec(c)
    }

    /// Unclamped `η(prior − ‖L⁻¹ς‖²)` at every point.
    pub fn variances(&self, eta: f64) -> Vec<f64> {
        let mut sq = vec![0.0; self.len()];
        for i in 0..self.whitened.rows() {
            for (acc, v) in sq.iter_mut().zip(self.whitened.row(i)) {
                *acc += v * v;
            }
        }
        self.prior.iter().zip(sq).map(|(p, q)| eta * (p - q)).collect()
    }
}
