//! Physics-informed log evidence (PILE) and its data-free limit.

use core::f64::consts::PI;

use crate::gram::{chol_logdet, factor_symmetric, SigmaMatrix, Temperatures};
use crate::linalg::{symmetric_eigenvalues, Cholesky, Matrix};
use crate::prelude::*;
use crate::quadrature::QuadratureRule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PileReport {
    pub pile: f64,
    pub quad_term: f64,
    pub logdet_term: f64,
    pub const_term: f64,
    pub n: usize,
    pub m: usize,
    pub temperatures: Temperatures,
    pub jitter: f64,
}

/// `(1/N) ỸᵀΣ⁻¹Ỹ + (1/N) log det Σ + log(2πη)` with `N = n + m`.
pub fn pile(s: &SigmaMatrix, ytilde: &[f64]) -> Result<PileReport> {
    let (chol, _, _) = chol_logdet(s)?;
    pile_from_factor(&chol, ytilde, s.n(), s.temperatures())
}

/// [`pile`] against an existing factor of `Σ`, e.g. for many target vectors.
pub fn pile_from_factor(chol: &Cholesky, ytilde: &[f64], n: usize, temperatures: Temperatures) -> Result<PileReport> {
    let size = chol.dim();
    if ytilde.len() != size || size == 0 || n > size {
        return Err(Error::DimensionMismatch {
            expected: size.max(1),
            got: ytilde.len(),
        });
    }
    let inv = 1.0 / size as f64;
    let quad_term = chol.quad_form(ytilde) * inv;
    let logdet_term = chol.logdet() * inv;
    let const_term = (2.0 * PI * temperatures.eta).ln();
    Ok(PileReport {
        pile: quad_term + logdet_term + const_term,
        quad_term,
        logdet_term,
        const_term,
        n,
        m: size - n,
        temperatures,
        jitter: chol.jitter(),
    })
}

/// Bayes free energy `(n + m)·PILE/2`.
pub fn free_energy(report: &PileReport) -> f64 {
    0.5 * (report.n + report.m) as f64 * report.pile
}

/// Which normalizing constant to subtract from `m·PILE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NormalizingConstant {
    /// `m·log(ηρ) − Σ log w_i + m·log(2πη)`.
    #[default]
    LogScale,
    /// `m·ηρ − Σ log w_i + m·log(2πη)`, kept for comparison only.
    Linear,
}

pub fn normalizing_constant(weights: &[f64], eta: f64, rho: f64, variant: NormalizingConstant) -> f64 {
    let m = weights.len() as f64;
    let scale = match variant {
        NormalizingConstant::LogScale => (eta * rho).ln(),
        NormalizingConstant::Linear => eta * rho,
    };
    m * scale - weights.iter().map(|w| w.ln()).sum::<f64>() + m * (2.0 * PI * eta).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DataFreeReport {
    /// `log det(I + (ηρ)⁻¹ W^½ G W^½)`, which equals `m·PILE − C_m`.
    pub normalized_score: f64,
    pub c_m: f64,
    pub m: usize,
    pub jitter: f64,
}

/// Data-free score from the physics Gram block `G` and weights `W`.
pub fn data_free_pile(g_zz: &Matrix, weights: &[f64], eta: f64, rho: f64) -> Result<DataFreeReport> {
    data_free_pile_with(g_zz, weights, eta, rho, NormalizingConstant::LogScale)
}

pub fn data_free_pile_with(
    g_zz: &Matrix,
    weights: &[f64],
    eta: f64,
    rho: f64,
    variant: NormalizingConstant,
) -> Result<DataFreeReport> {
    let m = weights.len();
    if m == 0 || g_zz.rows() != m || !g_zz.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.max(1),
            got: g_zz.rows(),
        });
    }
    Temperatures::new(1.0, rho, eta)?;
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidWeight(w));
    }
    let scale = 1.0 / (eta * rho);
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut a = Matrix::from_fn(m, m, |i, j| scale * sqrt_w[i] * g_zz[(i, j)] * sqrt_w[j]);
    a.symmetrize();
    for i in 0..m {
        a[(i, i)] += 1.0;
    }
    let (_, logdet, jitter) = factor_symmetric(&a)?;
    Ok(DataFreeReport {
        normalized_score: logdet,
        c_m: normalizing_constant(weights, eta, rho, variant),
        m,
        jitter,
    })
}

/// Nyström estimate `log det(I + scale·W^½ K W^½)` of a Fredholm determinant.
///
/// The kernel must be positive semi-definite on the nodes: the discretization
/// `S = W^½ K W^½` is accepted if `S + tol·I` factors, with
/// `tol = 1e-8·max(1, max_i S_ii)`.
pub fn fredholm_logdet(kernel: impl Fn(&[f64], &[f64]) -> f64, rule: &QuadratureRule, scale: f64) -> Result<f64> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::invalid("scale", "must be non-negative and finite"));
    }
    let m = rule.len();
    let pts = rule.points();
    let sqrt_w: Vec<f64> = rule.weights().iter().map(|w| w.sqrt()).collect();
    let mut s = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = sqrt_w[i] * kernel(pts.point(i), pts.point(j)) * sqrt_w[j];
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let max_diag = (0..m).map(|i| s[(i, i)]).fold(1.0f64, f64::max);
    let tol = 1e-8 * max_diag;
    let mut shifted = s.clone();
    for i in 0..m {
        shifted[(i, i)] += tol;
    }
    if Cholesky::factor(&shifted).is_err() {
        let min_eigenvalue = symmetric_eigenvalues(&s).first().copied().unwrap_or(0.0);
        return Err(Error::NotPositiveSemiDefinite { min_eigenvalue });
    }
    let mut a = s;
    for v in a.as_mut_slice() {
        *v *= scale;
    }
    for i in 0..m {
        a[(i, i)] += 1.0;
    }
    Ok(Cholesky::factor(&a)?.logdet())
}
