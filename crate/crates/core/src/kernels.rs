//! Gaussian kernels and their operator-applied forms.
//!
//! Both families are `k(x, y) = φ(x − y)` with `φ(r) = exp(−½ rᵀ P r)`:
//! the isotropic kernel has `P = I/h²`, the anisotropic one `P = Σ_{θ,s}/ℓ²`
//! with `Σ_{θ,s} = R_θ diag(s², s⁻²) R_θᵀ` and length scale `ℓ` (default 1).
//!
//! Derivatives use the closed form
//! `∂_r^{i₁…i_n} φ = φ · Σ_{pairings} Π_{singletons}(−u_i) Π_{pairs}(−P_ij)`
//! with `u = P r`, a multivariate Hermite polynomial. Because `∂_y = −∂_r`,
//! `∂_x^a ∂_y^b k = (−1)^{|b|} ∂_r^{a+b} φ`.

use core::fmt;

use crate::operators::{MultiIndex, OperatorTerm};
#[allow(unused_imports)]
use crate::prelude::*;
use crate::{Error, Result};

/// Highest per-argument derivative order the kernels can differentiate.
pub const SUPPORTED_ORDER: u32 = 4;

/// Highest input dimension.
pub const MAX_DIM: usize = 8;

const MAX_AXES: usize = 2 * SUPPORTED_ORDER as usize;

/// The 2×2 shape matrix `Σ_{θ,s}` of the anisotropic kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionMatrix([[f64; 2]; 2]);

impl PrecisionMatrix {
    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [_, d]] = self.0;
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mean - radius, mean + radius]
    }
}

/// `R_θ diag(s², s⁻²) R_θᵀ`. The eigenvector `(cos θ, sin θ)` has eigenvalue `s²`.
pub fn build_precision(theta: f64, s: f64) -> Result<PrecisionMatrix> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::invalid("s", "must be positive and finite"));
    }
    if !theta.is_finite() {
        return Err(Error::invalid("theta", "must be finite"));
    }
    let (sn, cs) = theta.sin_cos();
    let (major, minor) = (s * s, 1.0 / (s * s));
    let off = (major - minor) * cs * sn;
    Ok(PrecisionMatrix([
        [major * cs * cs + minor * sn * sn, off],
        [off, major * sn * sn + minor * cs * cs],
    ]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum KernelFamily {
    Rbf { h: f64 },
    #[cfg_attr(feature = "serde", serde(rename = "aniso"))]
    Anisotropic { theta: f64, s: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Precision {
    /// `P = c·I`.
    Scalar(f64),
    Full([[f64; 2]; 2]),
}

/// A validated kernel instance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "KernelRepr", into = "KernelRepr"))]
pub struct KernelSpec {
    dim: usize,
    family: KernelFamily,
    precision: Precision,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct KernelRepr {
    dim: usize,
    #[serde(flatten)]
    family: KernelFamily,
}

#[cfg(feature = "serde")]
impl TryFrom<KernelRepr> for KernelSpec {
    type Error = Error;

    fn try_from(r: KernelRepr) -> Result<Self> {
        KernelSpec::new(r.dim, r.family)
    }
}

#[cfg(feature = "serde")]
impl From<KernelSpec> for KernelRepr {
    fn from(k: KernelSpec) -> Self {
        KernelRepr {
            dim: k.dim,
            family: k.family,
        }
    }
}

impl KernelSpec {
    pub fn new(dim: usize, family: KernelFamily) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid("dim", alloc::format!("must be in 1..={MAX_DIM}")));
        }
        let precision = match family {
            KernelFamily::Rbf { h } => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::invalid("h", "must be positive and finite"));
                }
                Precision::Scalar(1.0 / (h * h))
            }
            KernelFamily::Anisotropic { theta, s, scale } => {
                if dim != 2 {
                    return Err(Error::invalid("dim", "the anisotropic family requires d = 2"));
                }
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::invalid("scale", "must be positive and finite"));
                }
                let m = build_precision(theta, s)?.0;
                let c = 1.0 / (scale * scale);
                Precision::Full([[c * m[0][0], c * m[0][1]], [c * m[1][0], c * m[1][1]]])
            }
        };
        Ok(Self { dim, family, precision })
    }

    pub fn rbf(dim: usize, h: f64) -> Result<Self> {
        Self::new(dim, KernelFamily::Rbf { h })
    }

    /// Anisotropic kernel on `R²` with unit length scale.
    pub fn anisotropic(theta: f64, s: f64) -> Result<Self> {
        Self::new(2, KernelFamily::Anisotropic { theta, s, scale: 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Same family with one named hyperparameter replaced (`h`, `theta`, `s` or `scale`).
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let family = match (self.family, name) {
            (KernelFamily::Rbf { .. }, "h") => KernelFamily::Rbf { h: value },
            (KernelFamily::Anisotropic { s, scale, .. }, "theta") => KernelFamily::Anisotropic { theta: value, s, scale },
            (KernelFamily::Anisotropic { theta, scale, .. }, "s") => KernelFamily::Anisotropic { theta, s: value, scale },
            (KernelFamily::Anisotropic { theta, s, .. }, "scale") => KernelFamily::Anisotropic { theta, s, scale: value },
            _ => return Err(Error::invalid("kernel", alloc::format!("no parameter `{name}` for this family"))),
        };
        Self::new(self.dim, family)
    }

    /// Value of a named hyperparameter, if the family has it.
    pub fn param(&self, name: &str) -> Option<f64> {
        match (self.family, name) {
            (KernelFamily::Rbf { h }, "h") => Some(h),
            (KernelFamily::Anisotropic { theta, .. }, "theta") => Some(theta),
            (KernelFamily::Anisotropic { s, .. }, "s") => Some(s),
            (KernelFamily::Anisotropic { scale, .. }, "scale") => Some(scale),
            _ => None,
        }
    }

    #[inline]
    fn p(&self, i: usize, j: usize) -> f64 {
        match self.precision {
            Precision::Scalar(c) => {
                if i == j {
                    c
                } else {
                    0.0
                }
            }
            Precision::Full(m) => m[i][j],
        }
    }

    /// Returns `φ(x − y)` and `u = P(x − y)`.
    #[inline]
    fn profile(&self, x: &[f64], y: &[f64]) -> (f64, [f64; MAX_DIM]) {
        let mut u = [0.0; MAX_DIM];
        let q = match self.precision {
            Precision::Scalar(c) => {
                let mut q = 0.0;
                for i in 0..self.dim {
                    let r = x[i] - y[i];
                    u[i] = c * r;
                    q += r * u[i];
                }
                q
            }
            Precision::Full(m) => {
                let (r0, r1) = (x[0] - y[0], x[1] - y[1]);
                u[0] = m[0][0] * r0 + m[0][1] * r1;
                u[1] = m[1][0] * r0 + m[1][1] * r1;
                r0 * u[0] + r1 * u[1]
            }
        };
        ((-0.5 * q).exp(), u)
    }

    fn check_points(&self, x: &[f64], y: &[f64]) -> Result<()> {
        for p in [x, y] {
            if p.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: p.len(),
                });
            }
        }
        Ok(())
    }

    fn check_index(&self, a: &MultiIndex) -> Result<()> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: a.dim(),
            });
        }
        if a.order() > SUPPORTED_ORDER {
            return Err(Error::UnsupportedOrder {
                order: a.order(),
                max: SUPPORTED_ORDER,
            });
        }
        Ok(())
    }

    /// Validates that every term can be differentiated by this kernel.
    pub fn check_terms(&self, terms: &[OperatorTerm]) -> Result<()> {
        terms.iter().try_for_each(|t| self.check_index(&t.index))
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_points(x, y)?;
        Ok(self.profile(x, y).0)
    }

    /// `∂_x^a ∂_y^b k(x, y)`.
    pub fn eval_partial(&self, a: &MultiIndex, b: &MultiIndex, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_points(x, y)?;
        self.check_index(a)?;
        self.check_index(b)?;
        let (phi, u) = self.profile(x, y);
        Ok(phi * self.hermite(a, b, &u))
    }

    /// Polynomial factor of `∂_x^a ∂_y^b k` given `u = P(x − y)`.
    #[inline]
    fn hermite(&self, a: &MultiIndex, b: &MultiIndex, u: &[f64; MAX_DIM]) -> f64 {
        let mut axes = [0usize; MAX_AXES];
        let mut n = 0;
        for idx in [a, b] {
            for (axis, &k) in idx.entries().iter().enumerate() {
                for _ in 0..k {
                    axes[n] = axis;
                    n += 1;
                }
            }
        }
        let sign = if b.order() % 2 == 0 { 1.0 } else { -1.0 };
        match n {
            0 => sign,
            1 => -sign * u[axes[0]],
            _ => sign * self.pairings(&axes, (1u16 << n) - 1, u),
        }
    }

    fn pairings(&self, axes: &[usize; MAX_AXES], mask: u16, u: &[f64; MAX_DIM]) -> f64 {
        if mask == 0 {
            return 1.0;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let ai = axes[i];
        let mut total = -u[ai] * self.pairings(axes, rest, u);
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= !(1 << j);
            let pij = self.p(ai, axes[j]);
            if pij != 0.0 {
                total -= pij * self.pairings(axes, rest & !(1 << j), u);
            }
        }
        total
    }

    /// `(A ⊗ Id)k(z, x)`: the operator acts on the first argument.
    pub fn op_kernel_left(&self, terms: &[OperatorTerm], z: &[f64], x: &[f64]) -> Result<f64> {
        self.check_points(z, x)?;
        self.check_terms(terms)?;
        let zero = MultiIndex::zero(self.dim);
        let (phi, u) = self.profile(z, x);
        let mut total = 0.0;
        for t in terms {
            let c = t.coefficient.eval(z);
            if c != 0.0 {
                total += c * self.hermite(&t.index, &zero, &u);
            }
        }
        Ok(phi * total)
    }

    /// `(A_row ⊗ A_col)k(z, z')`.
    pub fn op_kernel_both(&self, row: &[OperatorTerm], col: &[OperatorTerm], z: &[f64], z2: &[f64]) -> Result<f64> {
        self.check_points(z, z2)?;
        self.check_terms(row)?;
        self.check_terms(col)?;
        Ok(self.op_kernel_both_unchecked(row, col, z, z2))
    }

    /// [`Self::op_kernel_both`] without validation, for terms already
    /// checked by [`Self::check_terms`] and points of the right dimension.
    #[inline]
    pub(crate) fn op_kernel_both_unchecked(&self, row: &[OperatorTerm], col: &[OperatorTerm], z: &[f64], z2: &[f64]) -> f64 {
        let (phi, u) = self.profile(z, z2);
        if crate::operators::is_identity(row) && crate::operators::is_identity(col) {
            return phi;
        }
        let mut total = 0.0;
        for a in row {
            let ca = a.coefficient.eval(z);
            if ca == 0.0 {
                continue;
            }
            for b in col {
                let cb = b.coefficient.eval(z2);
                if cb != 0.0 {
                    total += ca * cb * self.hermite(&a.index, &b.index, &u);
                }
            }
        }
        phi * total
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Rbf { h } => write!(f, "rbf h={h:?}"),
            KernelFamily::Anisotropic { theta, s, scale } => {
                write!(f, "aniso theta={theta:?} s={s:?}")?;
                if scale != 1.0 {
                    write!(f, " scale={scale:?}")?;
                }
                Ok(())
            }
        }
    }
}
