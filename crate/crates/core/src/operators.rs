//! Linear differential operators on axis-aligned boxes.
//!
//! An operator is a list of [`OperatorTerm`]s, `Σ c_α(x) ∂^α`. An
//! [`OperatorSpec`] stacks an interior operator `D` with boundary operators
//! `B_i`, each attached to one face of the [`DomainSpec`] box.

use core::fmt;

use crate::expr::CoefficientFn;
use crate::prelude::*;
use crate::{Error, Result};

/// Default bound on the total order of a multi-index.
pub const MAX_ORDER: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    /// Multi-index with total order at most [`MAX_ORDER`].
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        Self::with_max_order(entries, MAX_ORDER)
    }

    pub fn with_max_order(entries: Vec<u32>, max_order: u32) -> Result<Self> {
        let order: u32 = entries.iter().sum();
        if order > max_order {
            return Err(Error::UnsupportedOrder {
                order,
                max: max_order,
            });
        }
        Ok(Self(entries))
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// `∂/∂x_axis` (zero-based axis).
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        Self(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// `c(x) ∂^α`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OperatorTerm {
    pub index: MultiIndex,
    pub coefficient: CoefficientFn,
}

impl OperatorTerm {
    pub fn new(index: MultiIndex, coefficient: CoefficientFn) -> Self {
        Self { index, coefficient }
    }

    pub fn constant(index: MultiIndex, c: f64) -> Self {
        Self::new(index, CoefficientFn::constant(c))
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(MultiIndex::zero(dim), 1.0)
    }
}

/// The identity operator as a term list.
pub fn identity(dim: usize) -> Vec<OperatorTerm> {
    vec![OperatorTerm::identity(dim)]
}

/// The Laplacian `Σ_i ∂²/∂x_i²`.
pub fn laplacian(dim: usize) -> Vec<OperatorTerm> {
    (0..dim)
        .map(|axis| {
            let mut e = vec![0; dim];
            e[axis] = 2;
            OperatorTerm::constant(MultiIndex(e), 1.0)
        })
        .collect()
}

/// Transport operator `∂_t + β ∂_x` on `(t, x)` coordinates.
pub fn transport(beta: f64) -> Vec<OperatorTerm> {
    vec![
        OperatorTerm::constant(MultiIndex::unit(2, 0), 1.0),
        OperatorTerm::constant(MultiIndex::unit(2, 1), beta),
    ]
}

pub fn is_identity(terms: &[OperatorTerm]) -> bool {
    terms.len() == 1 && terms[0].index.is_zero() && terms[0].coefficient.as_constant() == Some(1.0)
}

pub fn max_order(terms: &[OperatorTerm]) -> u32 {
    terms.iter().map(|t| t.index.order()).max().unwrap_or(0)
}

/// One face `{x_axis = lower}` or `{x_axis = upper}` of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Segment {
    pub name: String,
    pub face: Face,
}

pub type SegmentId = usize;

/// Where a quadrature node or constraint lives: Lebesgue measure on the
/// interior, Hausdorff measure on a boundary segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Region {
    Interior,
    Segment(SegmentId),
}

/// Closed box `Π [lower_i, upper_i]` with its `2d` faces as boundary segments.
///
/// Faces are named `x{i}-` (lower) and `x{i}+` (upper), 1-based; extra
/// aliases can be registered with [`DomainSpec::alias`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    segments: Vec<Segment>,
}

impl DomainSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::invalid("domain", "lower bound must be below upper bound"));
        }
        let mut segments = Vec::new();
        for axis in 0..lower.len() {
            for upper in [false, true] {
                segments.push(Segment {
                    name: alloc::format!("x{}{}", axis + 1, if upper { '+' } else { '-' }),
                    face: Face { axis, upper },
                });
            }
        }
        Ok(Self { lower, upper, segments })
    }

    /// The square / cube `[a, b]^d`.
    pub fn cube(dim: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a; dim], vec![b; dim])
    }

    /// Registers `name` as another segment covering `face`.
    pub fn alias(mut self, name: &str, face: Face) -> Result<Self> {
        if face.axis >= self.dim() {
            return Err(Error::UnknownSegment(name.to_string()));
        }
        self.segments.push(Segment {
            name: name.to_string(),
            face,
        });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> Result<&Segment> {
        self.segments.get(id).ok_or_else(|| Error::UnknownSegment(alloc::format!("#{id}")))
    }

    pub fn segment_id(&self, name: &str) -> Result<SegmentId> {
        self.segments
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSegment(name.to_string()))
    }

    /// Lebesgue measure of the box.
    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }

    /// Hausdorff measure of a face; a face of a 1-D box is a point with measure 1.
    pub fn segment_measure(&self, id: SegmentId) -> Result<f64> {
        let face = self.segment(id)?.face;
        Ok((0..self.dim())
            .filter(|&i| i != face.axis)
            .map(|i| self.upper[i] - self.lower[i])
            .product())
    }

    pub fn outward_normal(&self, id: SegmentId) -> Result<Vec<f64>> {
        let face = self.segment(id)?.face;
        let mut n = vec![0.0; self.dim()];
        n[face.axis] = if face.upper { 1.0 } else { -1.0 };
        Ok(n)
    }

    /// Whether `x` lies in the closed box, up to `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| *v >= a - tol && *v <= b + tol)
    }

    /// Whether `x` lies on the given segment, up to `tol`.
    pub fn on_segment(&self, id: SegmentId, x: &[f64], tol: f64) -> bool {
        let Ok(seg) = self.segment(id) else { return false };
        let face = seg.face;
        let plane = if face.upper { self.upper[face.axis] } else { self.lower[face.axis] };
        self.contains(x, tol) && (x[face.axis] - plane).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    /// `a f + b ν·∇f`.
    Robin { a: f64, b: f64 },
    /// Both `f` and `ν·∇f`, as two entries on the same segment.
    Cauchy,
}

impl BoundaryKind {
    /// Parses `dirichlet`, `neumann`, `robin` (needs `params = [a, b]`) or `cauchy`.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        match name {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "cauchy" => Ok(Self::Cauchy),
            "robin" => match params {
                [a, b] => Ok(Self::Robin { a: *a, b: *b }),
                _ => Err(Error::invalid("robin", "requires coefficients a and b")),
            },
            other => Err(Error::UnknownBoundaryKind(other.to_string())),
        }
    }
}

/// A boundary operator `B_i` attached to one segment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryEntry {
    pub segment: SegmentId,
    pub terms: Vec<OperatorTerm>,
}

fn normal_derivative(domain: &DomainSpec, segment: SegmentId, scale: f64) -> Result<Vec<OperatorTerm>> {
    let normal = domain.outward_normal(segment)?;
    Ok(normal
        .iter()
        .enumerate()
        .filter(|(_, n)| **n != 0.0)
        .map(|(axis, n)| OperatorTerm::constant(MultiIndex::unit(domain.dim(), axis), scale * n))
        .collect())
}

/// Boundary operator entries implementing a standard condition on one face.
pub fn make_boundary_operator(domain: &DomainSpec, kind: BoundaryKind, segment: SegmentId) -> Result<Vec<BoundaryEntry>> {
    domain.segment(segment)?;
    let d = domain.dim();
    let entry = |terms| BoundaryEntry { segment, terms };
    Ok(match kind {
        BoundaryKind::Dirichlet => vec![entry(identity(d))],
        BoundaryKind::Neumann => vec![entry(normal_derivative(domain, segment, 1.0)?)],
        BoundaryKind::Robin { a, b } => {
            let mut terms = vec![OperatorTerm::constant(MultiIndex::zero(d), a)];
            terms.extend(normal_derivative(domain, segment, b)?);
            vec![entry(terms)]
        }
        BoundaryKind::Cauchy => vec![entry(identity(d)), entry(normal_derivative(domain, segment, 1.0)?)],
    })
}

/// A function that can report its partial derivatives.
pub trait Differentiable {
    /// `∂^α f(x)`, or `None` if that derivative is not available.
    fn partial(&self, index: &MultiIndex, x: &[f64]) -> Option<f64>;
}

/// Adapter turning a closure `(α, x) -> Option<∂^α f(x)>` into a [`Differentiable`].
pub struct FnDerivatives<F>(pub F);

impl<F: Fn(&MultiIndex, &[f64]) -> Option<f64>> Differentiable for FnDerivatives<F> {
    fn partial(&self, index: &MultiIndex, x: &[f64]) -> Option<f64> {
        (self.0)(index, x)
    }
}

/// `Σ_terms c_α(x) ∂^α f(x)`.
pub fn apply_operator(terms: &[OperatorTerm], f: &dyn Differentiable, x: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for term in terms {
        let c = term.coefficient.eval(x);
        if c == 0.0 {
            continue;
        }
        let v = f
            .partial(&term.index, x)
            .ok_or_else(|| Error::MissingDerivative(term.index.entries().to_vec()))?;
        total += c * v;
    }
    Ok(total)
}

/// Interior operator `D`, boundary operators `B_i`, and optionally an absorbed
/// forcing `g` so that the residual is `Df − g`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OperatorSpec {
    dim: usize,
    interior: Vec<OperatorTerm>,
    boundary: Vec<BoundaryEntry>,
    order: u32,
    forcing: Option<CoefficientFn>,
}

impl OperatorSpec {
    pub fn new(domain: &DomainSpec, interior: Vec<OperatorTerm>, boundary: Vec<BoundaryEntry>) -> Result<Self> {
        let dim = domain.dim();
        for t in interior.iter().chain(boundary.iter().flat_map(|b| b.terms.iter())) {
            if t.index.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.index.dim(),
                });
            }
            if let Some(i) = t.coefficient.expr().max_coord() {
                if i >= dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: i + 1,
                    });
                }
            }
        }
        for b in &boundary {
            domain.segment(b.segment)?;
        }
        let order = max_order(&interior).max(boundary.iter().map(|b| max_order(&b.terms)).max().unwrap_or(0));
        Ok(Self {
            dim,
            interior,
            boundary,
            order,
            forcing: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interior(&self) -> &[OperatorTerm] {
        &self.interior
    }

    pub fn boundary(&self) -> &[BoundaryEntry] {
        &self.boundary
    }

    /// Highest derivative order across interior and boundary terms.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn forcing(&self) -> Option<&CoefficientFn> {
        self.forcing.as_ref()
    }

    pub fn forcing_absorbed(&self) -> bool {
        self.forcing.is_some()
    }

    /// Interior residual `Df(x) − g(x)` (just `Df(x)` without absorbed forcing).
    pub fn residual(&self, f: &dyn Differentiable, x: &[f64]) -> Result<f64> {
        let g = self.forcing.as_ref().map_or(0.0, |g| g.eval(x));
        Ok(apply_operator(&self.interior, f, x)? - g)
    }
}

/// Rewrites `D` as the affine operator `f ↦ Df − g`.
pub fn absorb_forcing(op: &OperatorSpec, g: &CoefficientFn) -> OperatorSpec {
    if g.is_zero() {
        return op.clone();
    }
    let mut out = op.clone();
    out.forcing = Some(match &op.forcing {
        Some(prev) => prev.plus(g),
        None => g.clone(),
    });
    out
}
