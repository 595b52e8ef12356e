//! Block Gram matrices and the regularized matrix `Σ`.
//!
//! Every row of the system is a linear functional `L_i f = (A_i f)(p_i)`:
//! point evaluations for the `n` observations, and the interior or boundary
//! operator for each of the `m` physics nodes. The joint Gram matrix is
//! `M_ij = (L_i ⊗ L_j)k(p_i, p_j)`, whose blocks are `K_xx`, `H_xz` and `G_zz`.

use crate::kernels::KernelSpec;
use crate::linalg::{Cholesky, Matrix};
use crate::operators::{self, OperatorSpec, OperatorTerm, Region};
use crate::points::PointSet;
use crate::prelude::*;
use crate::quadrature::QuadratureRule;
use crate::{Error, Result};

/// Data temperature `γ`, physics temperature `ρ`, prior scale `η`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Temperatures {
    pub gamma: f64,
    pub rho: f64,
    pub eta: f64,
}

impl Temperatures {
    pub fn new(gamma: f64, rho: f64, eta: f64) -> Result<Self> {
        let t = Self { gamma, rho, eta };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("rho", self.rho), ("eta", self.eta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "temperatures must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Physics constraint nodes: points, weights, and the operator applied at each.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhysicsNodes {
    points: PointSet,
    weights: Vec<f64>,
    operator_of: Vec<usize>,
    operators: Vec<Vec<OperatorTerm>>,
    regions: Vec<Region>,
    offsets: Vec<f64>,
}

impl PhysicsNodes {
    pub fn empty(dim: usize) -> Self {
        Self {
            points: PointSet::new(dim),
            weights: Vec::new(),
            operator_of: Vec::new(),
            operators: Vec::new(),
            regions: Vec::new(),
            offsets: Vec::new(),
        }
    }

    /// Nodes for the stacked operator `A`: interior rules get `D`, rules on a
    /// segment get every boundary operator attached to it. A segment with two
    /// entries (Cauchy data) contributes every node twice; with
    /// `split_shared_mass` each copy gets `w/2` instead of `w`.
    pub fn from_rules(op: &OperatorSpec, rules: &[QuadratureRule], split_shared_mass: bool) -> Result<Self> {
        let mut nodes = Self::empty(op.dim());
        for rule in rules {
            if rule.dim() != op.dim() {
                return Err(Error::DimensionMismatch {
                    expected: op.dim(),
                    got: rule.dim(),
                });
            }
            let entries: Vec<&[OperatorTerm]> = match rule.region() {
                Region::Interior => vec![op.interior()],
                Region::Segment(id) => op
                    .boundary()
                    .iter()
                    .filter(|b| b.segment == id)
                    .map(|b| b.terms.as_slice())
                    .collect(),
            };
            if entries.is_empty() {
                return Err(Error::invalid("rule", "no boundary operator is attached to the rule's segment"));
            }
            let share = if split_shared_mass { entries.len() as f64 } else { 1.0 };
            for terms in entries {
                let id = nodes.intern(terms);
                for (z, w) in rule.points().iter().zip(rule.weights()) {
                    let offset = match (rule.region(), op.forcing()) {
                        (Region::Interior, Some(g)) => g.eval(z),
                        _ => 0.0,
                    };
                    nodes.push_node(z, w / share, id, rule.region(), offset)?;
                }
            }
        }
        Ok(nodes)
    }

    /// Nodes all carrying the same operator.
    pub fn uniform(terms: &[OperatorTerm], rule: &QuadratureRule) -> Result<Self> {
        let mut nodes = Self::empty(rule.dim());
        let id = nodes.intern(terms);
        for (z, w) in rule.points().iter().zip(rule.weights()) {
            nodes.push_node(z, *w, id, rule.region(), 0.0)?;
        }
        Ok(nodes)
    }

    fn intern(&mut self, terms: &[OperatorTerm]) -> usize {
        if let Some(i) = self.operators.iter().position(|o| o.as_slice() == terms) {
            return i;
        }
        self.operators.push(terms.to_vec());
        self.operators.len() - 1
    }

    fn push_node(&mut self, z: &[f64], w: f64, op: usize, region: Region, offset: f64) -> Result<()> {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidWeight(w));
        }
        self.points.push(z)?;
        self.weights.push(w);
        self.operator_of.push(op);
        self.regions.push(region);
        self.offsets.push(offset);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn operator(&self, j: usize) -> &[OperatorTerm] {
        &self.operators[self.operator_of[j]]
    }

    /// `g(z_j)` on interior nodes of an operator with absorbed forcing, else 0.
    /// Adding these to the targets turns the residual `A f − g` back into `A f`.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Nodes reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            points: self.points.permuted(perm),
            weights: perm.iter().map(|&i| self.weights[i]).collect(),
            operator_of: perm.iter().map(|&i| self.operator_of[i]).collect(),
            operators: self.operators.clone(),
            regions: perm.iter().map(|&i| self.regions[i]).collect(),
            offsets: perm.iter().map(|&i| self.offsets[i]).collect(),
        }
    }
}

/// Joint Gram matrix of `n` point observations and `m` physics nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    kernel: KernelSpec,
    observations: PointSet,
    nodes: PhysicsNodes,
    joint: Matrix,
    identity: Vec<OperatorTerm>,
}

impl GramSystem {
    pub fn assemble(kernel: &KernelSpec, observations: &PointSet, nodes: &PhysicsNodes) -> Result<Self> {
        let d = kernel.dim();
        for got in [observations.dim(), nodes.dim()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        for j in 0..nodes.len() {
            kernel.check_terms(nodes.operator(j))?;
        }
        let mut system = Self {
            kernel: *kernel,
            observations: observations.clone(),
            nodes: nodes.clone(),
            joint: Matrix::zeros(0, 0),
            identity: operators::identity(d),
        };
        let size = system.size();
        system.joint = fill_symmetric(size, |i, j| system.entry(i, j));
        Ok(system)
    }

    #[inline]
    fn functional(&self, i: usize) -> (&[f64], &[OperatorTerm]) {
        let n = self.n();
        if i < n {
            (self.observations.point(i), &self.identity)
        } else {
            (self.nodes.points().point(i - n), self.nodes.operator(i - n))
        }
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        let (p, a) = self.functional(i);
        let (q, b) = self.functional(j);
        self.kernel.op_kernel_both_unchecked(a, b, p, q)
    }

    /// `((C ⊗ L_i)k(x, p_i))_i` for a query functional `C` at `x`.
    pub fn cross(&self, channel: &[OperatorTerm], x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.dim(),
                got: x.len(),
            });
        }
        self.kernel.check_terms(channel)?;
        Ok((0..self.size())
            .map(|i| {
                let (p, b) = self.functional(i);
                self.kernel.op_kernel_both_unchecked(channel, b, x, p)
            })
            .collect())
    }

    /// Prior covariance `(C₁ ⊗ C₂)k(x, y)`.
    pub fn prior(&self, c1: &[OperatorTerm], x: &[f64], c2: &[OperatorTerm], y: &[f64]) -> Result<f64> {
        self.kernel.op_kernel_both(c1, c2, x, y)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn observations(&self) -> &PointSet {
        &self.observations
    }

    pub fn nodes(&self) -> &PhysicsNodes {
        &self.nodes
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn size(&self) -> usize {
        self.n() + self.m()
    }

    pub fn weights(&self) -> &[f64] {
        self.nodes.weights()
    }

    /// The full matrix `[[K, H], [Hᵀ, G]]`.
    pub fn joint(&self) -> &Matrix {
        &self.joint
    }

    pub fn k_xx(&self) -> Matrix {
        self.joint.block(0, 0, self.n(), self.n())
    }

    pub fn h_xz(&self) -> Matrix {
        self.joint.block(0, self.n(), self.n(), self.m())
    }

    pub fn g_zz(&self) -> Matrix {
        self.joint.block(self.n(), self.n(), self.m(), self.m())
    }
}

/// Symmetric matrix from its lower triangle.
fn fill_symmetric(size: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Matrix {
    let mut out = Matrix::zeros(size, size);
    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        let rows: Vec<Vec<f64>> = (0..size).into_par_iter().map(|i| (0..=i).map(|j| f(i, j)).collect()).collect();
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    }
    #[cfg(not(feature = "rayon"))]
    for i in 0..size {
        for j in 0..=i {
            let v = f(i, j);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `[[K + ηγI, H], [Hᵀ, G + ηρW⁻¹]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaMatrix {
    matrix: Matrix,
    n: usize,
    m: usize,
    temperatures: Temperatures,
}

impl SigmaMatrix {
    /// Builds `M + diag(data_noise·I_n, physics_noise/w_j)` from a joint Gram matrix.
    pub fn from_joint(joint: &Matrix, n: usize, weights: &[f64], temperatures: Temperatures) -> Result<Self> {
        temperatures.validate()?;
        let m = weights.len();
        if joint.rows() != n + m || !joint.is_square() {
            return Err(Error::DimensionMismatch {
                expected: n + m,
                got: joint.rows(),
            });
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidWeight(w));
        }
        let Temperatures { gamma, rho, eta } = temperatures;
        let mut matrix = joint.clone();
        for i in 0..n {
            matrix[(i, i)] += eta * gamma;
        }
        for (j, w) in weights.iter().enumerate() {
            matrix[(n + j, n + j)] += eta * rho / w;
        }
        Ok(Self {
            matrix,
            n,
            m,
            temperatures,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn temperatures(&self) -> Temperatures {
        self.temperatures
    }
}

pub fn assemble_sigma(g: &GramSystem, t: &Temperatures) -> Result<SigmaMatrix> {
    SigmaMatrix::from_joint(g.joint(), g.n(), g.weights(), *t)
}

/// Largest asymmetry accepted before factorizing.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Cholesky factor of `Σ + jitter·I` with the smallest ladder jitter that
/// succeeds, its log-determinant, and that jitter.
pub fn chol_logdet(s: &SigmaMatrix) -> Result<(Cholesky, f64, f64)> {
    factor_symmetric(s.matrix())
}

pub(crate) fn factor_symmetric(a: &Matrix) -> Result<(Cholesky, f64, f64)> {
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::Asymmetric(asym));
    }
    let chol = Cholesky::factor_with_jitter(a)?;
    let (logdet, jitter) = (chol.logdet(), chol.jitter());
    Ok((chol, logdet, jitter))
}
