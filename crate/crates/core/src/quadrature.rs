//! Quadrature rules on boxes and their faces.

use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operators::{DomainSpec, Region, SegmentId};
use crate::points::PointSet;
use crate::prelude::*;
use crate::{Error, Result};

/// Weighting of Chebyshev (first kind) nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WeightMode {
    /// Fejér's first rule: interpolatory weights for Lebesgue measure.
    #[default]
    Corrected,
    /// Uniform weights `(b − a)/m`. These discretize the arcsine measure.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RuleKind {
    Chebyshev(WeightMode),
    MonteCarlo,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadratureRule {
    points: PointSet,
    weights: Vec<f64>,
    region: Region,
    kind: RuleKind,
}

impl QuadratureRule {
    pub fn new(points: PointSet, weights: Vec<f64>, region: Region, kind: RuleKind) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidWeight(w));
        }
        Ok(Self {
            points,
            weights,
            region,
            kind,
        })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
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

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_j f(z_j)`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(z, w)| w * f(z)).sum()
    }

    /// Same nodes tagged with another region.
    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }
}

/// Chebyshev nodes of the first kind mapped to `(a, b)`, in the order
/// `k = 0..m` of `cos((2k+1)π/(2m))`.
pub fn chebyshev1_1d(m: usize, a: f64, b: f64, mode: WeightMode) -> Result<QuadratureRule> {
    if m < 1 {
        return Err(Error::invalid("m", "at least one node is required"));
    }
    if a.partial_cmp(&b) != Some(core::cmp::Ordering::Less) {
        return Err(Error::invalid("interval", "a must be below b"));
    }
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for k in 0..m {
        let theta = (2 * k + 1) as f64 * PI / (2 * m) as f64;
        nodes.push(mid + half * theta.cos());
        weights.push(match mode {
            WeightMode::Uniform => (b - a) / m as f64,
            WeightMode::Corrected => {
                let tail: f64 = (1..=m / 2)
                    .map(|j| (2.0 * j as f64 * theta).cos() / (4.0 * (j * j) as f64 - 1.0))
                    .sum();
                half * (2.0 / m as f64) * (1.0 - 2.0 * tail)
            }
        });
    }
    QuadratureRule::new(
        PointSet::from_flat(1, nodes)?,
        weights,
        Region::Interior,
        RuleKind::Chebyshev(mode),
    )
}

/// Tensor product of two 1-D rules; the first coordinate varies slowest.
pub fn tensor2d(rx: &QuadratureRule, ry: &QuadratureRule) -> Result<QuadratureRule> {
    tensor(&[rx, ry])
}

/// Tensor product of 1-D rules.
pub fn tensor(rules: &[&QuadratureRule]) -> Result<QuadratureRule> {
    if rules.is_empty() {
        return Err(Error::invalid("rules", "at least one factor is required"));
    }
    if let Some(r) = rules.iter().find(|r| r.dim() != 1) {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: r.dim(),
        });
    }
    let dim = rules.len();
    let total: usize = rules.iter().map(|r| r.len()).product();
    let mut coords = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let mut w = 1.0;
        for (axis, r) in rules.iter().enumerate() {
            coords.push(r.points.point(idx[axis])[0]);
            w *= r.weights[idx[axis]];
        }
        weights.push(w);
        for axis in (0..dim).rev() {
            idx[axis] += 1;
            if idx[axis] < rules[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }
    let kind = if rules.iter().all(|r| r.kind == rules[0].kind) {
        rules[0].kind
    } else {
        RuleKind::Custom
    };
    QuadratureRule::new(PointSet::from_flat(dim, coords)?, weights, Region::Interior, kind)
}

/// Tensor Chebyshev rule with `m` nodes per axis over the whole box.
pub fn interior_rule(domain: &DomainSpec, m: usize, mode: WeightMode) -> Result<QuadratureRule> {
    let factors = (0..domain.dim())
        .map(|i| chebyshev1_1d(m, domain.lower()[i], domain.upper()[i], mode))
        .collect::<Result<Vec<_>>>()?;
    tensor(&factors.iter().collect::<Vec<_>>())
}

/// `n` i.i.d. uniform points in the box. Weights are `vol/n`, or `1/n` when
/// `normalized` is set.
pub fn monte_carlo(n: usize, domain: &DomainSpec, seed: u64, normalized: bool) -> Result<QuadratureRule> {
    if n < 1 {
        return Err(Error::invalid("n", "at least one point is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = domain.dim();
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..n {
        for i in 0..d {
            let (a, b) = (domain.lower()[i], domain.upper()[i]);
            coords.push(a + (b - a) * rng.random::<f64>());
        }
    }
    let mass = if normalized { 1.0 } else { domain.volume() };
    QuadratureRule::new(
        PointSet::from_flat(d, coords)?,
        vec![mass / n as f64; n],
        Region::Interior,
        RuleKind::MonteCarlo,
    )
}

/// Chebyshev rule with `m` nodes per free axis laid on one face.
pub fn boundary_rule(domain: &DomainSpec, segment: SegmentId, m: usize, mode: WeightMode) -> Result<QuadratureRule> {
    let face = domain.segment(segment)?.face;
    let d = domain.dim();
    let plane = if face.upper {
        domain.upper()[face.axis]
    } else {
        domain.lower()[face.axis]
    };
    let free: Vec<usize> = (0..d).filter(|&i| i != face.axis).collect();
    let (coords, weights, kind) = if free.is_empty() {
        (vec![plane], vec![1.0], RuleKind::Custom)
    } else {
        let factors = free
            .iter()
            .map(|&i| chebyshev1_1d(m, domain.lower()[i], domain.upper()[i], mode))
            .collect::<Result<Vec<_>>>()?;
        let slice = tensor(&factors.iter().collect::<Vec<_>>())?;
        let mut coords = Vec::with_capacity(slice.len() * d);
        for p in slice.points.iter() {
            let mut free_coords = p.iter();
            for axis in 0..d {
                coords.push(if axis == face.axis {
                    plane
                } else {
                    *free_coords.next().unwrap_or(&plane)
                });
            }
        }
        (coords, slice.weights, RuleKind::Chebyshev(mode))
    };
    QuadratureRule::new(PointSet::from_flat(d, coords)?, weights, Region::Segment(segment), kind)
}
