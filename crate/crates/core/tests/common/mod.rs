#![allow(dead_code)]

use pile_core::gram::{GramSystem, PhysicsNodes, Temperatures};
use pile_core::kernels::KernelSpec;
use pile_core::operators::{MultiIndex, OperatorTerm, Region};
use pile_core::points::PointSet;
use pile_core::quadrature::{QuadratureRule, RuleKind};
use pile_core::solver::{ObservationSet, PhysicsTargets};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub gram: GramSystem,
    pub obs: ObservationSet,
    pub targets: PhysicsTargets,
    pub temps: Temperatures,
}

/// `f'' − 0.7 f' + 0.3 f` on the line.
pub fn line_operator() -> Vec<OperatorTerm> {
    vec![
        OperatorTerm::constant(MultiIndex::new(vec![2]).unwrap(), 1.0),
        OperatorTerm::constant(MultiIndex::new(vec![1]).unwrap(), -0.7),
        OperatorTerm::constant(MultiIndex::new(vec![0]).unwrap(), 0.3),
    ]
}

pub fn random_instance(seed: u64, n: usize, m: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = rng.random_range(0.3..1.2);
    let kernel = KernelSpec::rbf(1, h).unwrap();
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..0.5)).collect();
    let rule = QuadratureRule::new(PointSet::from_flat(1, z).unwrap(), w, Region::Interior, RuleKind::Custom).unwrap();
    let nodes = if m == 0 {
        PhysicsNodes::empty(1)
    } else {
        PhysicsNodes::uniform(&line_operator(), &rule).unwrap()
    };
    let points = PointSet::from_flat(1, x).unwrap();
    let gram = GramSystem::assemble(&kernel, &points, &nodes).unwrap();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let r: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let temps = Temperatures::new(
        10f64.powf(rng.random_range(-2.0..0.5)),
        10f64.powf(rng.random_range(-2.0..0.5)),
        10f64.powf(rng.random_range(-0.5..0.5)),
    )
    .unwrap();
    Instance {
        gram,
        obs: ObservationSet::new(points, y).unwrap(),
        targets: PhysicsTargets(r),
        temps,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
