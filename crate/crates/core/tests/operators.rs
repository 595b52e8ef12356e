use std::f64::consts::PI;

use pile_core::expr::CoefficientFn;
use pile_core::operators::{
    absorb_forcing, apply_operator, identity, laplacian, transport, DomainSpec, FnDerivatives, MultiIndex, OperatorSpec,
    OperatorTerm,
};
use proptest::prelude::*;

/// Quadratic `c0 + c·x + xᵀQx/2` in two variables with all partials up to order 2.
#[derive(Clone, Copy, Debug)]
struct Quadratic {
    c0: f64,
    c: [f64; 2],
    q: [[f64; 2]; 2],
}

impl Quadratic {
    fn partial(&self, a: &MultiIndex, x: &[f64]) -> Option<f64> {
        let e = a.entries();
        Some(match (e[0], e[1]) {
            (0, 0) => {
                self.c0 + self.c[0] * x[0] + self.c[1] * x[1]
                    + 0.5 * (self.q[0][0] * x[0] * x[0] + 2.0 * self.q[0][1] * x[0] * x[1] + self.q[1][1] * x[1] * x[1])
            }
            (1, 0) => self.c[0] + self.q[0][0] * x[0] + self.q[0][1] * x[1],
            (0, 1) => self.c[1] + self.q[0][1] * x[0] + self.q[1][1] * x[1],
            (2, 0) => self.q[0][0],
            (0, 2) => self.q[1][1],
            (1, 1) => self.q[0][1],
            _ => 0.0,
        })
    }
}

fn quadratic() -> impl Strategy<Value = Quadratic> {
    (-2.0f64..2.0, prop::array::uniform2(-2.0f64..2.0), prop::array::uniform3(-2.0f64..2.0))
        .prop_map(|(c0, c, q)| Quadratic { c0, c, q: [[q[0], q[1]], [q[1], q[2]]] })
}

fn mixed_operator() -> Vec<OperatorTerm> {
    vec![
        OperatorTerm::new(MultiIndex::new(vec![2, 0]).unwrap(), CoefficientFn::parse("1 + x1^2", 2).unwrap()),
        OperatorTerm::new(MultiIndex::new(vec![1, 1]).unwrap(), CoefficientFn::parse("sin(x2)", 2).unwrap()),
        OperatorTerm::constant(MultiIndex::new(vec![0, 1]).unwrap(), -3.0),
        OperatorTerm::constant(MultiIndex::new(vec![0, 0]).unwrap(), 0.5),
    ]
}

proptest! {
    #[test]
    fn linearity(f in quadratic(), g in quadratic(), a in -3.0f64..3.0, b in -3.0f64..3.0, x in prop::array::uniform2(-1.0f64..1.0)) {
        let op = mixed_operator();
        let combo = FnDerivatives(|i: &MultiIndex, p: &[f64]| Some(a * f.partial(i, p)? + b * g.partial(i, p)?));
        let lhs = apply_operator(&op, &combo, &x).unwrap();
        let rhs = a * apply_operator(&op, &FnDerivatives(|i: &MultiIndex, p: &[f64]| f.partial(i, p)), &x).unwrap()
            + b * apply_operator(&op, &FnDerivatives(|i: &MultiIndex, p: &[f64]| g.partial(i, p)), &x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn laplacian_annihilates_affine(c0 in -5.0f64..5.0, c in prop::array::uniform2(-5.0f64..5.0), x in prop::array::uniform2(-1.0f64..1.0)) {
        let f = Quadratic { c0, c, q: [[0.0; 2]; 2] };
        let v = apply_operator(&laplacian(2), &FnDerivatives(|i: &MultiIndex, p: &[f64]| f.partial(i, p)), &x).unwrap();
        prop_assert_eq!(v, 0.0);
    }

    #[test]
    fn absorbed_residual(f in quadratic(), x in prop::array::uniform2(-1.0f64..1.0)) {
        let d = DomainSpec::cube(2, -1.0, 1.0).unwrap();
        let op = OperatorSpec::new(&d, mixed_operator(), vec![]).unwrap();
        let g = CoefficientFn::parse("10 + 10*sin(2*pi*x1)*sin(2*pi*x2)", 2).unwrap();
        let absorbed = absorb_forcing(&op, &g);
        prop_assert!(absorbed.forcing_absorbed());
        let fd = FnDerivatives(|i: &MultiIndex, p: &[f64]| f.partial(i, p));
        let want = apply_operator(op.interior(), &fd, &x).unwrap() - g.eval(&x);
        prop_assert!((absorbed.residual(&fd, &x).unwrap() - want).abs() < 1e-12 * (1.0 + want.abs()));
    }
}

#[test]
fn laplacian_of_quadratic_bowl() {
    let f = Quadratic { c0: 0.0, c: [0.0; 2], q: [[2.0, 0.0], [0.0, 2.0]] };
    let fd = FnDerivatives(|i: &MultiIndex, p: &[f64]| f.partial(i, p));
    for x in [[0.0, 0.0], [0.3, -0.9], [5.0, 2.0]] {
        assert_eq!(apply_operator(&laplacian(2), &fd, &x).unwrap(), 4.0);
    }
}

#[test]
fn transport_annihilates_characteristic_solution() {
    let beta = 2.7;
    let f = FnDerivatives(move |i: &MultiIndex, p: &[f64]| {
        let phase = p[1] - beta * p[0];
        match i.entries() {
            [1, 0] => Some(-beta * phase.cos()),
            [0, 1] => Some(phase.cos()),
            [0, 0] => Some(phase.sin()),
            _ => None,
        }
    });
    for x in [[0.0, 0.0], [0.4, 1.3], [1.0, 6.0]] {
        assert!(apply_operator(&transport(beta), &f, &x).unwrap().abs() < 1e-14);
    }
}

#[test]
fn laplacian_of_sine_product_matches_finite_differences() {
    let u = |x: f64, y: f64| (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
    let f = FnDerivatives(move |i: &MultiIndex, p: &[f64]| match i.entries() {
        [2, 0] | [0, 2] => Some(-4.0 * PI * PI * u(p[0], p[1])),
        [0, 0] => Some(u(p[0], p[1])),
        _ => None,
    });
    let h = 1e-5;
    for p in [[0.1, 0.2], [-0.35, 0.6], [0.77, -0.05]] {
        let an = apply_operator(&laplacian(2), &f, &p).unwrap();
        let (x, y) = (p[0], p[1]);
        let fd = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4.0 * u(x, y)) / (h * h);
        assert!((an - fd).abs() < 1e-3 * an.abs().max(1.0), "{an} vs {fd}");
    }
}

#[test]
fn constant_forcing_residual_of_zero() {
    let d = DomainSpec::cube(2, -1.0, 1.0).unwrap();
    let op = OperatorSpec::new(&d, laplacian(2), vec![]).unwrap();
    let zero = FnDerivatives(|_: &MultiIndex, _: &[f64]| Some(0.0));
    let absorbed = absorb_forcing(&op, &CoefficientFn::constant(10.0));
    assert_eq!(absorbed.residual(&zero, &[0.2, 0.3]).unwrap(), -10.0);
    let unchanged = absorb_forcing(&op, &CoefficientFn::constant(0.0));
    assert_eq!(unchanged, op);
    assert!(!unchanged.forcing_absorbed());
    assert_eq!(OperatorSpec::new(&d, identity(2), vec![]).unwrap().order(), 0);
}
