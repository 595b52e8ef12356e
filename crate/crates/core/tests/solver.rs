mod common;

use common::{line_operator, random_instance};
use nalgebra::{DMatrix, DVector};
use pile_core::expr::CoefficientFn;
use pile_core::gram::{assemble_sigma, GramSystem, PhysicsNodes, SigmaMatrix, Temperatures};
use pile_core::kernels::KernelSpec;
use pile_core::operators::{absorb_forcing, identity, laplacian, DomainSpec, OperatorSpec};
use pile_core::points::PointSet;
use pile_core::quadrature::{interior_rule, WeightMode};
use pile_core::solver::{
    fit_gp, fit_krr, krr_to_gp, predict, risk_gradient, risk_quadratic, stack_targets, FitCoefficients, ObservationSet,
    PhysicsTargets, Posterior,
};
use proptest::prelude::*;
use rand::Rng;

/// The empirical risk evaluated from pointwise predictions of `f̂` and `A f̂`.
fn pointwise_risk(inst: &common::Instance, c: &FitCoefficients) -> f64 {
    let g = &inst.gram;
    let (n, t) = (g.n(), inst.temps);
    let id = identity(1);
    let data: f64 = (0..n)
        .map(|i| {
            let r = inst.obs.values[i] - predict(g, c, &id, g.observations().point(i)).unwrap();
            r * r
        })
        .sum();
    let phys: f64 = (0..g.m())
        .map(|j| {
            let z = g.nodes().points().point(j);
            let r = predict(g, c, g.nodes().operator(j), z).unwrap() - inst.targets.0[j];
            g.weights()[j] * r * r
        })
        .sum();
    let stacked = c.stacked();
    let reg: f64 = stacked.iter().zip(g.joint().mul_vec(&stacked)).map(|(a, b)| a * b).sum();
    let data_term = if n == 0 { 0.0 } else { data / (t.gamma * n as f64) };
    data_term + phys / t.rho + reg / t.eta
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn ridge_limit_matches_closed_form(seed in 0u64..10_000, n in 1usize..30) {
        let inst = random_instance(seed, n, 0);
        let c = fit_krr(&inst.gram, &inst.obs, &PhysicsTargets::zeros(0), &inst.temps).unwrap();
        let k = DMatrix::from_row_slice(n, n, inst.gram.k_xx().as_slice());
        let t = inst.temps;
        let a = k + DMatrix::identity(n, n) * (t.gamma * n as f64 / t.eta);
        let want = a.lu().solve(&DVector::from_vec(inst.obs.values.clone())).unwrap();
        for i in 0..n {
            prop_assert!((c.alpha[i] - want[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn stationarity(seed in 0u64..10_000, n in 0usize..20, m in 1usize..20) {
        let inst = random_instance(seed, n, m);
        let c = fit_krr(&inst.gram, &inst.obs, &inst.targets, &inst.temps).unwrap();
        let grad = risk_gradient(&inst.gram, &inst.obs, &inst.targets, &inst.temps, &c).unwrap();
        let ytilde = stack_targets(&inst.gram, &inst.obs.values, &inst.targets.0).unwrap();
        let norm = ytilde.iter().map(|v| v * v).sum::<f64>().sqrt();
        let worst = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        prop_assert!(worst < 1e-8 * (1.0 + norm), "{worst}");
    }

    #[test]
    fn physics_sign(seed in 0u64..10_000, n in 1usize..15, m in 1usize..15) {
        let inst = random_instance(seed, n, m);
        let c = fit_krr(&inst.gram, &inst.obs, &inst.targets, &inst.temps).unwrap();
        let functional = pointwise_risk(&inst, &c);
        let plus = risk_quadratic(&inst.gram, &inst.obs, &inst.targets, &inst.temps, &c, 1.0).unwrap();
        let minus = risk_quadratic(&inst.gram, &inst.obs, &inst.targets, &inst.temps, &c, -1.0).unwrap();
        prop_assert!((functional - plus).abs() <= 1e-10 * functional.abs());
        prop_assert!((functional - minus).abs() > 1e-6 * functional.abs());
    }

    #[test]
    fn routes_agree(seed in 0u64..10_000, n in 0usize..15, m in 1usize..15) {
        let inst = random_instance(seed, n, m);
        let krr = fit_krr(&inst.gram, &inst.obs, &inst.targets, &inst.temps).unwrap();
        let s = assemble_sigma(&inst.gram, &krr_to_gp(&inst.temps, n)).unwrap();
        let ytilde = stack_targets(&inst.gram, &inst.obs.values, &inst.targets.0).unwrap();
        let gp = fit_gp(&s, &ytilde).unwrap();
        for (a, b) in krr.stacked().iter().zip(gp.stacked()) {
            prop_assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
        }
    }

    #[test]
    fn posterior_shrinks_variance(seed in 0u64..10_000, n in 0usize..10, m in 0usize..10, q in -1.5f64..1.5) {
        let inst = random_instance(seed, n, m);
        let s = assemble_sigma(&inst.gram, &inst.temps).unwrap();
        let ytilde = stack_targets(&inst.gram, &inst.obs.values, &inst.targets.0).unwrap();
        let post = Posterior::new(&inst.gram, &s, &ytilde).unwrap();
        for channel in [identity(1), line_operator()] {
            let prior = inst.temps.eta * inst.gram.prior(&channel, &[q], &channel, &[q]).unwrap();
            let var = post.variance(&channel, &[q]).unwrap();
            prop_assert!(var <= prior + 1e-10 * prior.max(1.0));
        }
        let a = post.cov(&identity(1), &[q], &line_operator(), &[0.3]).unwrap();
        let b = post.cov(&line_operator(), &[0.3], &identity(1), &[q]).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }
}

#[test]
fn perturbations_never_improve_the_risk() {
    let inst = random_instance(42, 12, 9);
    let c = fit_krr(&inst.gram, &inst.obs, &inst.targets, &inst.temps).unwrap();
    let best = risk_quadratic(&inst.gram, &inst.obs, &inst.targets, &inst.temps, &c, 1.0).unwrap();
    let mut rng = common::rng(7);
    for _ in 0..100 {
        let mut d: Vec<f64> = (0..c.alpha.len() + c.beta.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.iter_mut().for_each(|v| *v *= 1e-3 / norm);
        let mut p = c.clone();
        let n = p.alpha.len();
        p.alpha.iter_mut().zip(&d[..n]).for_each(|(a, b)| *a += b);
        p.beta.iter_mut().zip(&d[n..]).for_each(|(a, b)| *a += b);
        let v = risk_quadratic(&inst.gram, &inst.obs, &inst.targets, &inst.temps, &p, 1.0).unwrap();
        assert!(v >= best - 1e-12 * best.abs());
    }
}

#[test]
fn forcing_can_be_absorbed_or_kept_as_targets() {
    let d = DomainSpec::cube(2, -1.0, 1.0).unwrap();
    let plain = OperatorSpec::new(&d, laplacian(2), vec![]).unwrap();
    let g = CoefficientFn::parse("10 + 10*sin(2*pi*x1)*sin(2*pi*x2)", 2).unwrap();
    let absorbed = absorb_forcing(&plain, &g);
    let rule = interior_rule(&d, 6, WeightMode::Corrected).unwrap();
    let k = KernelSpec::rbf(2, 0.5).unwrap();
    let x = PointSet::from_points(2, &[[0.1, 0.2], [-0.4, 0.5], [0.8, -0.3]]).unwrap();
    let obs = ObservationSet::new(x.clone(), vec![0.2, -0.1, 0.4]).unwrap();
    let t = Temperatures::new(0.1, 0.01, 1.0).unwrap();

    let nodes_a = PhysicsNodes::from_rules(&absorbed, std::slice::from_ref(&rule), false).unwrap();
    let gram_a = GramSystem::assemble(&k, &x, &nodes_a).unwrap();
    let fit_a = fit_krr(&gram_a, &obs, &PhysicsTargets::zeros(gram_a.m()), &t).unwrap();

    let nodes_p = PhysicsNodes::from_rules(&plain, std::slice::from_ref(&rule), false).unwrap();
    let gram_p = GramSystem::assemble(&k, &x, &nodes_p).unwrap();
    let r: Vec<f64> = rule.points().iter().map(|z| g.eval(z)).collect();
    let fit_p = fit_krr(&gram_p, &obs, &PhysicsTargets(r), &t).unwrap();

    for p in [[0.0, 0.0], [0.3, -0.7], [-0.9, 0.9]] {
        let a = predict(&gram_a, &fit_a, &identity(2), &p).unwrap();
        let b = predict(&gram_p, &fit_p, &identity(2), &p).unwrap();
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }
}

#[test]
fn operator_channel_matches_finite_difference_laplacian() {
    let d = DomainSpec::cube(2, -1.0, 1.0).unwrap();
    let op = OperatorSpec::new(&d, laplacian(2), vec![]).unwrap();
    let rule = interior_rule(&d, 5, WeightMode::Uniform).unwrap();
    let nodes = PhysicsNodes::from_rules(&op, std::slice::from_ref(&rule), false).unwrap();
    let k = KernelSpec::rbf(2, 0.6).unwrap();
    let gram = GramSystem::assemble(&k, rule.points(), &nodes).unwrap();
    let y: Vec<f64> = rule.points().iter().map(|z| z[0] * z[1]).collect();
    let obs = ObservationSet::new(rule.points().clone(), y).unwrap();
    let t = Temperatures::new(1.0, 1.0, 1.0).unwrap();
    let c = fit_krr(&gram, &obs, &PhysicsTargets(vec![10.0; gram.m()]), &t).unwrap();
    let f = |x: f64, y: f64| predict(&gram, &c, &identity(2), &[x, y]).unwrap();
    let h = 1e-4;
    for p in [[0.1, 0.3], [-0.5, 0.2]] {
        let (x, y) = (p[0], p[1]);
        let fd = (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / (h * h);
        let an = predict(&gram, &c, &laplacian(2), &p).unwrap();
        assert!((an - fd).abs() < 1e-5 * an.abs(), "{an} vs {fd}");
    }
}

#[test]
fn noise_free_limits() {
    let k = KernelSpec::rbf(1, 0.5).unwrap();
    let x = PointSet::from_flat(1, vec![-0.6, 0.1, 0.7]).unwrap();
    let y = vec![0.5, -1.0, 2.0];
    let gram = GramSystem::assemble(&k, &x, &PhysicsNodes::empty(1)).unwrap();
    let t = Temperatures::new(1e-10, 1.0, 1.0).unwrap();
    let s: SigmaMatrix = assemble_sigma(&gram, &t).unwrap();
    let post = Posterior::new(&gram, &s, &y).unwrap();
    for (i, yi) in y.iter().enumerate() {
        let xi = x.point(i);
        assert!(post.variance(&identity(1), xi).unwrap() <= 1e-6);
        assert!((post.mean(&identity(1), xi).unwrap() - yi).abs() < 1e-6);
    }
    assert_eq!(post.clamped_count(), 0);
}
