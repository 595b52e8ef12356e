//! Acceptance criteria 1 to 9. Each criterion prints one PASS or FAIL line.
//!
//! Criterion 7 is expected to fail: the all-zeros norm ratio stays near one
//! for the configured benchmark. The test asserts that the failing set is
//! exactly the expected one, so both a regression and a fix are surfaced.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use pile_core::evidence::{data_free_pile, data_free_pile_with, fredholm_logdet, normalizing_constant, pile, NormalizingConstant};
use pile_core::gram::{assemble_sigma, GramSystem, PhysicsNodes, SigmaMatrix, Temperatures};
use pile_core::kernels::KernelSpec;
use pile_core::linalg::Matrix;
use pile_core::operators::{identity, laplacian, transport, MultiIndex, OperatorTerm, Region};
use pile_core::points::PointSet;
use pile_core::quadrature::{chebyshev1_1d, QuadratureRule, RuleKind, WeightMode};
use pile_core::selection::{datafree_kernel_select, Param, SweepResult};
use pile_core::solver::{fit_krr, predict, risk_quadratic, stack_targets, ObservationSet, PhysicsTargets, Posterior};
use pile_kit::experiments::{
    characteristic_angle, reduce_angle, run_convection, run_poisson, selected_cell, ConvectionConfig, ConvectionRun,
    PoissonConfig, CONVECTION_SPEC, POISSON_SPEC,
};
use pile_kit::spec::ProblemSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail for the shipped configuration.
const EXPECTED_FAILURES: [u32; 1] = [7];

/// Transport speed of the main convection benchmark.
const BETA: f64 = 30.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `f'' − 0.7 f' + 0.3 f` on the line.
fn line_operator() -> Vec<OperatorTerm> {
    vec![
        OperatorTerm::constant(MultiIndex::new(vec![2]).unwrap(), 1.0),
        OperatorTerm::constant(MultiIndex::new(vec![1]).unwrap(), -0.7),
        OperatorTerm::constant(MultiIndex::new(vec![0]).unwrap(), 0.3),
    ]
}

struct Instance {
    gram: GramSystem,
    obs: ObservationSet,
    targets: PhysicsTargets,
    temps: Temperatures,
}

fn random_instance(r: &mut ChaCha8Rng, n: usize, m: usize) -> Instance {
    let kernel = KernelSpec::rbf(1, r.random_range(0.3..1.2)).unwrap();
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let z: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..m).map(|_| r.random_range(0.05..0.5)).collect();
    let nodes = if m == 0 {
        PhysicsNodes::empty(1)
    } else {
        let rule = QuadratureRule::new(PointSet::from_flat(1, z).unwrap(), w, Region::Interior, RuleKind::Custom).unwrap();
        PhysicsNodes::uniform(&line_operator(), &rule).unwrap()
    };
    let points = PointSet::from_flat(1, x).unwrap();
    let gram = GramSystem::assemble(&kernel, &points, &nodes).unwrap();
    let y: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
    let targets: Vec<f64> = (0..m).map(|_| r.random_range(-2.0..2.0)).collect();
    let temps = Temperatures::new(
        10f64.powf(r.random_range(-2.0..0.5)),
        10f64.powf(r.random_range(-2.0..0.5)),
        10f64.powf(r.random_range(-0.5..0.5)),
    )
    .unwrap();
    Instance {
        gram,
        obs: ObservationSet::new(points, y).unwrap(),
        targets: PhysicsTargets(targets),
        temps,
    }
}

fn ridge_equivalence() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(1..=30);
        let inst = random_instance(&mut r, n, 0);
        let c = fit_krr(&inst.gram, &inst.obs, &PhysicsTargets::zeros(0), &inst.temps).unwrap();
        let t = inst.temps;
        let k = DMatrix::from_row_slice(n, n, inst.gram.k_xx().as_slice());
        let a = k + DMatrix::identity(n, n) * (t.gamma * n as f64 / t.eta);
        let want = a.lu().solve(&DVector::from_vec(inst.obs.values.clone())).unwrap();
        for i in 0..n {
            worst = worst.max((c.alpha[i] - want[i]).abs());
        }
    }
    outcome(worst < 1e-8, format!("max abs error {worst:.2e} over 50 instances"))
}

/// The empirical risk assembled from pointwise predictions.
fn pointwise_risk(inst: &Instance, c: &pile_core::solver::FitCoefficients) -> f64 {
    let g = &inst.gram;
    let (n, t) = (g.n(), inst.temps);
    let id = identity(1);
    let data: f64 = (0..n)
        .map(|i| {
            let e = inst.obs.values[i] - predict(g, c, &id, g.observations().point(i)).unwrap();
            e * e
        })
        .sum();
    let phys: f64 = (0..g.m())
        .map(|j| {
            let z = g.nodes().points().point(j);
            let e = predict(g, c, g.nodes().operator(j), z).unwrap() - inst.targets.0[j];
            g.weights()[j] * e * e
        })
        .sum();
    let stacked = c.stacked();
    let reg: f64 = stacked.iter().zip(g.joint().mul_vec(&stacked)).map(|(a, b)| a * b).sum();
    data / (t.gamma * n as f64) + phys / t.rho + reg / t.eta
}

fn representer_sign() -> Outcome {
    let mut r = rng(2);
    let (mut worst_plus, mut best_minus) = (0.0f64, f64::INFINITY);
    for _ in 0..50 {
        let (n, m) = (r.random_range(1..=15), r.random_range(1..=15));
        let inst = random_instance(&mut r, n, m);
        let c = fit_krr(&inst.gram, &inst.obs, &inst.targets, &inst.temps).unwrap();
        let functional = pointwise_risk(&inst, &c);
        let quad = |sign| risk_quadratic(&inst.gram, &inst.obs, &inst.targets, &inst.temps, &c, sign).unwrap();
        worst_plus = worst_plus.max((functional - quad(1.0)).abs() / functional.abs());
        best_minus = best_minus.min((functional - quad(-1.0)).abs() / functional.abs());
    }
    outcome(
        worst_plus < 1e-10 && best_minus > 1e-6,
        format!("+ sign rel err {worst_plus:.2e}; − sign rel err at least {best_minus:.2e}"),
    )
}

fn random_psd(r: &mut ChaCha8Rng, m: usize) -> Matrix {
    let b = DMatrix::from_fn(m, m, |_, _| r.random_range(-1.0..1.0));
    let g = &b * b.transpose();
    Matrix::from_fn(m, m, |i, j| g[(i, j)])
}

fn data_free_identity() -> Outcome {
    let mut r = rng(3);
    let (mut worst, mut linear_gap) = (0.0f64, f64::INFINITY);
    for _ in 0..20 {
        let m = r.random_range(1..12);
        let g = random_psd(&mut r, m);
        let w: Vec<f64> = (0..m).map(|_| r.random_range(0.05..2.0)).collect();
        let (eta, rho) = (r.random_range(0.2..3.0), r.random_range(0.2..3.0));
        let report = data_free_pile(&g, &w, eta, rho).unwrap();
        let t = Temperatures::new(1.0, rho, eta).unwrap();
        let sigma = SigmaMatrix::from_joint(&g, 0, &w, t).unwrap();
        let m_pile = m as f64 * pile(&sigma, &vec![0.0; m]).unwrap().pile;

        let scaled = DMatrix::from_fn(m, m, |i, j| {
            let v = (w[i] * w[j]).sqrt() * g[(i, j)] / (eta * rho);
            if i == j {
                1.0 + v
            } else {
                v
            }
        });
        let logdet = scaled.cholesky().unwrap().l().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>();
        worst = worst.max((m_pile - report.c_m - logdet).abs()).max((report.normalized_score - logdet).abs());
        let linear = normalizing_constant(&w, eta, rho, NormalizingConstant::Linear);
        linear_gap = linear_gap.min((m_pile - linear - logdet).abs());
        assert_eq!(data_free_pile_with(&g, &w, eta, rho, NormalizingConstant::Linear).unwrap().c_m, linear);
    }
    outcome(
        worst < 1e-10 && linear_gap > 1e-6,
        format!("identity error {worst:.2e}; linear constant misses by at least {linear_gap:.2e}"),
    )
}

fn fredholm_oracle() -> Outcome {
    let want = 1f64.cosh().ln();
    let errs: Vec<f64> = [50, 100, 200, 400]
        .iter()
        .map(|&m| {
            let rule = chebyshev1_1d(m, 0.0, 1.0, WeightMode::Corrected).unwrap();
            (fredholm_logdet(|x, y| x[0].min(y[0]), &rule, 1.0).unwrap() - want).abs()
        })
        .collect();
    let monotone = errs.windows(2).all(|p| p[1] < p[0]);
    let last = errs[errs.len() - 1];
    outcome(
        monotone && last < 1e-4,
        format!("errors {:?} at m = 50, 100, 200, 400", errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()),
    )
}

const STEP: f64 = 1e-5;

fn mi(e: &[u32]) -> MultiIndex {
    MultiIndex::new(e.to_vec()).unwrap()
}

fn shifted(p: &[f64], axis: usize, by: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[axis] += by;
    q
}

/// Central difference of the next-lower analytic derivative.
fn fd_partial(k: &KernelSpec, a: &[u32], b: &[u32], x: &[f64], y: &[f64]) -> f64 {
    let (mut a2, mut b2) = (a.to_vec(), b.to_vec());
    if let Some(axis) = a2.iter().position(|&v| v > 0) {
        a2[axis] -= 1;
        let f = |p: &[f64]| k.eval_partial(&mi(&a2), &mi(&b2), p, y).unwrap();
        (f(&shifted(x, axis, STEP)) - f(&shifted(x, axis, -STEP))) / (2.0 * STEP)
    } else {
        let axis = b2.iter().position(|&v| v > 0).expect("positive order");
        b2[axis] -= 1;
        let f = |p: &[f64]| k.eval_partial(&mi(&a2), &mi(&b2), x, p).unwrap();
        (f(&shifted(y, axis, STEP)) - f(&shifted(y, axis, -STEP))) / (2.0 * STEP)
    }
}

fn kernel_derivatives() -> Outcome {
    let mut r = rng(5);
    let indices: Vec<[u32; 2]> = vec![[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]];
    let ops = [laplacian(2), transport(1.7)];
    let (mut worst, mut checks) = (0.0f64, 0usize);
    for case in 0..200 {
        let aniso = case % 2 == 1;
        let kernel = if aniso {
            KernelSpec::anisotropic(r.random_range(-3.1..3.1), r.random_range(0.5..1.5)).unwrap()
        } else {
            KernelSpec::rbf(2, r.random_range(0.3..2.0)).unwrap()
        };
        let inv_len2 = kernel.param("h").map_or(1.0, |h| h.powi(-2));
        let x = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let y = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let floor = |order: u32| 1e-3 * inv_len2.powf(order as f64 / 2.0);
        for a in &indices {
            for b in &indices {
                let order = a[0] + a[1] + b[0] + b[1];
                if order == 0 || order > 2 {
                    continue;
                }
                let an = kernel.eval_partial(&mi(a), &mi(b), &x, &y).unwrap();
                let fd = fd_partial(&kernel, a, b, &x, &y);
                worst = worst.max((an - fd).abs() / an.abs().max(floor(order)));
                checks += 1;
            }
        }
        for op in &ops {
            let order = op.iter().map(|t| t.index.order()).max().unwrap_or(0);
            let an = kernel.op_kernel_left(op, &x, &y).unwrap();
            let fd: f64 = op
                .iter()
                .map(|t| t.coefficient.as_constant().unwrap() * fd_partial(&kernel, t.index.entries(), &[0, 0], &x, &y))
                .sum();
            worst = worst.max((an - fd).abs() / an.abs().max(floor(order)));
            let an = kernel.op_kernel_both(op, &identity(2), &x, &y).unwrap();
            worst = worst.max((an - fd).abs() / an.abs().max(floor(order)));
            checks += 2;
        }
    }
    outcome(worst < 1e-6, format!("{checks} checks over 200 cases, max rel err {worst:.2e}"))
}

fn posterior_sanity() -> Outcome {
    let mut r = rng(9);
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..50 {
        let (n, m) = (r.random_range(0..10), r.random_range(0..10));
        let inst = random_instance(&mut r, n, m);
        let s = assemble_sigma(&inst.gram, &inst.temps).unwrap();
        let ytilde = stack_targets(&inst.gram, &inst.obs.values, &inst.targets.0).unwrap();
        let post = Posterior::new(&inst.gram, &s, &ytilde).unwrap();
        for _ in 0..10 {
            let q = [r.random_range(-1.5..1.5)];
            for channel in [identity(1), line_operator()] {
                let prior = inst.temps.eta * inst.gram.prior(&channel, &q, &channel, &q).unwrap();
                let var = post.variance(&channel, &q).unwrap();
                excess = excess.max(var - prior - 1e-10 * prior.max(1.0));
            }
        }
    }

    let kernel = KernelSpec::rbf(1, 0.5).unwrap();
    let x = PointSet::from_flat(1, vec![-0.6, 0.1, 0.7]).unwrap();
    let gram = GramSystem::assemble(&kernel, &x, &PhysicsNodes::empty(1)).unwrap();
    let y = [0.5, -1.0, 2.0];
    let vars: Vec<f64> = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10]
        .iter()
        .map(|&gamma| {
            let s = assemble_sigma(&gram, &Temperatures::new(gamma, 1.0, 1.0).unwrap()).unwrap();
            let post = Posterior::new(&gram, &s, &y).unwrap();
            (0..3).map(|i| post.variance(&identity(1), x.point(i)).unwrap()).fold(0.0, f64::max)
        })
        .collect();
    let shrinking = vars.windows(2).all(|p| p[1] < p[0]);
    let last = vars[vars.len() - 1];
    outcome(
        excess <= 0.0 && shrinking && last < 1e-8,
        format!("variance never exceeds prior; conditioned variance {last:.2e} at γ = 1e-10"),
    )
}

fn finite_rows(stage: &SweepResult) -> Vec<(f64, f64)> {
    stage.rows.iter().filter_map(|r| r.cell().map(|c| (r.value, c.pile.mean))).filter(|(_, p)| p.is_finite()).collect()
}

fn poisson_reproduction() -> Outcome {
    let spec = ProblemSpec::parse(POISSON_SPEC).unwrap();
    let run = run_poisson(&spec, &PoissonConfig::default()).unwrap();
    let h = run.stage(Param::H).unwrap();
    let piles: Vec<f64> = finite_rows(h).iter().map(|r| r.1).collect();
    let last = piles.len() - 1;
    let minima: Vec<usize> = (0..piles.len())
        .filter(|&i| (i == 0 || piles[i] < piles[i - 1]) && (i == last || piles[i] < piles[i + 1]))
        .collect();
    let unique_interior = minima.len() == 1 && minima[0] != 0 && minima[0] != last;

    let best = h.argmin.unwrap();
    let selected = h.rows[best].cell().unwrap().errors.unwrap();
    let errs: Vec<_> = h.rows.iter().filter_map(|r| r.cell().and_then(|c| c.errors)).collect();
    let min_data = errs.iter().map(|e| e.data_rel.mean).fold(f64::INFINITY, f64::min);
    let min_phys = errs.iter().map(|e| e.phys_rel.mean).fold(f64::INFINITY, f64::min);
    let near_data = selected.data_rel.mean - 2.0 * selected.data_rel.std <= min_data;
    let near_phys = selected.phys_rel.mean - 2.0 * selected.phys_rel.std <= min_phys;

    let diverges = |p: Param| {
        let s = run.stage(p).unwrap();
        let first = s.rows[0].pile();
        (first, s.rows[s.argmin.unwrap()].pile())
    };
    let (rho0, rho_sel) = diverges(Param::Rho);
    let (gamma0, gamma_sel) = diverges(Param::Gamma);
    let divergence = rho0 > rho_sel && gamma0 > gamma_sel;

    outcome(
        unique_interior && near_data && near_phys && divergence,
        format!(
            "(a) local minima at {minima:?} of {} rows, h* = {:.3}; (b) data_rel {:.2e} ± {:.1e} vs min {min_data:.2e}, phys_rel {:.2e} ± {:.1e} vs min {min_phys:.2e}; (c) PILE at smallest ρ {rho0:.1} > {rho_sel:.2}, smallest γ {gamma0:.1} > {gamma_sel:.2}",
            piles.len(),
            h.rows[best].value,
            selected.data_rel.mean,
            selected.data_rel.std,
            selected.phys_rel.mean,
            selected.phys_rel.std,
        ),
    )
}

fn lower_quartile(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = 0.25 * (v.len() - 1) as f64;
    let (lo, frac) = (pos.floor() as usize, pos.fract());
    v[lo] + frac * (v[(lo + 1).min(v.len() - 1)] - v[lo])
}

fn convection_run(beta: f64) -> ConvectionRun {
    let spec = ProblemSpec::parse_with(CONVECTION_SPEC, &[("beta", beta)]).unwrap();
    run_convection(&spec, &ConvectionConfig::new(beta)).unwrap()
}

fn convection_failure(run: &ConvectionRun) -> Outcome {
    let h = run.isotropic.stages.iter().find(|s| s.param == Param::H).unwrap();
    let rows: Vec<(f64, f64, f64)> = h
        .rows
        .iter()
        .filter_map(|r| r.cell().and_then(|c| c.errors).map(|e| (r.value, e.data_rel.mean, e.phys_rel.mean)))
        .collect();
    let data_q = lower_quartile(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let phys_q = lower_quartile(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
    let both: Vec<f64> = rows.iter().filter(|r| r.1 <= data_q && r.2 <= phys_q).map(|r| r.0).collect();

    let cell = selected_cell(&run.isotropic).unwrap();
    let truth_norm = run.problem.evaluation.as_ref().unwrap().norms().0;
    let ratio = cell.fit_norm.unwrap().mean / truth_norm;
    let errors = cell.errors.unwrap();
    outcome(
        both.is_empty() && ratio < 0.2,
        format!(
            "β = {BETA}: h in both best quartiles {both:?}; selected h = {:.3} with ‖f̂‖/‖f‖ = {ratio:.3} (data_rel {:.3}, phys_rel {:.3})",
            run.isotropic.hyper.kernel.param("h").unwrap(),
            errors.data_rel.mean,
            errors.phys_rel.mean,
        ),
    )
}

fn anisotropic_selection(run: &ConvectionRun) -> Outcome {
    let l = &run.landscape;
    let half = (l.thetas.len() - 1) / 2;
    let mut periodic_gap = 0.0f64;
    for i in 0..l.thetas.len() - half {
        assert!((l.thetas[i + half] - l.thetas[i] - PI).abs() < 1e-12);
        for j in 0..l.ss.len() {
            let (a, b) = (l.score(i, j).unwrap(), l.score(i + half, j).unwrap());
            periodic_gap = periodic_gap.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    let cell = l.thetas[1] - l.thetas[0];
    let predicted = characteristic_angle(BETA);
    let miss = reduce_angle(l.theta() - predicted).abs();

    let fit = selected_cell(&run.anisotropic).unwrap().errors.unwrap();
    let iso = selected_cell(&run.isotropic).unwrap().errors.unwrap();
    let fit_ok = fit.data_rel.mean < 0.1 && fit.phys_rel.mean < 0.2;

    let spec = ProblemSpec::parse_with(CONVECTION_SPEC, &[("beta", 2.0 * PI)]).unwrap();
    let cfg = ConvectionConfig::new(2.0 * PI);
    let nodes = spec.physics().unwrap().nodes;
    let base = KernelSpec::anisotropic(0.0, 1.0).unwrap().with_param("scale", cfg.scale).unwrap();
    let t = spec.temperatures;
    let literal = datafree_kernel_select(&cfg.thetas, &cfg.ss, &base, &nodes, t.eta, t.rho).unwrap();
    let literal_theta = reduce_angle(literal.theta());
    let literal_ok = (1.31..=1.51).contains(&literal_theta);

    outcome(
        periodic_gap < 1e-8 && miss <= cell + 1e-12 && fit_ok && literal_ok,
        format!(
            "relative period gap {periodic_gap:.1e}; β = {BETA}: θ* = {:.4} vs atan β = {predicted:.4} (miss {miss:.3}, cell {cell:.3}), fit data_rel {:.2e} phys_rel {:.2e} vs isotropic {:.2e} / {:.2e}; β = 2π: θ* = {literal_theta:.4}, s* = {}",
            l.theta(),
            fit.data_rel.mean,
            fit.phys_rel.mean,
            iso.data_rel.mean,
            iso.phys_rel.mean,
            literal.s(),
        ),
    )
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, Duration, Duration)> = Vec::new();
    let secs = Duration::from_secs;
    let (o, t) = timed(ridge_equivalence);
    results.push((1, "ridge equivalence", o, t, secs(1)));
    let (o, t) = timed(representer_sign);
    results.push((2, "representer sign", o, t, secs(1)));
    let (o, t) = timed(data_free_identity);
    results.push((3, "data-free normalizing constant", o, t, secs(1)));
    let (o, t) = timed(fredholm_oracle);
    results.push((4, "Fredholm determinant oracle", o, t, secs(10)));
    let (o, t) = timed(kernel_derivatives);
    results.push((5, "kernel derivatives", o, t, secs(5)));
    let (o, t) = timed(poisson_reproduction);
    results.push((6, "Poisson reproduction", o, t, secs(300)));

    let start = Instant::now();
    let run = convection_run(BETA);
    let shared = start.elapsed();
    let (o, t) = timed(|| convection_failure(&run));
    results.push((7, "convection failure diagnosis", o, shared + t, secs(300)));
    let (o, t) = timed(|| anisotropic_selection(&run));
    results.push((8, "anisotropic selection", o, shared + t, secs(600)));

    let (o, t) = timed(posterior_sanity);
    results.push((9, "posterior sanity", o, t, secs(1)));

    let mut failures = Vec::new();
    for (id, name, o, took, limit) in &results {
        let pass = o.pass && took <= limit;
        if !pass {
            failures.push(*id);
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{verdict}] {name} ({:.2} s, limit {} s): {}", took.as_secs_f64(), limit.as_secs(), o.detail);
    }
    if failures != EXPECTED_FAILURES {
        eprintln!("failing criteria {failures:?}, expected {EXPECTED_FAILURES:?}");
        std::process::exit(1);
    }
}
