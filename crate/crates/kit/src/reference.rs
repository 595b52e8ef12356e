//! Reference solution of `Δf = 10 + 10 sin(2πx) sin(2πy)` on `(−1, 1)²` with
//! zero boundary values.
//!
//! The periodic part solves in closed form. The constant part is written as
//! `5(x² − 1)` plus a harmonic sine–cosh series that cancels its trace on
//! `y = ±1`; every partial sum is harmonic, so the Laplacian is exact and
//! only the boundary value on `y = ±1` carries a truncation error of order
//! `1/modes²`.

use std::f64::consts::PI;

pub const DEFAULT_MODES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonReference {
    /// `(amplitude, wavenumber)` of each odd sine mode.
    modes: Vec<(f64, f64)>,
}

/// Ratio `cosh(k y)/cosh(k)` without overflow.
fn cosh_ratio(k: f64, y: f64) -> f64 {
    let a = y.abs();
    (k * (a - 1.0)).exp() * (1.0 + (-2.0 * k * a).exp()) / (1.0 + (-2.0 * k).exp())
}

fn sinh_ratio(k: f64, y: f64) -> f64 {
    let a = y.abs();
    y.signum() * (k * (a - 1.0)).exp() * (1.0 - (-2.0 * k * a).exp()) / (1.0 + (-2.0 * k).exp())
}

impl PoissonReference {
    /// Keeps the odd modes `p ≤ modes`.
    pub fn new(modes: usize) -> Self {
        let modes = (1..=modes.max(1))
            .step_by(2)
            .map(|p| {
                let p = p as f64;
                (160.0 / (PI.powi(3) * p.powi(3)), p * PI / 2.0)
            })
            .collect();
        Self { modes }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (u, v) = (x[0], x[1]);
        let series: f64 = self.modes.iter().map(|&(a, k)| a * (k * (u + 1.0)).sin() * cosh_ratio(k, v)).sum();
        5.0 * (u * u - 1.0) + series - 10.0 / (8.0 * PI * PI) * (2.0 * PI * u).sin() * (2.0 * PI * v).sin()
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; 2] {
        let (u, v) = (x[0], x[1]);
        let c = 10.0 / (8.0 * PI * PI) * 2.0 * PI;
        let mut g = [
            10.0 * u - c * (2.0 * PI * u).cos() * (2.0 * PI * v).sin(),
            -c * (2.0 * PI * u).sin() * (2.0 * PI * v).cos(),
        ];
        for &(a, k) in &self.modes {
            g[0] += a * k * (k * (u + 1.0)).cos() * cosh_ratio(k, v);
            g[1] += a * k * (k * (u + 1.0)).sin() * sinh_ratio(k, v);
        }
        g
    }

    /// `Δf`, which equals the forcing for every truncation.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        forcing(x)
    }
}

/// `g(x, y) = 10 + 10 sin(2πx) sin(2πy)`.
pub fn forcing(x: &[f64]) -> f64 {
    10.0 + 10.0 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
}
