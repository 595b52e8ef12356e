#![cfg_attr(not(feature = "std"), no_std)]

//! Physics-informed kernel learning.
//!
//! Fits functions to noisy point observations while softly enforcing a linear
//! differential constraint `A f = r` on quadrature nodes, and scores the
//! resulting Gaussian-process model by its physics-informed log evidence
//! (PILE): `(1/N) Ỹᵀ Σ⁻¹ Ỹ + (1/N) log det Σ + log(2πη)`, lower is better.
//!
//! The crate is `no_std` (with `alloc`). Everything here is pure numerics;
//! file formats, the problem-spec language and the command line live in the
//! `pile-kit` companion crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`expr`] | coefficient expressions `c_α(x)` |
//! | [`operators`] | multi-indices, differential and boundary operators, box domains |
//! | [`kernels`] | Gaussian kernels with closed-form partial derivatives |
//! | [`quadrature`] | Chebyshev, Monte Carlo and boundary rules |
//! | [`gram`] | block Gram matrices, `Σ_{m,n}`, Cholesky log-determinants |
//! | [`solver`] | ridge and Gaussian-process fits, posterior mean and covariance |
//! | [`evidence`] | PILE, data-free PILE, Fredholm determinants |
//! | [`metrics`] | posterior-predictive L² errors |
//! | [`selection`] | grid sweeps, sequential and data-free selection |

extern crate alloc;

pub mod error;
pub mod evidence;
pub mod expr;
pub mod gram;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod points;
pub mod quadrature;
pub mod selection;
pub mod solver;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[allow(unused_imports)]
mod prelude {
    pub use alloc::borrow::ToOwned;
    pub use alloc::boxed::Box;
    pub use alloc::string::{String, ToString};
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    #[cfg(not(feature = "std"))]
    pub use num_traits::Float;
}
