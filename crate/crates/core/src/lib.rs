//! Nonnegativity-preserving convolution kernels and high-order Monte Carlo
//! simulation of stochastic Volterra equations with multi-exponential kernels.
//!
//! The crate is organised in layers:
//!
//! * [`kernels`] — kernel representations, the `G_l` functions that
//!   characterise nonnegativity preservation, a sampling falsifier and the
//!   discrete resolvent of the first kind.
//! * [`lift`] — the Markovian lift of a multi-exponential kernel: factor
//!   state, the exact decay flow and the affine reinsertion map.
//! * [`schemes`] — one-step maps and path simulators (second-order
//!   multifactor CIR/Heston, Volterra and lifted Euler, splitting scheme for
//!   Volterra geometric Brownian motion).
//! * [`reference`] — semi-analytic reference values (Riccati ODEs for the
//!   lifted affine model, Fourier call prices, fractional kernel fitting).
//! * [`engine`] — reproducible parallel Monte Carlo, payoffs, estimators and
//!   convergence studies.
//! * [`cli`] — the `volterra` command-line front end.

pub mod cli;
pub mod engine;
mod error;
pub mod kernels;
pub mod lift;
pub mod reference;
pub mod schemes;

pub use error::{Error, Result};
