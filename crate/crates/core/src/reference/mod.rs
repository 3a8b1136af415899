//! Semi-analytic reference values.
//!
//! * [`riccati`] — Laplace transform of the lifted CIR spot and Fourier call
//!   prices for the lifted Heston model from the exponential-affine ODEs;
//! * [`fit`] — nonnegative multi-exponential fits of the fractional kernel;
//! * [`ode`] — the adaptive integrator behind both.

pub mod fit;
pub mod ode;
pub mod riccati;

pub use fit::{
    candidate_rates, fit_fractional, fit_fractional_with, l2_residual, nnls, FitOptions, FitReport,
};
pub use riccati::{call_price, heston_mgf, laplace_xt, CallPricer, RiccatiState};
