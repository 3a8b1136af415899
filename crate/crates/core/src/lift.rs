//! Markovian lift of a multi-exponential Volterra equation.
//!
//! With `G(t) = sum_i gamma_i exp(-rho_i t)` the Volterra process is
//! `X = x0 + sum_i gamma_i X^i` where each factor `X^i` mean-reverts at rate
//! `rho_i` and receives the same drift and noise.

use crate::kernels::MultiExpKernel;

/// Factor values of the lift. The spot is never stored, only recomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftState {
    pub x0: f64,
    pub factors: Vec<f64>,
}

impl LiftState {
    /// All factors at zero, i.e. spot equal to `x0`.
    pub fn at_origin(x0: f64, kernel: &MultiExpKernel) -> Self {
        Self {
            x0,
            factors: vec![0.0; kernel.len()],
        }
    }

    /// `x0 + sum_i gamma_i X^i`.
    pub fn spot(&self, kernel: &MultiExpKernel) -> f64 {
        self.x0
            + kernel
                .gammas()
                .iter()
                .zip(&self.factors)
                .map(|(g, x)| g * x)
                .sum::<f64>()
    }

    /// Multiply factor `i` by `decay[i]`.
    pub fn decay_by(&mut self, decay: &[f64]) {
        for (x, d) in self.factors.iter_mut().zip(decay) {
            *x *= d;
        }
    }

    /// Shift every factor by `shift`; moves the spot by `shift * G(0)`.
    pub fn shift_all(&mut self, shift: f64) {
        for x in &mut self.factors {
            *x += shift;
        }
    }
}

/// Per-factor decay multipliers `exp(-rho_i dt)`.
pub fn decay_factors(kernel: &MultiExpKernel, dt: f64) -> Vec<f64> {
    kernel.rhos().iter().map(|r| (-r * dt).exp()).collect()
}

/// Exact flow of `dX^i = -rho_i X^i dt` over `dt >= 0`.
pub fn psi1(kernel: &MultiExpKernel, state: &LiftState, dt: f64) -> LiftState {
    let mut out = state.clone();
    out.decay_by(&decay_factors(kernel, dt));
    out
}

/// Affine reinsertion `A_x(y)`: shifts every factor by `(y - X) / G(0)` so
/// that the new spot is `y`.
pub fn a_map(kernel: &MultiExpKernel, state: &LiftState, y: f64) -> LiftState {
    let mut out = state.clone();
    out.shift_all((y - state.spot(kernel)) / kernel.g0());
    out
}
