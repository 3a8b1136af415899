//! Exponential-affine transforms of the lifted CIR/Heston model.
//!
//! For `E[exp(sum_i w_i X^i_T + v Y_T)] = exp(phi(T) + v y0)` the loadings
//! solve, with `S = sum_j psi_j`,
//!
//! ```text
//! psi_i' = -rho_i psi_i + gamma_i Q(S),   phi' = (a - k x0) S + x0 Q0(S) + r v,
//! Q(S)  = -k S + sigma^2 S^2 / 2 + (v^2 - v) / 2 + varrho sigma v S,
//! Q0(S) = Q(S) + k S.
//! ```
//!
//! Values computed here are references for the Monte Carlo schemes, not
//! exact prices.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use super::ode::{integrate, OdeOptions};
use crate::kernels::MultiExpKernel;
use crate::schemes::{CirParams, HestonParams};
use crate::{Error, Result};

/// Relative tolerance of the reference ODE solves.
pub const RTOL: f64 = 1e-10;
/// Allowed disagreement between a solve and its refined repetition.
pub const REFINE_AGREEMENT: f64 = 1e-9;
/// Carr–Madan damping exponent.
pub const DAMPING: f64 = 1.5;
/// Stop extending the Fourier integral once the tail bound is below this.
pub const TAIL_TOL: f64 = 1e-9;

const PANEL: f64 = 2.0;
const GL_POINTS: usize = 24;
const MAX_FREQUENCY: f64 = 5000.0;

/// Loadings at the terminal time.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiState {
    pub phi: Complex64,
    pub psis: Vec<Complex64>,
}

/// Solve the system with `psi_i(0) = w gamma_i` and log-price argument `v`
/// (`v = 0` and `r` unused for the variance-only transform).
fn solve(
    kernel: &MultiExpKernel,
    cir: &CirParams,
    r: f64,
    varrho: f64,
    w: Complex64,
    v: Complex64,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<RiccatiState> {
    let n = kernel.len();
    let gammas = kernel.gammas();
    let rhos = kernel.rhos();
    let CirParams { x0, a, k, sigma } = *cir;
    let s2 = 0.5 * sigma * sigma;
    let quad = 0.5 * (v * v - v);
    let cross = varrho * sigma * v;
    let mut y0: Vec<Complex64> = gammas.iter().map(|g| w * g).collect();
    y0.push(Complex64::new(0.0, 0.0));
    let (y, _) = integrate(
        |_, y, dy| {
            let s: Complex64 = y[..n].iter().sum();
            let q0 = s2 * s * s + quad + cross * s;
            let q = q0 - k * s;
            for i in 0..n {
                dy[i] = -rhos[i] * y[i] + gammas[i] * q;
            }
            dy[n] = (a - k * x0) * s + x0 * q0 + r * v;
        },
        &y0,
        0.0,
        t_end,
        opts,
    )?;
    Ok(RiccatiState {
        phi: y[n],
        psis: y[..n].to_vec(),
    })
}

fn options(rtol: f64) -> OdeOptions {
    OdeOptions {
        rtol,
        atol: rtol * 1e-2,
        ..OdeOptions::default()
    }
}

/// `E[exp(-u X_T)]` for the lifted CIR model started with all factors at 0.
///
/// Solved at relative tolerance [`RTOL`] and again at `RTOL / 32` (the error
/// of a fifth-order step halves the step 32-fold); disagreement above
/// [`REFINE_AGREEMENT`] is reported as a failure.
pub fn laplace_xt(kernel: &MultiExpKernel, params: &CirParams, u: f64, t_end: f64) -> Result<f64> {
    params.validate()?;
    if !(u >= 0.0 && u.is_finite()) || !(t_end >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "need u >= 0 and T >= 0 (got u = {u}, T = {t_end})"
        )));
    }
    let w = Complex64::new(-u, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let eval = |rtol: f64| -> Result<f64> {
        let st = solve(kernel, params, 0.0, 0.0, w, zero, t_end, &options(rtol))?;
        Ok((-u * params.x0 + st.phi.re).exp())
    };
    let coarse = eval(RTOL)?;
    let fine = eval(RTOL / 32.0)?;
    if (coarse - fine).abs() > REFINE_AGREEMENT * fine.abs() {
        return Err(Error::OdeFailure(format!(
            "refined solve disagrees: {coarse} vs {fine}"
        )));
    }
    Ok(fine)
}

/// `E[exp(v Y_T)]` for the lifted Heston model.
pub fn heston_mgf(
    kernel: &MultiExpKernel,
    params: &HestonParams,
    v: Complex64,
    t_end: f64,
) -> Result<Complex64> {
    let st = solve(
        kernel,
        &params.cir,
        params.r,
        params.varrho,
        Complex64::new(0.0, 0.0),
        v,
        t_end,
        &options(RTOL),
    )?;
    Ok((v * params.y0 + st.phi).exp())
}

/// Carr–Madan pricer that caches transform values across strikes.
#[derive(Debug)]
pub struct CallPricer<'a> {
    kernel: &'a MultiExpKernel,
    params: HestonParams,
    t_end: f64,
    rule: GaussLegendre,
    /// Per panel: `(u, e^{-rT} M(iu + alpha + 1) / denominator(u))`.
    panels: Vec<Vec<(f64, Complex64)>>,
}

impl<'a> CallPricer<'a> {
    pub fn new(kernel: &'a MultiExpKernel, params: &HestonParams, t_end: f64) -> Result<Self> {
        params.validate()?;
        if !(t_end > 0.0) {
            return Err(Error::InvalidParams(format!(
                "maturity {t_end} must be positive"
            )));
        }
        Ok(Self {
            kernel,
            params: *params,
            t_end,
            rule: GaussLegendre::new(NonZeroUsize::new(GL_POINTS).expect("nonzero")),
            panels: Vec::new(),
        })
    }

    fn panel(&mut self, j: usize) -> Result<&[(f64, Complex64)]> {
        while self.panels.len() <= j {
            let lo = self.panels.len() as f64 * PANEL;
            let hi = lo + PANEL;
            let mut nodes = Vec::with_capacity(GL_POINTS + 1);
            let pts: Vec<f64> = self
                .rule
                .nodes()
                .map(|x| 0.5 * (lo + hi) + 0.5 * (hi - lo) * x)
                .chain(std::iter::once(hi))
                .collect();
            for u in pts {
                nodes.push((u, self.damped_transform(u)?));
            }
            self.panels.push(nodes);
        }
        Ok(&self.panels[j])
    }

    fn damped_transform(&self, u: f64) -> Result<Complex64> {
        let a = DAMPING;
        let v = Complex64::new(a + 1.0, u);
        let m = heston_mgf(self.kernel, &self.params, v, self.t_end)?;
        let denom = Complex64::new(a * a + a - u * u, (2.0 * a + 1.0) * u);
        Ok((-self.params.r * self.t_end).exp() * m / denom)
    }

    /// Call price at `strike`.
    pub fn price(&mut self, strike: f64) -> Result<f64> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "strike {strike} must be positive"
            )));
        }
        let lk = strike.ln();
        let scale = (-DAMPING * lk).exp() / std::f64::consts::PI;
        let weights: Vec<f64> = self.rule.weights().copied().collect();
        let mut total = 0.0;
        let mut j = 0;
        loop {
            let nodes = self.panel(j)?;
            let mut acc = 0.0;
            for ((u, g), w) in nodes[..GL_POINTS].iter().zip(&weights) {
                acc += w * (Complex64::new(0.0, -u * lk).exp() * g).re;
            }
            total += 0.5 * PANEL * acc;
            let (u_end, g_end) = nodes[GL_POINTS];
            // integrand decays at least like 1/u^2 beyond u_end
            let tail = scale * g_end.norm() * u_end;
            if tail < TAIL_TOL && scale * (0.5 * PANEL * acc).abs() < TAIL_TOL {
                break;
            }
            j += 1;
            if (j as f64) * PANEL > MAX_FREQUENCY {
                return Err(Error::IntegralFailure(format!(
                    "Fourier integral not converged by u = {MAX_FREQUENCY} (tail bound {tail})"
                )));
            }
        }
        Ok((scale * total).max(0.0))
    }
}

/// Call price `E[(e^{Y_T} - K)_+] e^{-rT}` under the lifted Heston model.
pub fn call_price(
    kernel: &MultiExpKernel,
    params: &HestonParams,
    strike: f64,
    t_end: f64,
) -> Result<f64> {
    CallPricer::new(kernel, params, t_end)?.price(strike)
}
