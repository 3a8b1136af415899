//! Full-truncation Euler baselines.
//!
//! The Volterra scheme convolves the Euler increments with the kernel on the
//! grid lags, at `O(N^2)` cost per path. For a multi-exponential kernel the
//! same numbers come out of the lifted recursion
//! `X^i_l = e^{-rho_i dt} (X^i_{l-1} + incr_{l-1})` at `O(N n)` cost.

use super::{Terminal, VolModel};
use crate::engine::rng::NoiseSource;
use crate::kernels::{Kernel, MultiExpKernel};
use crate::lift::decay_factors;
use crate::{Error, Result};

/// Brownian increments on a uniform grid; `dw_perp` drives the log-price and
/// may be empty for variance-only models.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    pub dw: Vec<f64>,
    pub dw_perp: Vec<f64>,
}

impl BrownianIncrements {
    /// Draw `n` steps of size `dt`; per step one normal for `dw`, then one
    /// for `dw_perp` when `with_perp` is set.
    pub fn sample<R: NoiseSource + ?Sized>(
        noise: &mut R,
        n: usize,
        dt: f64,
        with_perp: bool,
    ) -> Self {
        let sd = dt.sqrt();
        let mut dw = Vec::with_capacity(n);
        let mut dw_perp = Vec::with_capacity(if with_perp { n } else { 0 });
        for _ in 0..n {
            dw.push(sd * noise.normal());
            if with_perp {
                dw_perp.push(sd * noise.normal());
            }
        }
        Self { dw, dw_perp }
    }

    pub fn len(&self) -> usize {
        self.dw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dw.is_empty()
    }

    fn check(&self, n: usize, model: &VolModel) -> Result<()> {
        if self.dw.len() != n {
            return Err(Error::InvalidParams(format!(
                "expected {n} increments, got {}",
                self.dw.len()
            )));
        }
        if model.heston().is_some() && self.dw_perp.len() != n {
            return Err(Error::InvalidParams(format!(
                "Heston paths need {n} orthogonal increments, got {}",
                self.dw_perp.len()
            )));
        }
        Ok(())
    }

    fn at(&self, l: usize) -> (f64, f64) {
        (self.dw[l], self.dw_perp.get(l).copied().unwrap_or(0.0))
    }
}

/// Grid values of an Euler path.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerTrajectory {
    pub spots: Vec<f64>,
    pub log_prices: Option<Vec<f64>>,
}

impl EulerTrajectory {
    pub fn terminal(&self) -> Terminal {
        Terminal {
            spot: *self.spots.last().expect("trajectory has the initial point"),
            log_price: self.log_prices.as_ref().and_then(|y| y.last().copied()),
        }
    }
}

/// Shared per-step arithmetic: the Euler increment of the spot and the
/// log-price update, both with `(x)_+` inside.
struct Stepper {
    a: f64,
    k: f64,
    sigma: f64,
    dt: f64,
    log: Option<(f64, f64, f64)>,
}

impl Stepper {
    fn new(model: &VolModel, dt: f64) -> Self {
        let p = model.cir();
        Self {
            a: p.a,
            k: p.k,
            sigma: p.sigma,
            dt,
            log: model
                .heston()
                .map(|h| (h.r, h.varrho, (1.0 - h.varrho * h.varrho).max(0.0).sqrt())),
        }
    }

    #[inline]
    fn increment(&self, x: f64, dw: f64) -> f64 {
        let xp = x.max(0.0);
        (self.a - self.k * xp) * self.dt + self.sigma * xp.sqrt() * dw
    }

    #[inline]
    fn log_price(&self, y: f64, x: f64, dw: f64, dw_perp: f64) -> f64 {
        let (r, rho, rho_bar) = self.log.expect("log-price requested for a Heston model");
        let xp = x.max(0.0);
        y + (r - 0.5 * xp) * self.dt + xp.sqrt() * (rho * dw + rho_bar * dw_perp)
    }

    fn draw<R: NoiseSource + ?Sized>(&self, noise: &mut R) -> (f64, f64) {
        let sd = self.dt.sqrt();
        let dw = sd * noise.normal();
        let dwp = if self.log.is_some() {
            sd * noise.normal()
        } else {
            0.0
        };
        (dw, dwp)
    }
}

fn check_grid(t_end: f64, n: usize) -> Result<f64> {
    if n == 0 || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "need N >= 1 and T > 0 (got N = {n}, T = {t_end})"
        )));
    }
    Ok(t_end / n as f64)
}

/// Volterra Euler for any kernel evaluable at the positive grid lags.
#[derive(Debug, Clone)]
pub struct VolterraEulerPlan {
    n: usize,
    dt: f64,
    /// `lags[m - 1] = G(m dt)`.
    lags: Vec<f64>,
}

impl VolterraEulerPlan {
    pub fn new(kernel: &Kernel, t_end: f64, n: usize) -> Result<Self> {
        let dt = check_grid(t_end, n)?;
        let lags = (1..=n)
            .map(|m| kernel.eval(m as f64 * dt))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, dt, lags })
    }

    fn simulate<F: FnMut(usize) -> (f64, f64)>(
        &self,
        model: &VolModel,
        record: bool,
        mut draw: F,
    ) -> EulerTrajectory {
        let x0 = model.cir().x0;
        let st = Stepper::new(model, self.dt);
        let heston = model.heston();
        let mut incr = Vec::with_capacity(self.n);
        let mut spots = Vec::with_capacity(if record { self.n + 1 } else { 1 });
        let mut ys = Vec::new();
        let mut x = x0;
        let mut y = heston.map_or(0.0, |h| h.y0);
        spots.push(x);
        if heston.is_some() {
            ys.push(y);
        }
        for l in 0..self.n {
            let (dw, dwp) = draw(l);
            incr.push(st.increment(x, dw));
            if heston.is_some() {
                y = st.log_price(y, x, dw, dwp);
            }
            // X_{l+1} = x0 + sum_{j <= l} G((l + 1 - j) dt) incr_j
            let conv: f64 = incr
                .iter()
                .enumerate()
                .map(|(j, v)| self.lags[l - j] * v)
                .sum();
            x = x0 + conv;
            if record {
                spots.push(x);
                if heston.is_some() {
                    ys.push(y);
                }
            }
        }
        if !record {
            spots[0] = x;
            if heston.is_some() {
                ys[0] = y;
            }
        }
        EulerTrajectory {
            spots,
            log_prices: heston.map(|_| ys),
        }
    }

    pub fn trajectory(
        &self,
        model: &VolModel,
        inc: &BrownianIncrements,
    ) -> Result<EulerTrajectory> {
        model.validate()?;
        inc.check(self.n, model)?;
        Ok(self.simulate(model, true, |l| inc.at(l)))
    }

    pub fn run<R: NoiseSource + ?Sized>(&self, model: &VolModel, noise: &mut R) -> Terminal {
        let st = Stepper::new(model, self.dt);
        self.simulate(model, false, |_| st.draw(noise)).terminal()
    }
}

/// Euler scheme on the lifted factors of a multi-exponential kernel.
#[derive(Debug, Clone)]
pub struct LiftedEulerPlan<'a> {
    kernel: &'a MultiExpKernel,
    n: usize,
    dt: f64,
    decay: Vec<f64>,
}

impl<'a> LiftedEulerPlan<'a> {
    pub fn new(kernel: &'a MultiExpKernel, t_end: f64, n: usize) -> Result<Self> {
        let dt = check_grid(t_end, n)?;
        Ok(Self {
            kernel,
            n,
            dt,
            decay: decay_factors(kernel, dt),
        })
    }

    fn simulate<F: FnMut(usize) -> (f64, f64)>(
        &self,
        model: &VolModel,
        record: bool,
        mut draw: F,
    ) -> EulerTrajectory {
        let x0 = model.cir().x0;
        let st = Stepper::new(model, self.dt);
        let heston = model.heston();
        let gammas = self.kernel.gammas();
        let mut factors = vec![0.0; self.kernel.len()];
        let mut spots = Vec::with_capacity(if record { self.n + 1 } else { 1 });
        let mut ys = Vec::new();
        let mut x = x0;
        let mut y = heston.map_or(0.0, |h| h.y0);
        spots.push(x);
        if heston.is_some() {
            ys.push(y);
        }
        for l in 0..self.n {
            let (dw, dwp) = draw(l);
            let v = st.increment(x, dw);
            if heston.is_some() {
                y = st.log_price(y, x, dw, dwp);
            }
            let mut s = 0.0;
            for ((f, d), g) in factors.iter_mut().zip(&self.decay).zip(gammas) {
                *f = d * (*f + v);
                s += g * *f;
            }
            x = x0 + s;
            if record {
                spots.push(x);
                if heston.is_some() {
                    ys.push(y);
                }
            }
        }
        if !record {
            spots[0] = x;
            if heston.is_some() {
                ys[0] = y;
            }
        }
        EulerTrajectory {
            spots,
            log_prices: heston.map(|_| ys),
        }
    }

    pub fn trajectory(
        &self,
        model: &VolModel,
        inc: &BrownianIncrements,
    ) -> Result<EulerTrajectory> {
        model.validate()?;
        inc.check(self.n, model)?;
        Ok(self.simulate(model, true, |l| inc.at(l)))
    }

    pub fn run<R: NoiseSource + ?Sized>(&self, model: &VolModel, noise: &mut R) -> Terminal {
        let st = Stepper::new(model, self.dt);
        self.simulate(model, false, |_| st.draw(noise)).terminal()
    }
}

pub fn euler_volterra_trajectory(
    kernel: &Kernel,
    model: &VolModel,
    t_end: f64,
    n: usize,
    inc: &BrownianIncrements,
) -> Result<EulerTrajectory> {
    VolterraEulerPlan::new(kernel, t_end, n)?.trajectory(model, inc)
}

pub fn euler_volterra_path(
    kernel: &Kernel,
    model: &VolModel,
    t_end: f64,
    n: usize,
    inc: &BrownianIncrements,
) -> Result<Terminal> {
    Ok(euler_volterra_trajectory(kernel, model, t_end, n, inc)?.terminal())
}

pub fn euler_lifted_trajectory(
    kernel: &MultiExpKernel,
    model: &VolModel,
    t_end: f64,
    n: usize,
    inc: &BrownianIncrements,
) -> Result<EulerTrajectory> {
    LiftedEulerPlan::new(kernel, t_end, n)?.trajectory(model, inc)
}

pub fn euler_lifted_path(
    kernel: &MultiExpKernel,
    model: &VolModel,
    t_end: f64,
    n: usize,
    inc: &BrownianIncrements,
) -> Result<Terminal> {
    Ok(euler_lifted_trajectory(kernel, model, t_end, n, inc)?.terminal())
}
