//! Strong splitting scheme for Volterra geometric Brownian motion.
//!
//! Between grid times the approximation only relaxes the past jumps through
//! the kernel, `X(t) = x0 + sum_j delta_j G(t - t_j) / G(0)`. On each step the
//! SDE `d xi = G(0) mu xi dt + G(0) sigma_g xi dW` is started from the
//! pre-jump value and integrated exactly; its increment is the next jump.

use super::GbmParams;
use crate::engine::rng::NoiseSource;
use crate::kernels::{FiniteKernel, Kernel, MultiExpKernel};
use crate::lift::decay_factors;
use crate::{Error, Result};

/// Grid values `X(t_k)`, `k = 0..=N`, together with the jumps `delta_k`
/// (`k = 1..=N`) that generate them.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingPath {
    pub values: Vec<f64>,
    pub jumps: Vec<f64>,
}

impl SplittingPath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path has the initial point")
    }

    /// The piecewise approximation `X(t) = x0 + sum_{t_j <= t} delta_j G(t - t_j) / G(0)`
    /// between grid times, with jump `j` at `t_{j+1} = (j + 1) dt`.
    pub fn value_at<K: FiniteKernel + ?Sized>(&self, kernel: &K, x0: f64, dt: f64, t: f64) -> f64 {
        let g0 = kernel.at_zero();
        // tolerate rounding in t at a grid node
        let eps = 1e-9 * dt;
        x0 + self
            .jumps
            .iter()
            .enumerate()
            .take_while(|(j, _)| (*j + 1) as f64 * dt <= t + eps)
            .map(|(j, d)| d * kernel.value((t - (j + 1) as f64 * dt).max(0.0)) / g0)
            .sum::<f64>()
    }

    /// [`value_at`](Self::value_at) at the `sub`-fold refined times
    /// `m dt / sub`, `m = 0..=N sub`, through the factor recursion.
    pub fn refined_values(
        &self,
        kernel: &MultiExpKernel,
        x0: f64,
        dt: f64,
        sub: usize,
    ) -> Vec<f64> {
        let h = dt / sub as f64;
        let g0 = kernel.g0();
        let decay = decay_factors(kernel, h);
        let mut factors = vec![0.0; kernel.len()];
        let mut out = Vec::with_capacity(self.jumps.len() * sub + 1);
        out.push(x0);
        for delta in &self.jumps {
            for m in 1..=sub {
                for (f, d) in factors.iter_mut().zip(&decay) {
                    *f *= d;
                }
                if m == sub {
                    factors.iter_mut().for_each(|f| *f += delta / g0);
                }
                out.push(
                    x0 + factors
                        .iter()
                        .zip(kernel.gammas())
                        .map(|(f, g)| g * f)
                        .sum::<f64>(),
                );
            }
        }
        out
    }
}

/// Exact GBM flow with coefficients scaled by `G(0)`.
#[derive(Debug, Clone, Copy)]
struct ExactGbm {
    drift: f64,
    vol: f64,
}

impl ExactGbm {
    fn new(params: &GbmParams, g0: f64, dt: f64) -> Self {
        let s = g0 * params.sigma_g;
        Self {
            drift: (g0 * params.mu - 0.5 * s * s) * dt,
            vol: s,
        }
    }

    #[inline]
    fn apply(&self, x: f64, dw: f64) -> f64 {
        x * (self.drift + self.vol * dw).exp()
    }
}

#[derive(Debug, Clone)]
enum Representation {
    /// Factor recursion for a multi-exponential kernel.
    Factors { gammas: Vec<f64>, decay: Vec<f64> },
    /// `lags[m - 1] = G(m dt) / G(0)`.
    Convolution { lags: Vec<f64> },
}

/// Precomputed splitting scheme for a kernel and a grid.
#[derive(Debug, Clone)]
pub struct SplittingPlan {
    n: usize,
    dt: f64,
    g0: f64,
    repr: Representation,
}

fn check_grid(t_end: f64, n: usize) -> Result<f64> {
    if n == 0 || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "need N >= 1 and T > 0 (got N = {n}, T = {t_end})"
        )));
    }
    Ok(t_end / n as f64)
}

impl SplittingPlan {
    /// Factor fast path for multi-exponential kernels, convolution otherwise.
    pub fn new(kernel: &Kernel, t_end: f64, n: usize) -> Result<Self> {
        match kernel {
            Kernel::MultiExp(k) => Self::factors(k, t_end, n),
            Kernel::ExpSum(k) => Self::convolution(k, t_end, n),
            Kernel::Fractional(_) => match kernel.g0() {
                Some(g0) => Self::convolution(&move |_: f64| g0, t_end, n),
                None => Err(Error::InvalidKernel(
                    "the splitting scheme needs a finite G(0)".into(),
                )),
            },
        }
    }

    pub fn factors(kernel: &MultiExpKernel, t_end: f64, n: usize) -> Result<Self> {
        let dt = check_grid(t_end, n)?;
        Ok(Self {
            n,
            dt,
            g0: kernel.g0(),
            repr: Representation::Factors {
                gammas: kernel.gammas().to_vec(),
                decay: decay_factors(kernel, dt),
            },
        })
    }

    pub fn convolution<K: FiniteKernel + ?Sized>(kernel: &K, t_end: f64, n: usize) -> Result<Self> {
        let dt = check_grid(t_end, n)?;
        let g0 = kernel.at_zero();
        if !(g0 > 0.0 && g0.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "G(0) = {g0} must be finite and positive"
            )));
        }
        Ok(Self {
            n,
            dt,
            g0,
            repr: Representation::Convolution {
                lags: (1..=n).map(|m| kernel.value(m as f64 * dt) / g0).collect(),
            },
        })
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Run the scheme; `draw(k)` supplies the Brownian increment of step `k`.
    fn simulate<F: FnMut(usize) -> f64>(
        &self,
        params: &GbmParams,
        record: bool,
        mut draw: F,
    ) -> SplittingPath {
        let flow = ExactGbm::new(params, self.g0, self.dt);
        let cap = if record { self.n } else { 0 };
        let mut values = Vec::with_capacity(cap + 1);
        let mut jumps = Vec::with_capacity(self.n);
        values.push(params.x0);
        let mut last = params.x0;
        match &self.repr {
            Representation::Factors { gammas, decay } => {
                let mut factors = vec![0.0; gammas.len()];
                for k in 0..self.n {
                    let mut pre = params.x0;
                    for ((f, d), g) in factors.iter_mut().zip(decay).zip(gammas) {
                        *f *= d;
                        pre += g * *f;
                    }
                    let xi = flow.apply(pre, draw(k));
                    let delta = xi - pre;
                    let shift = delta / self.g0;
                    for f in &mut factors {
                        *f += shift;
                    }
                    jumps.push(delta);
                    last = xi;
                    if record {
                        values.push(xi);
                    }
                }
            }
            Representation::Convolution { lags } => {
                for k in 0..self.n {
                    // jump j happened at t_{j+1}: X(t_{k+1}-) = x0 + sum_{j < k} delta_j G((k - j) dt) / G(0)
                    let pre = params.x0
                        + jumps
                            .iter()
                            .enumerate()
                            .map(|(j, d)| d * lags[k - 1 - j])
                            .sum::<f64>();
                    let xi = flow.apply(pre, draw(k));
                    jumps.push(xi - pre);
                    last = xi;
                    if record {
                        values.push(xi);
                    }
                }
            }
        }
        if !record {
            values[0] = last;
        }
        SplittingPath { values, jumps }
    }

    pub fn path(&self, params: &GbmParams, dw: &[f64]) -> Result<SplittingPath> {
        if dw.len() != self.n {
            return Err(Error::InvalidParams(format!(
                "expected {} increments, got {}",
                self.n,
                dw.len()
            )));
        }
        Ok(self.simulate(params, true, |k| dw[k]))
    }

    /// Terminal value, drawing one normal per step.
    pub fn run<R: NoiseSource + ?Sized>(&self, params: &GbmParams, noise: &mut R) -> f64 {
        let sd = self.dt.sqrt();
        self.simulate(params, false, |_| sd * noise.normal()).values[0]
    }
}

/// Splitting path on the grid `k T / N`; multi-exponential kernels use the
/// factor recursion, everything else the jump convolution.
pub fn splitting_strong_path_gbm(
    kernel: &Kernel,
    params: &GbmParams,
    t_end: f64,
    n: usize,
    dw: &[f64],
) -> Result<SplittingPath> {
    SplittingPlan::new(kernel, t_end, n)?.path(params, dw)
}

/// Same scheme through the `O(N^2)` jump convolution, for any kernel.
pub fn splitting_path_convolution<K: FiniteKernel + ?Sized>(
    kernel: &K,
    params: &GbmParams,
    t_end: f64,
    n: usize,
    dw: &[f64],
) -> Result<SplittingPath> {
    SplittingPlan::convolution(kernel, t_end, n)?.path(params, dw)
}

/// Two splitting paths driven by the same increments.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledGbm {
    pub lower: SplittingPath,
    pub upper: SplittingPath,
    /// Grid nodes where `lower > upper + 1e-12`.
    pub violations: usize,
}

pub fn comparison_coupled_gbm(
    kernel: &Kernel,
    lower: &GbmParams,
    upper: &GbmParams,
    t_end: f64,
    n: usize,
    dw: &[f64],
) -> Result<CoupledGbm> {
    if lower.mu > upper.mu || lower.sigma_g != upper.sigma_g || lower.x0 != upper.x0 {
        return Err(Error::InvalidParams(
            "comparison needs mu1 <= mu2 with shared sigma_g and x0".into(),
        ));
    }
    let plan = SplittingPlan::new(kernel, t_end, n)?;
    let lo = plan.path(lower, dw)?;
    let hi = plan.path(upper, dw)?;
    let violations = lo
        .values
        .iter()
        .zip(&hi.values)
        .filter(|(a, b)| **a > **b + 1e-12)
        .count();
    Ok(CoupledGbm {
        lower: lo,
        upper: hi,
        violations,
    })
}
