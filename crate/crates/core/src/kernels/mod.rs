//! Convolution kernels and nonnegativity-preservation analysis.
//!
//! A kernel `G` preserves nonnegativity when nonnegative checkpoint sums
//! `sum_{k' <= k} x_{k'} G(t_k - t_{k'}) >= 0` at jump times force
//! `sum_{t_k <= t} x_k G(t - t_k) >= 0` at all later times. This holds if and
//! only if every function `G_l` of the [`gl`] module is nonnegative, which is
//! the case for completely monotone kernels such as [`MultiExpKernel`].

mod check;
mod gl;
mod resolvent;

pub use check::{check_preserves_nonnegativity, CheckReport, Counterexample, DepthRow, Verdict};
pub use gl::{
    g_l_bruteforce, g_l_bruteforce_capped, g_l_fast, worst_case_strategy, StrategyPath, TimeTuple,
    DEFAULT_BRUTEFORCE_CAP,
};
pub use resolvent::{discrete_resolvent, DiscreteResolvent};

use crate::{Error, Result};
use statrs::function::gamma::gamma;

/// A kernel with a finite, strictly positive value at the origin.
///
/// Everything that reasons about checkpoint sums (`G_l`, worst-case
/// strategies, resolvents, the splitting scheme) is written against this
/// trait.
pub trait FiniteKernel: Sync {
    fn value(&self, t: f64) -> f64;

    fn at_zero(&self) -> f64 {
        self.value(0.0)
    }
}

impl<F: Fn(f64) -> f64 + Sync> FiniteKernel for F {
    fn value(&self, t: f64) -> f64 {
        self(t)
    }
}

/// `G(t) = sum_i w_i exp(-r_i t)` with arbitrary signs and rates.
///
/// Used for analysis only (e.g. the non-preserving `2e^{-t} - e^{-2t}`, or
/// exponentially tilted kernels). Only `G(0) > 0` is required.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSumKernel {
    weights: Vec<f64>,
    rates: Vec<f64>,
}

impl ExpSumKernel {
    pub fn new(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != rates.len() {
            return Err(Error::InvalidKernel(format!(
                "need the same nonzero number of weights and rates, got {} and {}",
                weights.len(),
                rates.len()
            )));
        }
        if weights.iter().chain(&rates).any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("non-finite coefficient".into()));
        }
        let g0: f64 = weights.iter().sum();
        if g0 <= 0.0 {
            return Err(Error::InvalidKernel(format!(
                "G(0) = {g0} must be positive"
            )));
        }
        Ok(Self { weights, rates })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// The kernel `t -> G(t) exp(-shift t)`.
    pub fn tilted(&self, shift: f64) -> Self {
        Self {
            weights: self.weights.clone(),
            rates: self.rates.iter().map(|r| r + shift).collect(),
        }
    }
}

impl FiniteKernel for ExpSumKernel {
    fn value(&self, t: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.rates)
            .map(|(w, r)| w * (-r * t).exp())
            .sum()
    }

    fn at_zero(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Discrete completely monotone kernel `G(t) = sum_i gamma_i exp(-rho_i t)`
/// with `gamma_i > 0` and `0 <= rho_1 < ... < rho_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiExpKernel {
    gammas: Vec<f64>,
    rhos: Vec<f64>,
    g0: f64,
}

impl MultiExpKernel {
    pub fn new(gammas: Vec<f64>, rhos: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() || gammas.len() != rhos.len() {
            return Err(Error::InvalidKernel(format!(
                "need the same nonzero number of gammas and rhos, got {} and {}",
                gammas.len(),
                rhos.len()
            )));
        }
        if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidKernel(format!(
                "gamma {g} is not strictly positive"
            )));
        }
        if !(rhos[0].is_finite() && rhos[0] >= 0.0) {
            return Err(Error::InvalidKernel(format!(
                "rho_1 = {} must be >= 0",
                rhos[0]
            )));
        }
        if rhos.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidKernel(
                "rhos must be strictly increasing".into(),
            ));
        }
        let g0 = gammas.iter().sum();
        Ok(Self { gammas, rhos, g0 })
    }

    /// Five-factor approximation of the `H = 0.4` fractional kernel used for
    /// the weak-order experiments (preset name `paper-n5`).
    pub fn five_factor_h04() -> Self {
        Self::new(
            vec![0.95998879, 0.06890172, 0.04257523, 0.03127181, 0.02488347],
            vec![0.06588906, 1.04979236, 1.78996945, 2.52111261, 3.24938890],
        )
        .expect("preset coefficients are valid")
    }

    /// `G(t) = lambda exp(-rho t)`.
    pub fn single(lambda: f64, rho: f64) -> Result<Self> {
        Self::new(vec![lambda], vec![rho])
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `G(0) = sum_i gamma_i`.
    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.gammas
            .iter()
            .zip(&self.rhos)
            .map(|(g, r)| g * (-r * t).exp())
            .sum()
    }

    pub fn to_exp_sum(&self) -> ExpSumKernel {
        ExpSumKernel {
            weights: self.gammas.clone(),
            rates: self.rhos.clone(),
        }
    }
}

impl FiniteKernel for MultiExpKernel {
    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn at_zero(&self) -> f64 {
        self.g0
    }
}

/// Fractional kernel `G_H(t) = t^{H - 1/2} / Gamma(H + 1/2)`, `H in (0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalKernel {
    hurst: f64,
    norm: f64,
}

impl FractionalKernel {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst <= 0.5) {
            return Err(Error::InvalidKernel(format!(
                "Hurst index {hurst} outside (0, 1/2]"
            )));
        }
        Ok(Self {
            hurst,
            norm: 1.0 / gamma(hurst + 0.5),
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::KernelDomain(t));
        }
        Ok(t.powf(self.hurst - 0.5) * self.norm)
    }
}

/// Any kernel the crate can simulate with.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    MultiExp(MultiExpKernel),
    ExpSum(ExpSumKernel),
    Fractional(FractionalKernel),
}

impl Kernel {
    /// `G(t)`; fractional kernels reject `t = 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::KernelDomain(t));
        }
        match self {
            Kernel::MultiExp(k) => Ok(k.eval(t)),
            Kernel::ExpSum(k) => Ok(k.value(t)),
            Kernel::Fractional(k) => k.eval(t),
        }
    }

    /// `G(0)` when finite.
    pub fn g0(&self) -> Option<f64> {
        match self {
            Kernel::MultiExp(k) => Some(k.g0()),
            Kernel::ExpSum(k) => Some(k.at_zero()),
            Kernel::Fractional(k) if k.hurst() == 0.5 => Some(1.0),
            Kernel::Fractional(_) => None,
        }
    }

    pub fn as_multi_exp(&self) -> Option<&MultiExpKernel> {
        match self {
            Kernel::MultiExp(k) => Some(k),
            _ => None,
        }
    }
}

impl From<MultiExpKernel> for Kernel {
    fn from(k: MultiExpKernel) -> Self {
        Kernel::MultiExp(k)
    }
}

impl From<ExpSumKernel> for Kernel {
    fn from(k: ExpSumKernel) -> Self {
        Kernel::ExpSum(k)
    }
}

impl From<FractionalKernel> for Kernel {
    fn from(k: FractionalKernel) -> Self {
        Kernel::Fractional(k)
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &["paper-n5", "exp", "signed-counterexample"];

/// Kernel presets by name.
///
/// * `paper-n5` — five-factor fit of the `H = 0.4` fractional kernel;
/// * `exp` — `e^{-t}`;
/// * `signed-counterexample` — `2e^{-t} - e^{-2t}`, decreasing and positive
///   but not nonnegativity preserving.
pub fn preset(name: &str) -> Result<Kernel> {
    match name {
        "paper-n5" => Ok(MultiExpKernel::five_factor_h04().into()),
        "exp" => Ok(MultiExpKernel::single(1.0, 1.0)?.into()),
        "signed-counterexample" => Ok(ExpSumKernel::new(vec![2.0, -1.0], vec![1.0, 2.0])?.into()),
        other => Err(Error::InvalidKernel(format!(
            "unknown preset `{other}` (known: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Build a kernel from explicit weight/rate lists. Positive weights with
/// strictly increasing nonnegative rates give a [`MultiExpKernel`]; anything
/// else falls back to an [`ExpSumKernel`].
pub fn from_lists(gammas: Vec<f64>, rhos: Vec<f64>) -> Result<Kernel> {
    match MultiExpKernel::new(gammas.clone(), rhos.clone()) {
        Ok(k) => Ok(k.into()),
        Err(_) => Ok(ExpSumKernel::new(gammas, rhos)?.into()),
    }
}
