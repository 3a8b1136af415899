//! Simulation schemes for multi-exponential stochastic Volterra equations.
//!
//! * [`cir`] — moment-matching one-step map for the square-root diffusion;
//! * [`second_order`] — the composed `psi1(t/2) . psi2(t) . psi1(t/2)` steps
//!   for the multifactor CIR and Heston models;
//! * [`euler`] — Volterra Euler (`O(N^2)`) and the equivalent lifted Euler
//!   (`O(N n)`) baselines with full truncation;
//! * [`splitting`] — strong splitting scheme for Volterra geometric Brownian
//!   motion with an exact inner step.

pub mod cir;
pub mod euler;
pub mod second_order;
pub mod splitting;

use std::fmt;
use std::str::FromStr;

pub use cir::{cir_inner_step, cir_moments, threshold_k2, zeta, CirCoefficients, CirStep};
pub use euler::{
    euler_lifted_path, euler_lifted_trajectory, euler_volterra_path, euler_volterra_trajectory,
    BrownianIncrements, EulerTrajectory, LiftedEulerPlan, VolterraEulerPlan,
};
pub use second_order::{
    heston_step, multifactor_cir_step, second_order_cir_trajectory, second_order_path,
    SecondOrderScheme, SecondOrderTrajectory,
};
pub use splitting::{
    comparison_coupled_gbm, splitting_path_convolution, splitting_strong_path_gbm, CoupledGbm,
    SplittingPath, SplittingPlan,
};

use crate::{Error, Result};

/// Volterra CIR coefficients: `X = x0 + int G (a - k X) ds + int G sigma sqrt(X) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    pub x0: f64,
    pub a: f64,
    pub k: f64,
    pub sigma: f64,
}

impl CirParams {
    pub fn new(x0: f64, a: f64, k: f64, sigma: f64) -> Result<Self> {
        let p = Self { x0, a, k, sigma };
        p.validate()?;
        Ok(p)
    }

    /// `x0 = 0.02, a = 0.02, k = 0.3, sigma = 0.3`.
    pub fn rough_heston_defaults() -> Self {
        Self {
            x0: 0.02,
            a: 0.02,
            k: 0.3,
            sigma: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 >= 0.0 && self.a >= 0.0 && self.sigma > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "CIR needs x0 >= 0, a >= 0, sigma > 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Lifted Heston: CIR variance plus log-price
/// `dY = (r - X/2) dt + sqrt(X) (varrho dW + sqrt(1 - varrho^2) dW_perp)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub cir: CirParams,
    pub r: f64,
    pub varrho: f64,
    pub y0: f64,
}

impl HestonParams {
    pub fn new(cir: CirParams, r: f64, varrho: f64, y0: f64) -> Result<Self> {
        let p = Self { cir, r, varrho, y0 };
        p.validate()?;
        Ok(p)
    }

    /// Rough Heston test case: CIR defaults, `varrho = -0.7`, `S0 = 1`, `r = 0`.
    pub fn rough_heston_defaults() -> Self {
        Self {
            cir: CirParams::rough_heston_defaults(),
            r: 0.0,
            varrho: -0.7,
            y0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cir.validate()?;
        if !(self.varrho.abs() <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "|varrho| = {} > 1",
                self.varrho.abs()
            )));
        }
        Ok(())
    }
}

/// Volterra geometric Brownian motion
/// `X = x0 + int G mu X ds + int G sigma_g X dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    pub x0: f64,
    pub mu: f64,
    pub sigma_g: f64,
}

impl GbmParams {
    pub fn new(x0: f64, mu: f64, sigma_g: f64) -> Result<Self> {
        if !(x0 > 0.0 && sigma_g >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "GBM needs x0 > 0 and sigma_g >= 0 (got x0 = {x0}, sigma_g = {sigma_g})"
            )));
        }
        Ok(Self { x0, mu, sigma_g })
    }
}

/// Variance model simulated by the second-order and Euler schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolModel {
    Cir(CirParams),
    Heston(HestonParams),
}

impl VolModel {
    pub fn cir(&self) -> &CirParams {
        match self {
            VolModel::Cir(p) => p,
            VolModel::Heston(p) => &p.cir,
        }
    }

    pub fn heston(&self) -> Option<&HestonParams> {
        match self {
            VolModel::Heston(p) => Some(p),
            VolModel::Cir(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            VolModel::Cir(p) => p.validate(),
            VolModel::Heston(p) => p.validate(),
        }
    }
}

/// Noise consumed by one Heston step: a uniform for the variance, a normal
/// and a fair coin for the log-price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepNoise {
    pub u: f64,
    pub z: f64,
    pub b: u8,
}

/// Terminal values of a simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terminal {
    pub spot: f64,
    pub log_price: Option<f64>,
}

/// Model selector (`cir`, `heston`, `gbm`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Cir,
    Heston,
    Gbm,
}

/// Scheme selector (`second-order`, `euler-volterra`, `euler-lifted`, `splitting-gbm`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    SecondOrder,
    EulerVolterra,
    EulerLifted,
    SplittingGbm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Cir, ModelKind::Heston, ModelKind::Gbm];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Cir => "cir",
            ModelKind::Heston => "heston",
            ModelKind::Gbm => "gbm",
        }
    }
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::SecondOrder,
        SchemeKind::EulerVolterra,
        SchemeKind::EulerLifted,
        SchemeKind::SplittingGbm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::SecondOrder => "second-order",
            SchemeKind::EulerVolterra => "euler-volterra",
            SchemeKind::EulerLifted => "euler-lifted",
            SchemeKind::SplittingGbm => "splitting-gbm",
        }
    }

    /// Models this scheme can simulate.
    pub fn supports(&self, model: ModelKind) -> bool {
        matches!(
            (self, model),
            (SchemeKind::SecondOrder, ModelKind::Cir | ModelKind::Heston)
                | (
                    SchemeKind::EulerVolterra,
                    ModelKind::Cir | ModelKind::Heston
                )
                | (SchemeKind::EulerLifted, ModelKind::Cir | ModelKind::Heston)
                | (SchemeKind::SplittingGbm, ModelKind::Gbm)
        )
    }
}

/// Human-readable list of valid scheme/model pairs.
pub fn valid_pairs() -> String {
    let mut out = Vec::new();
    for s in SchemeKind::ALL {
        for m in ModelKind::ALL {
            if s.supports(m) {
                out.push(format!("{}/{}", s.as_str(), m.as_str()));
            }
        }
    }
    out.join(", ")
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}` (cir, heston, gbm)")))
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                "unknown scheme `{s}` (second-order, euler-volterra, euler-lifted, splitting-gbm)"
            ))
            })
    }
}
