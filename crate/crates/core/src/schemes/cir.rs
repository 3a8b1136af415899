//! Moment-matching one-step map for `d xi = (abar - kbar xi) dt + sigbar sqrt(xi) dW`.
//!
//! Above the threshold `K2(t)` the step is the exact flow of a squared
//! Gaussian surrogate driven by a three-point variable; below it a two-point
//! law matches the first two moments exactly. Both branches are nonnegative.

use super::CirParams;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// `zeta_k(t) = (1 - e^{-kt}) / k`, with `zeta_0(t) = t`.
pub fn zeta(k: f64, t: f64) -> f64 {
    let kt = k * t;
    if kt.abs() < 1e-8 {
        // t (1 - kt/2 + (kt)^2/6)
        t * (1.0 - 0.5 * kt + kt * kt / 6.0)
    } else {
        -(-kt).exp_m1() / k
    }
}

/// First two moments `(u1, u2)` of the CIR process after time `t` from `x`.
pub fn cir_moments(abar: f64, kbar: f64, sigbar: f64, x: f64, t: f64) -> (f64, f64) {
    let z = zeta(kbar, t);
    let ex = x * (-kbar * t).exp();
    let u1 = ex + abar * z;
    let u2 = u1 * u1 + sigbar * sigbar * z * (0.5 * abar * z + ex);
    (u1, u2)
}

/// Threshold above which the three-point branch is used.
pub fn threshold_k2(abar: f64, kbar: f64, sigbar: f64, t: f64) -> f64 {
    let s2 = sigbar * sigbar;
    if s2 <= 4.0 * abar {
        return 0.0;
    }
    let c = (0.25 * s2 - abar) * zeta(kbar, 0.5 * t);
    let e = (0.5 * kbar * t).exp();
    let r = (e * c).sqrt() + 0.5 * sigbar * (3.0 * t).sqrt();
    e * (c + r * r)
}

/// Three-point variable: `sqrt(3)` w.p. 1/6, `0` w.p. 2/3, `-sqrt(3)` w.p. 1/6.
pub(crate) fn three_point(u: f64) -> f64 {
    if u > 5.0 / 6.0 {
        SQRT3
    } else if u <= 1.0 / 6.0 {
        -SQRT3
    } else {
        0.0
    }
}

/// One step of the scheme with scaled coefficients, from `x >= 0` over `t > 0`.
pub fn cir_inner_step(abar: f64, kbar: f64, sigbar: f64, x: f64, t: f64, u: f64) -> f64 {
    CirStep::with_coefficients(CirCoefficients { abar, kbar, sigbar }, t).apply(x, u)
}

/// Coefficients of the CIR dynamics seen by the spot during one inner step:
/// `abar = G(0) a`, `kbar = G(0) k`, `sigbar = G(0) sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirCoefficients {
    pub abar: f64,
    pub kbar: f64,
    pub sigbar: f64,
}

impl CirCoefficients {
    pub fn scaled(params: &CirParams, g0: f64) -> Self {
        Self {
            abar: g0 * params.a,
            kbar: g0 * params.k,
            sigbar: g0 * params.sigma,
        }
    }
}

/// The inner step for a fixed `t`, with every `x`-independent quantity
/// precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirStep {
    pub coeffs: CirCoefficients,
    pub t: f64,
    sqrt_t: f64,
    e_full: f64,
    e_half: f64,
    zeta_full: f64,
    drift_half: f64,
    k2: f64,
}

impl CirStep {
    pub fn with_coefficients(coeffs: CirCoefficients, t: f64) -> Self {
        let CirCoefficients { abar, kbar, sigbar } = coeffs;
        Self {
            coeffs,
            t,
            sqrt_t: t.sqrt(),
            e_full: (-kbar * t).exp(),
            e_half: (-0.5 * kbar * t).exp(),
            zeta_full: zeta(kbar, t),
            drift_half: (abar - 0.25 * sigbar * sigbar) * zeta(kbar, 0.5 * t),
            k2: threshold_k2(abar, kbar, sigbar, t),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.k2
    }

    /// `(u1, u2)` at `x`, identical to [`cir_moments`].
    pub fn moments(&self, x: f64) -> (f64, f64) {
        let CirCoefficients { abar, sigbar, .. } = self.coeffs;
        let z = self.zeta_full;
        let ex = x * self.e_full;
        let u1 = ex + abar * z;
        (u1, u1 * u1 + sigbar * sigbar * z * (0.5 * abar * z + ex))
    }

    /// Whether `x` takes the three-point branch.
    pub fn is_high(&self, x: f64) -> bool {
        x >= self.k2
    }

    /// High-branch output for a given value of the three-point variable.
    pub fn high(&self, x: f64, w: f64) -> f64 {
        let inner = (self.drift_half + self.e_half * x).max(0.0).sqrt()
            + 0.5 * self.coeffs.sigbar * self.sqrt_t * w;
        self.e_half * inner * inner + self.drift_half
    }

    /// Low-branch atoms `(pi, lo, hi)`: `lo` w.p. `pi`, `hi` w.p. `1 - pi`.
    pub fn low_atoms(&self, x: f64) -> (f64, f64, f64) {
        let (u1, u2) = self.moments(x);
        if u2 <= 0.0 || u1 <= 0.0 {
            return (0.5, 0.0, 0.0);
        }
        // (1 - sqrt(1 - r)) / 2 written without cancellation
        let r = (u1 * u1 / u2).min(1.0);
        let pi = 0.5 * r / (1.0 + (1.0 - r).sqrt());
        (pi, u1 / (2.0 * pi), u1 / (2.0 * (1.0 - pi)))
    }

    pub fn apply(&self, x: f64, u: f64) -> f64 {
        if self.is_high(x) {
            self.high(x, three_point(u))
        } else {
            let (pi, lo, hi) = self.low_atoms(x);
            if u <= pi {
                lo
            } else {
                hi
            }
        }
    }
}
