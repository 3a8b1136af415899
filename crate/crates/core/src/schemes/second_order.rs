//! Second-order splitting `psi1(t/2) . psi2(t) . psi1(t/2)` for the
//! multifactor CIR and Heston models.
//!
//! `psi2` moves the spot with the one-step CIR map using the scaled
//! coefficients and pushes the jump back to every factor through `A_x`; the
//! log-price follows the spot through the usual Heston update.

use super::{CirCoefficients, CirParams, CirStep, HestonParams, StepNoise, Terminal, VolModel};
use crate::engine::rng::NoiseSource;
use crate::kernels::MultiExpKernel;
use crate::lift::{decay_factors, LiftState};
use crate::{Error, Result};

/// Spots below this are treated as an upstream bug rather than rounding.
const SPOT_FLOOR: f64 = -1e-12;

/// The composed step for a fixed kernel, model and step size.
#[derive(Debug, Clone)]
pub struct SecondOrderScheme<'a> {
    kernel: &'a MultiExpKernel,
    model: VolModel,
    step: CirStep,
    half_decay: Vec<f64>,
}

impl<'a> SecondOrderScheme<'a> {
    pub fn new(kernel: &'a MultiExpKernel, model: VolModel, dt: f64) -> Result<Self> {
        model.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "step size {dt} must be positive"
            )));
        }
        let coeffs = CirCoefficients::scaled(model.cir(), kernel.g0());
        Ok(Self {
            kernel,
            model,
            step: CirStep::with_coefficients(coeffs, dt),
            half_decay: decay_factors(kernel, 0.5 * dt),
        })
    }

    pub fn dt(&self) -> f64 {
        self.step.t
    }

    pub fn initial_state(&self) -> LiftState {
        LiftState::at_origin(self.model.cir().x0, self.kernel)
    }

    fn checked_spot(&self, state: &LiftState) -> Result<f64> {
        let x = state.spot(self.kernel);
        if x < SPOT_FLOOR || x.is_nan() {
            return Err(Error::NegativeSpot(x));
        }
        Ok(x.max(0.0))
    }

    /// Inner step: returns `(x, x')` and moves every factor by `(x' - x) / G(0)`.
    fn inner(&self, state: &mut LiftState, u: f64) -> Result<(f64, f64)> {
        let x = self.checked_spot(state)?;
        let xp = self.step.apply(x, u);
        state.shift_all((xp - x) / self.kernel.g0());
        Ok((x, xp))
    }

    /// One CIR step in place; returns the spot jump of the inner step.
    pub fn cir_step(&self, state: &mut LiftState, u: f64) -> Result<f64> {
        state.decay_by(&self.half_decay);
        let (x, xp) = self.inner(state, u)?;
        state.decay_by(&self.half_decay);
        Ok(xp - x)
    }

    /// One Heston step in place on `(state, y)`; returns the spot jump.
    pub fn heston_step(&self, state: &mut LiftState, y: &mut f64, noise: StepNoise) -> Result<f64> {
        let p = match &self.model {
            VolModel::Heston(p) => p,
            VolModel::Cir(_) => {
                return Err(Error::InvalidParams(
                    "heston step needs Heston parameters".into(),
                ))
            }
        };
        let t = self.dt();
        state.decay_by(&self.half_decay);
        let (x, xp) = self.inner(state, noise.u)?;
        state.decay_by(&self.half_decay);

        let CirParams { a, k, sigma, .. } = p.cir;
        let rho = p.varrho;
        let sigbar = self.step.coeffs.sigbar;
        let var_arg = if noise.b == 0 { x } else { xp };
        *y += (p.r - rho * a / sigma) * t
            + (rho * k / sigma - 0.5) * 0.5 * (x + xp) * t
            + rho / sigbar * (xp - x)
            + var_arg.sqrt() * (t * (1.0 - rho * rho)).sqrt() * noise.z;
        Ok(xp - x)
    }

    /// `n` steps from the origin, drawing one uniform per CIR step and one
    /// `(u, z, b)` triple per Heston step.
    pub fn run<R: NoiseSource + ?Sized>(&self, n: usize, noise: &mut R) -> Result<Terminal> {
        let mut state = self.initial_state();
        match &self.model {
            VolModel::Cir(_) => {
                for _ in 0..n {
                    self.cir_step(&mut state, noise.uniform())?;
                }
                Ok(Terminal {
                    spot: state.spot(self.kernel),
                    log_price: None,
                })
            }
            VolModel::Heston(p) => {
                let mut y = p.y0;
                for _ in 0..n {
                    let u = noise.uniform();
                    let z = noise.normal();
                    let b = noise.coin();
                    self.heston_step(&mut state, &mut y, StepNoise { u, z, b })?;
                }
                Ok(Terminal {
                    spot: state.spot(self.kernel),
                    log_price: Some(y),
                })
            }
        }
    }
}

/// Pure form of one multifactor CIR step over `t`.
pub fn multifactor_cir_step(
    kernel: &MultiExpKernel,
    params: &CirParams,
    state: &LiftState,
    t: f64,
    u: f64,
) -> Result<LiftState> {
    let scheme = SecondOrderScheme::new(kernel, VolModel::Cir(*params), t)?;
    let mut out = state.clone();
    scheme.cir_step(&mut out, u)?;
    Ok(out)
}

/// Pure form of one multifactor Heston step over `t`.
pub fn heston_step(
    kernel: &MultiExpKernel,
    params: &HestonParams,
    state: (&LiftState, f64),
    t: f64,
    noise: StepNoise,
) -> Result<(LiftState, f64)> {
    let scheme = SecondOrderScheme::new(kernel, VolModel::Heston(*params), t)?;
    let mut out = state.0.clone();
    let mut y = state.1;
    scheme.heston_step(&mut out, &mut y, noise)?;
    Ok((out, y))
}

/// `n` second-order steps over `[0, t_end]`.
pub fn second_order_path<R: NoiseSource + ?Sized>(
    kernel: &MultiExpKernel,
    model: VolModel,
    t_end: f64,
    n: usize,
    noise: &mut R,
) -> Result<Terminal> {
    if n == 0 {
        return Err(Error::InvalidParams("need at least one step".into()));
    }
    SecondOrderScheme::new(kernel, model, t_end / n as f64)?.run(n, noise)
}

/// Full CIR trajectory for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderTrajectory {
    /// Spot at `l T / N`, `l = 0..=N`.
    pub spots: Vec<f64>,
    /// Inner-step jumps `delta_l`, `l = 1..=N`.
    pub jumps: Vec<f64>,
    /// Factor states at every grid time.
    pub states: Vec<LiftState>,
}

impl SecondOrderTrajectory {
    /// Spot at step `l` rebuilt from the jumps alone:
    /// `x0 + sum_{j <= l} delta_j G((l - j + 1/2) dt) / G(0)`.
    pub fn spot_from_jumps(&self, kernel: &MultiExpKernel, x0: f64, dt: f64, l: usize) -> f64 {
        x0 + (1..=l)
            .map(|j| self.jumps[j - 1] * kernel.eval((l - j) as f64 * dt + 0.5 * dt))
            .sum::<f64>()
            / kernel.g0()
    }
}

pub fn second_order_cir_trajectory<R: NoiseSource + ?Sized>(
    kernel: &MultiExpKernel,
    params: &CirParams,
    t_end: f64,
    n: usize,
    noise: &mut R,
) -> Result<SecondOrderTrajectory> {
    if n == 0 {
        return Err(Error::InvalidParams("need at least one step".into()));
    }
    let scheme = SecondOrderScheme::new(kernel, VolModel::Cir(*params), t_end / n as f64)?;
    let mut state = scheme.initial_state();
    let mut spots = vec![state.spot(kernel)];
    let mut jumps = Vec::with_capacity(n);
    let mut states = vec![state.clone()];
    for _ in 0..n {
        jumps.push(scheme.cir_step(&mut state, noise.uniform())?);
        spots.push(state.spot(kernel));
        states.push(state.clone());
    }
    Ok(SecondOrderTrajectory {
        spots,
        jumps,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::rng::StreamRng;
    use crate::schemes::cir_inner_step;

    fn rough_heston() -> HestonParams {
        HestonParams::rough_heston_defaults()
    }

    #[test]
    fn single_flat_factor_reduces_to_inner_step() {
        let k = MultiExpKernel::new(vec![1.0], vec![0.0]).unwrap();
        let p = CirParams::rough_heston_defaults();
        let s = LiftState {
            x0: p.x0,
            factors: vec![0.01],
        };
        for u in [0.05, 0.4, 0.95] {
            let out = multifactor_cir_step(&k, &p, &s, 0.1, u).unwrap();
            let direct = cir_inner_step(p.a, p.k, p.sigma, 0.03, 0.1, u);
            assert!((out.spot(&k) - direct).abs() < 1e-16);
        }
    }

    #[test]
    fn rejects_negative_spot() {
        let k = MultiExpKernel::five_factor_h04();
        let s = LiftState {
            x0: 0.02,
            factors: vec![-1.0; 5],
        };
        let r = multifactor_cir_step(&k, &CirParams::rough_heston_defaults(), &s, 0.1, 0.5);
        assert!(matches!(r, Err(Error::NegativeSpot(_))));
    }

    #[test]
    fn many_single_steps_stay_nonnegative() {
        let k = MultiExpKernel::five_factor_h04();
        let scheme =
            SecondOrderScheme::new(&k, VolModel::Cir(CirParams::rough_heston_defaults()), 0.1)
                .unwrap();
        let mut rng = StreamRng::new(3, 0);
        let mut min = f64::INFINITY;
        for _ in 0..100_000 {
            let mut s = scheme.initial_state();
            scheme.cir_step(&mut s, rng.uniform()).unwrap();
            min = min.min(s.spot(&k));
        }
        assert!(min >= 0.0, "min spot {min}");
    }

    #[test]
    fn jumps_rebuild_the_spot() {
        let k = MultiExpKernel::five_factor_h04();
        let p = CirParams::rough_heston_defaults();
        let n = 64;
        let traj = second_order_cir_trajectory(&k, &p, 1.0, n, &mut StreamRng::new(9, 1)).unwrap();
        for l in 0..=n {
            let rebuilt = traj.spot_from_jumps(&k, p.x0, 1.0 / n as f64, l);
            assert!((rebuilt - traj.spots[l]).abs() < 1e-10);
        }
    }

    #[test]
    fn one_step_path_equals_one_heston_step() {
        let k = MultiExpKernel::five_factor_h04();
        let p = rough_heston();
        let mut r1 = StreamRng::new(5, 2);
        let term = second_order_path(&k, VolModel::Heston(p), 0.25, 1, &mut r1).unwrap();
        let mut r2 = StreamRng::new(5, 2);
        let noise = StepNoise {
            u: r2.uniform(),
            z: r2.normal(),
            b: r2.coin(),
        };
        let s0 = LiftState::at_origin(p.cir.x0, &k);
        let (s, y) = heston_step(&k, &p, (&s0, p.y0), 0.25, noise).unwrap();
        assert_eq!(term.spot, s.spot(&k));
        assert_eq!(term.log_price, Some(y));
    }

    #[test]
    fn heston_without_correlation() {
        let k = MultiExpKernel::single(1.0, 0.5).unwrap();
        let mut p = rough_heston();
        p.varrho = 0.0;
        let s0 = LiftState {
            x0: p.cir.x0,
            factors: vec![0.01],
        };
        let t = 0.2;
        for b in [0u8, 1] {
            let noise = StepNoise { u: 0.7, z: 0.8, b };
            let (s1, y1) = heston_step(&k, &p, (&s0, 0.1), t, noise).unwrap();
            // inner spot before and after, from the pure CIR step
            let mut mid = s0.clone();
            mid.decay_by(&decay_factors(&k, t / 2.0));
            let x = mid.spot(&k);
            let xp = cir_inner_step(p.cir.a, p.cir.k, p.cir.sigma, x, t, 0.7);
            let arg = if b == 0 { x } else { xp };
            let expect = 0.1 - 0.25 * (x + xp) * t + arg.sqrt() * t.sqrt() * 0.8;
            assert!((y1 - expect).abs() < 1e-15);
            assert!(s1.spot(&k) >= 0.0);
        }
    }

    #[test]
    fn same_stream_same_terminal() {
        let k = MultiExpKernel::five_factor_h04();
        let m = VolModel::Heston(rough_heston());
        let a = second_order_path(&k, m, 1.0, 50, &mut StreamRng::new(1, 7)).unwrap();
        let b = second_order_path(&k, m, 1.0, 50, &mut StreamRng::new(1, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cir_paths_stay_nonnegative() {
        let k = MultiExpKernel::five_factor_h04();
        let m = VolModel::Cir(CirParams::rough_heston_defaults());
        for path in 0..500 {
            let t = second_order_path(&k, m, 1.0, 32, &mut StreamRng::new(11, path)).unwrap();
            assert!(t.spot >= 0.0);
        }
    }
}
