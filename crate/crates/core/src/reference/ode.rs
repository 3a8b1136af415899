//! Adaptive Dormand–Prince 5(4) integration of complex ODE systems.

use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 200_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t1 > t0`; returns `y(t1)` and the
/// number of accepted steps.
pub fn integrate<F>(
    mut f: F,
    y0: &[Complex64],
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
) -> Result<(Vec<Complex64>, usize)>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok((y, 0));
    }
    if !(t1 > t0) {
        return Err(Error::OdeFailure(format!("empty interval [{t0}, {t1}]")));
    }
    let mut k = vec![vec![Complex64::new(0.0, 0.0); dim]; 7];
    let mut tmp = vec![Complex64::new(0.0, 0.0); dim];
    let mut ynew = vec![Complex64::new(0.0, 0.0); dim];

    let mut t = t0;
    let mut h = (t1 - t0) * 1e-3;
    let mut accepted = 0;
    f(t, &y, &mut k[0]);
    for _ in 0..opts.max_steps {
        if t >= t1 {
            return Ok((y, accepted));
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = y[i];
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += h * a * k[j][i];
                }
                tmp[i] = acc;
            }
            f(t + C[s] * h, &tmp, &mut k[s]);
        }
        // row 6 of A is the fifth-order solution, evaluated at stage 7 (FSAL)
        let mut err2 = 0.0;
        for i in 0..dim {
            let mut acc = y[i];
            for (j, a) in A[6][..6].iter().enumerate() {
                acc += h * a * k[j][i];
            }
            ynew[i] = acc;
            let mut e = Complex64::new(0.0, 0.0);
            for (j, c) in E.iter().enumerate() {
                e += h * c * k[j][i];
            }
            let sc = opts.atol + opts.rtol * y[i].norm().max(acc.norm());
            err2 += (e.norm() / sc).powi(2);
        }
        let err = (err2 / dim.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::OdeFailure(format!("non-finite state at t = {t}")));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            // first-same-as-last: stage 7 was evaluated at the new point
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            accepted += 1;
        }
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= fac;
        if h <= f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::OdeFailure(format!("step size underflow at t = {t}")));
        }
    }
    if t >= t1 {
        return Ok((y, accepted));
    }
    Err(Error::OdeFailure(format!(
        "no convergence within {} steps (reached t = {t})",
        opts.max_steps
    )))
}
