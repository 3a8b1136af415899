//! Multi-exponential approximation of the fractional kernel.
//!
//! Rates are fixed on a geometric grid (plus a zero rate), the weights come
//! from a nonnegative least-squares fit of `G_H` on log-uniform sample points
//! in `[T/10^4, T]`, and the quality is reported as the relative `L^2` error
//! on that interval.

use nalgebra::{DMatrix, DVector};

use crate::kernels::{FractionalKernel, MultiExpKernel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Residual above which the report carries a warning.
    pub bound: f64,
    /// Number of log-uniform sample points.
    pub samples: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bound: 0.05,
            samples: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub kernel: MultiExpKernel,
    /// Relative `L^2([T/10^4, T])` error.
    pub residual: f64,
    pub warning: Option<String>,
}

/// Candidate rates: `0` and `n - 1` geometric rates spanning
/// `[10^-2 / T, 10 n / T]`.
pub fn candidate_rates(t_end: f64, n: usize) -> Vec<f64> {
    let lo = 1e-2 / t_end;
    let hi = 10.0 * n as f64 / t_end;
    let m = n - 1;
    let mut rates = vec![0.0];
    if m == 1 {
        rates.push((lo * hi).sqrt());
    } else {
        let ratio = (hi / lo).powf(1.0 / (m - 1) as f64);
        rates.extend((0..m).map(|i| lo * ratio.powi(i as i32)));
    }
    rates
}

/// Log-uniform points on `[T/10^4, T]` with trapezoid weights for `dt`.
fn quadrature(t_end: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = ((t_end * 1e-4).ln(), t_end.ln());
    let t: Vec<f64> = (0..m)
        .map(|i| (a + (b - a) * i as f64 / (m - 1) as f64).exp())
        .collect();
    let mut w = vec![0.0; m];
    for i in 0..m - 1 {
        let h = t[i + 1] - t[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    (t, w)
}

/// Relative `L^2([T/10^4, T])` distance between `kernel` and `G_H`.
pub fn l2_residual(kernel: &MultiExpKernel, hurst: f64, t_end: f64) -> Result<f64> {
    let target = FractionalKernel::new(hurst)?;
    let (t, w) = quadrature(t_end, 4000);
    let (mut num, mut den) = (0.0, 0.0);
    for (ti, wi) in t.iter().zip(&w) {
        let g = target.eval(*ti)?;
        num += wi * (kernel.eval(*ti) - g).powi(2);
        den += wi * g * g;
    }
    Ok((num / den).sqrt())
}

pub fn fit_fractional(hurst: f64, t_end: f64, n: usize) -> Result<FitReport> {
    fit_fractional_with(hurst, t_end, n, &FitOptions::default())
}

pub fn fit_fractional_with(
    hurst: f64,
    t_end: f64,
    n: usize,
    opts: &FitOptions,
) -> Result<FitReport> {
    let target = FractionalKernel::new(hurst)?;
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "need at least 2 exponentials, got {n}"
        )));
    }
    if !(t_end > 0.0 && t_end.is_finite()) || opts.samples < 2 * n {
        return Err(Error::InvalidParams(format!(
            "need T > 0 and at least {} samples",
            2 * n
        )));
    }
    let rates = candidate_rates(t_end, n);
    let (t, w) = quadrature(t_end, opts.samples);
    // the weighted problem minimises the same L^2 norm that is reported
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let a = DMatrix::from_fn(t.len(), n, |i, j| sw[i] * (-rates[j] * t[i]).exp());
    let b = DVector::from_iterator(
        t.len(),
        t.iter()
            .zip(&sw)
            .map(|(ti, s)| s * target.eval(*ti).expect("t > 0")),
    );
    let x = nnls(&a, &b)?;
    let (gammas, rhos): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(&rates)
        .filter(|(g, _)| **g > 0.0)
        .map(|(g, r)| (*g, *r))
        .unzip();
    let kernel = MultiExpKernel::new(gammas, rhos)?;
    let residual = l2_residual(&kernel, hurst, t_end)?;
    let warning = (residual > opts.bound).then(|| {
        format!(
            "relative L2 residual {residual:.4} exceeds {:.4}; rates are capped at 10n/T = {}",
            opts.bound,
            10.0 * n as f64 / t_end
        )
    });
    Ok(FitReport {
        kernel,
        residual,
        warning,
    })
}

/// Lawson–Hanson active-set solution of `min |A x - b|` subject to `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let tol = 1e-12 * a.norm() * b.norm().max(1.0);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let max_iter = 30 * n + 100;

    let solve_passive = |passive: &[bool]| -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|j| passive[*j]).collect();
        let sub = a.select_columns(idx.iter());
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-14)
            .map_err(|e| Error::InvalidParams(format!("least squares failed: {e}")))?;
        let mut full = DVector::zeros(n);
        for (k, j) in idx.iter().enumerate() {
            full[*j] = sol[k];
        }
        Ok(full)
    };

    for _ in 0..max_iter {
        let grad = a.transpose() * (b - a * &x);
        let next = (0..n)
            .filter(|j| !passive[*j])
            .max_by(|i, j| grad[*i].total_cmp(&grad[*j]));
        let Some(j) = next.filter(|j| grad[*j] > tol) else {
            return Ok(x);
        };
        passive[j] = true;
        loop {
            let s = solve_passive(&passive)?;
            let bad: Vec<usize> = (0..n).filter(|i| passive[*i] && s[*i] <= 0.0).collect();
            if bad.is_empty() {
                x = s;
                break;
            }
            let alpha = bad
                .iter()
                .map(|i| x[*i] / (x[*i] - s[*i]))
                .fold(f64::INFINITY, f64::min);
            x += alpha * (&s - &x);
            let floor = 1e-14 * x.amax();
            for i in 0..n {
                if passive[i] && x[i] <= floor {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    Err(Error::InvalidParams(
        "nonnegative least squares did not converge".into(),
    ))
}
