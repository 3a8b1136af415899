//! Weak convergence studies: bias against a reference value as the step
//! count grows.

use super::mc::{run_mc, McConfig, McEstimate, McProblem};
use super::payoff::PayoffKind;
use crate::schemes::SchemeKind;
use crate::{Error, Result};

/// A bias is only used for the order fit when it clears this many standard
/// errors.
pub const ADMISSIBLE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub estimate: McEstimate,
    pub bias: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub reference: f64,
    /// Fitted decay order `p` in `|bias| ~ N^{-p}`; `None` when fewer than two
    /// rows clear the noise floor.
    pub slope: Option<f64>,
    pub points_used: usize,
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl ConvergenceTable {
    /// Build the table from estimates already computed for each `N`.
    pub fn from_estimates(reference: f64, estimates: Vec<(usize, McEstimate)>) -> Self {
        let rows: Vec<ConvergenceRow> = estimates
            .into_iter()
            .map(|(steps, estimate)| {
                let bias = estimate.mean - reference;
                ConvergenceRow {
                    steps,
                    admissible: bias.abs() > ADMISSIBLE_SIGMAS * estimate.stderr,
                    bias,
                    estimate,
                }
            })
            .collect();
        let (lx, ly): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.admissible)
            .map(|r| ((r.steps as f64).log2(), r.bias.abs().log2()))
            .unzip();
        let points_used = lx.len();
        let slope = ls_slope(&lx, &ly).map(|s| -s);
        Self {
            rows,
            reference,
            slope,
            points_used,
        }
    }

    /// `slope` as printed in reports.
    pub fn slope_label(&self) -> String {
        match self.slope {
            Some(s) => format!("{s}"),
            None => "NOT_RESOLVED".to_string(),
        }
    }
}

/// One [`run_mc`] per step count with common path count and seed.
pub fn convergence_study(
    problem: &McProblem,
    scheme: SchemeKind,
    payoff_kind: PayoffKind,
    ns: &[usize],
    reference: f64,
    config: &McConfig,
) -> Result<ConvergenceTable> {
    if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "step counts must be strictly increasing".into(),
        ));
    }
    let mut estimates = Vec::with_capacity(ns.len());
    for &steps in ns {
        let e = run_mc(problem, scheme, payoff_kind, &McConfig { steps, ..*config })?;
        estimates.push((steps, e));
    }
    Ok(ConvergenceTable::from_estimates(reference, estimates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::mc::Model;
    use crate::kernels::MultiExpKernel;
    use crate::schemes::GbmParams;

    fn est(mean: f64, stderr: f64) -> McEstimate {
        McEstimate {
            mean,
            stderr,
            ci95_halfwidth: 1.96 * stderr,
            n: 100,
            seconds: 0.0,
            warning: None,
        }
    }

    #[test]
    fn recovers_a_known_order() {
        let rows = [10usize, 20, 40, 80]
            .iter()
            .map(|&n| (n, est(1.0 + 3.0 / (n * n) as f64, 1e-7)))
            .collect();
        let t = ConvergenceTable::from_estimates(1.0, rows);
        assert_eq!(t.points_used, 4);
        assert!((t.slope.unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn noise_floor_is_not_resolved() {
        let rows = vec![
            (10, est(1.001, 0.01)),
            (20, est(0.999, 0.01)),
            (40, est(1.05, 0.01)),
        ];
        let t = ConvergenceTable::from_estimates(1.0, rows);
        assert_eq!(t.points_used, 1);
        assert_eq!(t.slope, None);
        assert_eq!(t.slope_label(), "NOT_RESOLVED");
    }

    #[test]
    fn exact_scheme_gives_no_slope() {
        use statrs::distribution::{ContinuousCDF, Normal};
        // constant kernel: the splitting scheme is the exact GBM scheme
        let (mu, sigma) = (0.05f64, 0.2f64);
        let problem = McProblem {
            kernel: MultiExpKernel::new(vec![1.0], vec![0.0]).unwrap().into(),
            model: Model::Gbm(GbmParams::new(1.0, mu, sigma).unwrap()),
            t_end: 1.0,
            strike: 1.0,
        };
        // E[(X_1 - 1)_+] for X_1 = exp(mu - sigma^2 / 2 + sigma W_1)
        let nd = Normal::new(0.0, 1.0).unwrap();
        let d1 = (mu + 0.5 * sigma * sigma) / sigma;
        let reference = mu.exp() * nd.cdf(d1) - nd.cdf(d1 - sigma);
        let cfg = McConfig {
            paths: 20_000,
            seed: 5,
            steps: 1,
            workers: 1,
        };
        let t = convergence_study(
            &problem,
            SchemeKind::SplittingGbm,
            PayoffKind::Call,
            &[2, 4, 8],
            reference,
            &cfg,
        )
        .unwrap();
        assert_eq!(t.slope, None, "{t:?}");
        assert!(convergence_study(
            &problem,
            SchemeKind::SplittingGbm,
            PayoffKind::Call,
            &[4, 2],
            0.0,
            &cfg
        )
        .is_err());
    }
}
