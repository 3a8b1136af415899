//! Sampling falsifier for nonnegativity preservation.
//!
//! Preservation is equivalent to `G_l >= 0` for every depth and every tuple,
//! which sampling cannot certify. The verdict is therefore either
//! [`Verdict::Falsified`] with a witness or [`Verdict::NoViolationFound`].

use std::fmt;

use super::gl::{g_l_fast, TimeTuple};
use super::FiniteKernel;
use crate::engine::parallel::map_indexed;
use crate::engine::rng::{NoiseSource, StreamRng};

const GAP_MIN: f64 = 1e-3;
const GAP_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Falsified,
    NoViolationFound,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Falsified => "FALSIFIED",
            Verdict::NoViolationFound => "NO_VIOLATION_FOUND",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub gaps: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub depth: usize,
    pub samples: usize,
    pub min_gl: f64,
    /// Tuple achieving `min_gl`.
    pub argmin: Vec<f64>,
    pub verdict: Verdict,
}

impl DepthRow {
    pub const CSV_HEADER: &'static str = "depth,samples,min_gl,verdict,counterexample_gaps";

    pub fn csv_row(&self) -> String {
        let gaps = match self.verdict {
            Verdict::Falsified => self
                .argmin
                .iter()
                .map(|a| format!("{a:e}"))
                .collect::<Vec<_>>()
                .join(";"),
            Verdict::NoViolationFound => String::new(),
        };
        format!(
            "{},{},{:e},{},{}",
            self.depth, self.samples, self.min_gl, self.verdict, gaps
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub rows: Vec<DepthRow>,
    /// Most negative sampled value below `-tol`, if any.
    pub counterexample: Option<Counterexample>,
}

/// Sample `samples` log-uniform tuples (gaps in `[1e-3, 10]`) at each depth
/// `1..=max_depth` and look for `G_l < -tol`.
pub fn check_preserves_nonnegativity<K: FiniteKernel + ?Sized>(
    kernel: &K,
    max_depth: usize,
    samples: usize,
    tol: f64,
    seed: u64,
) -> CheckReport {
    let (lo, hi) = (GAP_MIN.ln(), GAP_MAX.ln());
    let mut rows = Vec::with_capacity(max_depth);
    let mut counterexample: Option<Counterexample> = None;

    for depth in 1..=max_depth {
        let values = map_indexed(samples, 0, |i| {
            let mut rng = StreamRng::new(seed, ((depth as u64) << 40) | i as u64);
            let gaps: Vec<f64> = (0..depth)
                .map(|_| (lo + rng.uniform() * (hi - lo)).exp())
                .collect();
            let tuple = TimeTuple::new(gaps).expect("sampled gaps are positive");
            (g_l_fast(kernel, &tuple), tuple)
        });

        let (min_gl, argmin) =
            values
                .into_iter()
                .fold((f64::INFINITY, None), |(m, arg), (v, t)| {
                    if v < m {
                        (v, Some(t))
                    } else {
                        (m, arg)
                    }
                });
        let argmin = argmin.map(|t| t.gaps().to_vec()).unwrap_or_default();
        let verdict = if min_gl < -tol {
            Verdict::Falsified
        } else {
            Verdict::NoViolationFound
        };
        if verdict == Verdict::Falsified && counterexample.as_ref().is_none_or(|c| min_gl < c.value)
        {
            counterexample = Some(Counterexample {
                gaps: argmin.clone(),
                value: min_gl,
            });
        }
        rows.push(DepthRow {
            depth,
            samples,
            min_gl,
            argmin,
            verdict,
        });
    }

    CheckReport {
        verdict: if counterexample.is_some() {
            Verdict::Falsified
        } else {
            Verdict::NoViolationFound
        },
        rows,
        counterexample,
    }
}
