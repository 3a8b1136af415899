//! Monte Carlo orchestration.
//!
//! Every path draws from its own counter-based stream keyed by
//! `(seed, path index)` and partial sums are merged in block order, so an
//! estimate depends only on `(seed, paths, steps)` and never on the number of
//! worker threads.

pub mod convergence;
pub mod mc;
pub mod parallel;
pub mod payoff;
pub mod rng;

pub use convergence::{convergence_study, ls_slope, ConvergenceRow, ConvergenceTable};
pub use mc::{mc_estimate, run_mc, McConfig, McEstimate, McProblem, Model, PathSampler};
pub use payoff::{payoff, PayoffKind};
pub use rng::{inverse_normal_cdf, NoiseSource, StreamRng};

use crate::schemes::SchemeKind;

/// Header of the per-estimate CSV.
pub const ESTIMATE_HEADER: &str =
    "scheme,model,payoff,steps,paths,mean,stderr,ci95_halfwidth,seconds,seed";

/// Header of the convergence CSV.
pub const CONVERGENCE_HEADER: &str =
    "scheme,model,payoff,steps,paths,mean,stderr,ci95_halfwidth,seconds,seed,reference,bias,slope";

/// One estimate row (no trailing newline).
pub fn estimate_row(
    scheme: SchemeKind,
    model: &Model,
    payoff_kind: PayoffKind,
    steps: usize,
    seed: u64,
    e: &McEstimate,
) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{:.3},{}",
        scheme,
        model.kind(),
        payoff_kind,
        steps,
        e.n,
        e.mean,
        e.stderr,
        e.ci95_halfwidth,
        e.seconds,
        seed
    )
}

/// Rows of a convergence table; the fitted slope is repeated on every row.
pub fn convergence_rows(
    scheme: SchemeKind,
    model: &Model,
    payoff_kind: PayoffKind,
    seed: u64,
    table: &ConvergenceTable,
) -> Vec<String> {
    let slope = table.slope_label();
    table
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{}",
                estimate_row(scheme, model, payoff_kind, r.steps, seed, &r.estimate),
                table.reference,
                r.bias,
                slope
            )
        })
        .collect()
}
