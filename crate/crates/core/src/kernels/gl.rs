//! The `G_l` functions and the worst-case "bring back to zero" strategies.

use super::FiniteKernel;
use crate::{Error, Result};

/// Default depth cap for [`g_l_bruteforce`]; its cost doubles with each level.
pub const DEFAULT_BRUTEFORCE_CAP: usize = 20;

/// Gap lengths `(a_1, ..., a_l)`, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTuple(Vec<f64>);

impl TimeTuple {
    pub fn new(gaps: Vec<f64>) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::InvalidParams("time tuple must not be empty".into()));
        }
        if let Some(a) = gaps.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "gap {a} is not strictly positive"
            )));
        }
        Ok(Self(gaps))
    }

    pub fn gaps(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// `G_l(a_1, ..., a_l)` by the defining recursion
/// `G_l(a) = G_{l-1}(a_1, .., a_{l-2}, a_{l-1} + a_l) - G_1(a_l) G_{l-1}(a_1, .., a_{l-1})`.
///
/// Exponential cost; kept as an oracle for [`g_l_fast`].
pub fn g_l_bruteforce<K: FiniteKernel + ?Sized>(kernel: &K, a: &TimeTuple) -> Result<f64> {
    g_l_bruteforce_capped(kernel, a, DEFAULT_BRUTEFORCE_CAP)
}

pub fn g_l_bruteforce_capped<K: FiniteKernel + ?Sized>(
    kernel: &K,
    a: &TimeTuple,
    cap: usize,
) -> Result<f64> {
    if a.len() > cap {
        return Err(Error::DepthCapExceeded {
            depth: a.len(),
            cap,
        });
    }
    let g0 = kernel.at_zero();
    let mut scratch = a.gaps().to_vec();
    Ok(recurse(kernel, g0, &mut scratch))
}

fn recurse<K: FiniteKernel + ?Sized>(kernel: &K, g0: f64, a: &mut Vec<f64>) -> f64 {
    let l = a.len();
    if l == 1 {
        return kernel.value(a[0]) / g0;
    }
    let last = a[l - 1];
    let before = a[l - 2];

    // G_{l-1}(a_1, .., a_{l-1})
    a.pop();
    let shorter = recurse(kernel, g0, a);

    // G_{l-1}(a_1, .., a_{l-2}, a_{l-1} + a_l)
    a[l - 2] = before + last;
    let merged = recurse(kernel, g0, a);
    a[l - 2] = before;
    a.push(last);

    merged - kernel.value(last) / g0 * shorter
}

/// `G_l(a_1, ..., a_l)` in `O(l^2)` through the worst-case strategy: with
/// `t_1 = 0` and `t_{k+1} = t_k + a_{l-k+1}`, the zero-bring-back weights
/// satisfy `x_{l+1} = -G_l(a_1, ..., a_l)`.
pub fn g_l_fast<K: FiniteKernel + ?Sized>(kernel: &K, a: &TimeTuple) -> f64 {
    let gaps = a.gaps();
    let l = gaps.len();
    let mut times = Vec::with_capacity(l + 1);
    times.push(0.0);
    for k in 0..l {
        times.push(times[k] + gaps[l - 1 - k]);
    }
    let weights = strategy_weights(kernel, &times);
    -weights[l]
}

/// Worst-case strategy on a time grid: starts from `x_1 = 1` and brings the
/// checkpoint sum back to zero at every later time.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPath {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
}

impl StrategyPath {
    /// `sum_{k' <= k} x_{k'} G(t_k - t_{k'})` for every `k`.
    pub fn checkpoint_sums<K: FiniteKernel + ?Sized>(&self, kernel: &K) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| {
                (0..=k)
                    .map(|j| self.weights[j] * kernel.value(self.times[k] - self.times[j]))
                    .sum()
            })
            .collect()
    }
}

pub fn worst_case_strategy<K: FiniteKernel + ?Sized>(
    kernel: &K,
    times: &[f64],
) -> Result<StrategyPath> {
    if times.is_empty() {
        return Err(Error::InvalidParams("need at least one time".into()));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams(
            "times must be nonnegative and strictly increasing".into(),
        ));
    }
    Ok(StrategyPath {
        times: times.to_vec(),
        weights: strategy_weights(kernel, times),
    })
}

fn strategy_weights<K: FiniteKernel + ?Sized>(kernel: &K, times: &[f64]) -> Vec<f64> {
    let g0 = kernel.at_zero();
    let mut x = Vec::with_capacity(times.len());
    x.push(1.0);
    for k in 1..times.len() {
        let s: f64 = (0..k)
            .map(|j| x[j] * kernel.value(times[k] - times[j]))
            .sum();
        x.push(-s / g0);
    }
    x
}
