use super::FiniteKernel;
use crate::{Error, Result};

/// Discrete resolvent of the first kind on the grid `{k / n}`.
///
/// With the kernel normalised to `G(0) = 1`, `x_0 = 1` and
/// `x_k = 1 - sum_{i < k} x_i G((k - i) / n)`, so that
/// `sum_{i <= k} x_i G((k - i) / n) = 1` for every `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteResolvent {
    pub n: usize,
    pub values: Vec<f64>,
    /// The `G(0)` the kernel was divided by.
    pub normalization: f64,
}

impl DiscreteResolvent {
    /// `sum_{i <= k} x_i G((k - i)/n) / G(0)` for each `k`; identically one.
    pub fn construction_sums<K: FiniteKernel + ?Sized>(&self, kernel: &K) -> Vec<f64> {
        let lags = normalized_lags(kernel, self.n, self.values.len());
        (0..self.values.len())
            .map(|k| (0..=k).map(|i| self.values[i] * lags[k - i]).sum())
            .collect()
    }
}

fn normalized_lags<K: FiniteKernel + ?Sized>(kernel: &K, n: usize, len: usize) -> Vec<f64> {
    let g0 = kernel.at_zero();
    (0..len)
        .map(|m| kernel.value(m as f64 / n as f64) / g0)
        .collect()
}

pub fn discrete_resolvent<K: FiniteKernel + ?Sized>(
    kernel: &K,
    n: usize,
    k_max: usize,
) -> Result<DiscreteResolvent> {
    if n == 0 {
        return Err(Error::InvalidParams("grid density n must be >= 1".into()));
    }
    let g0 = kernel.at_zero();
    if !(g0 > 0.0 && g0.is_finite()) {
        return Err(Error::InvalidKernel(format!(
            "G(0) = {g0} must be finite and positive"
        )));
    }
    let lags = normalized_lags(kernel, n, k_max + 1);
    let mut x = Vec::with_capacity(k_max + 1);
    x.push(1.0);
    for k in 1..=k_max {
        let s: f64 = (0..k).map(|i| x[i] * lags[k - i]).sum();
        x.push(1.0 - s);
    }
    Ok(DiscreteResolvent {
        n,
        values: x,
        normalization: g0,
    })
}
