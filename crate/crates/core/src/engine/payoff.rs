//! Terminal payoffs.

use std::fmt;
use std::str::FromStr;

use crate::schemes::Terminal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayoffKind {
    /// `exp(-X_T / x0)`
    Laplace,
    /// `(exp(Y_T) - K)_+`
    Call,
    /// `(X_T / x0) (exp(Y_T) - K)_+`
    ScaledCall,
}

impl PayoffKind {
    pub const ALL: [PayoffKind; 3] = [
        PayoffKind::Laplace,
        PayoffKind::Call,
        PayoffKind::ScaledCall,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PayoffKind::Laplace => "laplace",
            PayoffKind::Call => "call",
            PayoffKind::ScaledCall => "scaled-call",
        }
    }

    pub fn needs_log_price(&self) -> bool {
        !matches!(self, PayoffKind::Laplace)
    }
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PayoffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PayoffKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!("unknown payoff `{s}` (laplace, call, scaled-call)"))
            })
    }
}

/// Payoff of `terminal`; `x0` is the initial spot and `strike` is only read
/// by the call payoffs.
pub fn payoff(kind: PayoffKind, terminal: &Terminal, x0: f64, strike: f64) -> Result<f64> {
    let x = terminal.spot;
    match kind {
        PayoffKind::Laplace => Ok((-x / x0).exp()),
        PayoffKind::Call | PayoffKind::ScaledCall => {
            let y = terminal.log_price.ok_or_else(|| {
                Error::Config(format!(
                    "payoff `{kind}` needs a log-price; use the heston or gbm model"
                ))
            })?;
            let call = (y.exp() - strike).max(0.0);
            Ok(if kind == PayoffKind::Call {
                call
            } else {
                x / x0 * call
            })
        }
    }
}
