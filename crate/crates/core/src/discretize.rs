//! Conversion of a continuous fading pdf into the M-state pmf consumed by
//! the discrete solver: evenly spaced gains s_i = (i-1) s_M / (M-1), bin
//! masses p_i = int_{s_i}^{s_{i+1}} f ds, and the final bin absorbing all
//! tail mass above the truncation point at gain s_M.

use crate::model::{ContinuousFading, DiscreteFading};
use crate::specfun::integrate;
use std::fmt;

/// Mass-sum tolerance checked before the exact renormalization.
const MASS_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum DiscretizeError {
    QuadratureFailure,
    InvalidGrid,
}

impl fmt::Display for DiscretizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscretizeError::QuadratureFailure => write!(f, "QuadratureFailure"),
            DiscretizeError::InvalidGrid => write!(f, "InvalidGrid"),
        }
    }
}

impl std::error::Error for DiscretizeError {}

/// Discretizes with the default per-bin quadrature tolerance.
pub fn discretize_pdf(
    fading: &ContinuousFading,
    m: usize,
    s_max: f64,
) -> Result<DiscreteFading, DiscretizeError> {
    discretize_pdf_tol(fading, m, s_max, 1e-13)
}

/// Discretizes the pdf into `m >= 2` states truncated at `s_max`.
///
/// The bin masses must sum to 1 within 1e-10 before they are renormalized
/// exactly so the resulting pmf satisfies the discrete-fading invariants.
pub fn discretize_pdf_tol(
    fading: &ContinuousFading,
    m: usize,
    s_max: f64,
    quad_tol: f64,
) -> Result<DiscreteFading, DiscretizeError> {
    if m < 2 || !(s_max > 0.0) {
        return Err(DiscretizeError::InvalidGrid);
    }
    let states: Vec<f64> = (0..m).map(|i| i as f64 * s_max / (m - 1) as f64).collect();
    let mut probs = Vec::with_capacity(m);
    for i in 0..m {
        let lo = states[i];
        let hi = if i + 1 < m {
            states[i + 1]
        } else {
            f64::INFINITY
        };
        let hi = match fading.support_upper() {
            Some(sup) if hi > sup => sup.max(lo),
            _ => hi,
        };
        let mass = if hi <= lo {
            0.0
        } else {
            integrate(|s| fading.pdf(s).unwrap_or(0.0), lo, hi, quad_tol)
                .map_err(|_| DiscretizeError::QuadratureFailure)?
                .value
        };
        probs.push(mass.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MASS_SUM_TOL {
        return Err(DiscretizeError::QuadratureFailure);
    }
    for p in &mut probs {
        *p /= total;
    }
    DiscreteFading::new(states, probs).map_err(|_| DiscretizeError::InvalidGrid)
}
