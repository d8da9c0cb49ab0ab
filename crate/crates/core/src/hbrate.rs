//! Layered rate-distortion chain for a Gaussian source with degraded side
//! information: the conditional-variance recursion, per-layer rates, the
//! total rate, codebook coefficients, the two-state Pareto curve, and the
//! no-side-information / Wyner-Ziv reference bounds.
//!
//! Conventions: V_0 = sigma_X^2, s_0 = 0, rates in nats.

use crate::model::{DiscreteFading, SourceModel};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum RateError {
    NonPositiveDistortion,
    OutOfParetoRange,
    LengthMismatch,
}

impl fmt::Display for RateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateError::NonPositiveDistortion => write!(f, "NonPositiveDistortion"),
            RateError::OutOfParetoRange => write!(f, "OutOfParetoRange"),
            RateError::LengthMismatch => write!(f, "LengthMismatch"),
        }
    }
}

impl std::error::Error for RateError {}

/// Conditional variances and per-layer rates induced by a distortion vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceChain {
    v0: f64,
    pub variances: Vec<f64>,
    pub rates: Vec<f64>,
    pub total_rate: f64,
}

impl VarianceChain {
    /// The chain's starting variance V_0 = sigma_X^2.
    pub fn v0(&self) -> f64 {
        self.v0
    }
}

/// Runs the variance recursion V_i = min((V_{i-1}^{-1} + s_i - s_{i-1})^{-1}, D_i)
/// and the layer rates R_i = (1/2) log((V_{i-1}^{-1} + s_i - s_{i-1})^{-1} / V_i).
///
/// Distortion targets above the no-rate bound are clamped by the min, not
/// rejected; the recursion itself performs that clamp.
pub fn variance_chain(
    distortions: &[f64],
    fading: &DiscreteFading,
    src: &SourceModel,
) -> Result<VarianceChain, RateError> {
    if distortions.len() != fading.len() {
        return Err(RateError::LengthMismatch);
    }
    for &d in distortions {
        if !(d > 0.0) {
            return Err(RateError::NonPositiveDistortion);
        }
    }
    let states = fading.states();
    let mut variances = Vec::with_capacity(distortions.len());
    let mut rates = Vec::with_capacity(distortions.len());
    let mut v_prev = src.sigma2_x();
    let mut s_prev = 0.0;
    for (i, &d) in distortions.iter().enumerate() {
        let bound = 1.0 / (1.0 / v_prev + (states[i] - s_prev));
        let v = bound.min(d);
        rates.push(0.5 * (bound / v).ln());
        variances.push(v);
        v_prev = v;
        s_prev = states[i];
    }
    let total_rate = rates.iter().sum();
    Ok(VarianceChain {
        v0: src.sigma2_x(),
        variances,
        rates,
        total_rate,
    })
}

/// The rate required to meet the distortion vector, in closed form:
/// -(1/2) log(sigma_X^{-2} + s_1) - (1/2) log V_M
/// - (1/2) sum_{i<M} log(1 + (s_{i+1} - s_i) V_i).
pub fn hb_rate(
    distortions: &[f64],
    fading: &DiscreteFading,
    src: &SourceModel,
) -> Result<f64, RateError> {
    let chain = variance_chain(distortions, fading, src)?;
    let states = fading.states();
    let m = fading.len();
    let mut rate = -0.5 * (src.inv_sigma2() + states[0]).ln() - 0.5 * chain.variances[m - 1].ln();
    for i in 0..m - 1 {
        rate -= 0.5 * (1.0 + (states[i + 1] - states[i]) * chain.variances[i]).ln();
    }
    Ok(rate)
}

/// Codebook coefficients a_i = V_i^{-1} - V_{i-1}^{-1} - (s_i - s_{i-1})
/// of the auxiliary variables W_i = a_i X + N_i achieving the chain.
pub fn codebook_coefficients(chain: &VarianceChain, fading: &DiscreteFading) -> Vec<f64> {
    let states = fading.states();
    let mut coeffs = Vec::with_capacity(chain.variances.len());
    let mut v_prev = chain.v0();
    let mut s_prev = 0.0;
    for (i, &v) in chain.variances.iter().enumerate() {
        let a = 1.0 / v - 1.0 / v_prev - (states[i] - s_prev);
        coeffs.push(a.max(0.0));
        v_prev = v;
        s_prev = states[i];
    }
    coeffs
}

/// Bounds of the feasible base-layer distortion at total rate R_X for a
/// two-state channel: [ (e^{2Rx}(sigma^{-2}+s_1))^{-1}, (sigma^{-2}+s_1)^{-1} ].
pub fn pareto_d1_range(fading: &DiscreteFading, src: &SourceModel) -> (f64, f64) {
    debug_assert_eq!(fading.len(), 2);
    let c0 = src.inv_sigma2() + fading.states()[0];
    let e2r = (2.0 * src.rate_budget()).exp();
    (1.0 / (e2r * c0), 1.0 / c0)
}

/// The Pareto trade-off curve for two states: the top-layer distortion that
/// exhausts the rate budget given the base-layer distortion.
pub fn pareto_d2(d1: f64, fading: &DiscreteFading, src: &SourceModel) -> Result<f64, RateError> {
    assert_eq!(
        fading.len(),
        2,
        "pareto_d2 is defined for two fading states"
    );
    let (lo, hi) = pareto_d1_range(fading, src);
    if d1 < lo * (1.0 - 1e-12) || d1 > hi * (1.0 + 1e-12) {
        return Err(RateError::OutOfParetoRange);
    }
    let d1 = d1.clamp(lo, hi);
    let states = fading.states();
    let c0 = src.inv_sigma2() + states[0];
    let e2r = (2.0 * src.rate_budget()).exp();
    Ok(1.0 / (e2r * c0 * (1.0 + (states[1] - states[0]) * d1)))
}

/// Distortion of a Gaussian source at rate R_X with no side information.
pub fn no_si_distortion(src: &SourceModel) -> f64 {
    src.sigma2_x() * (-2.0 * src.rate_budget()).exp()
}

/// Wyner-Ziv distortion when the side-information gain is fixed at `s`.
pub fn wyner_ziv_distortion(src: &SourceModel, s: f64) -> f64 {
    debug_assert!(s >= 0.0);
    (-2.0 * src.rate_budget()).exp() / (src.inv_sigma2() + s)
}
