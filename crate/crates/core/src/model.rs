//! Domain types shared by all solvers: the Gaussian source, discrete and
//! continuous fading-channel distributions, and the solution records.
//!
//! All types are immutable after construction and safe to share across
//! threads. Channel gains are linear power ratios; use [`db_to_linear`]
//! when inputs are given in dB.

use crate::specfun::{self, integrate};
use std::fmt;

/// Normalization tolerance for continuous pdfs, checked at construction.
const PDF_NORM_TOL: f64 = 1e-8;
/// Tolerance on the probability-mass sum of a discrete fading pmf.
const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    NonPositiveVariance,
    NegativeRate,
    NonAscendingStates,
    ProbSumMismatch,
    NegativeProbability,
    LengthMismatch,
    EmptyStates,
    NegativeGain,
    InvalidParameter(String),
    NotNormalized { integral: f64 },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NonPositiveVariance => write!(f, "NonPositiveVariance"),
            ModelError::NegativeRate => write!(f, "NegativeRate"),
            ModelError::NonAscendingStates => write!(f, "NonAscendingStates"),
            ModelError::ProbSumMismatch => write!(f, "ProbSumMismatch"),
            ModelError::NegativeProbability => write!(f, "NegativeProbability"),
            ModelError::LengthMismatch => write!(f, "LengthMismatch"),
            ModelError::EmptyStates => write!(f, "EmptyStates"),
            ModelError::NegativeGain => write!(f, "NegativeGain"),
            ModelError::InvalidParameter(msg) => write!(f, "InvalidParameter: {msg}"),
            ModelError::NotNormalized { integral } => {
                write!(f, "NotNormalized: pdf integrates to {integral}")
            }
        }
    }
}

impl std::error::Error for ModelError {}

/// Converts a dB power value to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

// ---------------------------------------------------------------------------
// Source model
// ---------------------------------------------------------------------------

/// Gaussian source variance and the encoder rate budget in nats per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    sigma2_x: f64,
    rate_budget: f64,
}

impl SourceModel {
    pub fn new(sigma2_x: f64, rate_budget: f64) -> Result<Self, ModelError> {
        if !(sigma2_x > 0.0) || !sigma2_x.is_finite() {
            return Err(ModelError::NonPositiveVariance);
        }
        if !(rate_budget >= 0.0) || !rate_budget.is_finite() {
            return Err(ModelError::NegativeRate);
        }
        Ok(Self {
            sigma2_x,
            rate_budget,
        })
    }

    pub fn sigma2_x(&self) -> f64 {
        self.sigma2_x
    }

    pub fn rate_budget(&self) -> f64 {
        self.rate_budget
    }

    /// 1 / sigma_X^2, the precision of the source prior.
    pub fn inv_sigma2(&self) -> f64 {
        1.0 / self.sigma2_x
    }

    /// Same source with a different rate budget.
    pub fn with_rate(&self, rate_budget: f64) -> Result<Self, ModelError> {
        Self::new(self.sigma2_x, rate_budget)
    }
}

// ---------------------------------------------------------------------------
// Discrete fading
// ---------------------------------------------------------------------------

/// Ordered fading states with probabilities: the pmf of the side-information
/// channel power gain S.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFading {
    states: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteFading {
    /// Builds and validates the pmf. States must be strictly ascending with
    /// s_1 >= 0; duplicate adjacent states are rejected, not merged.
    pub fn new(states: Vec<f64>, probs: Vec<f64>) -> Result<Self, ModelError> {
        let fading = Self { states, probs };
        fading.validate()?;
        Ok(fading)
    }

    /// Re-checks every structural invariant.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.states.is_empty() {
            return Err(ModelError::EmptyStates);
        }
        if self.states.len() != self.probs.len() {
            return Err(ModelError::LengthMismatch);
        }
        if !(self.states[0] >= 0.0) {
            return Err(ModelError::NegativeGain);
        }
        for w in self.states.windows(2) {
            if !(w[1] > w[0]) {
                return Err(ModelError::NonAscendingStates);
            }
        }
        let mut sum = 0.0;
        for &p in &self.probs {
            if !(p >= 0.0) {
                return Err(ModelError::NegativeProbability);
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ModelError::ProbSumMismatch);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

// ---------------------------------------------------------------------------
// Continuous fading
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Rician {
        k: f64,
        sbar: f64,
    },
    Nakagami {
        m: f64,
        sbar: f64,
        ln_gamma_m: f64,
    },
    Rayleigh {
        sbar: f64,
    },
    LogNormal {
        mu_log: f64,
        sigma_log: f64,
    },
    /// Piecewise-linear density between samples, renormalized; zero outside
    /// the sampled support.
    Tabulated {
        points: Vec<(f64, f64)>,
    },
}

/// Parametric pdf of the side-information channel power gain.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousFading {
    family: Family,
}

impl ContinuousFading {
    /// Rician power-gain pdf with K-factor `k >= 0` and mean gain `sbar > 0`.
    /// K = 0 reduces exactly to Rayleigh.
    pub fn rician(k: f64, sbar: f64) -> Result<Self, ModelError> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(ModelError::InvalidParameter(format!("Rician K = {k}")));
        }
        require_positive_scale(sbar)?;
        let fading = Self {
            family: Family::Rician { k, sbar },
        };
        fading.check_normalization()?;
        Ok(fading)
    }

    /// Nakagami power-gain pdf with shape `m >= 0.5` and mean gain `sbar > 0`.
    pub fn nakagami(m: f64, sbar: f64) -> Result<Self, ModelError> {
        if !(m >= 0.5) || !m.is_finite() {
            return Err(ModelError::InvalidParameter(format!("Nakagami m = {m}")));
        }
        require_positive_scale(sbar)?;
        let ln_gamma_m = specfun::ln_gamma(m).expect("m >= 0.5");
        let fading = Self {
            family: Family::Nakagami {
                m,
                sbar,
                ln_gamma_m,
            },
        };
        fading.check_normalization()?;
        Ok(fading)
    }

    /// Rayleigh power-gain pdf (exponential with mean `sbar`).
    pub fn rayleigh(sbar: f64) -> Result<Self, ModelError> {
        require_positive_scale(sbar)?;
        let fading = Self {
            family: Family::Rayleigh { sbar },
        };
        fading.check_normalization()?;
        Ok(fading)
    }

    /// Log-normal gain: log s is normal with the given location and scale.
    pub fn log_normal(mu_log: f64, sigma_log: f64) -> Result<Self, ModelError> {
        if !mu_log.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "log-normal location = {mu_log}"
            )));
        }
        if !(sigma_log > 0.0) || !sigma_log.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "log-normal scale = {sigma_log}"
            )));
        }
        let fading = Self {
            family: Family::LogNormal { mu_log, sigma_log },
        };
        fading.check_normalization()?;
        Ok(fading)
    }

    /// Tabulated pdf: linear interpolation between `(s, f)` samples,
    /// renormalized so the density integrates to one.
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        if points.len() < 2 {
            return Err(ModelError::InvalidParameter(
                "tabulated pdf needs at least two samples".into(),
            ));
        }
        if !(points[0].0 >= 0.0) {
            return Err(ModelError::NegativeGain);
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(ModelError::NonAscendingStates);
            }
        }
        let mut mass = 0.0;
        for w in points.windows(2) {
            let (s0, f0) = w[0];
            let (s1, f1) = w[1];
            if !(f0 >= 0.0) || !(f1 >= 0.0) {
                return Err(ModelError::InvalidParameter(
                    "tabulated pdf sample below zero".into(),
                ));
            }
            mass += 0.5 * (f0 + f1) * (s1 - s0);
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(ModelError::NotNormalized { integral: mass });
        }
        let points = points.into_iter().map(|(s, f)| (s, f / mass)).collect();
        Ok(Self {
            family: Family::Tabulated { points },
        })
    }

    /// Evaluates the density at gain `s >= 0`.
    pub fn pdf(&self, s: f64) -> Result<f64, ModelError> {
        if !(s >= 0.0) {
            return Err(ModelError::NegativeGain);
        }
        Ok(self.pdf_at(s))
    }

    /// Density evaluation with the `s >= 0` contract already established.
    pub(crate) fn pdf_at(&self, s: f64) -> f64 {
        match &self.family {
            Family::Rician { k, sbar } => {
                if *k == 0.0 {
                    rayleigh_pdf(s, *sbar)
                } else {
                    // log-domain so the Bessel growth and the exponential
                    // decay cancel before exponentiation
                    let a = (1.0 + k) / sbar;
                    let bessel_arg = 2.0 * (k * (1.0 + k) * s / sbar).sqrt();
                    (a.ln() - k - a * s + specfun::ln_bessel_i0(bessel_arg)).exp()
                }
            }
            Family::Nakagami {
                m,
                sbar,
                ln_gamma_m,
            } => {
                if s == 0.0 {
                    return if *m < 1.0 {
                        f64::INFINITY
                    } else if *m == 1.0 {
                        1.0 / sbar
                    } else {
                        0.0
                    };
                }
                let r = m / sbar;
                (m * r.ln() + (m - 1.0) * s.ln() - r * s - ln_gamma_m).exp()
            }
            Family::Rayleigh { sbar } => rayleigh_pdf(s, *sbar),
            Family::LogNormal { mu_log, sigma_log } => {
                if s == 0.0 {
                    return 0.0;
                }
                let z = (s.ln() - mu_log) / sigma_log;
                (-0.5 * z * z).exp() / (s * sigma_log * (2.0 * std::f64::consts::PI).sqrt())
            }
            Family::Tabulated { points } => {
                let n = points.len();
                if s < points[0].0 || s > points[n - 1].0 {
                    return 0.0;
                }
                let idx = points.partition_point(|&(x, _)| x <= s);
                if idx == 0 {
                    return points[0].1;
                }
                if idx == n {
                    return points[n - 1].1;
                }
                let (s0, f0) = points[idx - 1];
                let (s1, f1) = points[idx];
                f0 + (f1 - f0) * (s - s0) / (s1 - s0)
            }
        }
    }

    /// Rough magnitude of the gains carrying most of the mass; used to seed
    /// tail-cutoff searches.
    pub fn scale_hint(&self) -> f64 {
        match &self.family {
            Family::Rician { sbar, .. }
            | Family::Nakagami { sbar, .. }
            | Family::Rayleigh { sbar } => *sbar,
            Family::LogNormal { mu_log, sigma_log } => (mu_log + 0.5 * sigma_log * sigma_log).exp(),
            Family::Tabulated { points } => points[points.len() - 1].0,
        }
    }

    /// Upper end of the support when it is finite (tabulated pdfs).
    pub fn support_upper(&self) -> Option<f64> {
        match &self.family {
            Family::Tabulated { points } => Some(points[points.len() - 1].0),
            _ => None,
        }
    }

    /// Integrates the density over [0, inf) and checks it is 1 within 1e-8.
    pub fn check_normalization(&self) -> Result<f64, ModelError> {
        let total = match self.support_upper() {
            Some(hi) => integrate(|s| self.pdf_at(s), 0.0, hi, 1e-10),
            None => integrate(|s| self.pdf_at(s), 0.0, f64::INFINITY, 1e-10),
        }
        .map_err(|_| ModelError::NotNormalized { integral: f64::NAN })?
        .value;
        if (total - 1.0).abs() > PDF_NORM_TOL {
            return Err(ModelError::NotNormalized { integral: total });
        }
        Ok(total)
    }
}

fn rayleigh_pdf(s: f64, sbar: f64) -> f64 {
    (-s / sbar).exp() / sbar
}

fn require_positive_scale(sbar: f64) -> Result<(), ModelError> {
    if !(sbar > 0.0) || !sbar.is_finite() {
        Err(ModelError::InvalidParameter(format!("Sbar = {sbar}")))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Solution records
// ---------------------------------------------------------------------------

/// Optimal layered solution of the M-state expected-distortion program:
/// per-state distortions, the conditional-variance chain, layer rates,
/// codebook coefficients, and the dual variables with their KKT residual.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSolution {
    pub distortions: Vec<f64>,
    pub variances: Vec<f64>,
    pub rates: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub expected_distortion: f64,
    pub dual_lambda: Vec<f64>,
    pub dual_mu: f64,
    pub kkt_residual: f64,
}

/// Single-layer solution for a continuous quasiconcave fading pdf: the
/// target gain s_a, the rate multiplier, the expected distortion, and the
/// dual-certificate diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleLayerSolution {
    pub s_a: f64,
    pub mu: f64,
    pub expected_distortion: f64,
    pub certificate_min_lambda: f64,
    pub certificate_balance: f64,
    /// Right endpoint of the mu/2 superlevel set, reported diagnostically.
    pub s_b: f64,
}
