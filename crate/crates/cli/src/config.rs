//! Scenario configuration: a single JSON document describing the source,
//! the fading model (discrete pmf or a continuous family with an optional
//! discretization block), solver settings, and the output sink.
//!
//! Gains may be given in dB through `_db`-suffixed keys; they are converted
//! to linear power ratios on load.

use mestd::model::{db_to_linear, ContinuousFading, DiscreteFading, SourceModel};
use mestd::SolverConfig;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub source: SourceSection,
    pub fading: FadingSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub sigma2_x: f64,
    pub rate_budget: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FadingSection {
    Discrete {
        #[serde(default)]
        states: Option<Vec<f64>>,
        #[serde(default)]
        states_db: Option<Vec<f64>>,
        probs: Vec<f64>,
    },
    Rician {
        k: f64,
        #[serde(flatten)]
        sbar: SbarField,
        #[serde(default)]
        discretization: Option<DiscretizationSection>,
    },
    Nakagami {
        m: f64,
        #[serde(flatten)]
        sbar: SbarField,
        #[serde(default)]
        discretization: Option<DiscretizationSection>,
    },
    Rayleigh {
        #[serde(flatten)]
        sbar: SbarField,
        #[serde(default)]
        discretization: Option<DiscretizationSection>,
    },
    Lognormal {
        mu_log: f64,
        sigma_log: f64,
        #[serde(default)]
        discretization: Option<DiscretizationSection>,
    },
    Tabulated {
        points: Vec<(f64, f64)>,
        #[serde(default)]
        discretization: Option<DiscretizationSection>,
    },
}

/// Mean channel power gain, in linear ratio or dB.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbarField {
    #[serde(default)]
    pub sbar: Option<f64>,
    #[serde(default)]
    pub sbar_db: Option<f64>,
}

impl SbarField {
    pub fn linear(&self) -> Result<f64, CliError> {
        match (self.sbar, self.sbar_db) {
            (Some(v), None) => Ok(v),
            (None, Some(db)) => Ok(db_to_linear(db)),
            _ => Err(CliError::validation(
                "InvalidConfig",
                "exactly one of sbar / sbar_db is required",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub m: usize,
    pub s_max: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_barrier_reduction")]
    pub barrier_reduction: f64,
    #[serde(default = "default_initial_point_slack")]
    pub initial_point_slack: f64,
}

fn default_tolerance() -> f64 {
    1e-8
}
fn default_max_iterations() -> usize {
    200
}
fn default_barrier_reduction() -> f64 {
    0.1
}
fn default_initial_point_slack() -> f64 {
    0.99
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            barrier_reduction: default_barrier_reduction(),
            initial_point_slack: default_initial_point_slack(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Option<String>,
}

impl ScenarioConfig {
    pub fn from_path(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation("ConfigRead", &format!("cannot read {path}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation("ConfigParse", &e.to_string()))
    }

    pub fn source_model(&self) -> Result<SourceModel, CliError> {
        SourceModel::new(self.source.sigma2_x, self.source.rate_budget).map_err(CliError::from)
    }

    pub fn solver_config(&self, tolerance_override: Option<f64>) -> SolverConfig {
        SolverConfig {
            tolerance: tolerance_override.unwrap_or(self.solver.tolerance),
            max_iterations: self.solver.max_iterations,
            barrier_reduction: self.solver.barrier_reduction,
            initial_point_slack: self.solver.initial_point_slack,
        }
    }

    /// The discrete pmf: taken verbatim, or produced by discretizing the
    /// continuous family when a discretization block is present.
    pub fn discrete_fading(&self, quad_tol: f64) -> Result<DiscreteFading, CliError> {
        match &self.fading {
            FadingSection::Discrete {
                states,
                states_db,
                probs,
            } => {
                let states = match (states, states_db) {
                    (Some(v), None) => v.clone(),
                    (None, Some(db)) => db.iter().map(|&x| db_to_linear(x)).collect(),
                    _ => {
                        return Err(CliError::validation(
                            "InvalidConfig",
                            "exactly one of states / states_db is required",
                        ))
                    }
                };
                DiscreteFading::new(states, probs.clone()).map_err(CliError::from)
            }
            other => {
                let disc = other.discretization().ok_or_else(|| {
                    CliError::validation(
                        "InvalidConfig",
                        "continuous fading requires a discretization block here",
                    )
                })?;
                let fading = self.continuous_fading()?;
                mestd::discretize::discretize_pdf_tol(&fading, disc.m, disc.s_max, quad_tol)
                    .map_err(CliError::from)
            }
        }
    }

    pub fn continuous_fading(&self) -> Result<ContinuousFading, CliError> {
        match &self.fading {
            FadingSection::Discrete { .. } => Err(CliError::validation(
                "InvalidConfig",
                "this command needs a continuous fading family",
            )),
            FadingSection::Rician { k, sbar, .. } => {
                ContinuousFading::rician(*k, sbar.linear()?).map_err(CliError::from)
            }
            FadingSection::Nakagami { m, sbar, .. } => {
                ContinuousFading::nakagami(*m, sbar.linear()?).map_err(CliError::from)
            }
            FadingSection::Rayleigh { sbar, .. } => {
                ContinuousFading::rayleigh(sbar.linear()?).map_err(CliError::from)
            }
            FadingSection::Lognormal {
                mu_log, sigma_log, ..
            } => ContinuousFading::log_normal(*mu_log, *sigma_log).map_err(CliError::from),
            FadingSection::Tabulated { points, .. } => {
                ContinuousFading::tabulated(points.clone()).map_err(CliError::from)
            }
        }
    }

    pub fn discretization(&self) -> Option<DiscretizationSection> {
        self.fading.discretization()
    }
}

impl FadingSection {
    fn discretization(&self) -> Option<DiscretizationSection> {
        match self {
            FadingSection::Discrete { .. } => None,
            FadingSection::Rician { discretization, .. }
            | FadingSection::Nakagami { discretization, .. }
            | FadingSection::Rayleigh { discretization, .. }
            | FadingSection::Lognormal { discretization, .. }
            | FadingSection::Tabulated { discretization, .. } => *discretization,
        }
    }
}
