//! Batch front end for the layered source-coding solvers: parse a scenario
//! config, run the requested solver, and emit deterministic CSV/JSON.
//!
//! Exit codes: 0 success, 2 validation, 3 solver, 4 certificate or
//! quasiconcavity failure. Errors are reported on stderr as one JSON object
//! per failure.

mod config;
mod output;
mod sweep;

use clap::{Args, Parser, Subcommand};
use mestd::contfade::{solve_single_layer, ContFadeError};
use mestd::model::ModelError;
use mestd::solver::{solve_mstate, SolverError};
use mestd::twostate::{solve_two_state, TwoStateError};
use mestd::LayeredSolution;

use config::ScenarioConfig;
use output::{csv_document, emit, fmt12, json_number_array, json_object};

/// Certificate tolerances enforced by the `continuous` command.
const CERT_MIN_LAMBDA: f64 = -1e-9;
const CERT_BALANCE: f64 = 1e-6;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub name: String,
    pub message: String,
}

impl CliError {
    pub fn validation(name: &str, message: &str) -> Self {
        Self {
            code: 2,
            name: name.to_string(),
            message: message.to_string(),
        }
    }

    fn with_code(code: i32, name: &str, message: &str) -> Self {
        Self {
            code,
            name: name.to_string(),
            message: message.to_string(),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let name = match &e {
            ModelError::NonPositiveVariance => "NonPositiveVariance",
            ModelError::NegativeRate => "NegativeRate",
            ModelError::NonAscendingStates => "NonAscendingStates",
            ModelError::ProbSumMismatch => "ProbSumMismatch",
            ModelError::NegativeProbability => "NegativeProbability",
            ModelError::LengthMismatch => "LengthMismatch",
            ModelError::EmptyStates => "EmptyStates",
            ModelError::NegativeGain => "NegativeGain",
            ModelError::InvalidParameter(_) => "InvalidParameter",
            ModelError::NotNormalized { .. } => "NotNormalized",
        };
        CliError::with_code(2, name, &e.to_string())
    }
}

impl From<TwoStateError> for CliError {
    fn from(e: TwoStateError) -> Self {
        CliError::with_code(2, "InvalidStateCount", &e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match &e {
            SolverError::MaxIterationsExceeded { .. } => {
                CliError::with_code(3, "MaxIterationsExceeded", &e.to_string())
            }
            SolverError::GridTooCoarse => CliError::with_code(2, "GridTooCoarse", &e.to_string()),
            SolverError::TooManyStates => CliError::with_code(2, "TooManyStates", &e.to_string()),
            SolverError::InvalidConfig => CliError::with_code(2, "InvalidConfig", &e.to_string()),
        }
    }
}

impl From<ContFadeError> for CliError {
    fn from(e: ContFadeError) -> Self {
        match &e {
            ContFadeError::NotQuasiconcave => {
                CliError::with_code(4, "NotQuasiconcave", &e.to_string())
            }
            ContFadeError::QuadratureFailure => {
                CliError::with_code(3, "QuadratureFailure", &e.to_string())
            }
            ContFadeError::AtDiscontinuity => {
                CliError::with_code(2, "AtDiscontinuity", &e.to_string())
            }
            ContFadeError::InvalidInput(_) => {
                CliError::with_code(2, "InvalidInput", &e.to_string())
            }
        }
    }
}

impl From<mestd::discretize::DiscretizeError> for CliError {
    fn from(e: mestd::discretize::DiscretizeError) -> Self {
        match &e {
            mestd::discretize::DiscretizeError::QuadratureFailure => {
                CliError::with_code(3, "QuadratureFailure", &e.to_string())
            }
            mestd::discretize::DiscretizeError::InvalidGrid => {
                CliError::with_code(2, "InvalidGrid", &e.to_string())
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "mestd",
    about = "Minimum expected distortion for Gaussian source coding with a fading side-information channel",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario configuration (JSON)
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output path; stdout when omitted
    #[arg(long, global = true)]
    out: Option<String>,
    /// Output format override
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// KKT residual target override for the M-state solver
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Assert deterministic, RNG-free operation (always true; accepted for
    /// CI contracts)
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form two-state rate allocation
    TwoState,
    /// M-state expected-distortion minimization
    Mstate,
    /// Continuous-fading single-layer solution with its dual certificate
    Continuous,
    /// Emit the discretized pmf of a continuous fading family
    Discretize,
    /// Emit the data grid of a named reference experiment
    Sweep {
        /// Figure id: fig3 | fig4 | fig5 | fig6 | fig7 | fig8
        figure: String,
        /// Parameter overrides, e.g. --override m=10
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn quad_tolerance() -> Result<f64, CliError> {
    match std::env::var("MESTD_QUAD_TOL") {
        Ok(text) => {
            let v: f64 = text.parse().map_err(|_| {
                CliError::validation("InvalidQuadTol", &format!("MESTD_QUAD_TOL = {text}"))
            })?;
            if !v.is_finite() || v <= 0.0 {
                return Err(CliError::validation(
                    "InvalidQuadTol",
                    "MESTD_QUAD_TOL must be positive",
                ));
            }
            Ok(v)
        }
        Err(_) => Ok(1e-12),
    }
}

fn load_config(common: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let path = common.config.as_deref().ok_or_else(|| {
        CliError::validation("MissingConfig", "this command requires --config PATH")
    })?;
    ScenarioConfig::from_path(path)
}

/// Output path and format: command-line flags override the config block.
fn sink<'a>(
    common: &'a CommonArgs,
    cfg: Option<&'a ScenarioConfig>,
    default_fmt: &str,
) -> (Option<&'a str>, String) {
    let out_cfg = cfg.and_then(|c| c.output.as_ref());
    let path = common
        .out
        .as_deref()
        .or_else(|| out_cfg.and_then(|o| o.path.as_deref()));
    let format = common
        .format
        .clone()
        .or_else(|| out_cfg.and_then(|o| o.format.clone()))
        .unwrap_or_else(|| default_fmt.to_string());
    (path, format)
}

fn cmd_two_state(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let src = cfg.source_model()?;
    let fading = cfg.discrete_fading(quad_tolerance()?)?;
    if fading.len() != 2 {
        return Err(CliError::validation(
            "InvalidStateCount",
            "two-state requires exactly two fading states",
        ));
    }
    let sol = solve_two_state(&fading, &src)?;
    let (path, format) = sink(common, Some(&cfg), "csv");
    let content = if format == "json" {
        json_object(&[
            ("p1", fmt12(fading.probs()[0])),
            ("p2", fmt12(fading.probs()[1])),
            ("s1", fmt12(fading.states()[0])),
            ("s2", fmt12(fading.states()[1])),
            ("Rx", fmt12(src.rate_budget())),
            ("D1", fmt12(sol.d1)),
            ("D2", fmt12(sol.d2)),
            ("R1", fmt12(sol.r1)),
            ("R2", fmt12(sol.r2)),
            ("expected_distortion", fmt12(sol.expected_distortion)),
            ("active_bound", format!("\"{}\"", sol.active_bound)),
        ])
    } else {
        let row = format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt12(fading.probs()[0]),
            fmt12(fading.probs()[1]),
            fmt12(fading.states()[0]),
            fmt12(fading.states()[1]),
            fmt12(src.rate_budget()),
            fmt12(sol.d1),
            fmt12(sol.d2),
            fmt12(sol.r1),
            fmt12(sol.r2),
            fmt12(sol.expected_distortion),
            sol.active_bound
        );
        csv_document(
            "p1,p2,s1,s2,Rx,D1*,D2*,R1*,R2*,E[D]*,active_bound",
            &[row],
            &[],
        )
    };
    emit(path, &content)
}

fn mstate_document(
    fading: &mestd::DiscreteFading,
    sol: &LayeredSolution,
    format: &str,
    status: Option<&str>,
) -> String {
    if format == "json" {
        let mut fields = vec![
            ("s", json_number_array(fading.states())),
            ("p", json_number_array(fading.probs())),
            ("D", json_number_array(&sol.distortions)),
            ("R", json_number_array(&sol.rates)),
            ("lambda", json_number_array(&sol.dual_lambda)),
            ("expected_distortion", fmt12(sol.expected_distortion)),
            ("mu", fmt12(sol.dual_mu)),
            ("kkt_residual", fmt12(sol.kkt_residual)),
        ];
        if let Some(s) = status {
            fields.push(("status", format!("\"{s}\"")));
        }
        json_object(&fields)
    } else {
        let rows: Vec<String> = (0..fading.len())
            .map(|i| {
                format!(
                    "{},{},{},{},{}",
                    fmt12(fading.states()[i]),
                    fmt12(fading.probs()[i]),
                    fmt12(sol.distortions[i]),
                    fmt12(sol.rates[i]),
                    fmt12(sol.dual_lambda[i])
                )
            })
            .collect();
        let mut footer = vec![
            ("E[D]*".to_string(), fmt12(sol.expected_distortion)),
            ("mu*".to_string(), fmt12(sol.dual_mu)),
            ("kkt_residual".to_string(), fmt12(sol.kkt_residual)),
        ];
        if let Some(s) = status {
            footer.push(("status".to_string(), s.to_string()));
        }
        csv_document("s,p,D*,R*,lambda*", &rows, &footer)
    }
}

fn cmd_mstate(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let src = cfg.source_model()?;
    let fading = cfg.discrete_fading(quad_tolerance()?)?;
    let solver_cfg = cfg.solver_config(common.tolerance);
    let (path, format) = sink(common, Some(&cfg), "csv");
    match solve_mstate(&fading, &src, &solver_cfg) {
        Ok(sol) => emit(path, &mstate_document(&fading, &sol, &format, None)),
        Err(SolverError::MaxIterationsExceeded { best, report }) => {
            // still write the best iterate, flagged, then fail with the
            // solver exit code
            emit(
                path,
                &mstate_document(&fading, &best, &format, Some("max_iterations_exceeded")),
            )?;
            Err(CliError::with_code(
                3,
                "MaxIterationsExceeded",
                &format!("best residual {:.3e}", report.max_residual()),
            ))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_continuous(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let src = cfg.source_model()?;
    let fading = cfg.continuous_fading()?;
    let tol = (quad_tolerance()? * 1e3).clamp(1e-12, 1e-6);
    let sol = solve_single_layer(&fading, &src, tol)?;
    let (path, format) = sink(common, Some(&cfg), "json");
    let content = if format == "csv" {
        csv_document(
            "s_a,mu,E[D],certificate_min_lambda,certificate_balance",
            &[format!(
                "{},{},{},{},{}",
                fmt12(sol.s_a),
                fmt12(sol.mu),
                fmt12(sol.expected_distortion),
                fmt12(sol.certificate_min_lambda),
                fmt12(sol.certificate_balance)
            )],
            &[],
        )
    } else {
        json_object(&[
            ("s_a", fmt12(sol.s_a)),
            ("mu", fmt12(sol.mu)),
            ("expected_distortion", fmt12(sol.expected_distortion)),
            ("certificate_min_lambda", fmt12(sol.certificate_min_lambda)),
            ("certificate_balance", fmt12(sol.certificate_balance)),
        ])
    };
    emit(path, &content)?;
    if sol.certificate_min_lambda < CERT_MIN_LAMBDA || sol.certificate_balance.abs() > CERT_BALANCE
    {
        return Err(CliError::with_code(
            4,
            "CertificateOutOfTolerance",
            &format!(
                "min lambda {:.3e}, balance {:.3e}",
                sol.certificate_min_lambda, sol.certificate_balance
            ),
        ));
    }
    Ok(())
}

fn cmd_discretize(common: &CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let disc = cfg.discretization().ok_or_else(|| {
        CliError::validation(
            "InvalidConfig",
            "discretize requires a discretization block",
        )
    })?;
    let fading = cfg.continuous_fading()?;
    let pmf =
        mestd::discretize::discretize_pdf_tol(&fading, disc.m, disc.s_max, quad_tolerance()?)?;
    let (path, format) = sink(common, Some(&cfg), "csv");
    let content = if format == "json" {
        json_object(&[
            ("s", json_number_array(pmf.states())),
            ("p", json_number_array(pmf.probs())),
        ])
    } else {
        let rows: Vec<String> = pmf
            .states()
            .iter()
            .zip(pmf.probs())
            .map(|(s, p)| format!("{},{}", fmt12(*s), fmt12(*p)))
            .collect();
        csv_document("s,p", &rows, &[])
    };
    emit(path, &content)
}

fn cmd_sweep(common: &CommonArgs, figure: &str, overrides: &[String]) -> Result<(), CliError> {
    let ov = sweep::Overrides::parse(overrides)?;
    let content = sweep::run_figure(figure, &ov, quad_tolerance()?, common.tolerance)?;
    let (path, _) = sink(common, None, "csv");
    emit(path, &content)
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::TwoState => cmd_two_state(&cli.common),
        Command::Mstate => cmd_mstate(&cli.common),
        Command::Continuous => cmd_continuous(&cli.common),
        Command::Discretize => cmd_discretize(&cli.common),
        Command::Sweep { figure, overrides } => cmd_sweep(&cli.common, figure, overrides),
    };
    if let Err(e) = result {
        eprintln!(
            "{}",
            json_object(&[
                ("error", format!("\"{}\"", e.name)),
                (
                    "message",
                    serde_json::to_string(&e.message).unwrap_or_else(|_| "\"\"".into())
                ),
            ])
            .trim_end()
        );
        std::process::exit(e.code);
    }
}
