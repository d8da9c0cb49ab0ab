//! Figure sweeps: canned reference-experiment grids, one CSV row per grid
//! point. Points run as independent pure solves fanned out across worker
//! threads and are gathered in grid order, so output is deterministic
//! regardless of scheduling.

use mestd::contfade::{lambda_at, solve_single_layer, tail_cutoff};
use mestd::discretize::discretize_pdf_tol;
use mestd::hbrate::{no_si_distortion, wyner_ziv_distortion};
use mestd::model::{db_to_linear, ContinuousFading, DiscreteFading, SourceModel};
use mestd::solver::solve_mstate;
use mestd::twostate::solve_two_state;
use mestd::SolverConfig;

use crate::output::{csv_document, fmt12};
use crate::CliError;

/// Free-form `key=value` overrides accepted by `sweep`.
#[derive(Debug, Clone, Copy)]
pub struct Overrides {
    pub m: Option<usize>,
    pub s_max: Option<f64>,
    pub rx: Option<f64>,
    pub sigma2: Option<f64>,
    pub sbar: Option<f64>,
    pub k: Option<f64>,
}

impl Overrides {
    pub fn parse(pairs: &[String]) -> Result<Self, CliError> {
        let mut ov = Overrides {
            m: None,
            s_max: None,
            rx: None,
            sigma2: None,
            sbar: None,
            k: None,
        };
        for pair in pairs {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                CliError::validation(
                    "InvalidOverride",
                    &format!("expected key=value, got {pair}"),
                )
            })?;
            let parse_f = || {
                value.parse::<f64>().map_err(|_| {
                    CliError::validation("InvalidOverride", &format!("bad number in {pair}"))
                })
            };
            match key {
                "m" => {
                    ov.m = Some(value.parse::<usize>().map_err(|_| {
                        CliError::validation("InvalidOverride", &format!("bad count in {pair}"))
                    })?)
                }
                "s_max" => ov.s_max = Some(parse_f()?),
                "rx" => ov.rx = Some(parse_f()?),
                "sigma2" => ov.sigma2 = Some(parse_f()?),
                "sbar" => ov.sbar = Some(parse_f()?),
                "k" => ov.k = Some(parse_f()?),
                _ => {
                    return Err(CliError::validation(
                        "InvalidOverride",
                        &format!("unknown override key {key}"),
                    ))
                }
            }
        }
        Ok(ov)
    }
}

/// Runs `f` over `jobs` on worker threads; results come back in job order.
fn parallel_map<I, O, F>(jobs: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync,
{
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len().max(1));
    if threads <= 1 {
        return jobs.into_iter().map(f).collect();
    }
    let n = jobs.len();
    let mut results: Vec<Option<O>> = Vec::with_capacity(n);
    results.resize_with(n, || None);
    let chunk = n.div_ceil(threads);
    std::thread::scope(|scope| {
        let f = &f;
        let mut job_iter = jobs.into_iter();
        for slot_chunk in results.chunks_mut(chunk) {
            let batch: Vec<I> = job_iter.by_ref().take(slot_chunk.len()).collect();
            scope.spawn(move || {
                for (job, slot) in batch.into_iter().zip(slot_chunk.iter_mut()) {
                    *slot = Some(f(job));
                }
            });
        }
    });
    results
        .into_iter()
        .map(|s| s.expect("worker filled slot"))
        .collect()
}

pub fn run_figure(
    figure: &str,
    ov: &Overrides,
    quad_tol: f64,
    tolerance: Option<f64>,
) -> Result<String, CliError> {
    let cfg = SolverConfig {
        tolerance: tolerance.unwrap_or(1e-8),
        ..SolverConfig::default()
    };
    match figure {
        "fig3" => fig3(ov),
        "fig4" => fig4(ov, quad_tol, &cfg),
        "fig5" => fig5(ov, quad_tol, &cfg),
        "fig6" => fig6(ov, quad_tol, &cfg),
        "fig7" => fig7(ov),
        "fig8" => fig8(ov),
        other => Err(CliError::validation(
            "UnknownFigure",
            &format!("unknown figure id {other}; expected fig3..fig8"),
        )),
    }
}

/// Two-state rate allocation over (p2, s2) with the base state at 0 dB.
fn fig3(ov: &Overrides) -> Result<String, CliError> {
    let sigma2 = ov.sigma2.unwrap_or(1.0);
    let rx = ov.rx.unwrap_or(1.0);
    let s1 = 1.0; // 0 dB
    let src = SourceModel::new(sigma2, rx).map_err(CliError::from)?;
    let mut jobs = Vec::new();
    for s2_db in 1..=30 {
        for j in 1..=19 {
            let p2 = 0.05 * j as f64;
            jobs.push((db_to_linear(s2_db as f64), p2));
        }
    }
    let rows = parallel_map(jobs, |(s2, p2)| {
        let fading = DiscreteFading::new(vec![s1, s2], vec![1.0 - p2, p2]).expect("valid grid");
        let sol = solve_two_state(&fading, &src).expect("two states");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt12(1.0 - p2),
            fmt12(p2),
            fmt12(s1),
            fmt12(s2),
            fmt12(rx),
            fmt12(sol.d1),
            fmt12(sol.d2),
            fmt12(sol.r1),
            fmt12(sol.r2),
            fmt12(sol.expected_distortion),
            sol.active_bound
        )
    });
    Ok(csv_document(
        "p1,p2,s1,s2,Rx,D1*,D2*,R1*,R2*,E[D]*,active_bound",
        &rows,
        &[],
    ))
}

/// Per-layer optimal rates for Rician vs matched Nakagami across K.
fn fig4(ov: &Overrides, quad_tol: f64, cfg: &SolverConfig) -> Result<String, CliError> {
    let sigma2 = ov.sigma2.unwrap_or(1.0);
    let rx = ov.rx.unwrap_or(1.0);
    let sbar = ov.sbar.unwrap_or(1.0);
    let m = ov.m.unwrap_or(150);
    let s_max = ov.s_max.unwrap_or(2.0 * sbar);
    let src = SourceModel::new(sigma2, rx).map_err(CliError::from)?;
    let ks = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

    let mut jobs: Vec<(&'static str, f64)> = Vec::new();
    for &k in &ks {
        jobs.push(("rician", k));
        jobs.push(("nakagami", k));
    }
    let blocks = parallel_map(jobs, |(family, k)| -> Result<Vec<String>, CliError> {
        let fading = match family {
            "rician" => ContinuousFading::rician(k, sbar),
            _ => {
                let shape = (k + 1.0) * (k + 1.0) / (2.0 * k + 1.0);
                ContinuousFading::nakagami(shape, sbar)
            }
        }
        .map_err(CliError::from)?;
        let pmf = discretize_pdf_tol(&fading, m, s_max, quad_tol).map_err(CliError::from)?;
        let sol = solve_mstate(&pmf, &src, cfg).map_err(CliError::from)?;
        Ok(pmf
            .states()
            .iter()
            .zip(&sol.rates)
            .map(|(s, r)| format!("{family},{},{},{}", fmt12(k), fmt12(*s), fmt12(*r)))
            .collect())
    });
    let mut rows = Vec::new();
    for block in blocks {
        rows.extend(block?);
    }
    Ok(csv_document("family,K,s,R*", &rows, &[]))
}

/// Primal and dual variables of the Rician K=32 instance.
fn fig5(ov: &Overrides, quad_tol: f64, cfg: &SolverConfig) -> Result<String, CliError> {
    let sigma2 = ov.sigma2.unwrap_or(1.0);
    let rx = ov.rx.unwrap_or(0.25);
    let sbar = ov.sbar.unwrap_or(1.0);
    let k = ov.k.unwrap_or(32.0);
    let m = ov.m.unwrap_or(150);
    let s_max = ov.s_max.unwrap_or(2.0 * sbar);
    let src = SourceModel::new(sigma2, rx).map_err(CliError::from)?;
    let fading = ContinuousFading::rician(k, sbar).map_err(CliError::from)?;
    let pmf = discretize_pdf_tol(&fading, m, s_max, quad_tol).map_err(CliError::from)?;
    let sol = solve_mstate(&pmf, &src, cfg).map_err(CliError::from)?;
    let rows: Vec<String> = (0..pmf.len())
        .map(|i| {
            format!(
                "{},{},{},{},{}",
                fmt12(pmf.states()[i]),
                fmt12(pmf.probs()[i]),
                fmt12(sol.distortions[i]),
                fmt12(sol.rates[i]),
                fmt12(sol.dual_lambda[i])
            )
        })
        .collect();
    let footer = vec![
        ("E[D]*".to_string(), fmt12(sol.expected_distortion)),
        ("mu*".to_string(), fmt12(sol.dual_mu)),
        ("kkt_residual".to_string(), fmt12(sol.kkt_residual)),
    ];
    Ok(csv_document("s,p,D*,R*,lambda*", &rows, &footer))
}

/// Minimum expected distortion against the rate budget for several K, with
/// the no-side-information and Wyner-Ziv reference curves.
fn fig6(ov: &Overrides, quad_tol: f64, cfg: &SolverConfig) -> Result<String, CliError> {
    let sigma2 = ov.sigma2.unwrap_or(1.0);
    let sbar = ov.sbar.unwrap_or(10.0);
    let m = ov.m.unwrap_or(150);
    let s_max = ov.s_max.unwrap_or(2.0 * sbar);
    let ks = [0.0, 4.0, 16.0, 64.0];
    let pmfs: Vec<DiscreteFading> = ks
        .iter()
        .map(|&k| {
            let fading = ContinuousFading::rician(k, sbar).map_err(CliError::from)?;
            discretize_pdf_tol(&fading, m, s_max, quad_tol).map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;

    let rates: Vec<f64> = (1..=16).map(|i| 0.25 * i as f64).collect();
    let rows = parallel_map(rates, |rx| -> Result<String, CliError> {
        let src = SourceModel::new(sigma2, rx).map_err(CliError::from)?;
        let mut cells = vec![fmt12(rx)];
        for pmf in &pmfs {
            let sol = solve_mstate(pmf, &src, cfg).map_err(CliError::from)?;
            cells.push(fmt12(sol.expected_distortion));
        }
        cells.push(fmt12(no_si_distortion(&src)));
        cells.push(fmt12(wyner_ziv_distortion(&src, sbar)));
        Ok(cells.join(","))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(csv_document(
        "Rx,ED_K0,ED_K4,ED_K16,ED_K64,NoSI,WZ",
        &rows,
        &[],
    ))
}

/// Single-layer target s_a against K for several rate budgets.
fn fig7(ov: &Overrides) -> Result<String, CliError> {
    let sigma2 = ov.sigma2.unwrap_or(1.0);
    let sbar = ov.sbar.unwrap_or(1.0);
    let rates = [0.25, 0.5, 1.0, 2.0];
    let ks: Vec<f64> = (0..=64).map(|k| k as f64).collect();
    let rows = parallel_map(ks, |k| -> Result<String, CliError> {
        let fading = ContinuousFading::rician(k, sbar).map_err(CliError::from)?;
        let mut cells = vec![fmt12(k)];
        for &rx in &rates {
            let src = SourceModel::new(sigma2, rx).map_err(CliError::from)?;
            let sol = solve_single_layer(&fading, &src, 1e-9).map_err(CliError::from)?;
            cells.push(fmt12(sol.s_a));
        }
        Ok(cells.join(","))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(csv_document(
        "K,sa_Rx0.25,sa_Rx0.5,sa_Rx1,sa_Rx2",
        &rows,
        &[],
    ))
}

/// The pdf, distortion profile, and dual function of the continuous
/// Rician K=32 instance.
fn fig8(ov: &Overrides) -> Result<String, CliError> {
    let sigma2 = ov.sigma2.unwrap_or(1.0);
    let rx = ov.rx.unwrap_or(0.25);
    let sbar = ov.sbar.unwrap_or(1.0);
    let k = ov.k.unwrap_or(32.0);
    let src = SourceModel::new(sigma2, rx).map_err(CliError::from)?;
    let fading = ContinuousFading::rician(k, sbar).map_err(CliError::from)?;
    let sol = solve_single_layer(&fading, &src, 1e-9).map_err(CliError::from)?;
    let profile = mestd::DistortionProfile::new(sol.s_a, &src);
    let s_cut = tail_cutoff(&fading).map_err(CliError::from)?;
    let n = 512usize;
    let grid: Vec<f64> = (0..=n).map(|j| s_cut * j as f64 / n as f64).collect();
    let rows = parallel_map(grid, |s| -> Result<String, CliError> {
        let lam = lambda_at(&fading, &sol, &src, s).map_err(CliError::from)?;
        Ok(format!(
            "{},{},{},{}",
            fmt12(s),
            fmt12(fading.pdf(s).map_err(CliError::from)?),
            fmt12(profile.d(s)),
            fmt12(lam)
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let footer = vec![
        ("s_a".to_string(), fmt12(sol.s_a)),
        ("s_b".to_string(), fmt12(sol.s_b)),
        ("mu".to_string(), fmt12(sol.mu)),
        ("E[D]".to_string(), fmt12(sol.expected_distortion)),
    ];
    Ok(csv_document("s,f,D,lambda", &rows, &footer))
}
