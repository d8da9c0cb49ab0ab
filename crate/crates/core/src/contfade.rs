//! Continuous-fading solution: the single-layer rate allocation that is
//! optimal for quasiconcave pdfs, its dual certificate, the Rayleigh
//! closed form, and the distortion-exponent diagnostic.
//!
//! All rate concentrates at one target gain s_a. The realized distortion is
//!
//! ```text
//! D(s) = 1/(s + sigma^{-2})                        for s <  s_a
//! D(s) = 1/(s - s_a + (s_a + sigma^{-2}) e^{2Rx})  for s >= s_a
//! ```
//!
//! and s_a solves f(s_a) = int_{s_a}^inf w(s) f(s) ds with the weight
//! w(s) = B/(s - s_a + B)^2, B = (s_a + sigma^{-2}) e^{2Rx}. The dual
//! function lambda(s) built from the piecewise integrating factors must stay
//! nonnegative with lambda(s_a) = 0 and a vanishing tail balance; those
//! three quantities are reported as the certificate.

use crate::model::{ContinuousFading, SingleLayerSolution, SourceModel};
use crate::specfun::{self, find_root, integrate};
use std::fmt;

/// Upper-tail mass below which the semi-infinite range is truncated.
const TAIL_MASS: f64 = 1e-10;
/// Grid size for the quasiconcavity check.
const QC_GRID: usize = 2048;
/// Absolute slack when comparing grid pdf values for unimodality.
const QC_TOL: f64 = 1e-12;
/// Default grid size for the dual certificate inside the solver.
const CERT_GRID: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum ContFadeError {
    /// Some superlevel set of the pdf is disconnected beyond tolerance.
    NotQuasiconcave,
    QuadratureFailure,
    /// Rate density requested at the rate-concentration point.
    AtDiscontinuity,
    InvalidInput(String),
}

impl fmt::Display for ContFadeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContFadeError::NotQuasiconcave => write!(f, "NotQuasiconcave"),
            ContFadeError::QuadratureFailure => write!(f, "QuadratureFailure"),
            ContFadeError::AtDiscontinuity => write!(f, "AtDiscontinuity"),
            ContFadeError::InvalidInput(msg) => write!(f, "InvalidInput: {msg}"),
        }
    }
}

impl std::error::Error for ContFadeError {}

// ---------------------------------------------------------------------------
// Distortion profile
// ---------------------------------------------------------------------------

/// The two-piece distortion function induced by concentrating all rate at
/// the target gain s_a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionProfile {
    s_a: f64,
    inv_sigma2: f64,
    rate_budget: f64,
    /// Inverse distortion right after the jump: (s_a + sigma^{-2}) e^{2Rx}.
    b: f64,
}

impl DistortionProfile {
    pub fn new(s_a: f64, src: &SourceModel) -> Self {
        let inv_sigma2 = src.inv_sigma2();
        Self {
            s_a,
            inv_sigma2,
            rate_budget: src.rate_budget(),
            b: (s_a + inv_sigma2) * (2.0 * src.rate_budget()).exp(),
        }
    }

    pub fn s_a(&self) -> f64 {
        self.s_a
    }

    /// Distortion before the layer decodes.
    pub fn d_below(&self, s: f64) -> f64 {
        1.0 / (s + self.inv_sigma2)
    }

    /// Distortion once the layer decodes.
    pub fn d_above(&self, s: f64) -> f64 {
        1.0 / (s - self.s_a + self.b)
    }

    /// The realized distortion at gain s.
    pub fn d(&self, s: f64) -> f64 {
        if s < self.s_a {
            self.d_below(s)
        } else {
            self.d_above(s)
        }
    }

    /// Size of the log-distortion jump at s_a, in rate units: equals the
    /// whole budget R_X.
    pub fn rate_jump(&self) -> f64 {
        0.5 * (self.d_below(self.s_a) / self.d_above(self.s_a)).ln()
    }
}

/// Smooth part of the rate density R(s) = -(1/2)(D(s) + D'(s)/D(s)).
///
/// Both pieces of the single-layer profile satisfy D' = -D^2, so the
/// density vanishes identically away from s_a; the delta at s_a carries
/// the budget.
pub fn continuous_rate_density(profile: &DistortionProfile, s: f64) -> Result<f64, ContFadeError> {
    if s == profile.s_a {
        return Err(ContFadeError::AtDiscontinuity);
    }
    let (d, dprime) = if s < profile.s_a {
        let d = profile.d_below(s);
        (d, -d * d)
    } else {
        let d = profile.d_above(s);
        (d, -d * d)
    };
    Ok(-0.5 * (d + dprime / d))
}

/// Total source-coding rate carried by the profile over [0, s_hi]: the
/// integral of the smooth density plus the jump term at s_a.
pub fn total_rate(profile: &DistortionProfile, s_hi: f64, tol: f64) -> Result<f64, ContFadeError> {
    let smooth_below = if profile.s_a > 0.0 {
        integrate(
            |s| continuous_rate_density(profile, s).unwrap_or(0.0),
            0.0,
            profile.s_a,
            tol,
        )
        .map_err(|_| ContFadeError::QuadratureFailure)?
        .value
    } else {
        0.0
    };
    let smooth_above = integrate(
        |s| continuous_rate_density(profile, s).unwrap_or(0.0),
        profile.s_a,
        s_hi,
        tol,
    )
    .map_err(|_| ContFadeError::QuadratureFailure)?
    .value;
    Ok(smooth_below + smooth_above + profile.rate_jump())
}

// ---------------------------------------------------------------------------
// Tail cutoff and quasiconcavity
// ---------------------------------------------------------------------------

/// Smallest truncation point (found by doubling) whose upper-tail mass is
/// below 1e-10; the declared support end for tabulated pdfs.
pub fn tail_cutoff(fading: &ContinuousFading) -> Result<f64, ContFadeError> {
    if let Some(sup) = fading.support_upper() {
        return Ok(sup);
    }
    let mut hi = 4.0 * fading.scale_hint().max(1e-9);
    for _ in 0..64 {
        let tail = integrate(|s| fading.pdf_at(s), hi, f64::INFINITY, 1e-13)
            .map_err(|_| ContFadeError::QuadratureFailure)?
            .value;
        if tail < TAIL_MASS {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(ContFadeError::QuadratureFailure)
}

struct PdfGrid {
    step: f64,
    values: Vec<f64>,
    peak_idx: usize,
}

/// Samples the pdf on a dense grid and verifies every superlevel set is a
/// single interval (within an absolute slack of 1e-12 on pdf values).
fn quasiconcave_grid(fading: &ContinuousFading, s_cut: f64) -> Result<PdfGrid, ContFadeError> {
    let n = QC_GRID;
    let step = s_cut / n as f64;
    let values: Vec<f64> = (0..=n).map(|i| fading.pdf_at(i as f64 * step)).collect();
    if values.iter().any(|v| v.is_nan()) {
        return Err(ContFadeError::QuadratureFailure);
    }
    let peak_idx = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    for j in 0..peak_idx {
        if values[j + 1] < values[j] - QC_TOL {
            return Err(ContFadeError::NotQuasiconcave);
        }
    }
    for j in peak_idx..n {
        if values[j + 1] > values[j] + QC_TOL {
            return Err(ContFadeError::NotQuasiconcave);
        }
    }
    Ok(PdfGrid {
        step,
        values,
        peak_idx,
    })
}

/// Golden-section refinement of the pdf maximum around the grid peak.
fn refine_mode(fading: &ContinuousFading, grid: &PdfGrid) -> f64 {
    if grid.peak_idx == 0 {
        return 0.0;
    }
    let mut lo = grid.step * (grid.peak_idx - 1) as f64;
    let mut hi = grid.step * (grid.peak_idx + 1).min(grid.values.len() - 1) as f64;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = fading.pdf_at(x1);
    let mut f2 = fading.pdf_at(x2);
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = fading.pdf_at(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = fading.pdf_at(x1);
        }
        if hi - lo < 1e-12 * (1.0 + hi) {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Single-layer solution
// ---------------------------------------------------------------------------

/// Weighted tail average of the pdf minus its value at s_a; the root in
/// s_a pins the optimal target.
fn balance_gap(
    fading: &ContinuousFading,
    src: &SourceModel,
    s_a: f64,
    quad_tol: f64,
) -> Result<f64, ContFadeError> {
    Ok(weighted_tail_average(fading, src, s_a, quad_tol)? - fading.pdf_at(s_a))
}

/// int_{s_a}^inf w(s) f(s) ds with w(s) = B/(s - s_a + B)^2; this equals
/// mu/2 of the single-layer dual when evaluated at the solution.
fn weighted_tail_average(
    fading: &ContinuousFading,
    src: &SourceModel,
    s_a: f64,
    quad_tol: f64,
) -> Result<f64, ContFadeError> {
    let b = (s_a + src.inv_sigma2()) * (2.0 * src.rate_budget()).exp();
    integrate(
        |s| fading.pdf_at(s) * b / ((s - s_a + b) * (s - s_a + b)),
        s_a,
        f64::INFINITY,
        quad_tol,
    )
    .map(|r| r.value)
    .map_err(|_| ContFadeError::QuadratureFailure)
}

/// Finds the single-layer optimum for a continuous quasiconcave pdf.
///
/// Monotone nonincreasing densities short-circuit to s_a = 0; otherwise the
/// leftmost root of the balance equation on [0, mode] is taken. The rate
/// multiplier mu is twice the weighted tail average at s_a (which equals
/// 2 f(s_a) at an interior root), and the dual certificate is evaluated on
/// a 512-point grid.
pub fn solve_single_layer(
    fading: &ContinuousFading,
    src: &SourceModel,
    tol: f64,
) -> Result<SingleLayerSolution, ContFadeError> {
    if !(tol > 0.0) {
        return Err(ContFadeError::InvalidInput("tol must be positive".into()));
    }
    let s_cut = tail_cutoff(fading)?;
    let grid = quasiconcave_grid(fading, s_cut)?;
    let quad_tol = (0.01 * tol).clamp(1e-13, 1e-9);

    let g0 = balance_gap(fading, src, 0.0, quad_tol)?;
    let s_a = if g0 <= 0.0 {
        0.0
    } else {
        let mode = refine_mode(fading, &grid);
        // scan for the first sign change so plateaus resolve to the
        // leftmost root
        let scan = 32usize;
        let mut bracket = None;
        let mut prev_s = 0.0;
        let mut prev_g = g0;
        for j in 1..=scan {
            let s = mode * j as f64 / scan as f64;
            let gj = balance_gap(fading, src, s, quad_tol)?;
            if prev_g > 0.0 && gj <= 0.0 {
                bracket = Some((prev_s, s));
                break;
            }
            prev_s = s;
            prev_g = gj;
        }
        match bracket {
            Some((lo, hi)) => find_root(
                |s| balance_gap(fading, src, s, quad_tol).unwrap_or(f64::NAN),
                lo,
                hi,
                tol,
            )
            .map_err(|_| ContFadeError::QuadratureFailure)?,
            // the balance gap stayed positive along the whole ridge;
            // the mode is the best remaining target
            None => mode,
        }
    };

    let mu = 2.0 * weighted_tail_average(fading, src, s_a, quad_tol)?;
    let b = (s_a + src.inv_sigma2()) * (2.0 * src.rate_budget()).exp();

    let below = if s_a > 0.0 {
        integrate(|s| fading.pdf_at(s) / (s + src.inv_sigma2()), 0.0, s_a, 0.0)
            .map_err(|_| ContFadeError::QuadratureFailure)?
            .value
    } else {
        0.0
    };
    let above = integrate(
        |s| fading.pdf_at(s) / (s - s_a + b),
        s_a,
        f64::INFINITY,
        0.0,
    )
    .map_err(|_| ContFadeError::QuadratureFailure)?
    .value;

    let s_b = superlevel_right_end(&grid, mu, fading, s_cut);

    let mut sol = SingleLayerSolution {
        s_a,
        mu,
        expected_distortion: below + above,
        certificate_min_lambda: f64::NAN,
        certificate_balance: f64::NAN,
        s_b,
    };
    let (min_lambda, balance) = certificate_on_grid(fading, &sol, src, CERT_GRID, s_cut)?;
    sol.certificate_min_lambda = min_lambda;
    sol.certificate_balance = balance;
    Ok(sol)
}

/// Right endpoint of the {f >= mu/2} superlevel set, located on the dense
/// grid and refined by bisection.
fn superlevel_right_end(grid: &PdfGrid, mu: f64, fading: &ContinuousFading, s_cut: f64) -> f64 {
    let threshold = 0.5 * mu;
    let n = grid.values.len() - 1;
    let mut idx = None;
    for j in (0..=n).rev() {
        if grid.values[j] >= threshold {
            idx = Some(j);
            break;
        }
    }
    match idx {
        None => 0.0,
        Some(j) if j == n => s_cut,
        Some(j) => {
            let mut lo = grid.step * j as f64;
            let mut hi = grid.step * (j + 1) as f64;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if fading.pdf_at(mid) >= threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

// ---------------------------------------------------------------------------
// Dual certificate
// ---------------------------------------------------------------------------

/// Evaluates the dual function lambda(s) on a grid over [0, tail cutoff]:
/// returns its minimum and the tail balance (the limit of w_2(s) lambda(s),
/// which vanishes at the exact solution).
pub fn dual_certificate(
    fading: &ContinuousFading,
    sol: &SingleLayerSolution,
    src: &SourceModel,
    grid: usize,
) -> Result<(f64, f64), ContFadeError> {
    if grid < 2 {
        return Err(ContFadeError::InvalidInput("grid must be >= 2".into()));
    }
    let s_cut = tail_cutoff(fading)?;
    certificate_on_grid(fading, sol, src, grid, s_cut)
}

fn certificate_on_grid(
    fading: &ContinuousFading,
    sol: &SingleLayerSolution,
    src: &SourceModel,
    grid: usize,
    s_cut: f64,
) -> Result<(f64, f64), ContFadeError> {
    let s_a = sol.s_a;
    let half_mu = 0.5 * sol.mu;
    let inv_sigma2 = src.inv_sigma2();
    let b = (s_a + inv_sigma2) * (2.0 * src.rate_budget()).exp();
    let w1 = |s: f64| ((s_a + inv_sigma2) / (s + inv_sigma2)).powi(2);
    let w2 = |s: f64| (b / (s - s_a + b)).powi(2);
    let h1 = |s: f64| w1(s) * (fading.pdf_at(s) - half_mu);
    let h2 = |s: f64| w2(s) * (fading.pdf_at(s) - half_mu);
    let seg_tol = 1e-13;

    let mut points: Vec<f64> = (0..=grid).map(|j| s_cut * j as f64 / grid as f64).collect();
    if s_a < s_cut && points.iter().all(|&p| p != s_a) {
        points.push(s_a);
        points.sort_by(f64::total_cmp);
    }
    let split = points.partition_point(|&p| p < s_a);

    let mut min_lambda = f64::INFINITY;
    // lambda(s_a) = 0 by the boundary condition
    if split < points.len() {
        min_lambda = 0.0;
    }

    // below s_a: lambda(s) = -(1/w1(s)) int_s^{s_a} h1
    let mut acc = 0.0;
    for j in (0..split).rev() {
        let upper = if j + 1 == split { s_a } else { points[j + 1] };
        acc += integrate(h1, points[j], upper, seg_tol)
            .map_err(|_| ContFadeError::QuadratureFailure)?
            .value;
        let lambda = -acc / w1(points[j]);
        min_lambda = min_lambda.min(lambda);
    }

    // above s_a: lambda(s) = (1/w2(s)) int_{s_a}^s h2
    let mut acc = 0.0;
    let mut prev = s_a;
    for &s in &points[split..] {
        if s > prev {
            acc += integrate(h2, prev, s, seg_tol)
                .map_err(|_| ContFadeError::QuadratureFailure)?
                .value;
            prev = s;
        }
        let lambda = acc / w2(s);
        min_lambda = min_lambda.min(lambda);
    }

    // tail balance: int_{s_a}^inf w2 (f - mu/2) with the pure-weight tail
    // integral taken in closed form (the pdf tail above s_cut is < 1e-10)
    let balance = acc - half_mu * b * b / (s_cut - s_a + b);
    Ok((min_lambda, balance))
}

/// The dual function at a single gain.
pub fn lambda_at(
    fading: &ContinuousFading,
    sol: &SingleLayerSolution,
    src: &SourceModel,
    s: f64,
) -> Result<f64, ContFadeError> {
    if !(s >= 0.0) {
        return Err(ContFadeError::InvalidInput("s must be nonnegative".into()));
    }
    let s_a = sol.s_a;
    let half_mu = 0.5 * sol.mu;
    let inv_sigma2 = src.inv_sigma2();
    let b = (s_a + inv_sigma2) * (2.0 * src.rate_budget()).exp();
    if s < s_a {
        let w1 = |t: f64| ((s_a + inv_sigma2) / (t + inv_sigma2)).powi(2);
        let acc = integrate(|t| w1(t) * (fading.pdf_at(t) - half_mu), s, s_a, 1e-13)
            .map_err(|_| ContFadeError::QuadratureFailure)?
            .value;
        Ok(-acc / w1(s))
    } else if s == s_a {
        Ok(0.0)
    } else {
        let w2 = |t: f64| (b / (t - s_a + b)).powi(2);
        let acc = integrate(|t| w2(t) * (fading.pdf_at(t) - half_mu), s_a, s, 1e-13)
            .map_err(|_| ContFadeError::QuadratureFailure)?
            .value;
        Ok(acc / w2(s))
    }
}

// ---------------------------------------------------------------------------
// Rayleigh closed form and distortion exponent
// ---------------------------------------------------------------------------

/// Minimum expected distortion under Rayleigh fading with mean gain `sbar`:
/// (1/sbar) e^{C/sbar} E1(C/sbar) with C = sigma^{-2} e^{2Rx}, evaluated in
/// the scaled form so large rates do not overflow.
pub fn rayleigh_closed_form(sbar: f64, src: &SourceModel) -> f64 {
    debug_assert!(sbar > 0.0);
    let c = src.inv_sigma2() * (2.0 * src.rate_budget()).exp();
    specfun::exp_e1_scaled(c / sbar).expect("argument is positive") / sbar
}

/// Distortion exponents -log(expected distortion)/(2 Rx) for an ascending
/// list of positive rates, each solved by the single-layer construction.
pub fn distortion_exponent(
    fading: &ContinuousFading,
    src_base: &SourceModel,
    rates: &[f64],
) -> Result<Vec<f64>, ContFadeError> {
    if rates.is_empty() || rates[0] <= 0.0 || rates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ContFadeError::InvalidInput(
            "rates must be positive and ascending".into(),
        ));
    }
    let mut out = Vec::with_capacity(rates.len());
    for &rx in rates {
        let src = src_base
            .with_rate(rx)
            .map_err(|e| ContFadeError::InvalidInput(e.to_string()))?;
        let sol = solve_single_layer(fading, &src, 1e-9)?;
        out.push(-sol.expected_distortion.ln() / (2.0 * rx));
    }
    Ok(out)
}
