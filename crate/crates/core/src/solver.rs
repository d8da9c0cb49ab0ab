//! M-state expected-distortion minimization.
//!
//! The program, in the per-state distortions D_1..D_M (D_0 = sigma_X^2,
//! s_0 = 0, deltas are state-gain gaps):
//!
//! ```text
//! minimize    p^T D
//! subject to  -(1/2) log(sigma^{-2}+s_1) - (1/2) log D_M
//!             - (1/2) sum_{i<M} log(1 + (s_{i+1}-s_i) D_i)  <=  R_X
//!             D_i <= (D_{i-1}^{-1} + s_i - s_{i-1})^{-1},   i = 1..M
//! ```
//!
//! It is solved by a primal-dual interior-point method with the variables
//! kept in the log domain (x = log D), which makes positivity implicit and
//! keeps the Newton systems well scaled. The multipliers attach to the
//! constraints in their original form, so they are exactly the program's
//! dual variables. Convergence is declared on the true KKT residual, the
//! same quantity [`kkt_certify`] reports.

use crate::hbrate;
use crate::model::{DiscreteFading, LayeredSolution, SourceModel};
use std::fmt;

/// Interior-point configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// KKT residual target; the solver exits once [`KktReport::max_residual`]
    /// falls below it.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Factor by which the surrogate duality gap shrinks per iteration
    /// (the barrier parameter grows by its inverse).
    pub barrier_reduction: f64,
    /// Scaling of the strictly feasible no-rate starting chain.
    pub initial_point_slack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
            barrier_reduction: 0.1,
            initial_point_slack: 0.99,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        let ok = self.tolerance > 0.0
            && self.barrier_reduction > 0.0
            && self.barrier_reduction < 1.0
            && self.initial_point_slack > 0.0
            && self.initial_point_slack < 1.0
            && self.max_iterations > 0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig)
        }
    }
}

/// Residuals of the full KKT system, all nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Largest stationarity violation of the Lagrangian gradient.
    pub stationarity_residual: f64,
    /// Largest complementary-slackness product |multiplier * constraint|.
    pub complementarity_residual: f64,
    /// Largest positive constraint violation.
    pub primal_infeasibility: f64,
    /// Largest multiplier negativity.
    pub dual_infeasibility: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual
            .max(self.complementarity_residual)
            .max(self.primal_infeasibility)
            .max(self.dual_infeasibility)
    }
}

#[derive(Debug, Clone)]
pub enum SolverError {
    /// Iteration budget exhausted; the best iterate and its report ride along.
    MaxIterationsExceeded {
        best: Box<LayeredSolution>,
        report: KktReport,
    },
    /// Oracle feasible box narrower than the requested grid step.
    GridTooCoarse,
    /// Oracle invoked with more than three states.
    TooManyStates,
    InvalidConfig,
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::MaxIterationsExceeded { report, .. } => write!(
                f,
                "MaxIterationsExceeded (best residual {:.3e})",
                report.max_residual()
            ),
            SolverError::GridTooCoarse => write!(f, "GridTooCoarse"),
            SolverError::TooManyStates => write!(f, "TooManyStates"),
            SolverError::InvalidConfig => write!(f, "InvalidConfig"),
        }
    }
}

impl std::error::Error for SolverError {}

// ---------------------------------------------------------------------------
// Problem data
// ---------------------------------------------------------------------------

struct Problem<'a> {
    p: &'a [f64],
    /// delta[i] = s_i - s_{i-1} with s_0 = 0
    delta: Vec<f64>,
    /// gap[i] = s_{i+1} - s_i for i < M-1
    gap: Vec<f64>,
    c0: f64,
    sigma2: f64,
    rx: f64,
    m: usize,
}

impl<'a> Problem<'a> {
    fn new(fading: &'a DiscreteFading, src: &SourceModel) -> Self {
        let s = fading.states();
        let m = fading.len();
        let delta = (0..m)
            .map(|i| if i == 0 { s[0] } else { s[i] - s[i - 1] })
            .collect();
        let gap = (0..m.saturating_sub(1)).map(|i| s[i + 1] - s[i]).collect();
        Self {
            p: fading.probs(),
            delta,
            gap,
            c0: src.inv_sigma2() + s[0],
            sigma2: src.sigma2_x(),
            rx: src.rate_budget(),
            m,
        }
    }

    /// Chain upper bound for layer i given the previous distortion.
    fn chain_bound(&self, i: usize, d_prev: f64) -> f64 {
        1.0 / (1.0 / d_prev + self.delta[i])
    }

    /// All M+1 constraint values; index 0 is the rate constraint.
    fn constraints(&self, d: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut g = Vec::with_capacity(m + 1);
        let mut rate = -0.5 * self.c0.ln() - 0.5 * d[m - 1].ln();
        for (gap, di) in self.gap.iter().zip(d) {
            rate -= 0.5 * (1.0 + gap * di).ln();
        }
        g.push(rate - self.rx);
        let mut d_prev = self.sigma2;
        for (i, &di) in d.iter().enumerate() {
            g.push(di - self.chain_bound(i, d_prev));
            d_prev = di;
        }
        g
    }

    /// Stationarity residuals of the Lagrangian gradient at (d, lambda, mu).
    fn stationarity(&self, d: &[f64], lambda: &[f64], mu: f64) -> Vec<f64> {
        let m = self.m;
        let mut r = Vec::with_capacity(m);
        for i in 0..m - 1 {
            let q = 1.0 + self.gap[i] * d[i];
            r.push(self.p[i] + lambda[i] - lambda[i + 1] / (q * q) - 0.5 * mu * self.gap[i] / q);
        }
        r.push(self.p[m - 1] + lambda[m - 1] - 0.5 * mu / d[m - 1]);
        r
    }

    /// No-rate chain: distortions when the encoder sends nothing.
    fn norate_chain(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.m);
        let mut d_prev = self.sigma2;
        for i in 0..self.m {
            let b = self.chain_bound(i, d_prev);
            d.push(b);
            d_prev = b;
        }
        d
    }
}

// ---------------------------------------------------------------------------
// KKT certification
// ---------------------------------------------------------------------------

/// Evaluates the full KKT system at a candidate solution: stationarity of
/// the Lagrangian gradient, complementary slackness, primal feasibility of
/// the rate and chain constraints, and dual feasibility.
pub fn kkt_certify(
    candidate: &LayeredSolution,
    fading: &DiscreteFading,
    src: &SourceModel,
) -> KktReport {
    let prob = Problem::new(fading, src);
    let d = &candidate.distortions;
    let lambda = &candidate.dual_lambda;
    let mu = candidate.dual_mu;

    if d.len() != prob.m
        || lambda.len() != prob.m
        || d.iter().any(|&x| !(x > 0.0) || !x.is_finite())
    {
        return KktReport {
            stationarity_residual: f64::INFINITY,
            complementarity_residual: f64::INFINITY,
            primal_infeasibility: f64::INFINITY,
            dual_infeasibility: f64::INFINITY,
        };
    }

    let g = prob.constraints(d);
    let stat = prob.stationarity(d, lambda, mu);

    let stationarity_residual = stat.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    let mut complementarity_residual = (mu * g[0]).abs();
    for i in 0..prob.m {
        complementarity_residual = complementarity_residual.max((lambda[i] * g[i + 1]).abs());
    }
    let primal_infeasibility = g.iter().fold(0.0f64, |acc, &gi| acc.max(gi));
    let mut dual_infeasibility = (-mu).max(0.0);
    for &l in lambda {
        dual_infeasibility = dual_infeasibility.max(-l);
    }
    dual_infeasibility = dual_infeasibility.max(0.0);

    KktReport {
        stationarity_residual,
        complementarity_residual,
        primal_infeasibility,
        dual_infeasibility,
    }
}

// ---------------------------------------------------------------------------
// Dense linear solve
// ---------------------------------------------------------------------------

/// Solves the n x n system `a x = b` in place by Gaussian elimination with
/// partial pivoting; `a` is row-major. Returns false if singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return false;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let pivot = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r] -= factor * b[col];
        }
    }
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r * n + c] * b[c];
        }
        b[r] = acc / a[r * n + r];
    }
    true
}

// ---------------------------------------------------------------------------
// Interior-point solver
// ---------------------------------------------------------------------------

struct Jacobian {
    /// Rate-constraint row, dense over the M variables (in x = log D).
    rate: Vec<f64>,
    /// Diagonal entries of chain rows: d g_i / d x_i = D_i.
    diag: Vec<f64>,
    /// Subdiagonal entries: d g_i / d x_{i-1}, for i = 1..M-1 (0-based).
    sub: Vec<f64>,
}

fn jacobian(prob: &Problem, d: &[f64]) -> Jacobian {
    let m = prob.m;
    let mut rate = vec![0.0; m];
    for i in 0..m - 1 {
        let u = prob.gap[i] * d[i];
        rate[i] = -0.5 * u / (1.0 + u);
    }
    rate[m - 1] = -0.5;
    let diag = d.to_vec();
    let mut sub = vec![0.0; m];
    for i in 1..m {
        let q = 1.0 + prob.delta[i] * d[i - 1];
        sub[i] = -d[i - 1] / (q * q);
    }
    Jacobian { rate, diag, sub }
}

/// Row `k` of the Jacobian dotted with `v` (k = 0 is the rate row).
fn jac_row_dot(jac: &Jacobian, k: usize, v: &[f64]) -> f64 {
    if k == 0 {
        jac.rate.iter().zip(v).map(|(a, b)| a * b).sum()
    } else {
        let i = k - 1;
        let mut acc = jac.diag[i] * v[i];
        if i >= 1 {
            acc += jac.sub[i] * v[i - 1];
        }
        acc
    }
}

/// Diagonal Hessian (in x) of the Lagrangian objective + multiplier-weighted
/// constraints. Every constraint Hessian here is diagonal because each g_k
/// separates across coordinates of x.
fn lagrangian_hessian_diag(prob: &Problem, d: &[f64], z: &[f64]) -> Vec<f64> {
    let m = prob.m;
    let mut h = vec![0.0; m];
    for i in 0..m {
        h[i] = prob.p[i] * d[i];
    }
    let mu = z[0];
    for i in 0..m - 1 {
        let u = prob.gap[i] * d[i];
        let q = 1.0 + u;
        h[i] += mu * (-0.5 * u / (q * q));
    }
    for k in 0..m {
        // own variable of chain constraint k: e^{x_k}
        h[k] += z[k + 1] * d[k];
        if k >= 1 {
            // previous variable: D (delta D - 1) / (1 + delta D)^3
            let dd = prob.delta[k] * d[k - 1];
            let q = 1.0 + dd;
            h[k - 1] += z[k + 1] * d[k - 1] * (dd - 1.0) / (q * q * q);
        }
    }
    h
}

fn residual_norm(prob: &Problem, d: &[f64], g: &[f64], jac: &Jacobian, z: &[f64], t: f64) -> f64 {
    let m = prob.m;
    let mut sq = 0.0;
    for i in 0..m {
        let mut r = prob.p[i] * d[i] + jac.rate[i] * z[0] + jac.diag[i] * z[i + 1];
        if i + 1 < m {
            r += jac.sub[i + 1] * z[i + 2];
        }
        sq += r * r;
    }
    for k in 0..=m {
        let r = -z[k] * g[k] - 1.0 / t;
        sq += r * r;
    }
    sq.sqrt()
}

fn build_solution(
    prob: &Problem,
    fading: &DiscreteFading,
    src: &SourceModel,
    d: &[f64],
    z: &[f64],
) -> LayeredSolution {
    let chain = hbrate::variance_chain(d, fading, src).expect("iterates stay positive");
    let coefficients = hbrate::codebook_coefficients(&chain, fading);
    let expected_distortion = prob.p.iter().zip(d).map(|(p, di)| p * di).sum();
    let mut sol = LayeredSolution {
        distortions: d.to_vec(),
        variances: chain.variances,
        rates: chain.rates,
        coefficients,
        expected_distortion,
        dual_lambda: z[1..].to_vec(),
        dual_mu: z[0],
        kkt_residual: f64::INFINITY,
    };
    sol.kkt_residual = kkt_certify(&sol, fading, src).max_residual();
    sol
}

/// Minimizes the expected distortion p^T D over the feasible region.
///
/// Returns the primal distortions, the recovered variance chain and layer
/// rates, the dual variables, and the certified KKT residual. The no-rate
/// chain scaled by `initial_point_slack` provides a strictly feasible start
/// whenever R_X > 0; R_X = 0 short-circuits to the no-rate chain with duals
/// recovered from the stationarity recursion.
pub fn solve_mstate(
    fading: &DiscreteFading,
    src: &SourceModel,
    cfg: &SolverConfig,
) -> Result<LayeredSolution, SolverError> {
    cfg.validate()?;
    let prob = Problem::new(fading, src);
    let m = prob.m;

    if src.rate_budget() == 0.0 {
        return Ok(norate_solution(&prob, fading, src));
    }

    // strictly feasible start: shrink the no-rate chain, keeping the induced
    // rate below R_X (rate(c * chain) <= -(M/2) log c)
    let norate = prob.norate_chain();
    let mut slack = cfg
        .initial_point_slack
        .max(0.5 + 0.5 * (-2.0 * prob.rx / m as f64).exp());
    let mut d: Vec<f64> = norate.iter().map(|v| v * slack).collect();
    let mut g = prob.constraints(&d);
    for _ in 0..60 {
        if g.iter().all(|&gi| gi < 0.0) {
            break;
        }
        slack = 0.5 + 0.5 * slack;
        d = norate.iter().map(|v| v * slack).collect();
        g = prob.constraints(&d);
    }

    let mut x: Vec<f64> = d.iter().map(|v| v.ln()).collect();
    // moderate initial duals; 1/(-g) would start the barely-slack chain
    // constraints with huge multipliers and collapse the gap prematurely
    let mut z: Vec<f64> = vec![1.0; m + 1];

    let mut best: Option<LayeredSolution> = None;
    let n_cons = (m + 1) as f64;
    let mut t_prev = 0.0f64;

    for _ in 0..cfg.max_iterations {
        let sol = build_solution(&prob, fading, src, &d, &z);
        let better = best
            .as_ref()
            .map(|b| sol.kkt_residual < b.kkt_residual)
            .unwrap_or(true);
        if better {
            best = Some(sol.clone());
        }
        if sol.kkt_residual <= cfg.tolerance {
            return Ok(sol);
        }

        let gap: f64 = z.iter().zip(&g).map(|(zk, gk)| -zk * gk).sum();
        // monotone barrier parameter, growth capped so the gap cannot
        // collapse while the stationarity residual is still large
        let mut t = n_cons / (cfg.barrier_reduction * gap.max(1e-300));
        if t_prev > 0.0 {
            t = t.clamp(t_prev, t_prev / cfg.barrier_reduction);
        }
        t_prev = t;

        let jac = jacobian(&prob, &d);
        let r0 = residual_norm(&prob, &d, &g, &jac, &z, t);

        // Newton step on the reduced system
        // (H + J^T diag(z/-g) J) dx = -grad f + (1/t) J^T (1/g)
        let mut accepted = false;
        let mut ridge = 0.0f64;
        for _attempt in 0..8 {
            let h = lagrangian_hessian_diag(&prob, &d, &z);
            let mut a = vec![0.0f64; m * m];
            for i in 0..m {
                a[i * m + i] = h[i] + ridge;
            }
            let w0 = z[0] / (-g[0]);
            for i in 0..m {
                if jac.rate[i] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    a[i * m + j] += w0 * jac.rate[i] * jac.rate[j];
                }
            }
            for k in 0..m {
                let w = z[k + 1] / (-g[k + 1]);
                a[k * m + k] += w * jac.diag[k] * jac.diag[k];
                if k >= 1 {
                    let cross = w * jac.diag[k] * jac.sub[k];
                    a[k * m + (k - 1)] += cross;
                    a[(k - 1) * m + k] += cross;
                    a[(k - 1) * m + (k - 1)] += w * jac.sub[k] * jac.sub[k];
                }
            }

            let mut rhs = vec![0.0f64; m];
            for i in 0..m {
                let mut v = -prob.p[i] * d[i] + (jac.rate[i] / g[0] + jac.diag[i] / g[i + 1]) / t;
                if i + 1 < m {
                    v += jac.sub[i + 1] / (t * g[i + 2]);
                }
                rhs[i] = v;
            }

            if !solve_dense(&mut a, &mut rhs, m) {
                ridge = if ridge == 0.0 { 1e-10 } else { ridge * 100.0 };
                continue;
            }
            let dx = rhs;

            let mut dz = vec![0.0f64; m + 1];
            for k in 0..=m {
                let jdx = jac_row_dot(&jac, k, &dx);
                dz[k] = -z[k] - 1.0 / (t * g[k]) - z[k] * jdx / g[k];
            }

            // longest step keeping z strictly positive
            let mut alpha = 1.0f64;
            for k in 0..=m {
                if dz[k] < 0.0 {
                    alpha = alpha.min(-0.99 * z[k] / dz[k]);
                }
            }

            // backtrack to stay strictly primal feasible and shrink the residual
            let mut ls_ok = false;
            for _ in 0..60 {
                let x_new: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + alpha * di).collect();
                let d_new: Vec<f64> = x_new.iter().map(|v| v.exp()).collect();
                let z_new: Vec<f64> = z.iter().zip(&dz).map(|(zi, di)| zi + alpha * di).collect();
                let g_new = prob.constraints(&d_new);
                if g_new.iter().all(|&gi| gi < 0.0) {
                    let jac_new = jacobian(&prob, &d_new);
                    let r_new = residual_norm(&prob, &d_new, &g_new, &jac_new, &z_new, t);
                    if r_new <= (1.0 - 0.01 * alpha) * r0 {
                        x = x_new;
                        d = d_new;
                        z = z_new;
                        g = g_new;
                        ls_ok = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if ls_ok {
                accepted = true;
                break;
            }
            ridge = if ridge == 0.0 { 1e-10 } else { ridge * 100.0 };
        }

        if !accepted {
            break;
        }
    }

    let sol = build_solution(&prob, fading, src, &d, &z);
    let best = match best {
        Some(b) if b.kkt_residual <= sol.kkt_residual => b,
        _ => sol,
    };
    if best.kkt_residual <= cfg.tolerance {
        return Ok(best);
    }
    let report = kkt_certify(&best, fading, src);
    Err(SolverError::MaxIterationsExceeded {
        best: Box::new(best),
        report,
    })
}

/// R_X = 0: the only feasible point is the no-rate chain. All chain
/// constraints and the rate constraint are active, so the duals are not
/// unique; the smallest mu making every lambda_i >= 0 is reported.
fn norate_solution(prob: &Problem, fading: &DiscreteFading, src: &SourceModel) -> LayeredSolution {
    let m = prob.m;
    let d = prob.norate_chain();
    // lambda_i(mu) is affine and increasing in mu via the backward recursion
    // from stationarity; find the smallest feasible mu by two evaluations
    let lambda_of_mu = |mu: f64| -> Vec<f64> {
        let mut lambda = vec![0.0; m];
        lambda[m - 1] = 0.5 * mu / d[m - 1] - prob.p[m - 1];
        for i in (0..m - 1).rev() {
            let q = 1.0 + prob.gap[i] * d[i];
            lambda[i] = lambda[i + 1] / (q * q) + 0.5 * mu * prob.gap[i] / q - prob.p[i];
        }
        lambda
    };
    let l0 = lambda_of_mu(0.0);
    let l1 = lambda_of_mu(1.0);
    let mut mu = 0.0f64;
    for i in 0..m {
        let slope = l1[i] - l0[i];
        if slope > 0.0 && l0[i] < 0.0 {
            mu = mu.max(-l0[i] / slope);
        }
    }
    let lambda = lambda_of_mu(mu).iter().map(|l| l.max(0.0)).collect();
    let chain = hbrate::variance_chain(&d, fading, src).expect("no-rate chain is positive");
    let coefficients = hbrate::codebook_coefficients(&chain, fading);
    let expected_distortion = prob.p.iter().zip(&d).map(|(p, di)| p * di).sum();
    let mut sol = LayeredSolution {
        distortions: d,
        variances: chain.variances,
        rates: chain.rates,
        coefficients,
        expected_distortion,
        dual_lambda: lambda,
        dual_mu: mu,
        kkt_residual: f64::INFINITY,
    };
    sol.kkt_residual = kkt_certify(&sol, fading, src).max_residual();
    sol
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

/// Exhaustive grid search for M <= 3: D_1 (and D_2) sweep their feasible
/// ranges while the last coordinate is solved from the rate constraint held
/// with equality. Ties keep the earliest grid point. Returns the grid
/// minimizer and its expected distortion.
pub fn brute_force_oracle(
    fading: &DiscreteFading,
    src: &SourceModel,
    grid_step: f64,
) -> Result<(Vec<f64>, f64), SolverError> {
    assert!(grid_step > 0.0, "grid_step must be positive");
    let prob = Problem::new(fading, src);
    let m = prob.m;
    if m > 3 {
        return Err(SolverError::TooManyStates);
    }
    let e2r = (2.0 * prob.rx).exp();

    if m == 1 {
        let d1 = 1.0 / (e2r * prob.c0);
        return Ok((vec![d1], prob.p[0] * d1));
    }

    // base-layer feasible box
    let d1_hi = 1.0 / prob.c0;
    let d1_lo = d1_hi / e2r;
    if d1_hi - d1_lo < grid_step && prob.rx > 0.0 {
        return Err(SolverError::GridTooCoarse);
    }

    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        let mut v = Vec::new();
        let mut x = lo;
        while x < hi {
            v.push(x);
            x += grid_step;
        }
        v.push(hi);
        v
    };

    let mut best_d = Vec::new();
    let mut best_obj = f64::INFINITY;

    if m == 2 {
        for d1 in grid(d1_lo, d1_hi) {
            let d2 = 1.0 / (e2r * prob.c0 * (1.0 + prob.gap[0] * d1));
            let obj = prob.p[0] * d1 + prob.p[1] * d2;
            if obj < best_obj {
                best_obj = obj;
                best_d = vec![d1, d2];
            }
        }
    } else {
        for d1 in grid(d1_lo, d1_hi) {
            // remaining rate after the base layer fixes its share
            let q1 = 1.0 + prob.gap[0] * d1;
            let d2_hi = prob.chain_bound(1, d1);
            // zero top-layer rate pins the lower end of the D2 window
            let d2_lo = (1.0 / (e2r * prob.c0 * q1)).min(d2_hi);
            for d2 in grid(d2_lo, d2_hi) {
                let q2 = 1.0 + prob.gap[1] * d2;
                let d3 = 1.0 / (e2r * prob.c0 * q1 * q2);
                let obj = prob.p[0] * d1 + prob.p[1] * d2 + prob.p[2] * d3;
                if obj < best_obj {
                    best_obj = obj;
                    best_d = vec![d1, d2, d3];
                }
            }
        }
    }
    Ok((best_d, best_obj))
}

/// Grid-resolution error bound for the oracle at the returned minimizer:
/// how much the grid minimum can exceed the true minimum.
pub fn oracle_error_bound(
    fading: &DiscreteFading,
    src: &SourceModel,
    minimizer: &[f64],
    grid_step: f64,
) -> f64 {
    let prob = Problem::new(fading, src);
    let m = prob.m;
    match m {
        1 => 0.0,
        2 => {
            // |dD2/dD1| = gap * D2 / (1 + gap * D1) along the Pareto curve
            let c1 = minimizer[1] * prob.gap[0] / (1.0 + prob.gap[0] * minimizer[0]);
            (prob.p[0] + prob.p[1] * c1) * grid_step
        }
        _ => {
            let d3 = minimizer[2];
            let c1 = d3 * prob.gap[0];
            let c2 = d3 * prob.gap[1];
            // D1 shifts by one step; the feasible D2 window can shift by up
            // to one more step, so D2 moves by at most two
            (prob.p[0] + 2.0 * prob.p[1] + prob.p[2] * (c1 + 2.0 * c2)) * grid_step
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbrate::{no_si_distortion, wyner_ziv_distortion};
    use crate::testutil::SplitMix64;
    use crate::twostate::solve_two_state;

    fn src(sigma2: f64, rx: f64) -> SourceModel {
        SourceModel::new(sigma2, rx).unwrap()
    }

    fn random_two_state(rng: &mut SplitMix64) -> (DiscreteFading, SourceModel) {
        loop {
            let a = rng.log_range(0.01, 100.0);
            let b = rng.log_range(0.01, 100.0);
            let (s1, s2) = if a < b { (a, b) } else { (b, a) };
            if s2 - s1 < 1e-9 {
                continue;
            }
            let p1 = rng.uniform();
            let fading = DiscreteFading::new(vec![s1, s2], vec![p1, 1.0 - p1]).unwrap();
            let src = SourceModel::new(1.0, rng.range(0.01, 4.0)).unwrap();
            return (fading, src);
        }
    }

    pub(crate) fn random_three_state(rng: &mut SplitMix64) -> (DiscreteFading, SourceModel) {
        loop {
            let mut s: Vec<f64> = (0..3).map(|_| rng.log_range(0.01, 10.0)).collect();
            s.sort_by(f64::total_cmp);
            if s[1] - s[0] < 1e-6 || s[2] - s[1] < 1e-6 {
                continue;
            }
            let mut p: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
            let total: f64 = p.iter().sum();
            for q in &mut p {
                *q /= total;
            }
            let fading = DiscreteFading::new(s, p).unwrap();
            let src = SourceModel::new(1.0, rng.range(0.1, 2.0)).unwrap();
            return (fading, src);
        }
    }

    #[test]
    fn single_state_is_wyner_ziv() {
        let src = src(1.0, 0.8);
        let f = DiscreteFading::new(vec![1.5], vec![1.0]).unwrap();
        let sol = solve_mstate(&f, &src, &SolverConfig::default()).unwrap();
        let expected = wyner_ziv_distortion(&src, 1.5);
        assert!(
            (sol.distortions[0] - expected).abs() < 1e-8,
            "got {} want {expected}",
            sol.distortions[0]
        );
        assert!(sol.kkt_residual <= 1e-8);
    }

    #[test]
    fn matches_two_state_closed_form() {
        let mut rng = SplitMix64(101);
        let cfg = SolverConfig::default();
        for _ in 0..25 {
            let (f, sm) = random_two_state(&mut rng);
            let closed = solve_two_state(&f, &sm).unwrap();
            let sol = solve_mstate(&f, &sm, &cfg).unwrap();
            assert!(
                (sol.expected_distortion - closed.expected_distortion).abs() <= 1e-6,
                "E[D] mismatch: ipm {} closed {} ({f:?} rx {})",
                sol.expected_distortion,
                closed.expected_distortion,
                sm.rate_budget()
            );
            assert!((sol.distortions[0] - closed.d1).abs() <= 1e-6);
            assert!((sol.distortions[1] - closed.d2).abs() <= 1e-6);
        }
    }

    #[test]
    fn three_state_matches_oracle() {
        let sm = src(1.0, 0.5);
        let f = DiscreteFading::new(vec![0.0, 1.0, 3.0], vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
            .unwrap();
        let sol = solve_mstate(&f, &sm, &SolverConfig::default()).unwrap();
        let step = 1e-3;
        let (d_grid, e_grid) = brute_force_oracle(&f, &sm, step).unwrap();
        let bound = oracle_error_bound(&f, &sm, &d_grid, step);
        // the surrogate gap bounds the solver's own suboptimality by
        // (M+1) * tolerance
        assert!(sol.expected_distortion <= e_grid + 4e-8);
        assert!(
            e_grid - sol.expected_distortion <= 2.0 * bound,
            "oracle {e_grid} ipm {} bound {bound}",
            sol.expected_distortion
        );
    }

    #[test]
    fn kkt_certificate_and_perturbation() {
        let sm = src(1.0, 0.5);
        let f = DiscreteFading::new(vec![0.5, 2.0, 5.0], vec![0.3, 0.4, 0.3]).unwrap();
        let sol = solve_mstate(&f, &sm, &SolverConfig::default()).unwrap();
        let report = kkt_certify(&sol, &f, &sm);
        assert!(report.max_residual() <= 1e-8);
        for i in 0..3 {
            let mut perturbed = sol.clone();
            perturbed.distortions[i] *= 1.01;
            let r = kkt_certify(&perturbed, &f, &sm);
            assert!(
                r.stationarity_residual > 1e-4,
                "stationarity after bumping D_{i}: {}",
                r.stationarity_residual
            );
        }
    }

    #[test]
    fn oracle_single_state_exact() {
        let sm = src(1.0, 1.0);
        let f = DiscreteFading::new(vec![2.0], vec![1.0]).unwrap();
        let (d, _) = brute_force_oracle(&f, &sm, 0.1).unwrap();
        assert!((d[0] - wyner_ziv_distortion(&sm, 2.0)).abs() < 1e-15);
    }

    #[test]
    fn oracle_two_state_agrees_with_closed_form() {
        let sm = src(1.0, 1.0);
        let f = DiscreteFading::new(vec![1.0, 10.0], vec![0.5, 0.5]).unwrap();
        let step = 1e-4;
        let (d_grid, e_grid) = brute_force_oracle(&f, &sm, step).unwrap();
        let closed = solve_two_state(&f, &sm).unwrap();
        let bound = oracle_error_bound(&f, &sm, &d_grid, step);
        assert!(closed.expected_distortion <= e_grid + 1e-12);
        assert!(e_grid - closed.expected_distortion <= 2.0 * bound);
    }

    #[test]
    fn oracle_all_weight_on_top_layer() {
        let sm = src(1.0, 1.0);
        let f = DiscreteFading::new(vec![1.0, 10.0], vec![0.0, 1.0]).unwrap();
        let (d, _) = brute_force_oracle(&f, &sm, 1e-3).unwrap();
        // boundary grid point: D1 at its upper bound 1/(sigma^{-2}+s_1)
        assert!((d[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_grid_too_coarse() {
        let sm = src(1.0, 1.0);
        let f = DiscreteFading::new(vec![1000.0, 1001.0], vec![0.5, 0.5]).unwrap();
        match brute_force_oracle(&f, &sm, 0.5) {
            Err(SolverError::GridTooCoarse) => {}
            other => panic!("expected GridTooCoarse, got {other:?}"),
        }
    }

    #[test]
    fn sandwich_bound_random_instances() {
        let mut rng = SplitMix64(31);
        let cfg = SolverConfig::default();
        for _ in 0..20 {
            let (f, sm) = random_three_state(&mut rng);
            let sol = solve_mstate(&f, &sm, &cfg).unwrap();
            let wz = wyner_ziv_distortion(&sm, *f.states().last().unwrap());
            let nosi = no_si_distortion(&sm);
            assert!(
                wz <= sol.expected_distortion + 1e-12 && sol.expected_distortion <= nosi + 1e-12,
                "sandwich violated: {wz} {} {nosi}",
                sol.expected_distortion
            );
        }
    }

    #[test]
    fn monotone_distortions_and_tight_rate() {
        let mut rng = SplitMix64(37);
        let cfg = SolverConfig::default();
        for _ in 0..10 {
            let (f, sm) = random_three_state(&mut rng);
            let sol = solve_mstate(&f, &sm, &cfg).unwrap();
            for w in sol.distortions.windows(2) {
                assert!(w[1] < w[0], "distortions not strictly decreasing");
            }
            // rate constraint tight at the optimum when R_X > 0
            let total: f64 = sol.rates.iter().sum();
            assert!((total - sm.rate_budget()).abs() < 1e-6);
            assert!(sol.dual_mu > 0.0);
        }
    }

    #[test]
    fn deterministic_solves() {
        let sm = src(1.0, 0.7);
        let f = DiscreteFading::new(vec![0.5, 2.0, 5.0], vec![0.3, 0.4, 0.3]).unwrap();
        let a = solve_mstate(&f, &sm, &SolverConfig::default()).unwrap();
        let b = solve_mstate(&f, &sm, &SolverConfig::default()).unwrap();
        for (x, y) in a.distortions.iter().zip(&b.distortions) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.dual_mu.to_bits(), b.dual_mu.to_bits());
    }

    #[test]
    fn zero_rate_budget() {
        let sm = src(1.0, 0.0);
        let f = DiscreteFading::new(vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let sol = solve_mstate(&f, &sm, &SolverConfig::default()).unwrap();
        assert_eq!(sol.rates, vec![0.0, 0.0]);
        let report = kkt_certify(&sol, &f, &sm);
        assert!(report.max_residual() <= 1e-9, "{report:?}");
    }

    #[test]
    fn larger_instances_certify() {
        let mut rng = SplitMix64(83);
        let cfg = SolverConfig::default();
        for &m in &[5usize, 10, 25] {
            for _ in 0..5 {
                let mut s: Vec<f64> = (0..m).map(|_| rng.log_range(0.01, 30.0)).collect();
                s.sort_by(f64::total_cmp);
                s.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                let mut p: Vec<f64> = (0..s.len()).map(|_| rng.uniform() + 1e-3).collect();
                let total: f64 = p.iter().sum();
                for q in &mut p {
                    *q /= total;
                }
                let f = DiscreteFading::new(s, p).unwrap();
                let sm = src(rng.log_range(0.25, 4.0), rng.range(0.05, 3.0));
                let sol = solve_mstate(&f, &sm, &cfg).unwrap();
                assert!(sol.kkt_residual <= cfg.tolerance);
                for w in sol.distortions.windows(2) {
                    assert!(w[1] < w[0]);
                }
                let wz = wyner_ziv_distortion(&sm, *f.states().last().unwrap());
                assert!(wz <= sol.expected_distortion + 1e-12);
                assert!(sol.expected_distortion <= no_si_distortion(&sm) + 1e-12);
            }
        }
    }

    #[test]
    fn solution_record_invariants() {
        let mut rng = SplitMix64(41);
        let cfg = SolverConfig::default();
        for _ in 0..10 {
            let (f, sm) = random_three_state(&mut rng);
            let sol = solve_mstate(&f, &sm, &cfg).unwrap();
            let mut v_prev = sm.sigma2_x();
            let mut s_prev = 0.0;
            for i in 0..f.len() {
                let bound = 1.0 / (1.0 / v_prev + (f.states()[i] - s_prev));
                assert!(sol.variances[i] <= sol.distortions[i] * (1.0 + 1e-12));
                assert!(sol.variances[i] <= bound * (1.0 + 1e-12));
                assert!(sol.rates[i] >= 0.0);
                assert!(sol.coefficients[i] >= 0.0);
                v_prev = sol.variances[i];
                s_prev = f.states()[i];
            }
            let total: f64 = sol.rates.iter().sum();
            assert!(total <= sm.rate_budget() + 1e-9);
        }
    }

    #[test]
    fn distortion_exponent_of_discretized_rician() {
        // source variance above one keeps the finite-rate exponents below
        // one; the sequence then climbs toward the unit limit
        let fading = crate::model::ContinuousFading::rician(16.0, 1.0).unwrap();
        let pmf = crate::discretize::discretize_pdf(&fading, 150, 2.0).unwrap();
        let cfg = SolverConfig::default();
        let mut prev = 0.0;
        for &rx in &[1.0, 2.0, 4.0, 8.0] {
            let sm = src(4.0, rx);
            let sol = solve_mstate(&pmf, &sm, &cfg).unwrap();
            let exponent = -sol.expected_distortion.ln() / (2.0 * rx);
            assert!(
                exponent > prev,
                "exponent fell at rx={rx}: {exponent} <= {prev}"
            );
            assert!(exponent < 1.0);
            prev = exponent;
        }
        assert!(prev >= 0.85, "exponent at rx=8: {prev}");
    }

    #[test]
    fn iteration_cap_reports_best() {
        let sm = src(1.0, 1.0);
        let f = DiscreteFading::new(vec![1.0, 10.0], vec![0.5, 0.5]).unwrap();
        let cfg = SolverConfig {
            max_iterations: 2,
            ..SolverConfig::default()
        };
        match solve_mstate(&f, &sm, &cfg) {
            Err(SolverError::MaxIterationsExceeded { best, report }) => {
                assert!(best.expected_distortion.is_finite());
                assert!(report.max_residual() > 1e-8);
            }
            other => panic!("expected MaxIterationsExceeded, got {other:?}"),
        }
    }
}
