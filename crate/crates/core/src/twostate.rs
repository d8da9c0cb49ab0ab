//! Closed-form optimal rate allocation between a base and a top codeword
//! layer when the side-information channel has two fading states.
//!
//! The optimal base-layer distortion is the projection of the unconstrained
//! stationary point onto its feasible interval; the top-layer distortion
//! follows from the Pareto trade-off curve at the full rate budget.

use crate::hbrate::{pareto_d1_range, pareto_d2, variance_chain};
use crate::model::{DiscreteFading, LayeredSolution, SourceModel};
use crate::solver::kkt_certify;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwoStateError {
    InvalidStateCount,
}

impl fmt::Display for TwoStateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TwoStateError::InvalidStateCount => write!(f, "InvalidStateCount"),
        }
    }
}

impl std::error::Error for TwoStateError {}

/// Which bound the base-layer projection hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveBound {
    /// Stationary point interior to the feasible interval.
    Interior,
    /// D1 at its lower bound: the whole budget goes to the base layer.
    BaseOnly,
    /// D1 at its upper bound: the whole budget goes to the top layer.
    TopOnly,
}

impl fmt::Display for ActiveBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActiveBound::Interior => write!(f, "interior"),
            ActiveBound::BaseOnly => write!(f, "base_only"),
            ActiveBound::TopOnly => write!(f, "top_only"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateSolution {
    pub d1: f64,
    pub d2: f64,
    pub r1: f64,
    pub r2: f64,
    pub expected_distortion: f64,
    pub active_bound: ActiveBound,
}

/// Closed-form two-state optimum.
///
/// The returned rates satisfy r1 + r2 = R_X and the point sits on the
/// Pareto curve; it passes the M-state KKT system at residual <= 1e-8.
pub fn solve_two_state(
    fading: &DiscreteFading,
    src: &SourceModel,
) -> Result<TwoStateSolution, TwoStateError> {
    if fading.len() != 2 {
        return Err(TwoStateError::InvalidStateCount);
    }
    let s = fading.states();
    let p = fading.probs();
    let delta = s[1] - s[0];
    let c0 = src.inv_sigma2() + s[0];
    let e2r = (2.0 * src.rate_budget()).exp();
    let (d1_lo, d1_hi) = pareto_d1_range(fading, src);

    // unconstrained stationary point; p2 = 0 drives it to -1/delta and
    // p1 = 0 to +infinity, so the projection handles both extremes
    let ratio = e2r * c0 * p[0] / (delta * p[1]);
    let d1_star = (1.0 / ratio.sqrt() - 1.0) / delta;

    let (d1, active_bound) = if !(d1_star >= d1_lo) {
        (d1_lo, ActiveBound::BaseOnly)
    } else if d1_star > d1_hi {
        (d1_hi, ActiveBound::TopOnly)
    } else {
        (d1_star, ActiveBound::Interior)
    };

    let d2 = pareto_d2(d1, fading, src).expect("projected d1 lies in range");
    let chain = variance_chain(&[d1, d2], fading, src).expect("positive distortions");
    // at a projected bound one layer's allocation is exactly zero; the chain
    // recomputes it through a different association order, so snap it
    let (r1, r2) = match active_bound {
        ActiveBound::BaseOnly => (src.rate_budget(), 0.0),
        ActiveBound::TopOnly => (0.0, src.rate_budget()),
        ActiveBound::Interior => (chain.rates[0], chain.rates[1]),
    };
    Ok(TwoStateSolution {
        d1,
        d2,
        r1,
        r2,
        expected_distortion: p[0] * d1 + p[1] * d2,
        active_bound,
    })
}

impl TwoStateSolution {
    /// Expands the closed form into the M-state solution record, recovering
    /// the dual variables from the active-set pattern and certifying them.
    pub fn to_layered(&self, fading: &DiscreteFading, src: &SourceModel) -> LayeredSolution {
        let s = fading.states();
        let p = fading.probs();
        let delta = s[1] - s[0];
        let q = 1.0 + delta * self.d1;
        let (mu, lambda) = match self.active_bound {
            ActiveBound::Interior => (2.0 * p[1] * self.d2, vec![0.0, 0.0]),
            ActiveBound::TopOnly => {
                let mu = 2.0 * p[1] * self.d2;
                let l1 = (0.5 * mu * delta / q - p[0]).max(0.0);
                (mu, vec![l1, 0.0])
            }
            ActiveBound::BaseOnly => {
                let mu = 2.0 * (p[0] + p[1] / (q * q)) / (1.0 / (self.d2 * q * q) + delta / q);
                let l2 = (0.5 * mu / self.d2 - p[1]).max(0.0);
                (mu, vec![0.0, l2])
            }
        };
        let chain = variance_chain(&[self.d1, self.d2], fading, src).expect("positive");
        let coefficients = crate::hbrate::codebook_coefficients(&chain, fading);
        let mut sol = LayeredSolution {
            distortions: vec![self.d1, self.d2],
            variances: chain.variances,
            rates: chain.rates,
            coefficients,
            expected_distortion: self.expected_distortion,
            dual_lambda: lambda,
            dual_mu: mu,
            kkt_residual: f64::INFINITY,
        };
        sol.kkt_residual = kkt_certify(&sol, fading, src).max_residual();
        sol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbrate::hb_rate;

    fn src(rx: f64) -> SourceModel {
        SourceModel::new(1.0, rx).unwrap()
    }

    fn fading(s1: f64, s2: f64, p1: f64) -> DiscreteFading {
        DiscreteFading::new(vec![s1, s2], vec![p1, 1.0 - p1]).unwrap()
    }

    #[test]
    fn all_weight_on_top_layer() {
        let f = fading(1.0, 10.0, 0.0);
        let sm = src(1.0);
        let sol = solve_two_state(&f, &sm).unwrap();
        assert_eq!(sol.active_bound, ActiveBound::TopOnly);
        assert!(
            (sol.d1 - 0.5).abs() < 1e-15,
            "d1 should hit (sigma^-2+s1)^-1"
        );
        let e2r = (2.0f64).exp();
        assert!((sol.d2 - 1.0 / (e2r * 11.0)).abs() < 1e-15);
        assert_eq!(sol.r1, 0.0);
        assert!((sol.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_weight_on_base_layer() {
        let f = fading(1.0, 10.0, 1.0);
        let sm = src(1.0);
        let sol = solve_two_state(&f, &sm).unwrap();
        assert_eq!(sol.active_bound, ActiveBound::BaseOnly);
        let e2r = (2.0f64).exp();
        assert!((sol.d1 - 1.0 / (e2r * 2.0)).abs() < 1e-15);
        assert!((sol.r2).abs() < 1e-12);
        assert!((sol.r1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skewed_instance_hits_lower_bound() {
        // p = (0.9, 0.1), s = (1, 10), Rx = 1: the stationary point falls
        // below the interval, so the base layer takes everything
        let f = fading(1.0, 10.0, 0.9);
        let sm = src(1.0);
        let sol = solve_two_state(&f, &sm).unwrap();
        assert_eq!(sol.active_bound, ActiveBound::BaseOnly);
        assert!(sol.r2.abs() < 1e-12);
        assert!((sol.d1 - 0.0677).abs() < 5e-4);
        assert!((sol.d2 - 0.0421).abs() < 5e-4);

        // 1-D oracle over the Pareto curve at step 1e-5
        let (lo, hi) = crate::hbrate::pareto_d1_range(&f, &sm);
        let mut best = f64::INFINITY;
        let mut d1 = lo;
        while d1 <= hi {
            let d2 = crate::hbrate::pareto_d2(d1, &f, &sm).unwrap();
            best = best.min(0.9 * d1 + 0.1 * d2);
            d1 += 1e-5;
        }
        assert!(sol.expected_distortion <= best + 1e-12);
        assert!(best - sol.expected_distortion <= 2.0 * 1e-5);
    }

    #[test]
    fn pareto_identity_at_solution() {
        for &(p1, rx) in &[(0.2, 0.5), (0.5, 1.0), (0.95, 2.0), (0.7, 0.01)] {
            let f = fading(0.5, 6.0, p1);
            let sm = src(rx);
            let sol = solve_two_state(&f, &sm).unwrap();
            let rate = hb_rate(&[sol.d1, sol.d2], &f, &sm).unwrap();
            assert!((rate - rx).abs() <= 1e-10, "rate {rate} vs budget {rx}");
            assert!((sol.r1 + sol.r2 - rx).abs() <= 1e-10);
            assert!(sol.r1 >= 0.0 && sol.r2 >= 0.0);
        }
    }

    #[test]
    fn conservatism_r2_nondecreasing_in_p2() {
        let sm = src(1.0);
        let mut prev = -1.0;
        for k in 0..=20 {
            let p2 = 0.05 * k as f64;
            let f = fading(1.0, 10.0, 1.0 - p2);
            let sol = solve_two_state(&f, &sm).unwrap();
            assert!(
                sol.r2 >= prev - 1e-12,
                "r2 decreased at p2 = {p2}: {} < {prev}",
                sol.r2
            );
            prev = sol.r2;
        }
    }

    #[test]
    fn layered_form_passes_kkt() {
        for &(p1, rx, s1, s2) in &[
            (0.5, 1.0, 1.0, 10.0),
            (0.9, 1.0, 1.0, 10.0),
            (0.05, 0.5, 0.1, 2.0),
            (1.0, 2.0, 0.0, 4.0),
            (0.0, 2.0, 0.0, 4.0),
        ] {
            let f = fading(s1, s2, p1);
            let sm = src(rx);
            let layered = solve_two_state(&f, &sm).unwrap().to_layered(&f, &sm);
            assert!(
                layered.kkt_residual <= 1e-8,
                "kkt residual {} for p1={p1} rx={rx}",
                layered.kkt_residual
            );
        }
    }

    #[test]
    fn agrees_with_interior_point_in_every_field() {
        use crate::solver::{solve_mstate, SolverConfig};
        use crate::testutil::SplitMix64;
        let mut rng = SplitMix64(59);
        // rates amplify primal error by 1/(2D), so drive the interior
        // point well past the 1e-6 comparison tolerance
        let cfg = SolverConfig {
            tolerance: 1e-11,
            ..SolverConfig::default()
        };
        for _ in 0..25 {
            let s1 = rng.log_range(0.01, 100.0);
            let s2 = s1 + rng.log_range(0.01, 100.0);
            let p1 = rng.uniform();
            let f = fading(s1, s2, p1);
            let sm = SourceModel::new(1.0, rng.range(0.01, 4.0)).unwrap();
            let closed = solve_two_state(&f, &sm).unwrap();
            let ipm = solve_mstate(&f, &sm, &cfg).unwrap();
            assert!((ipm.distortions[0] - closed.d1).abs() <= 1e-6);
            assert!((ipm.distortions[1] - closed.d2).abs() <= 1e-6);
            assert!((ipm.rates[0] - closed.r1).abs() <= 1e-6);
            assert!((ipm.rates[1] - closed.r2).abs() <= 1e-6);
            assert!((ipm.expected_distortion - closed.expected_distortion).abs() <= 1e-6);
        }
    }

    #[test]
    fn top_layer_projection_route_agrees() {
        // the top-layer distortion can also be found by projecting its own
        // stationary point onto [D2^-, D2^+]; both routes must coincide
        use crate::testutil::SplitMix64;
        let mut rng = SplitMix64(71);
        for _ in 0..50 {
            let s1 = rng.log_range(0.01, 50.0);
            let s2 = s1 + rng.log_range(0.01, 50.0);
            let p1 = rng.uniform();
            let f = fading(s1, s2, p1);
            let sm = SourceModel::new(1.0, rng.range(0.05, 3.0)).unwrap();
            let sol = solve_two_state(&f, &sm).unwrap();

            let delta = s2 - s1;
            let c0 = 1.0 + s1;
            let e2r = (2.0 * sm.rate_budget()).exp();
            let d2_lo = 1.0 / (e2r * (1.0 + s2));
            let d2_hi = 1.0 / (e2r * c0 + delta);
            let d2_star = 1.0 / (e2r * c0 * delta * (1.0 - p1) / p1).sqrt();
            let d2_proj = d2_star.clamp(d2_lo, d2_hi);
            assert!(
                (sol.d2 - d2_proj).abs() <= 1e-12 * sol.d2.max(d2_proj),
                "pareto route {} vs projection route {d2_proj}",
                sol.d2
            );
        }
    }

    #[test]
    fn zero_budget_degenerates_cleanly() {
        let f = fading(1.0, 4.0, 0.3);
        let sm = src(0.0);
        let sol = solve_two_state(&f, &sm).unwrap();
        assert_eq!(sol.r1, 0.0);
        assert_eq!(sol.r2, 0.0);
        assert!((sol.d1 - 0.5).abs() < 1e-15);
        let layered = sol.to_layered(&f, &sm);
        assert!(
            layered.kkt_residual <= 1e-8,
            "residual {}",
            layered.kkt_residual
        );
    }

    #[test]
    fn wrong_state_count_rejected() {
        let f = DiscreteFading::new(vec![0.0, 1.0, 2.0], vec![0.3, 0.3, 0.4]).unwrap();
        assert_eq!(
            solve_two_state(&f, &src(1.0)).unwrap_err(),
            TwoStateError::InvalidStateCount
        );
    }
}
