//! Shared helpers for the integration suites: a deterministic generator and
//! the random instance families used across several criteria.

use mestd::model::{DiscreteFading, SourceModel};

pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn log_range(&mut self, lo: f64, hi: f64) -> f64 {
        self.range(lo.ln(), hi.ln()).exp()
    }
}

/// Two-state family: gains log-uniform on [0.01, 100], probabilities
/// uniform, rate budget uniform on [0.01, 4], unit source variance.
pub fn random_two_state(rng: &mut SplitMix64) -> (DiscreteFading, SourceModel) {
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

/// Three-state family sized so the oracle's feasible box stays wide at a
/// 1e-3 grid step.
pub fn random_three_state(rng: &mut SplitMix64) -> (DiscreteFading, SourceModel) {
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
