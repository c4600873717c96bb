//! BDS test of the iid hypothesis on regression residuals.
//!
//! Closeness uses the max-norm on m-histories, so two m-histories are close
//! exactly when the run of consecutive close scalar pairs along their
//! diagonal has length at least m. All counts are gathered in a single
//! O(n²) sweep over diagonals without storing the indicator matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::granger::fit_unrestricted;
use crate::stats::sample_std;

/// Two-sided 5% critical value of the standard normal.
pub const BDS_CRITICAL: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdsConfig {
    /// Embedding dimension.
    pub m: usize,
    /// Proximity threshold as a multiple of the residual standard deviation.
    pub eps_factor: f64,
}

impl Default for BdsConfig {
    fn default() -> Self {
        Self { m: 2, eps_factor: 0.5 }
    }
}

impl BdsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParameter(format!("BDS embedding dimension must be >= 2, got {}", self.m)));
        }
        if !(self.eps_factor > 0.0) {
            return Err(Error::InvalidParameter("BDS eps_factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdsResult {
    pub m: usize,
    pub epsilon: f64,
    /// Number of m-histories, n - m + 1.
    pub n_embedded: usize,
    /// First-order correlation integral over the same points as `cm`.
    pub c1: f64,
    pub cm: f64,
    /// Triple-proximity moment K.
    pub k_moment: f64,
    pub v_stat: f64,
    pub sigma_m: f64,
    pub reject: bool,
}

struct Counts {
    /// close pairs among m-histories
    close_m: u64,
    /// close scalar pairs among the last n - m + 1 points
    close_1_trimmed: u64,
    /// close scalar pairs over the full sample
    close_1_full: u64,
    /// per-point number of close neighbours over the full sample
    neighbours: Vec<u64>,
}

fn count_pairs(x: &[f64], m: usize, delta: f64) -> Counts {
    let n = x.len();
    let mut c = Counts { close_m: 0, close_1_trimmed: 0, close_1_full: 0, neighbours: vec![0; n] };
    for d in 1..n {
        let mut run = 0usize;
        for i in 0..n - d {
            if (x[i] - x[i + d]).abs() < delta {
                run += 1;
                c.close_1_full += 1;
                c.neighbours[i] += 1;
                c.neighbours[i + d] += 1;
                if i + 1 >= m {
                    c.close_1_trimmed += 1;
                    if run >= m {
                        c.close_m += 1;
                    }
                }
            } else {
                run = 0;
            }
        }
    }
    c
}

fn pair_fraction(count: u64, points: usize) -> f64 {
    2.0 * count as f64 / (points as f64 * (points as f64 - 1.0))
}

/// Fraction of pairs of m-histories within max-norm distance `delta`.
pub fn correlation_integral(x: &[f64], m: usize, delta: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("embedding dimension must be at least 1".into()));
    }
    if x.len() < m + 1 {
        return Err(Error::TooShort { needed: m + 1, got: x.len() });
    }
    let c = count_pairs(x, m, delta);
    Ok(pair_fraction(c.close_m, x.len() - m + 1))
}

/// Asymptotic variance σ_m² under the iid null.
pub fn bds_variance(m: usize, c: f64, k: f64) -> f64 {
    let mi = m as i32;
    let cross: f64 = (1..mi).map(|j| k.powi(mi - j) * c.powi(2 * j)).sum();
    4.0 * (k.powi(mi) + 2.0 * cross + ((mi - 1) * (mi - 1)) as f64 * c.powi(2 * mi)
        - (mi * mi) as f64 * k * c.powi(2 * mi - 2))
}

/// BDS statistic `V = √k (C_m − C_1^m) / σ_m` with `k = n − m + 1` histories.
pub fn bds_statistic(residuals: &[f64], config: &BdsConfig) -> Result<BdsResult> {
    config.validate()?;
    let n = residuals.len();
    let m = config.m;
    if n < m + 2 {
        return Err(Error::TooShort { needed: m + 2, got: n });
    }
    let sd = sample_std(residuals);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("residuals have zero variance".into()));
    }
    let epsilon = config.eps_factor * sd;
    let counts = count_pairs(residuals, m, epsilon);
    let n_embedded = n - m + 1;
    let cm = pair_fraction(counts.close_m, n_embedded);
    let c1 = pair_fraction(counts.close_1_trimmed, n_embedded);
    let c1_full = pair_fraction(counts.close_1_full, n);
    let nf = n as f64;
    let k_moment = counts.neighbours.iter().map(|&c| c as f64 * (c as f64 - 1.0)).sum::<f64>()
        / (nf * (nf - 1.0) * (nf - 2.0));
    let var = bds_variance(m, c1_full, k_moment);
    if !(var > 0.0) {
        return Err(Error::Degenerate(format!("BDS variance is not positive ({var})")));
    }
    let sigma_m = var.sqrt();
    let effect = cm - c1.powi(m as i32);
    let v_stat = if effect == 0.0 { 0.0 } else { (n_embedded as f64).sqrt() * effect / sigma_m };
    Ok(BdsResult { m, epsilon, n_embedded, c1, cm, k_moment, v_stat, sigma_m, reject: v_stat.abs() > BDS_CRITICAL })
}

/// True when BDS does not reject the iid hypothesis on `residuals`.
pub fn bds_gate_residuals(residuals: &[f64], config: &BdsConfig) -> Result<bool> {
    Ok(!bds_statistic(residuals, config)?.reject)
}

/// Is the order-`k` linear causal model of `target` on `driver` adequately
/// specified? Runs BDS on the unrestricted residuals.
pub fn bds_misspecification_gate(target: &[f64], driver: &[f64], k: usize, config: &BdsConfig) -> Result<bool> {
    let fit = fit_unrestricted(target, driver, k, None)?;
    bds_gate_residuals(&fit.residuals, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::synth::{generate, GeneratorKind, GeneratorSpec};
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Explicit m-histories and max-norm distances.
    fn brute_force(x: &[f64], m: usize, delta: f64) -> f64 {
        let hist: Vec<Vec<f64>> = (m - 1..x.len()).map(|t| (0..m).map(|l| x[t - l]).collect()).collect();
        let k = hist.len();
        let mut close = 0u64;
        for s in 0..k {
            for t in s + 1..k {
                let dist = hist[s].iter().zip(&hist[t]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if dist < delta {
                    close += 1;
                }
            }
        }
        2.0 * close as f64 / (k as f64 * (k as f64 - 1.0))
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut r = rng::stream(seed, &[0xBD5]);
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    #[test]
    fn hand_enumerated_example() {
        assert_eq!(correlation_integral(&[0.0, 1.0, 2.0, 3.0], 1, 1.5).unwrap(), 0.5);
    }

    #[test]
    fn identical_and_distant_points() {
        assert_eq!(correlation_integral(&[0.3; 20], 2, 1e-9).unwrap(), 1.0);
        let spread: Vec<f64> = (0..20).map(|i| i as f64 * 10.0).collect();
        assert_eq!(correlation_integral(&spread, 2, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn matches_brute_force_oracle() {
        for (seed, n) in [(1u64, 50usize), (2, 173), (3, 300)] {
            let x = noise(seed, n);
            for m in 1..=3 {
                for delta in [0.2, 0.5, 1.0, 2.0] {
                    assert_eq!(correlation_integral(&x, m, delta).unwrap(), brute_force(&x, m, delta));
                }
            }
        }
    }

    #[test]
    fn monotone_in_threshold_and_dimension() {
        let x = noise(4, 250);
        let deltas = [0.05, 0.1, 0.3, 0.6, 1.0, 1.5, 3.0];
        for m in 1..=3 {
            let c: Vec<f64> = deltas.iter().map(|d| correlation_integral(&x, m, *d).unwrap()).collect();
            assert!(c.windows(2).all(|w| w[0] <= w[1]));
        }
        for d in deltas {
            let c: Vec<f64> = (1..=4).map(|m| correlation_integral(&x, m, d).unwrap()).collect();
            assert!(c.windows(2).all(|w| w[0] >= w[1]), "{c:?}");
        }
    }

    #[test]
    fn iid_null_product_rule() {
        let x = noise(5, 2000);
        let sd = sample_std(&x);
        let c1 = correlation_integral(&x, 1, 0.5 * sd).unwrap();
        let c2 = correlation_integral(&x, 2, 0.5 * sd).unwrap();
        assert!((c2 - c1 * c1).abs() < 0.02);
    }

    #[test]
    fn zero_effect_gives_zero_statistic() {
        // Period-3 sequence with exact closeness structure: check the identity path
        let r = BdsResult { m: 2, epsilon: 1.0, n_embedded: 10, c1: 0.5, cm: 0.25, k_moment: 0.3, v_stat: 0.0, sigma_m: 1.0, reject: false };
        assert_eq!(r.cm - r.c1.powi(2), 0.0);
        assert!(bds_variance(2, 0.5, 0.3) > 0.0);
    }

    #[test]
    fn logistic_stream_is_rejected() {
        let p = generate(&GeneratorSpec::new(GeneratorKind::logistic(), 1000, 3)).unwrap();
        let r = bds_statistic(&p.target, &BdsConfig::default()).unwrap();
        assert!(r.reject, "V = {}", r.v_stat);
    }

    #[test]
    fn zero_residuals_are_degenerate() {
        assert!(matches!(bds_statistic(&[0.0; 200], &BdsConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gate_on_linear_and_quadratic_data() {
        let runs = 40;
        let linear_ok = (0..runs)
            .filter(|&s| {
                let p = generate(&GeneratorSpec::new(GeneratorKind::var1(0.5, 0.3), 1000, s)).unwrap();
                bds_misspecification_gate(&p.target, &p.driver, 1, &BdsConfig::default()).unwrap()
            })
            .count();
        assert!(linear_ok as f64 >= 0.9 * runs as f64, "{linear_ok}/{runs}");
        let quad_rejected = (0..runs)
            .filter(|&s| {
                let p = generate(&GeneratorSpec::new(GeneratorKind::quadratic_ar(1.0, 0.8), 1000, s)).unwrap();
                !bds_misspecification_gate(&p.target, &p.driver, 1, &BdsConfig::default()).unwrap()
            })
            .count();
        assert!(quad_rejected as f64 >= 0.9 * runs as f64, "{quad_rejected}/{runs}");
    }

    #[test]
    fn config_validation() {
        assert!(BdsConfig { m: 1, eps_factor: 0.5 }.validate().is_err());
        assert!(BdsConfig { m: 2, eps_factor: 0.0 }.validate().is_err());
    }
}
