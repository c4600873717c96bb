//! Synthetic driver/target processes with known coupling.
//!
//! Data-generating equations (ξ, η, ζ independent standard normals):
//!
//! * `IidGaussian`: `X_t = ξ_t`, `Y_t = η_t`.
//! * `Var1Coupled`: `X_t = c X_{t-1} + ξ_t`, `Y_t = b X_{t-1} + a Y_{t-1} + s η_t`.
//! * `QuadraticCoupled`: `X_t = φ X_{t-1} + √(1-φ²) ξ_t`, `Y_t = c X_{t-1}^2 + s η_t`.
//! * `AbsCoupled`: `X_t = μ + |ξ_t|`, `Y_t = d X_{t-1} ζ_t` (ζ is a random sign
//!   times a half-normal magnitude), so only `|Y|` depends on the driver.
//! * `LogisticMap`: `X_t = ξ_t`, `Y_t = r Y_{t-1} (1 - Y_{t-1})`.
//! * `Garch11`: `X_t = ξ_t`, `Y_t = σ_t η_t`, `σ_t² = ω + α Y_{t-1}² + β σ_{t-1}²`.
//!
//! All draws come from one ChaCha8 stream seeded with the spec's seed.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::series::{ActivitySeries, AlignedSeriesPair, PriceSeries};

const BURN_IN: usize = 200;
pub const MIN_GENERATED_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    IidGaussian,
    Var1Coupled { coupling: f64, target_ar: f64, driver_ar: f64, noise_sd: f64 },
    QuadraticCoupled { coefficient: f64, noise_sd: f64, driver_ar: f64 },
    AbsCoupled { scale: f64, driver_offset: f64 },
    LogisticMap { r: f64 },
    Garch11 { omega: f64, alpha: f64, beta: f64 },
}

impl GeneratorKind {
    pub fn var1(coupling: f64, target_ar: f64) -> Self {
        GeneratorKind::Var1Coupled { coupling, target_ar, driver_ar: 0.0, noise_sd: 1.0 }
    }

    pub fn quadratic(coefficient: f64) -> Self {
        GeneratorKind::QuadraticCoupled { coefficient, noise_sd: 1.0, driver_ar: 0.0 }
    }

    /// Quadratic coupling with a unit-variance AR(1) driver.
    pub fn quadratic_ar(coefficient: f64, driver_ar: f64) -> Self {
        GeneratorKind::QuadraticCoupled { coefficient, noise_sd: 1.0, driver_ar }
    }

    pub fn abs(scale: f64) -> Self {
        GeneratorKind::AbsCoupled { scale, driver_offset: 1.0 }
    }

    pub fn logistic() -> Self {
        GeneratorKind::LogisticMap { r: 4.0 }
    }

    pub fn garch(omega: f64, alpha: f64, beta: f64) -> Self {
        GeneratorKind::Garch11 { omega, alpha, beta }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match *self {
            GeneratorKind::Var1Coupled { target_ar, driver_ar, noise_sd, coupling } => {
                if !(target_ar.abs() < 1.0 && driver_ar.abs() < 1.0) {
                    return bad("autoregressive coefficients must satisfy |a| < 1");
                }
                if !(noise_sd > 0.0) || !coupling.is_finite() {
                    return bad("noise_sd must be positive and coupling finite");
                }
            }
            GeneratorKind::QuadraticCoupled { coefficient, noise_sd, driver_ar } => {
                if !(noise_sd > 0.0) || !coefficient.is_finite() {
                    return bad("noise_sd must be positive and coefficient finite");
                }
                if !(driver_ar.abs() < 1.0) {
                    return bad("autoregressive coefficients must satisfy |a| < 1");
                }
            }
            GeneratorKind::AbsCoupled { scale, driver_offset } => {
                if !(scale > 0.0) || !(driver_offset >= 0.0) {
                    return bad("scale must be positive and driver_offset non-negative");
                }
            }
            GeneratorKind::LogisticMap { r } => {
                if !(r > 0.0 && r <= 4.0) {
                    return bad("logistic parameter r must lie in (0, 4]");
                }
            }
            GeneratorKind::Garch11 { omega, alpha, beta } => {
                if !(omega > 0.0 && alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0) {
                    return bad("GARCH(1,1) needs omega > 0, alpha, beta >= 0 and alpha + beta < 1");
                }
            }
            GeneratorKind::IidGaussian => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
    /// Exchange driver and target after generation (target drives driver).
    #[serde(default)]
    pub reverse: bool,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed, reverse: false }
    }

    pub fn reversed(mut self) -> Self {
        self.reverse = !self.reverse;
        self
    }
}

/// `n` consecutive weekdays starting Monday 2012-04-02.
pub fn weekday_calendar(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2012, 4, 2).expect("valid date");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Driver and target columns before wrapping into a pair.
pub fn generate_columns(spec: &GeneratorSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if spec.n < MIN_GENERATED_LEN {
        return Err(Error::TooShort { needed: MIN_GENERATED_LEN, got: spec.n });
    }
    spec.kind.validate()?;
    let mut r = rng::stream(spec.seed, &[]);
    let mut normal = move || -> f64 { r.sample(StandardNormal) };
    let total = spec.n + BURN_IN;
    let mut x = vec![0.0; total];
    let mut y = vec![0.0; total];
    match spec.kind {
        GeneratorKind::IidGaussian => {
            for t in 0..total {
                x[t] = normal();
                y[t] = normal();
            }
        }
        GeneratorKind::Var1Coupled { coupling, target_ar, driver_ar, noise_sd } => {
            x[0] = normal();
            y[0] = noise_sd * normal();
            for t in 1..total {
                x[t] = driver_ar * x[t - 1] + normal();
                y[t] = coupling * x[t - 1] + target_ar * y[t - 1] + noise_sd * normal();
            }
        }
        GeneratorKind::QuadraticCoupled { coefficient, noise_sd, driver_ar } => {
            let innovation_sd = (1.0 - driver_ar * driver_ar).sqrt();
            x[0] = normal();
            y[0] = noise_sd * normal();
            for t in 1..total {
                x[t] = driver_ar * x[t - 1] + innovation_sd * normal();
                y[t] = coefficient * x[t - 1] * x[t - 1] + noise_sd * normal();
            }
        }
        GeneratorKind::AbsCoupled { scale, driver_offset } => {
            x[0] = driver_offset + normal().abs();
            for t in 1..total {
                x[t] = driver_offset + normal().abs();
                let magnitude = normal().abs();
                let sign = if normal() < 0.0 { -1.0 } else { 1.0 };
                y[t] = scale * x[t - 1] * sign * magnitude;
            }
        }
        GeneratorKind::LogisticMap { r } => {
            let mut state = 0.1 + 0.8 * uniform(&mut normal);
            for t in 0..total {
                x[t] = normal();
                state = r * state * (1.0 - state);
                if !(state > 0.0 && state < 1.0) {
                    // absorbed at the fixed point 0: restart the orbit
                    state = 0.1 + 0.8 * uniform(&mut normal);
                }
                y[t] = state;
            }
        }
        GeneratorKind::Garch11 { omega, alpha, beta } => {
            let mut var = omega / (1.0 - alpha - beta);
            for t in 0..total {
                x[t] = normal();
                if t > 0 {
                    var = omega + alpha * y[t - 1] * y[t - 1] + beta * var;
                }
                y[t] = var.sqrt() * normal();
            }
        }
    }
    let x = x.split_off(BURN_IN);
    let y = y.split_off(BURN_IN);
    Ok(if spec.reverse { (y, x) } else { (x, y) })
}

/// Uniform(0,1) from the shared normal stream (probability integral transform).
fn uniform(normal: &mut impl FnMut() -> f64) -> f64 {
    let z = normal();
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Abramowitz-Stegun 7.1.26; plenty for picking a starting point.
fn erf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let y = 1.0
        - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736) * t + 0.254_829_592)
            * t
            * (-x * x).exp();
    if x >= 0.0 { y } else { -y }
}

/// Generate an aligned pair on a weekday calendar.
pub fn generate(spec: &GeneratorSpec) -> Result<AlignedSeriesPair> {
    let (driver, target) = generate_columns(spec)?;
    let mut pair = AlignedSeriesPair::new(weekday_calendar(spec.n), driver, target)?;
    pair.meta.push(format!("synth:{}", serde_json::to_string(spec)?));
    Ok(pair)
}

/// Counts per unit of driver, around a baseline of 1000 messages a day.
const COUNT_SCALE: f64 = 100.0;
const COUNT_BASE: f64 = 1000.0;
/// Target units per log-return unit.
const RETURN_SCALE: f64 = 0.01;

/// Sentiment and price series whose prepared pair reproduces the generator:
/// bullish counts `round(1000 + 100 x_t)` (floored at 0) land on return day
/// `t`, and `ln(close_t / close_{t−1}) = 0.01 y_t`. There are `n + 1` price
/// days so that `n` returns remain.
pub fn market_series(spec: &GeneratorSpec) -> Result<(ActivitySeries, PriceSeries)> {
    let (x, y) = generate_columns(spec)?;
    let dates = weekday_calendar(spec.n + 1);
    let count = |v: f64| (COUNT_BASE + COUNT_SCALE * v).round().max(0.0) as u64;
    let mut bullish = vec![count(0.0)];
    bullish.extend(x.iter().map(|&v| count(v)));
    let bearish = bullish.iter().map(|b| b / 4).collect();
    let mut log_close = 100f64.ln();
    let mut close = vec![100.0];
    let (mut high, mut low) = (vec![100.5], vec![99.5]);
    for &v in &y {
        log_close += RETURN_SCALE * v;
        let c = log_close.exp();
        let spread = 0.005 + 0.002 * v.abs();
        close.push(c);
        high.push(c * spread.exp());
        low.push(c * (-spread).exp());
    }
    Ok((ActivitySeries::new(dates.clone(), bullish, bearish)?, PriceSeries::new(dates, close, high, low)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{cross_correlation, mean, sample_variance};

    fn moments_close(x: &[f64], mu: f64, var: f64, fourth_central: f64) {
        let n = x.len() as f64;
        let m = mean(x);
        let v = sample_variance(x);
        assert!((m - mu).abs() < 3.0 * (var / n).sqrt(), "mean {m} vs {mu}");
        let var_se = ((fourth_central - var * var) / n).sqrt();
        assert!((v - var).abs() < 3.0 * var_se, "var {v} vs {var} (se {var_se})");
    }

    #[test]
    fn iid_pair_is_uncorrelated() {
        for seed in 0..5 {
            let p = generate(&GeneratorSpec::new(GeneratorKind::IidGaussian, 2000, seed)).unwrap();
            assert!(cross_correlation(&p.driver, &p.target, 1).abs() < 3.0 / 2000f64.sqrt());
        }
    }

    #[test]
    fn same_seed_same_output() {
        let s = GeneratorSpec::new(GeneratorKind::quadratic(1.0), 500, 77);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let t = GeneratorSpec::new(GeneratorKind::quadratic(1.0), 500, 78);
        assert_ne!(generate(&s).unwrap().target, generate(&t).unwrap().target);
    }

    #[test]
    fn zero_coupling_var_matches_iid_distribution() {
        // KS two-sample distance between the b = 0 target and an iid normal sample
        let a = generate(&GeneratorSpec::new(GeneratorKind::var1(0.0, 0.0), 3000, 1)).unwrap();
        let b = generate(&GeneratorSpec::new(GeneratorKind::IidGaussian, 3000, 2)).unwrap();
        let mut u = a.target.clone();
        let mut v = b.target.clone();
        u.sort_by(f64::total_cmp);
        v.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < u.len() && j < v.len() {
            if u[i] <= v[j] { i += 1 } else { j += 1 }
            d = d.max((i as f64 / u.len() as f64 - j as f64 / v.len() as f64).abs());
        }
        // 1% critical value for two samples of 3000
        assert!(d < 1.63 * (2.0 / 3000f64).sqrt(), "ks {d}");
    }

    #[test]
    fn population_moments() {
        let n = 10_000;
        let p = generate(&GeneratorSpec::new(GeneratorKind::IidGaussian, n, 3)).unwrap();
        moments_close(&p.driver, 0.0, 1.0, 3.0);
        moments_close(&p.target, 0.0, 1.0, 3.0);

        // Y = 0.5 X_{t-1} + η, X iid: Gaussian with variance 1.25
        let p = generate(&GeneratorSpec::new(GeneratorKind::var1(0.5, 0.0), n, 4)).unwrap();
        moments_close(&p.target, 0.0, 1.25, 3.0 * 1.25 * 1.25);

        // Y = X² + η: mean 1, variance 3, fourth central moment E[(χ²₁ - 1 + η)^4] = 60 + 6·2 + 3 = 75
        let p = generate(&GeneratorSpec::new(GeneratorKind::quadratic(1.0), n, 5)).unwrap();
        moments_close(&p.target, 1.0, 3.0, 75.0);

        // Garch: unconditional variance ω / (1 - α - β); squares are persistent,
        // so the variance SE comes from 20 batch means
        let p = generate(&GeneratorSpec::new(GeneratorKind::garch(0.1, 0.1, 0.8), n, 6)).unwrap();
        assert!(mean(&p.target).abs() < 3.0 * (1.0 / n as f64).sqrt());
        let batch: Vec<f64> = p.target.chunks(n / 20).map(|c| c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).collect();
        let se = (sample_variance(&batch) / batch.len() as f64).sqrt();
        assert!((mean(&batch) - 1.0).abs() < 3.0 * se, "garch variance {} (se {se})", mean(&batch));

        // logistic map at r = 4: arcsine law on (0,1), mean 1/2, variance 1/8
        let p = generate(&GeneratorSpec::new(GeneratorKind::logistic(), n, 7)).unwrap();
        let m = mean(&p.target);
        assert!((m - 0.5).abs() < 0.02);
        assert!((sample_variance(&p.target) - 0.125).abs() < 0.01);

        // |ξ| + 1 driver: mean 1 + sqrt(2/π), variance 1 - 2/π
        let p = generate(&GeneratorSpec::new(GeneratorKind::abs(1.0), n, 8)).unwrap();
        let mu = 1.0 + (2.0 / std::f64::consts::PI).sqrt();
        let var = 1.0 - 2.0 / std::f64::consts::PI;
        assert!((mean(&p.driver) - mu).abs() < 3.0 * (var / n as f64).sqrt());
        assert!(mean(&p.target).abs() < 3.0 * (sample_variance(&p.target) / n as f64).sqrt());
    }

    #[test]
    fn quadratic_coupling_is_linearly_invisible() {
        // The lag-1 product X·(X² + η) has variance 11 against σ_X² σ_Y² = 3,
        // so the standard error of ρ̂ is sqrt(11/3)/√n rather than 1/√n.
        let n = 10_000;
        let se = (11.0f64 / 3.0).sqrt() / (n as f64).sqrt();
        let mut within = 0;
        for seed in 0..20 {
            let p = generate(&GeneratorSpec::new(GeneratorKind::quadratic(1.0), n, 9 + seed)).unwrap();
            if cross_correlation(&p.driver, &p.target, 1).abs() < 3.0 * se {
                within += 1;
            }
            let sq: Vec<f64> = p.driver.iter().map(|v| v * v).collect();
            assert!(cross_correlation(&sq, &p.target, 1) > 3.0 / (n as f64).sqrt());
        }
        assert!(within >= 19, "{within}/20");
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(generate(&GeneratorSpec::new(GeneratorKind::var1(0.5, 1.0), 500, 1)).is_err());
        assert!(generate(&GeneratorSpec::new(GeneratorKind::garch(0.1, 0.5, 0.5), 500, 1)).is_err());
        assert!(generate(&GeneratorSpec::new(GeneratorKind::IidGaussian, 99, 1)).is_err());
    }

    #[test]
    fn calendar_skips_weekends() {
        let c = weekday_calendar(10);
        assert_eq!(c[0], NaiveDate::from_ymd_opt(2012, 4, 2).unwrap());
        assert_eq!(c[5], NaiveDate::from_ymd_opt(2012, 4, 9).unwrap());
        assert!(c.iter().all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }
}
