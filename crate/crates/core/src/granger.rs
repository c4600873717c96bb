//! Restricted / unrestricted autoregressions, the nested-model F-test and the
//! log variance-ratio G-causality measure.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::bonferroni;
use crate::stats::{f_sf, is_constant};

const RANK_TOL: f64 = 1e-10;

/// Least-squares fit of one autoregression.
#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub k: usize,
    pub alpha: f64,
    /// Own-lag coefficients, lag 1 first.
    pub beta: Vec<f64>,
    /// Driver-lag coefficients; empty for the restricted model.
    pub gamma: Vec<f64>,
    /// Control-lag coefficients; empty without controls.
    pub theta: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Number of estimated coefficients including the intercept.
    pub n_params: usize,
}

impl VarFit {
    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcResult {
    pub lag: usize,
    /// `ln(RSS_restricted / RSS_unrestricted)`.
    pub gc_value: f64,
    pub f_stat: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub pvalue: f64,
    pub adjusted_pvalue: f64,
}

/// Per-lag results of a lag grid with Bonferroni-adjusted p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLagGranger {
    pub results: Vec<GcResult>,
    pub significant: bool,
}

struct Ols {
    coef: Vec<f64>,
    residuals: Vec<f64>,
    rss: f64,
}

/// OLS via Householder QR on unit-norm columns. All-zero columns carry no
/// information and get a zero coefficient.
fn ols(columns: &[Vec<f64>], y: &[f64]) -> Result<Ols> {
    let n = y.len();
    let mut kept = Vec::new();
    let mut scales = Vec::new();
    for (j, c) in columns.iter().enumerate() {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            kept.push(j);
            scales.push(norm);
        }
    }
    let p = kept.len();
    if n <= p {
        return Err(Error::TooShort { needed: p + 1, got: n });
    }
    let x = DMatrix::from_fn(n, p, |i, c| columns[kept[c]][i] / scales[c]);
    let qr = x.qr();
    let r = qr.r();
    let diag_max = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..p).any(|i| r[(i, i)].abs() <= RANK_TOL * diag_max) {
        return Err(Error::Singular("regressors are collinear".into()));
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let b = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let mut coef = vec![0.0; columns.len()];
    for (c, &j) in kept.iter().enumerate() {
        coef[j] = b[c] / scales[c];
    }
    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - columns.iter().zip(&coef).map(|(col, b)| col[i] * b).sum::<f64>())
        .collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    Ok(Ols { coef, residuals, rss })
}

fn lag_columns(series: &[f64], k: usize, rows: std::ops::Range<usize>) -> Vec<Vec<f64>> {
    (1..=k).map(|l| rows.clone().map(|t| series[t - l]).collect()).collect()
}

fn fit_model(target: &[f64], driver: Option<&[f64]>, controls: Option<&[f64]>, k: usize) -> Result<VarFit> {
    if k == 0 {
        return Err(Error::InvalidParameter("lag order must be at least 1".into()));
    }
    let n = target.len();
    for other in driver.into_iter().chain(controls) {
        if other.len() != n {
            return Err(Error::LengthMismatch { left: n, right: other.len() });
        }
    }
    if n <= 2 * k + 2 {
        return Err(Error::TooShort { needed: 2 * k + 3, got: n });
    }
    if is_constant(target) {
        return Err(Error::Singular("target has no variance".into()));
    }
    let rows = k..n;
    let mut columns = vec![vec![1.0; n - k]];
    columns.extend(lag_columns(target, k, rows.clone()));
    if let Some(x) = driver {
        columns.extend(lag_columns(x, k, rows.clone()));
    }
    if let Some(c) = controls {
        columns.extend(lag_columns(c, k, rows.clone()));
    }
    let y = &target[k..];
    let fit = ols(&columns, y)?;
    let mut it = fit.coef.into_iter();
    let alpha = it.next().unwrap_or(0.0);
    let beta: Vec<f64> = it.by_ref().take(k).collect();
    let gamma: Vec<f64> = if driver.is_some() { it.by_ref().take(k).collect() } else { Vec::new() };
    let theta: Vec<f64> = if controls.is_some() { it.by_ref().take(k).collect() } else { Vec::new() };
    let n_params = columns.len();
    Ok(VarFit { k, alpha, beta, gamma, theta, residuals: fit.residuals, rss: fit.rss, n_params })
}

/// `target(t) = α + Σ β_l target(t-l) + ε_t`, rows `t = k..n`.
pub fn fit_restricted(target: &[f64], k: usize) -> Result<VarFit> {
    fit_model(target, None, None, k)
}

/// Restricted model with optional controls (the null model of a controlled test).
pub fn fit_restricted_with_controls(target: &[f64], controls: Option<&[f64]>, k: usize) -> Result<VarFit> {
    fit_model(target, None, controls, k)
}

/// Adds `k` lags of the driver (and of the controls, if any).
pub fn fit_unrestricted(target: &[f64], driver: &[f64], k: usize, controls: Option<&[f64]>) -> Result<VarFit> {
    fit_model(target, Some(driver), controls, k)
}

/// Nested-model F-test plus both fits, so callers can reuse residuals.
pub fn granger_test_with_fits(
    target: &[f64],
    driver: &[f64],
    k: usize,
    controls: Option<&[f64]>,
) -> Result<(GcResult, VarFit, VarFit)> {
    let restricted = fit_model(target, None, controls, k)?;
    let unrestricted = fit_model(target, Some(driver), controls, k)?;
    let n = unrestricted.n_obs();
    let p_u = unrestricted.n_params;
    if n <= p_u {
        return Err(Error::TooShort { needed: p_u + 1, got: n });
    }
    let df_den = n - p_u;
    if !(unrestricted.rss > 0.0) {
        return Err(Error::Degenerate("unrestricted model fits exactly".into()));
    }
    let f_stat = (((restricted.rss - unrestricted.rss) / k as f64) / (unrestricted.rss / df_den as f64)).max(0.0);
    let pvalue = f_sf(f_stat, k as f64, df_den as f64);
    let gc_value = (restricted.rss / unrestricted.rss).ln();
    let result = GcResult { lag: k, gc_value, f_stat, df_num: k, df_den, pvalue, adjusted_pvalue: pvalue };
    Ok((result, restricted, unrestricted))
}

/// Does the driver's past improve the prediction of the target?
pub fn granger_test(target: &[f64], driver: &[f64], k: usize, controls: Option<&[f64]>) -> Result<GcResult> {
    granger_test_with_fits(target, driver, k, controls).map(|(r, _, _)| r)
}

/// Fresh model at each order `1..=max_lag`; p-values Bonferroni-adjusted by
/// `max_lag`. Significant iff any adjusted p-value is below `alpha`.
pub fn multi_lag_granger(
    target: &[f64],
    driver: &[f64],
    max_lag: usize,
    controls: Option<&[f64]>,
    alpha: f64,
) -> Result<MultiLagGranger> {
    let mut results = (1..=max_lag)
        .map(|k| granger_test(target, driver, k, controls))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = results.iter().map(|r| r.pvalue).collect();
    for (r, adj) in results.iter_mut().zip(bonferroni(&raw, max_lag)?) {
        r.adjusted_pvalue = adj;
    }
    let significant = results.iter().any(|r| r.adjusted_pvalue < alpha);
    Ok(MultiLagGranger { results, significant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut r = rng::stream(seed, &[0xA11CE]);
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    fn ar1(seed: u64, n: usize, phi: f64) -> Vec<f64> {
        let e = noise(seed, n + 100);
        let mut y = vec![0.0; n + 100];
        for t in 1..n + 100 {
            y[t] = phi * y[t - 1] + e[t];
        }
        y.split_off(100)
    }

    /// Standard error of β̂₁ in the restricted AR(1) fit (intercept + one lag).
    fn beta_se(y: &[f64], fit: &VarFit) -> f64 {
        let x = &y[..y.len() - 1];
        let m = crate::stats::mean(x);
        let sxx: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
        let s2 = fit.rss / (fit.n_obs() - 2) as f64;
        (s2 / sxx).sqrt()
    }

    #[test]
    fn iid_target_has_insignificant_ar_coefficient() {
        let runs = 200;
        let inside = (0..runs)
            .filter(|&s| {
                let y = noise(s, 300);
                let f = fit_restricted(&y, 1).unwrap();
                f.beta[0].abs() < 3.0 * beta_se(&y, &f)
            })
            .count();
        assert!(inside as f64 >= 0.95 * runs as f64, "{inside}/{runs}");
    }

    #[test]
    fn constant_target_is_singular() {
        assert!(matches!(fit_restricted(&[2.5; 50], 1), Err(Error::Singular(_))));
    }

    #[test]
    fn recovers_ar_coefficient() {
        let y = ar1(3, 2000, 0.7);
        let f = fit_restricted(&y, 1).unwrap();
        assert!((0.6..=0.8).contains(&f.beta[0]), "{}", f.beta[0]);
        assert_eq!(f.residuals.len(), 1999);
    }

    #[test]
    fn zero_driver_is_a_null_regressor() {
        let y = ar1(4, 500, 0.3);
        let x = vec![0.0; 500];
        let r = fit_restricted(&y, 2).unwrap();
        let u = fit_unrestricted(&y, &x, 2, None).unwrap();
        assert!(u.gamma.iter().all(|g| g.abs() < 1e-12));
        assert!((u.rss - r.rss).abs() <= 1e-9 * r.rss);
        let g = granger_test(&y, &x, 2, None).unwrap();
        assert!(g.gc_value.abs() < 1e-10);
        assert_eq!(g.pvalue, 1.0);
    }

    #[test]
    fn recovers_driver_coefficient() {
        let x = noise(5, 2000);
        let e = noise(6, 2000);
        let mut y = vec![0.0; 2000];
        for t in 1..2000 {
            y[t] = 0.5 * x[t - 1] + 0.1 * e[t];
        }
        let u = fit_unrestricted(&y, &x, 1, None).unwrap();
        assert!((u.gamma[0] - 0.5).abs() < 0.05);
    }

    #[test]
    fn driver_equal_to_target_is_flagged() {
        let y = ar1(7, 300, 0.5);
        assert!(matches!(fit_unrestricted(&y, &y, 1, None), Err(Error::Singular(_))));
    }

    #[test]
    fn rss_never_increases_with_regressors() {
        for s in 0..20 {
            let y = ar1(100 + s, 400, 0.4);
            let x = noise(200 + s, 400);
            let c = noise(300 + s, 400);
            for k in 1..=4 {
                let r = fit_restricted(&y, k).unwrap();
                let u = fit_unrestricted(&y, &x, k, None).unwrap();
                let uc = fit_unrestricted(&y, &x, k, Some(&c)).unwrap();
                assert!(u.rss <= r.rss * (1.0 + 1e-9));
                assert!(uc.rss <= u.rss * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn bonferroni_over_lags() {
        let y = ar1(8, 600, 0.2);
        let x = noise(9, 600);
        let m = multi_lag_granger(&y, &x, 10, None, 0.05).unwrap();
        assert_eq!(m.results.len(), 10);
        for r in &m.results {
            assert!(((r.pvalue * 10.0).min(1.0) - r.adjusted_pvalue).abs() < 1e-15);
        }
    }

    #[test]
    fn too_short_for_order() {
        assert!(matches!(fit_restricted(&noise(1, 8), 3), Err(Error::TooShort { .. })));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(40))]
        #[test]
        fn affine_driver_rescaling_is_invisible(seed in 0u64..1000, a in 0.01f64..100.0, neg in proptest::bool::ANY, b in -1e3f64..1e3, k in 1usize..4) {
            let a = if neg { -a } else { a };
            let y = ar1(seed, 300, 0.3);
            let x = noise(seed + 7, 300);
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let g1 = granger_test(&y, &x, k, None).unwrap();
            let g2 = granger_test(&y, &xs, k, None).unwrap();
            proptest::prop_assert!((g1.f_stat - g2.f_stat).abs() <= 1e-9 * g1.f_stat.max(1.0));
            proptest::prop_assert!((g1.pvalue - g2.pvalue).abs() <= 1e-9);
            proptest::prop_assert!((g1.gc_value - g2.gc_value).abs() <= 1e-9);
        }
    }
}
