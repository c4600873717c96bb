//! GARCH(1,1) and ARIMA(1,1,1) residual filters and the functional-form sweep.

use serde::{Deserialize, Serialize};

use crate::bds::{bds_gate_residuals, BdsConfig};
use crate::error::{Error, Result};
use crate::granger::{fit_unrestricted, multi_lag_granger, MultiLagGranger};
use crate::par;
use crate::series::{abs_transform, difference, log1p_transform, AlignedSeriesPair};
use crate::stats::{is_constant, mean, sample_variance};

/// Minimum series length for either filter.
pub const MIN_FILTER_LEN: usize = 100;

/// Upper bound on `α + β`; the optimum may not sit on it.
const MAX_PERSISTENCE: f64 = 0.9995;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    /// Constant conditional mean.
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `(r_t − μ) / σ_t`.
    pub residuals: Vec<f64>,
    pub conditional_variance: Vec<f64>,
    pub loglik: f64,
    /// Log-likelihood at the starting point of the search.
    pub init_loglik: f64,
    pub iterations: usize,
    /// `α + β` ended on the enforced bound just below 1. Typical when there is
    /// no volatility clustering (α ≈ 0 leaves β unidentified).
    pub persistence_at_bound: bool,
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained `u` ↦ `(ω, α, β)` with `ω > 0`, `α, β ≥ 0`, `α + β < 1`.
fn garch_params(u: &[f64]) -> (f64, f64, f64) {
    let persistence = MAX_PERSISTENCE * logistic(u[1]);
    let alpha = persistence * logistic(u[2]);
    (u[0].exp(), alpha, persistence - alpha)
}

fn garch_unparams(omega: f64, alpha: f64, beta: f64) -> [f64; 3] {
    let persistence = alpha + beta;
    [omega.ln(), logit(persistence / MAX_PERSISTENCE), logit(alpha / persistence)]
}

fn garch_variances(r: &[f64], omega: f64, alpha: f64, beta: f64, start: f64) -> Vec<f64> {
    let mut var = Vec::with_capacity(r.len());
    let mut s = start;
    for t in 0..r.len() {
        if t > 0 {
            s = omega + alpha * r[t - 1] * r[t - 1] + beta * s;
        }
        var.push(s);
    }
    var
}

fn gaussian_loglik(r: &[f64], var: &[f64]) -> f64 {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    -0.5 * r.iter().zip(var).map(|(x, s)| ln2pi + s.ln() + x * x / s).sum::<f64>()
}

/// Gaussian quasi-maximum-likelihood GARCH(1,1) on mean-adjusted returns.
/// The variance recursion starts at the sample variance.
pub fn garch_filter(returns: &[f64]) -> Result<GarchFit> {
    if returns.len() < MIN_FILTER_LEN {
        return Err(Error::TooShort { needed: MIN_FILTER_LEN, got: returns.len() });
    }
    if let Some(index) = returns.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if is_constant(returns) {
        return Err(Error::Degenerate("constant return series has no conditional variance".into()));
    }
    let mu = mean(returns);
    let r: Vec<f64> = returns.iter().map(|x| x - mu).collect();
    let var0 = sample_variance(&r);
    let negloglik = |u: &[f64]| {
        let (omega, alpha, beta) = garch_params(u);
        let ll = gaussian_loglik(&r, &garch_variances(&r, omega, alpha, beta, var0));
        if ll.is_finite() { -ll } else { f64::INFINITY }
    };
    let start = garch_unparams(0.1 * var0, 0.05, 0.85);
    let init_loglik = -negloglik(&start);
    let mut search = nelder_mead(&negloglik, &start, 0.5, 1e-10, 4000);
    // one restart from the optimum shakes off a collapsed simplex
    let restart = nelder_mead(&negloglik, &search.x, 0.2, 1e-10, 4000);
    if restart.f <= search.f {
        search = NmResult { iterations: search.iterations + restart.iterations, ..restart };
    }
    if !search.converged {
        return Err(Error::NonConvergence(format!("GARCH simplex search after {} iterations", search.iterations)));
    }
    let (omega, alpha, beta) = garch_params(&search.x);
    let persistence_at_bound = alpha + beta >= MAX_PERSISTENCE * (1.0 - 1e-6);
    let conditional_variance = garch_variances(&r, omega, alpha, beta, var0);
    let residuals = r.iter().zip(&conditional_variance).map(|(x, s)| x / s.sqrt()).collect();
    Ok(GarchFit {
        mu,
        omega,
        alpha,
        beta,
        residuals,
        loglik: -search.f,
        conditional_variance,
        init_loglik,
        iterations: search.iterations,
        persistence_at_bound,
    })
}

struct NmResult {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

/// Nelder–Mead simplex minimisation with standard coefficients.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, ftol: f64, max_iter: usize) -> NmResult {
    let d = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=d)
        .map(|i| {
            let mut x = start.to_vec();
            if i > 0 {
                x[i - 1] += step;
            }
            let v = f(&x);
            (x, v)
        })
        .collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[d].1);
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|p| p.0[j]).sum::<f64>() / d as f64).collect();
        let towards = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[d].0).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = towards(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = towards(-2.0);
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let xc = towards(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = towards(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 = x0.iter().zip(&p.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    p.1 = f(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    NmResult { x, f: fx, iterations, converged: converged && fx.is_finite() }
}

/// Conditional-least-squares fit of
/// `R_t = R_{t−1} + α (SM_{t−1} − SM_{t−2}) + β ε_{t−1} + ε_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub alpha: f64,
    pub beta: f64,
    /// `ε_t` for `t = 2..n`, with the pre-sample `ε_1 = 0`.
    pub residuals: Vec<f64>,
    pub sse: f64,
    /// False when the driver difference has no variation (α fixed at 0).
    pub alpha_identified: bool,
    /// `|β̂|` reached the edge of the invertible region.
    pub beta_at_boundary: bool,
}

const ARIMA_BETA_LIMIT: f64 = 0.999;
const ARIMA_BOUNDARY_FLAG: f64 = 0.99;

/// `(A, B)` with `ε_t(α) = A_t − α B_t` for a fixed `β`.
fn arima_components(u: &[f64], v: &[f64], beta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::with_capacity(u.len());
    let mut b = Vec::with_capacity(v.len());
    let (mut pa, mut pb) = (0.0, 0.0);
    for (ut, vt) in u.iter().zip(v) {
        pa = ut - beta * pa;
        pb = vt - beta * pb;
        a.push(pa);
        b.push(pb);
    }
    (a, b)
}

/// α profiled out in closed form; returns `(sse, α, identified)`.
fn arima_profile(u: &[f64], v: &[f64], beta: f64) -> (f64, f64, bool) {
    let (a, b) = arima_components(u, v, beta);
    let sab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let sbb: f64 = b.iter().map(|y| y * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    if sbb > 0.0 {
        let alpha = sab / sbb;
        ((saa - alpha * sab).max(0.0), alpha, true)
    } else {
        (saa, 0.0, false)
    }
}

/// Fit the printed ARIMA(1,1,1) equation and return its residuals. `driver`
/// must be aligned with `returns`; β is searched on a grid and refined by
/// golden section.
pub fn arima_filter(returns: &[f64], driver: &[f64]) -> Result<ArimaFit> {
    if returns.len() != driver.len() {
        return Err(Error::LengthMismatch { left: driver.len(), right: returns.len() });
    }
    if returns.len() < MIN_FILTER_LEN {
        return Err(Error::TooShort { needed: MIN_FILTER_LEN, got: returns.len() });
    }
    if let Some(index) = returns.iter().chain(driver).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: index % returns.len() });
    }
    if is_constant(&difference(returns, 1)?) {
        return Err(Error::Degenerate("return differences are constant".into()));
    }
    let n = returns.len();
    // t = 2..n: u_t = ΔR_t, v_t = ΔSM_{t−1}
    let u: Vec<f64> = (2..n).map(|t| returns[t] - returns[t - 1]).collect();
    let v: Vec<f64> = (2..n).map(|t| driver[t - 1] - driver[t - 2]).collect();
    let sse = |beta: f64| arima_profile(&u, &v, beta).0;

    const GRID: usize = 200;
    let grid: Vec<f64> = (0..=GRID).map(|i| -ARIMA_BETA_LIMIT + 2.0 * ARIMA_BETA_LIMIT * i as f64 / GRID as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&b| sse(b)).collect();
    let best = (0..values.len()).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
    if !values[best].is_finite() {
        return Err(Error::NonConvergence("ARIMA sum of squares is not finite".into()));
    }
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(GRID)]);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let (mut f1, mut f2) = (sse(x1), sse(x2));
    for _ in 0..100 {
        if hi - lo < 1e-10 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = sse(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = sse(x2);
        }
    }
    let beta = if f1 <= f2 { x1 } else { x2 };
    let beta = if sse(beta) <= values[best] { beta } else { grid[best] };
    let (sse, alpha, alpha_identified) = arima_profile(&u, &v, beta);
    let (a, b) = arima_components(&u, &v, beta);
    let residuals = a.iter().zip(&b).map(|(x, y)| x - alpha * y).collect();
    Ok(ArimaFit { alpha, beta, residuals, sse, alpha_identified, beta_at_boundary: beta.abs() >= ARIMA_BOUNDARY_FLAG })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalForm {
    Identity,
    FirstDifference,
    SecondDifference,
    VolatilityControlled,
    Log1p,
    Abs,
    Garch,
    Arima,
}

impl FunctionalForm {
    pub const ALL: [FunctionalForm; 8] = [
        FunctionalForm::Identity,
        FunctionalForm::FirstDifference,
        FunctionalForm::SecondDifference,
        FunctionalForm::VolatilityControlled,
        FunctionalForm::Log1p,
        FunctionalForm::Abs,
        FunctionalForm::Garch,
        FunctionalForm::Arima,
    ];

    /// Column header used in tables.
    pub fn label(self) -> &'static str {
        match self {
            FunctionalForm::Identity => "x",
            FunctionalForm::FirstDifference => "diff1",
            FunctionalForm::SecondDifference => "diff2",
            FunctionalForm::VolatilityControlled => "f(x,vol)",
            FunctionalForm::Log1p => "log1p",
            FunctionalForm::Abs => "abs",
            FunctionalForm::Garch => "garch11",
            FunctionalForm::Arima => "arima111",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormStatus {
    Misspecified,
    AdequateInsignificant,
    AdequateSignificant,
}

impl FormStatus {
    /// Table symbol: blank, `∘` (adequate) or `•` (adequate and significant).
    pub fn symbol(self) -> &'static str {
        match self {
            FormStatus::Misspecified => "",
            FormStatus::AdequateInsignificant => "∘",
            FormStatus::AdequateSignificant => "•",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormOutcome {
    pub form: FunctionalForm,
    /// BDS gate on the order-1 unrestricted residuals.
    pub adequate: bool,
    pub granger: MultiLagGranger,
    pub status: FormStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormEntry {
    pub form: FunctionalForm,
    pub outcome: Option<FormOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalFormReport {
    pub entries: Vec<FormEntry>,
}

impl FunctionalFormReport {
    pub fn status(&self, form: FunctionalForm) -> Option<FormStatus> {
        self.entries.iter().find(|e| e.form == form)?.outcome.as_ref().map(|o| o.status)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub max_lag: usize,
    pub alpha: f64,
    pub bds: BdsConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { max_lag: 10, alpha: 0.05, bds: BdsConfig::default() }
    }
}

/// Apply `form` to the pair; returns the transformed pair and aligned controls.
pub fn apply_form(
    pair: &AlignedSeriesPair,
    volatility: Option<&[f64]>,
    form: FunctionalForm,
) -> Result<(AlignedSeriesPair, Option<Vec<f64>>)> {
    let same = |x: &[f64]| Ok(x.to_vec());
    let out = match form {
        FunctionalForm::Identity => pair.clone(),
        FunctionalForm::FirstDifference => pair.transformed("diff1", |x| difference(x, 1), |x| difference(x, 1))?,
        FunctionalForm::SecondDifference => pair.transformed("diff2", |x| difference(x, 2), |x| difference(x, 2))?,
        FunctionalForm::VolatilityControlled => {
            let vol = volatility.ok_or_else(|| Error::Data("no volatility series for f(x,vol)".into()))?;
            if vol.len() != pair.len() {
                return Err(Error::LengthMismatch { left: pair.len(), right: vol.len() });
            }
            return Ok((pair.clone(), Some(vol.to_vec())));
        }
        FunctionalForm::Log1p => pair.transformed("log1p", log1p_transform, log1p_transform)?,
        FunctionalForm::Abs => pair.transformed("abs", same, |x| Ok(abs_transform(x)))?,
        FunctionalForm::Garch => pair.transformed("garch11", same, |x| Ok(garch_filter(x)?.residuals))?,
        FunctionalForm::Arima => {
            let fit = arima_filter(&pair.target, &pair.driver)?;
            pair.transformed("arima111", same, |_| Ok(fit.residuals))?
        }
    };
    Ok((out, None))
}

/// Adequacy and significance of one form.
pub fn evaluate_form(
    pair: &AlignedSeriesPair,
    volatility: Option<&[f64]>,
    form: FunctionalForm,
    cfg: &SweepConfig,
) -> Result<FormOutcome> {
    let (p, controls) = apply_form(pair, volatility, form)?;
    let controls = controls.as_deref();
    let fit = fit_unrestricted(&p.target, &p.driver, 1, controls)?;
    let adequate = bds_gate_residuals(&fit.residuals, &cfg.bds)?;
    let granger = multi_lag_granger(&p.target, &p.driver, cfg.max_lag, controls, cfg.alpha)?;
    let status = match (adequate, granger.significant) {
        (false, _) => FormStatus::Misspecified,
        (true, false) => FormStatus::AdequateInsignificant,
        (true, true) => FormStatus::AdequateSignificant,
    };
    Ok(FormOutcome { form, adequate, granger, status })
}

/// All eight forms; a failing form is recorded and the rest still run.
pub fn functional_form_sweep(
    pair: &AlignedSeriesPair,
    volatility: Option<&[f64]>,
    cfg: &SweepConfig,
) -> Result<FunctionalFormReport> {
    cfg.bds.validate()?;
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) || cfg.max_lag == 0 {
        return Err(Error::InvalidParameter(format!("sweep needs 0 < alpha < 1 and max_lag ≥ 1, got {} / {}", cfg.alpha, cfg.max_lag)));
    }
    let entries = par::map_indices(FunctionalForm::ALL.len(), |i| {
        let form = FunctionalForm::ALL[i];
        match evaluate_form(pair, volatility, form, cfg) {
            Ok(outcome) => FormEntry { form, outcome: Some(outcome), error: None },
            Err(e) => FormEntry { form, outcome: None, error: Some(e.to_string()) },
        }
    });
    Ok(FunctionalFormReport { entries })
}
