//! Browser bindings: three small, self-contained operations on synthetic data.
//! Each returns a JSON string so the page needs no glue beyond `JSON.parse`.

use infoflow::granger::granger_test;
use infoflow::inference::{permutation_test, SurrogateConfig};
use infoflow::kde::{entropy_kde, kde_pdf, silverman_bandwidth, EntropyEstimator, KdeConfig, SampleMatrix};
use infoflow::synth::{generate, GeneratorKind, GeneratorSpec};
use infoflow::te::{gaussian_te, transfer_entropy, CausalityQuery, Direction};
use infoflow::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bounds keep a single click responsive in the browser.
const MAX_N: usize = 2000;
const MAX_LAG: usize = 10;
const MAX_PERMUTATIONS: usize = 1000;
const HISTOGRAM_BINS: usize = 24;
const CURVE_POINTS: usize = 81;

fn generator(kind: &str) -> Result<(GeneratorKind, bool)> {
    Ok(match kind {
        "iid" => (GeneratorKind::IidGaussian, false),
        "linear" => (GeneratorKind::var1(0.5, 0.2), false),
        "linear-reverse" => (GeneratorKind::var1(0.5, 0.2), true),
        "quadratic" => (GeneratorKind::quadratic(1.0), false),
        "abs" => (GeneratorKind::abs(1.0), false),
        other => return Err(Error::InvalidParameter(format!("unknown generator kind {other:?}"))),
    })
}

fn spec(kind: &str, n: usize, seed: u64) -> Result<GeneratorSpec> {
    if n > MAX_N {
        return Err(Error::InvalidParameter(format!("n is capped at {MAX_N} in the demo")));
    }
    let (kind, reverse) = generator(kind)?;
    let s = GeneratorSpec::new(kind, n, seed);
    Ok(if reverse { s.reversed() } else { s })
}

#[derive(Debug, Serialize)]
pub struct DirectionProfile {
    pub direction: &'static str,
    pub te: Vec<f64>,
    pub gaussian_te: Vec<f64>,
    pub linear_pvalue: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct LagProfile {
    pub lags: Vec<usize>,
    pub directions: Vec<DirectionProfile>,
    pub net_te: Vec<f64>,
}

/// Kernel and Gaussian transfer entropy plus the linear F-test p-value at each
/// lag, in both directions.
pub fn lag_profile(kind: &str, n: usize, seed: u64, max_lag: usize) -> Result<LagProfile> {
    if !(1..=MAX_LAG).contains(&max_lag) {
        return Err(Error::InvalidParameter(format!("max_lag must be in 1..={MAX_LAG}")));
    }
    let pair = generate(&spec(kind, n, seed)?)?;
    let kde = KdeConfig::silverman();
    let lags: Vec<usize> = (1..=max_lag).collect();
    let mut directions = Vec::new();
    for direction in [Direction::DriverToTarget, Direction::TargetToDriver] {
        let (source, dest) = direction.select(&pair);
        let mut p = DirectionProfile { direction: direction.label(), te: vec![], gaussian_te: vec![], linear_pvalue: vec![] };
        for &lag in &lags {
            let q = CausalityQuery::new(lag, direction)?;
            p.te.push(transfer_entropy(&pair, &q, &kde)?);
            p.gaussian_te.push(gaussian_te(&pair, &q)?);
            p.linear_pvalue.push(granger_test(dest, source, lag, None)?.pvalue);
        }
        directions.push(p);
    }
    let net_te = directions[0].te.iter().zip(&directions[1].te).map(|(f, b)| f - b).collect();
    Ok(LagProfile { lags, directions, net_te })
}

#[derive(Debug, Serialize)]
pub struct EntropyCurve {
    pub bandwidth: f64,
    pub exact: f64,
    pub leave_one_out: f64,
    pub resubstitution: f64,
    pub grid: Vec<f64>,
    pub estimate: Vec<f64>,
    pub truth: Vec<f64>,
}

/// Kernel density and entropy of an `N(0, sigma)` sample against the closed
/// form; `bandwidth_scale` multiplies the normal-reference bandwidth.
pub fn entropy_curve(sigma: f64, n: usize, seed: u64, bandwidth_scale: f64) -> Result<EntropyCurve> {
    if !(sigma > 0.0 && sigma.is_finite()) || !(bandwidth_scale > 0.0 && bandwidth_scale.is_finite()) {
        return Err(Error::InvalidParameter("sigma and bandwidth scale must be positive".into()));
    }
    let pair = generate(&spec("iid", n, seed)?)?;
    let x: Vec<f64> = pair.driver.iter().map(|v| v * sigma).collect();
    let bandwidth = silverman_bandwidth(&x)? * bandwidth_scale;
    let points = SampleMatrix::new(x, 1)?;
    let kde = KdeConfig::fixed(vec![bandwidth])?;
    let leave_one_out = entropy_kde(&points, &kde)?;
    let resubstitution = entropy_kde(&points, &kde.clone().with_estimator(EntropyEstimator::Resubstitution))?;
    let exact = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).ln();
    let half = 4.0 * sigma;
    let grid: Vec<f64> = (0..CURVE_POINTS).map(|i| -half + 2.0 * half * i as f64 / (CURVE_POINTS - 1) as f64).collect();
    let estimate = grid.iter().map(|g| kde_pdf(&points, &[*g], &kde)).collect::<Result<Vec<_>>>()?;
    let truth = grid
        .iter()
        .map(|g| (-0.5 * (g / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()))
        .collect();
    Ok(EntropyCurve { bandwidth, exact, leave_one_out, resubstitution, grid, estimate, truth })
}

#[derive(Debug, Serialize)]
pub struct SurrogateNull {
    pub observed: f64,
    pub pvalue: f64,
    pub min_pvalue: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Observed kernel transfer entropy at `lag` and its shuffled-source null.
pub fn surrogate_null(kind: &str, n: usize, seed: u64, lag: usize, permutations: usize, reverse: bool) -> Result<SurrogateNull> {
    if permutations > MAX_PERMUTATIONS {
        return Err(Error::InvalidParameter(format!("permutations are capped at {MAX_PERMUTATIONS} in the demo")));
    }
    let pair = generate(&spec(kind, n, seed)?)?;
    let direction = if reverse { Direction::TargetToDriver } else { Direction::DriverToTarget };
    let cfg = SurrogateConfig { n_permutations: permutations, seed, n_hypotheses: 1, ..SurrogateConfig::default() };
    let out = permutation_test(&pair, &CausalityQuery::new(lag, direction)?, &KdeConfig::silverman(), &cfg)?;
    let observed = out.result.te;
    let lo = out.surrogates.iter().copied().fold(observed, f64::min);
    let hi = out.surrogates.iter().copied().fold(observed, f64::max);
    let width = ((hi - lo) / HISTOGRAM_BINS as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0; HISTOGRAM_BINS];
    for s in &out.surrogates {
        counts[(((s - lo) / width) as usize).min(HISTOGRAM_BINS - 1)] += 1;
    }
    Ok(SurrogateNull {
        observed,
        pvalue: out.result.surrogate_pvalue,
        min_pvalue: 1.0 / (permutations + 1) as f64,
        bin_edges: (0..=HISTOGRAM_BINS).map(|i| lo + width * i as f64).collect(),
        counts,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| Error::InvalidParameter(e.to_string())))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = lagProfile)]
pub fn lag_profile_js(kind: &str, n: usize, seed: u32, max_lag: usize) -> std::result::Result<String, JsValue> {
    to_js(lag_profile(kind, n, seed as u64, max_lag))
}

#[wasm_bindgen(js_name = entropyCurve)]
pub fn entropy_curve_js(sigma: f64, n: usize, seed: u32, bandwidth_scale: f64) -> std::result::Result<String, JsValue> {
    to_js(entropy_curve(sigma, n, seed as u64, bandwidth_scale))
}

#[wasm_bindgen(js_name = surrogateNull)]
pub fn surrogate_null_js(
    kind: &str,
    n: usize,
    seed: u32,
    lag: usize,
    permutations: usize,
    reverse: bool,
) -> std::result::Result<String, JsValue> {
    to_js(surrogate_null(kind, n, seed as u64, lag, permutations, reverse))
}
