//! Gaussian product-kernel density estimation and plug-in entropy (nats).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::stats::sample_std;

/// Minimum sample count for entropy estimation.
pub const MIN_ENTROPY_SAMPLES: usize = 30;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum BandwidthRule {
    /// Silverman's normal-reference rule per dimension: `1.06 σ n^(-1/5)`
    /// for a single column, `σ (4 / ((d + 2) n))^(1/(d + 4))` for a column of
    /// a `d`-dimensional joint sample.
    #[default]
    Silverman,
    /// One bandwidth per dimension, or a single value for all dimensions.
    Fixed(Vec<f64>),
}

/// How the density is evaluated at the sample points in the entropy average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EntropyEstimator {
    /// Each point's own kernel is left out of its density estimate.
    #[default]
    LeaveOneOut,
    /// Plain plug-in: the density estimate includes the point's own kernel.
    Resubstitution,
}

/// Kernel is always the Gaussian radial basis; bandwidth and estimator vary.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KdeConfig {
    pub bandwidth: BandwidthRule,
    #[serde(default)]
    pub estimator: EntropyEstimator,
}

impl KdeConfig {
    pub fn silverman() -> Self {
        Self { bandwidth: BandwidthRule::Silverman, estimator: EntropyEstimator::LeaveOneOut }
    }

    pub fn fixed(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() || h.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("fixed bandwidths must be positive, got {h:?}")));
        }
        Ok(Self { bandwidth: BandwidthRule::Fixed(h), estimator: EntropyEstimator::LeaveOneOut })
    }

    pub fn with_estimator(mut self, estimator: EntropyEstimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub(crate) fn leave_one_out(&self) -> bool {
        self.estimator == EntropyEstimator::LeaveOneOut
    }

    /// Bandwidth for one column of a `joint_dim`-dimensional sample; `dim` is
    /// its position in the fixed list.
    pub fn column_bandwidth(&self, column: &[f64], dim: usize, joint_dim: usize) -> Result<f64> {
        match &self.bandwidth {
            BandwidthRule::Silverman => silverman_bandwidth_joint(column, joint_dim),
            BandwidthRule::Fixed(h) => {
                let v = if h.len() == 1 { h[0] } else { *h.get(dim).ok_or(Error::DimensionMismatch { expected: h.len(), got: dim + 1 })? };
                if !(v > 0.0) {
                    return Err(Error::InvalidParameter(format!("bandwidth {v} is not positive")));
                }
                Ok(v)
            }
        }
    }
}

/// `n × d` row-major sample, `d` in 1..=3.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(values: Vec<f64>, d: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("sample dimension must be 1..=3, got {d}")));
        }
        if values.is_empty() || !values.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch { expected: d, got: values.len() % d });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: index / d });
        }
        Ok(Self { n: values.len() / d, d, values })
    }

    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let d = columns.len();
        let n = columns.first().map_or(0, |c| c.len());
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch { left: n, right: c.len() });
        }
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(values, d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.d).copied().collect()
    }

    /// Same rows in a different order.
    pub fn permuted_rows(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        Self { n: self.n, d: self.d, values }
    }

    /// Per-dimension bandwidths under `config`.
    pub fn bandwidths(&self, config: &KdeConfig) -> Result<Vec<f64>> {
        (0..self.d).map(|j| config.column_bandwidth(&self.column(j), j, self.d)).collect()
    }
}

/// Silverman's rule of thumb `1.06 σ n^(-1/5)` with the n-1 sample deviation.
pub fn silverman_bandwidth(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: x.len() });
    }
    let sigma = sample_std(x);
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("zero-variance sample has no Silverman bandwidth".into()));
    }
    Ok(1.06 * sigma * (x.len() as f64).powf(-0.2))
}

/// Scale factor of the normal-reference rule in `d` dimensions. At `d = 1`
/// this is the rounded `1.06 n^(-1/5)` (the exact constant is `(4/3)^(1/5)`).
pub fn silverman_factor(n: usize, d: usize) -> f64 {
    let n = n as f64;
    if d <= 1 {
        return 1.06 * n.powf(-0.2);
    }
    let d = d as f64;
    (4.0 / ((d + 2.0) * n)).powf(1.0 / (d + 4.0))
}

/// Silverman bandwidth for one column of a `d`-dimensional joint sample.
pub fn silverman_bandwidth_joint(x: &[f64], d: usize) -> Result<f64> {
    if d <= 1 {
        return silverman_bandwidth(x);
    }
    if x.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: x.len() });
    }
    let sigma = sample_std(x);
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("zero-variance sample has no Silverman bandwidth".into()));
    }
    Ok(sigma * silverman_factor(x.len(), d))
}

/// One-dimensional scaled kernel `φ(diff / h) / h`.
#[inline(always)]
pub(crate) fn kernel_factor(diff: f64, h: f64) -> f64 {
    let u = diff / h;
    INV_SQRT_2PI * (-0.5 * u * u).exp() / h
}

#[inline]
fn product_kernel(a: &[f64], b: &[f64], h: &[f64]) -> f64 {
    let mut k = 1.0;
    for ((x, y), hd) in a.iter().zip(b).zip(h) {
        k *= kernel_factor(x - y, *hd);
    }
    k
}

fn density_at(points: &SampleMatrix, query: &[f64], h: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..points.n {
        acc += product_kernel(query, points.row(j), h);
    }
    acc / points.n as f64
}

/// Kernel density estimate at `query`.
pub fn kde_pdf(points: &SampleMatrix, query: &[f64], config: &KdeConfig) -> Result<f64> {
    if query.len() != points.d {
        return Err(Error::DimensionMismatch { expected: points.d, got: query.len() });
    }
    let h = points.bandwidths(config)?;
    Ok(density_at(points, query, &h))
}

/// Density estimates at every sample point, brute force. With `leave_one_out`
/// the point's own kernel is skipped and the sum is divided by `n - 1`.
pub fn sample_densities(points: &SampleMatrix, h: &[f64], leave_one_out: bool) -> Vec<f64> {
    if !leave_one_out {
        return par::map_indices(points.n, |i| density_at(points, points.row(i), h));
    }
    let denom = (points.n - 1) as f64;
    par::map_indices(points.n, |i| {
        let q = points.row(i);
        let mut acc = 0.0;
        for j in (0..points.n).filter(|&j| j != i) {
            acc += product_kernel(q, points.row(j), h);
        }
        acc / denom
    })
}

/// `-(1/n) Σ ln f̂(x_i)`.
pub(crate) fn entropy_from_densities(densities: &[f64]) -> f64 {
    -densities.iter().map(|f| f.ln()).sum::<f64>() / densities.len() as f64
}

fn check_entropy_sample(points: &SampleMatrix) -> Result<()> {
    if points.n < MIN_ENTROPY_SAMPLES {
        return Err(Error::TooShort { needed: MIN_ENTROPY_SAMPLES, got: points.n });
    }
    for j in 0..points.d {
        if !(sample_std(&points.column(j)) > 0.0) {
            return Err(Error::Degenerate(format!("dimension {j} has zero variance")));
        }
    }
    Ok(())
}

/// Plug-in entropy estimate `-(1/n) Σ ln f̂(x_i)` in nats, with `f̂` per the
/// configured estimator.
pub fn entropy_kde(points: &SampleMatrix, config: &KdeConfig) -> Result<f64> {
    check_entropy_sample(points)?;
    let h = points.bandwidths(config)?;
    Ok(entropy_from_densities(&sample_densities(points, &h, config.leave_one_out())))
}
