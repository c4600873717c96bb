//! Surrogate-permutation significance for transfer entropy and Bonferroni
//! control across the lag grid.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::granger::granger_test;
use crate::kde::{entropy_from_densities, kernel_factor, KdeConfig};
use crate::par;
use crate::rng;
use crate::series::AlignedSeriesPair;
use crate::stats::is_constant;
use crate::te::{embed, embedding_bandwidths, entropy_terms, CausalityQuery, Direction, Embedding, TeResult};

/// Above this many embedded rows the kernel matrices are not cached.
const MATRIX_CACHE_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub n_permutations: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Bonferroni family size.
    pub n_hypotheses: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { n_permutations: 400, seed: 0, alpha: 0.05, n_hypotheses: 10 }
    }
}

impl SurrogateConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_permutations < 100 {
            return Err(Error::InvalidParameter(format!("need at least 100 permutations, got {}", self.n_permutations)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if self.n_hypotheses == 0 {
            return Err(Error::InvalidParameter("n_hypotheses must be positive".into()));
        }
        Ok(())
    }
}

/// `(1 + #{surrogate ≥ observed}) / (1 + N)`.
pub fn plus_one_pvalue(observed: f64, surrogates: &[f64]) -> f64 {
    let exceed = surrogates.iter().filter(|s| **s >= observed).count();
    (1 + exceed) as f64 / (1 + surrogates.len()) as f64
}

/// Multiply by the family size and clamp at one.
pub fn bonferroni(pvalues: &[f64], n_hypotheses: usize) -> Result<Vec<f64>> {
    pvalues
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("p-value {p} outside [0,1]")));
            }
            Ok((p * n_hypotheses as f64).min(1.0))
        })
        .collect()
}

/// Transfer entropy under row permutations of the source column.
///
/// Entropies that do not involve the source are computed once. The kernel
/// factors of the destination columns (lower triangle) and of the source
/// (full) are cached as dense matrices, and each unordered pair is visited
/// once, so a surrogate costs a gather plus a multiply-add sweep over half the
/// pairs. A permuted source reuses the same bandwidth. The observed statistic
/// is evaluated through the same path (identity order), so it is compared
/// against its surrogates without any rounding offset.
pub struct SurrogateEngine {
    n: usize,
    h: [f64; 3],
    leave_one_out: bool,
    h_past: f64,
    h_future_past: f64,
    emb: Embedding,
    cache: Option<KernelCache>,
}

struct KernelCache {
    /// Strict lower triangles, row `i` at offset `i(i-1)/2`.
    past: Vec<f64>,
    future_past: Vec<f64>,
    /// Full `n × n`.
    source: Vec<f64>,
}

fn tri_offset(i: usize) -> usize {
    i * i.saturating_sub(1) / 2
}

/// One row of the pair sweep: returns the row sums and scatters the same
/// products into the column accumulators.
fn pair_row(p: &[f64], fp: &[f64], g: &[f64], spx: &mut [f64], sall: &mut [f64]) -> (f64, f64) {
    let mut a = [0.0; 4];
    let mut b = [0.0; 4];
    let mut pc = p.chunks_exact(4);
    let mut fc = fp.chunks_exact(4);
    let mut gc = g.chunks_exact(4);
    let mut xc = spx.chunks_exact_mut(4);
    let mut ac = sall.chunks_exact_mut(4);
    for ((((p4, f4), g4), x4), a4) in (&mut pc).zip(&mut fc).zip(&mut gc).zip(&mut xc).zip(&mut ac) {
        for l in 0..4 {
            let u = p4[l] * g4[l];
            let v = f4[l] * g4[l];
            a[l] += u;
            b[l] += v;
            x4[l] += u;
            a4[l] += v;
        }
    }
    let (mut ta, mut tb) = (0.0, 0.0);
    let rest = pc.remainder().iter().zip(fc.remainder()).zip(gc.remainder());
    for ((((p1, f1), g1), x1), a1) in rest.zip(xc.into_remainder()).zip(ac.into_remainder()) {
        let u = p1 * g1;
        let v = f1 * g1;
        ta += u;
        tb += v;
        *x1 += u;
        *a1 += v;
    }
    ((a[0] + a[1]) + (a[2] + a[3]) + ta, (b[0] + b[1]) + (b[2] + b[3]) + tb)
}

impl SurrogateEngine {
    pub fn new(emb: &Embedding, kde: &KdeConfig) -> Result<Self> {
        let h = embedding_bandwidths(emb, kde)?;
        let observed = entropy_terms(emb, kde)?;
        let n = emb.len();
        let cache = (n <= MATRIX_CACHE_LIMIT).then(|| {
            let rows = par::map_indices(n, |i| {
                let mut p = Vec::with_capacity(i);
                let mut fp = Vec::with_capacity(i);
                for j in 0..i {
                    let gf = kernel_factor(emb.future[i] - emb.future[j], h[0]);
                    let gp = kernel_factor(emb.past[i] - emb.past[j], h[1]);
                    p.push(gp);
                    fp.push(gf * gp);
                }
                let x: Vec<f64> = emb.source.iter().map(|&s| kernel_factor(emb.source[i] - s, h[2])).collect();
                (p, fp, x)
            });
            let mut cache = KernelCache {
                past: Vec::with_capacity(tri_offset(n)),
                future_past: Vec::with_capacity(tri_offset(n)),
                source: Vec::with_capacity(n * n),
            };
            for (p, fp, x) in rows {
                cache.past.extend(p);
                cache.future_past.extend(fp);
                cache.source.extend(x);
            }
            cache
        });
        Ok(Self {
            n,
            h,
            leave_one_out: kde.leave_one_out(),
            h_past: observed.past,
            h_future_past: observed.future_past,
            emb: emb.clone(),
            cache,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unpermuted statistic.
    pub fn te_observed(&self) -> f64 {
        self.te_permuted(&(0..self.n).collect::<Vec<_>>())
    }

    /// TE with source row `i` replaced by source row `order[i]`.
    pub fn te_permuted(&self, order: &[usize]) -> f64 {
        assert_eq!(order.len(), self.n, "permutation length");
        let n = self.n;
        let (self_px, self_all) = if self.leave_one_out {
            (0.0, 0.0)
        } else {
            let (gf, gp, gx) = (kernel_factor(0.0, self.h[0]), kernel_factor(0.0, self.h[1]), kernel_factor(0.0, self.h[2]));
            (gp * gx, (gf * gp) * gx)
        };
        let mut spx = vec![self_px; n];
        let mut sall = vec![self_all; n];
        match &self.cache {
            Some(c) => {
                let mut g = vec![0.0; n];
                for i in 1..n {
                    let row_x = &c.source[order[i] * n..(order[i] + 1) * n];
                    for (gj, &oj) in g[..i].iter_mut().zip(&order[..i]) {
                        *gj = row_x[oj];
                    }
                    let off = tri_offset(i);
                    let (head_px, tail_px) = spx.split_at_mut(i);
                    let (head_all, tail_all) = sall.split_at_mut(i);
                    let (a, b) =
                        pair_row(&c.past[off..off + i], &c.future_past[off..off + i], &g[..i], head_px, head_all);
                    tail_px[0] += a;
                    tail_all[0] += b;
                }
            }
            None => {
                let e = &self.emb;
                for i in 1..n {
                    let xi = e.source[order[i]];
                    for j in 0..i {
                        let gf = kernel_factor(e.future[i] - e.future[j], self.h[0]);
                        let gp = kernel_factor(e.past[i] - e.past[j], self.h[1]);
                        let gx = kernel_factor(xi - e.source[order[j]], self.h[2]);
                        let u = gp * gx;
                        let v = (gf * gp) * gx;
                        spx[i] += u;
                        spx[j] += u;
                        sall[i] += v;
                        sall[j] += v;
                    }
                }
            }
        }
        let denom = if self.leave_one_out { (n - 1) as f64 } else { n as f64 };
        for v in spx.iter_mut().chain(sall.iter_mut()) {
            *v /= denom;
        }
        entropy_from_densities(&spx) - entropy_from_densities(&sall) + self.h_future_past - self.h_past
    }
}

/// Permutation for surrogate `index`; the stream depends only on
/// `(seed, lag, direction, index)`.
pub fn surrogate_order(n: usize, seed: u64, lag: usize, direction: Direction, index: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, &[lag as u64, direction.code(), index as u64]);
    order.shuffle(&mut r);
    order
}

/// Observed statistic plus the full surrogate sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationOutcome {
    pub result: TeResult,
    pub surrogates: Vec<f64>,
}

pub fn permutation_test(
    pair: &AlignedSeriesPair,
    query: &CausalityQuery,
    kde: &KdeConfig,
    cfg: &SurrogateConfig,
) -> Result<PermutationOutcome> {
    cfg.validate()?;
    let emb = embed(pair, query)?;
    let engine = SurrogateEngine::new(&emb, kde)?;
    let observed = engine.te_observed();
    let n = engine.len();
    let surrogates = par::map_indices(cfg.n_permutations, |p| {
        engine.te_permuted(&surrogate_order(n, cfg.seed, query.lag, query.direction, p))
    });
    let p = plus_one_pvalue(observed, &surrogates);
    let adjusted = bonferroni(&[p], cfg.n_hypotheses)?[0];
    Ok(PermutationOutcome {
        result: TeResult { te: observed, lag: query.lag, direction: query.direction, surrogate_pvalue: p, adjusted_pvalue: adjusted },
        surrogates,
    })
}

/// Surrogate p-value of the kernel transfer entropy for `query`.
pub fn permutation_pvalue(
    pair: &AlignedSeriesPair,
    query: &CausalityQuery,
    kde: &KdeConfig,
    cfg: &SurrogateConfig,
) -> Result<TeResult> {
    permutation_test(pair, query, kde, cfg).map(|o| o.result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Kernel transfer entropy with surrogate p-values.
    Nonlinear,
    /// Linear G-causality with F-test p-values.
    Linear,
}

impl ScanMode {
    pub fn label(self) -> &'static str {
        match self {
            ScanMode::Nonlinear => "nonlinear",
            ScanMode::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagResult {
    pub lag: usize,
    /// Transfer entropy (nonlinear) or G-causality log variance ratio (linear).
    pub statistic: f64,
    pub pvalue: f64,
    pub adjusted_pvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagScan {
    pub mode: ScanMode,
    pub direction: Direction,
    pub results: Vec<LagResult>,
    pub significant: bool,
}

impl LagScan {
    pub fn at_lag(&self, lag: usize) -> Option<&LagResult> {
        self.results.iter().find(|r| r.lag == lag)
    }

    pub fn significant_at(&self, lag: usize, alpha: f64) -> bool {
        self.at_lag(lag).is_some_and(|r| r.adjusted_pvalue < alpha)
    }
}

/// Test lags `1..=max_lag` in one direction. Each lag uses all rows available
/// to it. A constant source carries no information: every lag reports a zero
/// statistic with p = 1.
pub fn lag_scan(
    pair: &AlignedSeriesPair,
    max_lag: usize,
    mode: ScanMode,
    direction: Direction,
    kde: &KdeConfig,
    cfg: &SurrogateConfig,
) -> Result<LagScan> {
    cfg.validate()?;
    let (source, dest) = direction.select(pair);
    let mut results = Vec::with_capacity(max_lag);
    for lag in 1..=max_lag {
        let query = CausalityQuery::new(lag, direction)?;
        let (statistic, pvalue) = if is_constant(source) {
            (0.0, 1.0)
        } else {
            match mode {
                ScanMode::Nonlinear => {
                    let r = permutation_pvalue(pair, &query, kde, cfg)?;
                    (r.te, r.surrogate_pvalue)
                }
                ScanMode::Linear => {
                    let g = granger_test(dest, source, lag, None)?;
                    (g.gc_value, g.pvalue)
                }
            }
        };
        results.push(LagResult { lag, statistic, pvalue, adjusted_pvalue: pvalue });
    }
    let raw: Vec<f64> = results.iter().map(|r| r.pvalue).collect();
    for (r, adj) in results.iter_mut().zip(bonferroni(&raw, cfg.n_hypotheses)?) {
        r.adjusted_pvalue = adj;
    }
    let significant = results.iter().any(|r| r.adjusted_pvalue < cfg.alpha);
    Ok(LagScan { mode, direction, results, significant })
}
