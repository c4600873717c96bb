//! Transfer entropy as a sum of KDE Shannon entropies, its Gaussian
//! counterpart through `GC = 2 TE`, and net information flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::granger::granger_test;
use crate::kde::{entropy_from_densities, kernel_factor, KdeConfig, MIN_ENTROPY_SAMPLES};
use crate::par;
use crate::series::AlignedSeriesPair;
use crate::stats::sample_std;

pub const MAX_LAG: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    DriverToTarget,
    TargetToDriver,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::DriverToTarget => Direction::TargetToDriver,
            Direction::TargetToDriver => Direction::DriverToTarget,
        }
    }

    pub fn code(self) -> u64 {
        match self {
            Direction::DriverToTarget => 0,
            Direction::TargetToDriver => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::DriverToTarget => "driver->target",
            Direction::TargetToDriver => "target->driver",
        }
    }

    /// `(source, destination)` series of `pair` for this direction.
    pub fn select(self, pair: &AlignedSeriesPair) -> (&[f64], &[f64]) {
        match self {
            Direction::DriverToTarget => (&pair.driver, &pair.target),
            Direction::TargetToDriver => (&pair.target, &pair.driver),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalityQuery {
    /// Forward shift Δt in trading days.
    pub lag: usize,
    /// Number of past terms per series.
    pub history: usize,
    pub direction: Direction,
}

impl CausalityQuery {
    pub fn new(lag: usize, direction: Direction) -> Result<Self> {
        if !(1..=MAX_LAG).contains(&lag) {
            return Err(Error::InvalidParameter(format!("lag must be in 1..={MAX_LAG}, got {lag}")));
        }
        Ok(Self { lag, history: 1, direction })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeResult {
    pub te: f64,
    pub lag: usize,
    pub direction: Direction,
    pub surrogate_pvalue: f64,
    pub adjusted_pvalue: f64,
}

/// Columns `(Y^F, Y^P, X^P)`: rows `(y[t + lag], y[t], x[t])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub future: Vec<f64>,
    pub past: Vec<f64>,
    pub source: Vec<f64>,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.future.len()
    }

    pub fn is_empty(&self) -> bool {
        self.future.is_empty()
    }
}

/// Embed source `x` and destination `y` at forward shift `lag`.
pub fn embed_series(x: &[f64], y: &[f64], lag: usize) -> Result<Embedding> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if lag == 0 {
        return Err(Error::InvalidParameter("lag must be at least 1".into()));
    }
    let n = y.len();
    if n <= lag {
        return Err(Error::TooShort { needed: lag + 1, got: n });
    }
    let rows = n - lag;
    Ok(Embedding { future: y[lag..].to_vec(), past: y[..rows].to_vec(), source: x[..rows].to_vec() })
}

pub fn embed(pair: &AlignedSeriesPair, query: &CausalityQuery) -> Result<Embedding> {
    if query.history != 1 {
        return Err(Error::InvalidParameter(format!(
            "kernel transfer entropy uses a single past term, got history {}",
            query.history
        )));
    }
    let (x, y) = query.direction.select(pair);
    embed_series(x, y, query.lag)
}

/// The four entropies entering transfer entropy, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeTerms {
    /// H(Y^P)
    pub past: f64,
    /// H(Y^F, Y^P)
    pub future_past: f64,
    /// H(Y^P, X^P)
    pub past_source: f64,
    /// H(Y^F, Y^P, X^P)
    pub all: f64,
}

impl TeTerms {
    pub fn te(&self) -> f64 {
        self.past_source - self.all + self.future_past - self.past
    }

    /// H(Y^F | Y^P) - H(Y^F | Y^P, X^P).
    pub fn conditional_form(&self) -> f64 {
        (self.future_past - self.past) - (self.all - self.past_source)
    }
}

/// Per-column bandwidths `(h_F, h_P, h_X)`, rejecting constant columns by name.
/// All four terms share these (sized for the three-dimensional joint), so the
/// smoothing of each column cancels between the positive and negative terms.
pub(crate) fn embedding_bandwidths(emb: &Embedding, kde: &KdeConfig) -> Result<[f64; 3]> {
    if emb.len() < MIN_ENTROPY_SAMPLES {
        return Err(Error::TooShort { needed: MIN_ENTROPY_SAMPLES, got: emb.len() });
    }
    let cols: [(&[f64], &str); 3] =
        [(&emb.future, "destination future"), (&emb.past, "destination past"), (&emb.source, "source past")];
    let mut h = [0.0; 3];
    for (d, (col, name)) in cols.iter().enumerate() {
        if !(sample_std(col) > 0.0) {
            return Err(Error::Degenerate(format!("{name} column is constant")));
        }
        h[d] = kde.column_bandwidth(col, d, 3)?;
    }
    Ok(h)
}

/// All four entropies in one pass over the sample pairs. The
/// per-dimension kernel factors are shared, and products are formed in the
/// same order as the generic estimator, so each term is bit-identical to
/// `entropy_kde` on the corresponding sample matrix with the shared
/// bandwidths fixed.
pub fn entropy_terms(emb: &Embedding, kde: &KdeConfig) -> Result<TeTerms> {
    let [hf, hp, hx] = embedding_bandwidths(emb, kde)?;
    let n = emb.len();
    let (f, p, x) = (&emb.future, &emb.past, &emb.source);
    let loo = kde.leave_one_out();
    let sums = par::map_indices(n, |i| {
        let (mut sp, mut sfp, mut spx, mut sall) = (0.0, 0.0, 0.0, 0.0);
        for j in (0..n).filter(|&j| !loo || j != i) {
            let gf = kernel_factor(f[i] - f[j], hf);
            let gp = kernel_factor(p[i] - p[j], hp);
            let gx = kernel_factor(x[i] - x[j], hx);
            let fp = gf * gp;
            sp += gp;
            sfp += fp;
            spx += gp * gx;
            sall += fp * gx;
        }
        [sp, sfp, spx, sall]
    });
    let nf = if loo { (n - 1) as f64 } else { n as f64 };
    let term = |k: usize| entropy_from_densities(&sums.iter().map(|s| s[k] / nf).collect::<Vec<_>>());
    Ok(TeTerms { past: term(0), future_past: term(1), past_source: term(2), all: term(3) })
}

/// Kernel transfer entropy for `query` (not clamped at zero).
pub fn transfer_entropy(pair: &AlignedSeriesPair, query: &CausalityQuery, kde: &KdeConfig) -> Result<f64> {
    Ok(entropy_terms(&embed(pair, query)?, kde)?.te())
}

/// `GC / 2` from the order-`lag` linear G-causality in the query's direction.
pub fn gaussian_te(pair: &AlignedSeriesPair, query: &CausalityQuery) -> Result<f64> {
    let (x, y) = query.direction.select(pair);
    Ok(granger_test(y, x, query.lag, None)?.gc_value / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    Nonlinear,
    Gaussian,
}

impl FlowMode {
    pub fn label(self) -> &'static str {
        match self {
            FlowMode::Nonlinear => "nonlinear",
            FlowMode::Gaussian => "linear",
        }
    }
}

fn directional_te(pair: &AlignedSeriesPair, query: &CausalityQuery, kde: &KdeConfig, mode: FlowMode) -> Result<f64> {
    match mode {
        FlowMode::Nonlinear => transfer_entropy(pair, query, kde),
        FlowMode::Gaussian => gaussian_te(pair, query),
    }
}

/// `TE(driver → target) − TE(target → driver)`.
pub fn net_information_flow(pair: &AlignedSeriesPair, lag: usize, kde: &KdeConfig, mode: FlowMode) -> Result<f64> {
    let forward = directional_te(pair, &CausalityQuery::new(lag, Direction::DriverToTarget)?, kde, mode)?;
    let backward = directional_te(pair, &CausalityQuery::new(lag, Direction::TargetToDriver)?, kde, mode)?;
    Ok(forward - backward)
}

/// Sum of per-lag net flows; `flows[l - 1]` holds lag `l`, all of `1..=max_lag` required.
pub fn total_net_flow(flows: &[Option<f64>], max_lag: usize) -> Result<f64> {
    let mut total = 0.0;
    for lag in 1..=max_lag {
        total += flows.get(lag - 1).copied().flatten().ok_or(Error::MissingLag(lag))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kde::{entropy_kde, EntropyEstimator, SampleMatrix};
    use crate::synth::{generate, GeneratorKind, GeneratorSpec};

    fn pair_of(driver: Vec<f64>, target: Vec<f64>) -> AlignedSeriesPair {
        let dates = crate::synth::weekday_calendar(driver.len());
        AlignedSeriesPair::new(dates, driver, target).unwrap()
    }

    #[test]
    fn embed_bookkeeping() {
        let e = embed_series(&[9.0, 8.0, 7.0, 6.0], &[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(e.future, vec![2.0, 3.0, 4.0]);
        assert_eq!(e.past, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.source, vec![9.0, 8.0, 7.0]);
        let e = embed_series(&[9.0, 8.0, 7.0, 6.0], &[1.0, 2.0, 3.0, 4.0], 3).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!((e.future[0], e.past[0], e.source[0]), (4.0, 1.0, 9.0));
        assert!(matches!(embed_series(&[1.0; 4], &[1.0; 4], 4), Err(Error::TooShort { .. })));
    }

    #[test]
    fn joint_pass_matches_generic_entropies_exactly() {
        let pair = generate(&GeneratorSpec::new(GeneratorKind::var1(0.5, 0.2), 200, 3)).unwrap();
        let q = CausalityQuery::new(2, Direction::DriverToTarget).unwrap();
        let e = embed(&pair, &q).unwrap();
        for est in [EntropyEstimator::LeaveOneOut, EntropyEstimator::Resubstitution] {
            let cfg = KdeConfig::silverman().with_estimator(est);
            let t = entropy_terms(&e, &cfg).unwrap();
            let [hf, hp, hx] = embedding_bandwidths(&e, &cfg).unwrap();
            let h = |cols: &[&[f64]], bw: Vec<f64>| {
                let fixed = KdeConfig::fixed(bw).unwrap().with_estimator(est);
                entropy_kde(&SampleMatrix::from_columns(cols).unwrap(), &fixed).unwrap()
            };
            assert_eq!(t.past, h(&[&e.past], vec![hp]));
            assert_eq!(t.future_past, h(&[&e.future, &e.past], vec![hf, hp]));
            assert_eq!(t.past_source, h(&[&e.past, &e.source], vec![hp, hx]));
            assert_eq!(t.all, h(&[&e.future, &e.past, &e.source], vec![hf, hp, hx]));
        }
    }

    #[test]
    fn four_term_and_conditional_forms_agree() {
        let pair = generate(&GeneratorSpec::new(GeneratorKind::quadratic(1.0), 300, 5)).unwrap();
        for lag in 1..=3 {
            let t = entropy_terms(&embed(&pair, &CausalityQuery::new(lag, Direction::DriverToTarget).unwrap()).unwrap(), &KdeConfig::silverman()).unwrap();
            assert!((t.te() - t.conditional_form()).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_symmetry() {
        let pair = generate(&GeneratorSpec::new(GeneratorKind::var1(0.4, 0.1), 250, 8)).unwrap();
        let neg = pair_of(pair.driver.iter().map(|v| -v).collect(), pair.target.iter().map(|v| -v).collect());
        let q = CausalityQuery::new(1, Direction::DriverToTarget).unwrap();
        let cfg = KdeConfig::silverman();
        let a = transfer_entropy(&pair, &q, &cfg).unwrap();
        let b = transfer_entropy(&neg, &q, &cfg).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn exact_copy_carries_more_information_than_independent() {
        let cfg = KdeConfig::silverman();
        let q = CausalityQuery::new(1, Direction::DriverToTarget).unwrap();
        for seed in 0..5 {
            let ind = generate(&GeneratorSpec::new(GeneratorKind::IidGaussian, 400, seed)).unwrap();
            let mut y = vec![0.0; 400];
            y[0] = ind.target[0];
            y[1..].copy_from_slice(&ind.driver[..399]);
            let copy = pair_of(ind.driver.clone(), y);
            assert!(transfer_entropy(&copy, &q, &cfg).unwrap() > transfer_entropy(&ind, &q, &cfg).unwrap());
        }
    }

    #[test]
    fn constant_column_named_in_error() {
        let pair = pair_of(vec![1.0; 60], (0..60).map(|i| (i as f64).sin()).collect());
        let q = CausalityQuery::new(1, Direction::DriverToTarget).unwrap();
        match transfer_entropy(&pair, &q, &KdeConfig::silverman()) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("source past"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gaussian_te_halves_gc() {
        let pair = generate(&GeneratorSpec::new(GeneratorKind::var1(0.5, 0.3), 800, 2)).unwrap();
        let q = CausalityQuery::new(3, Direction::DriverToTarget).unwrap();
        let gc = granger_test(&pair.target, &pair.driver, 3, None).unwrap().gc_value;
        assert_eq!(gaussian_te(&pair, &q).unwrap(), gc / 2.0);
    }

    #[test]
    fn gaussian_te_of_zero_driver_vanishes() {
        let base = generate(&GeneratorSpec::new(GeneratorKind::var1(0.0, 0.5), 300, 4)).unwrap();
        let pair = pair_of(vec![0.0; 300], base.target.clone());
        let q = CausalityQuery::new(1, Direction::DriverToTarget).unwrap();
        assert!(gaussian_te(&pair, &q).unwrap().abs() < 1e-10);
    }

    #[test]
    fn net_flow_vanishes_for_identical_series() {
        let base = generate(&GeneratorSpec::new(GeneratorKind::IidGaussian, 200, 9)).unwrap();
        let pair = pair_of(base.target.clone(), base.target.clone());
        // the linear form is singular here: the two lag blocks coincide
        assert_eq!(net_information_flow(&pair, 1, &KdeConfig::silverman(), FlowMode::Nonlinear).unwrap(), 0.0);
    }

    #[test]
    fn net_flow_is_antisymmetric() {
        let pair = generate(&GeneratorSpec::new(GeneratorKind::var1(0.5, 0.2), 300, 10)).unwrap();
        let cfg = KdeConfig::silverman();
        for mode in [FlowMode::Nonlinear, FlowMode::Gaussian] {
            for lag in [1, 4] {
                let a = net_information_flow(&pair, lag, &cfg, mode).unwrap();
                let b = net_information_flow(&pair.swapped(), lag, &cfg, mode).unwrap();
                assert_eq!(a, -b);
            }
        }
    }

    #[test]
    fn total_flow_sums_lags() {
        assert_eq!(total_net_flow(&[Some(0.0); 10], 10).unwrap(), 0.0);
        assert_eq!(total_net_flow(&[Some(1.0); 10], 10).unwrap(), 10.0);
        let flows: Vec<Option<f64>> = (1..=10).map(|l| Some(l as f64 * 0.01)).collect();
        let neg: Vec<Option<f64>> = flows.iter().map(|f| f.map(|v| -v)).collect();
        assert_eq!(total_net_flow(&flows, 10).unwrap(), -total_net_flow(&neg, 10).unwrap());
        let mut missing = flows.clone();
        missing[6] = None;
        assert!(matches!(total_net_flow(&missing, 10), Err(Error::MissingLag(7))));
        assert!(matches!(total_net_flow(&flows[..9], 10), Err(Error::MissingLag(10))));
    }

    #[test]
    fn query_validates_lag() {
        assert!(CausalityQuery::new(0, Direction::DriverToTarget).is_err());
        assert!(CausalityQuery::new(11, Direction::DriverToTarget).is_err());
        assert!(CausalityQuery::new(10, Direction::TargetToDriver).is_ok());
    }
}
