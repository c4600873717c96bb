//! End-to-end analysis of a ticker universe.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::bds::{bds_statistic, BdsConfig};
use crate::error::{Error, Result};
use crate::filters::{functional_form_sweep, SweepConfig};
use crate::granger::fit_unrestricted;
use crate::inference::{lag_scan, ScanMode, SurrogateConfig};
use crate::kde::KdeConfig;
use crate::par;
use crate::report::{AnalysisMode, BdsCell, LagCell, NetFlowReport, PipelineReport, ScanReport, TickerFailure, TickerReport};
use crate::rng;
use crate::series::{activity_coverage, align_to_trading_days, ActivitySeries, AlignedSeriesPair, PriceSeries, MIN_ALIGNED_LEN};
use crate::te::{Direction, FlowMode, MAX_LAG};

const DIRECTIONS: [Direction; 2] = [Direction::DriverToTarget, Direction::TargetToDriver];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Tickers to analyse; empty means every symbol in either input.
    pub tickers: Vec<String>,
    /// Inclusive price-date window.
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub max_lag: usize,
    pub permutations: usize,
    pub seed: u64,
    pub alpha: f64,
    pub mode: AnalysisMode,
    pub sweep_forms: bool,
    pub bds: BdsConfig,
    pub kde: KdeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tickers: Vec::new(),
            start: None,
            end: None,
            max_lag: MAX_LAG,
            permutations: 400,
            seed: 0,
            alpha: 0.05,
            mode: AnalysisMode::Both,
            sweep_forms: false,
            bds: BdsConfig::default(),
            kde: KdeConfig::silverman(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LAG).contains(&self.max_lag) {
            return Err(Error::InvalidParameter(format!("max_lag must be in 1..={MAX_LAG}, got {}", self.max_lag)));
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(Error::InvalidParameter(format!("start {s} is after end {e}")));
            }
        }
        self.bds.validate()?;
        self.surrogate_config(self.seed).validate()
    }

    fn surrogate_config(&self, seed: u64) -> SurrogateConfig {
        SurrogateConfig { n_permutations: self.permutations, seed, alpha: self.alpha, n_hypotheses: self.max_lag }
    }

    /// Surrogate seed for one ticker, independent of processing order.
    pub fn ticker_seed(&self, ticker: &str) -> u64 {
        rng::derive_seed(self.seed, &[rng::label_hash(ticker)])
    }
}

/// Both inputs keyed by symbol.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarketData {
    pub activity: BTreeMap<String, ActivitySeries>,
    pub prices: BTreeMap<String, PriceSeries>,
}

/// Aligned (bullish count, log return) pair and the matching volatility proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTicker {
    pub pair: AlignedSeriesPair,
    pub volatility: Vec<f64>,
    pub coverage: f64,
}

/// Returns are dated by the later close; each return day receives the
/// bullish counts since the previous close.
pub fn prepare_ticker(
    activity: &ActivitySeries,
    prices: &PriceSeries,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
) -> Result<PreparedTicker> {
    let keep: Vec<usize> = (0..prices.len())
        .filter(|&i| start.is_none_or(|s| prices.dates[i] >= s) && end.is_none_or(|e| prices.dates[i] <= e))
        .collect();
    if keep.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: keep.len() });
    }
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let window = PriceSeries::new(keep.iter().map(|&i| prices.dates[i]).collect(), pick(&prices.close), pick(&prices.high), pick(&prices.low))?;
    let target = window.log_returns()?;
    let mut driver = align_to_trading_days(activity, &window.dates)?;
    driver.remove(0);
    let mut volatility = window.volatility_proxy()?;
    volatility.remove(0);
    let calendar = window.dates[1..].to_vec();
    let coverage = activity_coverage(activity, &calendar);
    let pair = AlignedSeriesPair::new(calendar, driver, target)?;
    Ok(PreparedTicker { pair, volatility, coverage })
}

/// Linear and/or nonlinear scans in both directions, BDS gates, net flows and
/// the optional form sweep for one prepared ticker.
pub fn analyze_pair(ticker: &str, prepared: &PreparedTicker, cfg: &PipelineConfig) -> Result<TickerReport> {
    let pair = &prepared.pair;
    if pair.len() < MIN_ALIGNED_LEN + cfg.max_lag {
        return Err(Error::TooShort { needed: MIN_ALIGNED_LEN + cfg.max_lag, got: pair.len() });
    }
    let surrogates = cfg.surrogate_config(cfg.ticker_seed(ticker));
    let mut scans = Vec::new();
    for &mode in cfg.mode.scan_modes() {
        for direction in DIRECTIONS {
            let scan = lag_scan(pair, cfg.max_lag, mode, direction, &cfg.kde, &surrogates)?;
            let cells = scan.results.iter().map(|r| LagCell::new(r.lag, r.statistic, r.pvalue, r.adjusted_pvalue)).collect();
            scans.push(ScanReport { mode, direction, significant: scan.significant, cells });
        }
    }
    let mut bds = Vec::new();
    if cfg.mode.scan_modes().contains(&ScanMode::Linear) {
        for direction in DIRECTIONS {
            let (source, dest) = direction.select(pair);
            for lag in 1..=cfg.max_lag {
                let fit = fit_unrestricted(dest, source, lag, None)?;
                let b = bds_statistic(&fit.residuals, &cfg.bds)?;
                bds.push(BdsCell { direction, lag, v_stat: b.v_stat, adequate: !b.reject });
            }
        }
    }
    let mut net_flows = Vec::new();
    for &mode in cfg.mode.scan_modes() {
        let (flow_mode, scale) = match mode {
            ScanMode::Linear => (FlowMode::Gaussian, 0.5),
            ScanMode::Nonlinear => (FlowMode::Nonlinear, 1.0),
        };
        let stat = |d: Direction| scans.iter().find(|s| s.mode == mode && s.direction == d).map(|s| &s.cells);
        if let (Some(fwd), Some(bwd)) = (stat(Direction::DriverToTarget), stat(Direction::TargetToDriver)) {
            let per_lag: Vec<f64> = fwd.iter().zip(bwd).map(|(f, b)| scale * f.statistic - scale * b.statistic).collect();
            let total = per_lag.iter().sum();
            net_flows.push(NetFlowReport { mode: flow_mode, per_lag, total });
        }
    }
    let forms = if cfg.sweep_forms {
        let sweep = SweepConfig { max_lag: cfg.max_lag, alpha: cfg.alpha, bds: cfg.bds };
        Some(functional_form_sweep(pair, Some(&prepared.volatility), &sweep)?)
    } else {
        None
    };
    Ok(TickerReport {
        ticker: ticker.to_string(),
        n_obs: pair.len(),
        first_date: pair.dates[0],
        last_date: pair.dates[pair.len() - 1],
        coverage: prepared.coverage,
        scans,
        bds,
        net_flows,
        forms,
    })
}

fn analyze_ticker(ticker: &str, data: &MarketData, cfg: &PipelineConfig) -> Result<TickerReport> {
    let activity = data.activity.get(ticker).ok_or_else(|| Error::Data(format!("no sentiment rows for {ticker}")))?;
    let prices = data.prices.get(ticker).ok_or_else(|| Error::Data(format!("no price rows for {ticker}")))?;
    analyze_pair(ticker, &prepare_ticker(activity, prices, cfg.start, cfg.end)?, cfg)
}

/// Analyse every selected ticker. Tickers run in parallel; a failing ticker
/// is reported in `failures` and the rest continue.
pub fn run_pipeline(data: &MarketData, cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let tickers: Vec<String> = if cfg.tickers.is_empty() {
        data.activity.keys().chain(data.prices.keys()).cloned().collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        cfg.tickers.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    };
    if tickers.is_empty() {
        return Err(Error::Data("no tickers to analyse".into()));
    }
    let outcomes = par::map_slice(&tickers, |t| analyze_ticker(t, data, cfg));
    let mut report = PipelineReport {
        seed: cfg.seed,
        max_lag: cfg.max_lag,
        permutations: cfg.permutations,
        alpha: cfg.alpha,
        mode: cfg.mode,
        tickers: Vec::new(),
        failures: Vec::new(),
    };
    for (ticker, outcome) in tickers.into_iter().zip(outcomes) {
        match outcome {
            Ok(t) => report.tickers.push(t),
            Err(e) => report.failures.push(TickerFailure { ticker, exit_code: e.exit_code(), error: e.to_string() }),
        }
    }
    Ok(report)
}
