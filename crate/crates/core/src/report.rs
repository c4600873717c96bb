//! Pipeline report model and its TSV / JSON renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FunctionalForm, FunctionalFormReport};
use crate::inference::ScanMode;
use crate::te::{Direction, FlowMode};

/// `"**"` below 0.01, `"*"` below 0.05, otherwise empty.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Three decimals plus stars, e.g. `0.004**`.
pub fn format_pvalue(p: f64) -> String {
    format!("{p:.3}{}", stars(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMode {
    Linear,
    Nonlinear,
    #[default]
    Both,
}

impl AnalysisMode {
    pub fn scan_modes(self) -> &'static [ScanMode] {
        match self {
            AnalysisMode::Linear => &[ScanMode::Linear],
            AnalysisMode::Nonlinear => &[ScanMode::Nonlinear],
            AnalysisMode::Both => &[ScanMode::Linear, ScanMode::Nonlinear],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCell {
    pub lag: usize,
    pub statistic: f64,
    pub pvalue: f64,
    pub adjusted_pvalue: f64,
    /// Stars of `adjusted_pvalue`.
    pub stars: String,
}

impl LagCell {
    pub fn new(lag: usize, statistic: f64, pvalue: f64, adjusted_pvalue: f64) -> Self {
        Self { lag, statistic, pvalue, adjusted_pvalue, stars: stars(adjusted_pvalue).to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub mode: ScanMode,
    pub direction: Direction,
    pub significant: bool,
    pub cells: Vec<LagCell>,
}

/// BDS gate on the order-`lag` unrestricted residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdsCell {
    pub direction: Direction,
    pub lag: usize,
    pub v_stat: f64,
    pub adequate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFlowReport {
    pub mode: FlowMode,
    /// Lag 1 first.
    pub per_lag: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickerReport {
    pub ticker: String,
    pub n_obs: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    /// Share of trading days with any recorded activity.
    pub coverage: f64,
    pub scans: Vec<ScanReport>,
    pub bds: Vec<BdsCell>,
    pub net_flows: Vec<NetFlowReport>,
    pub forms: Option<FunctionalFormReport>,
}

impl TickerReport {
    pub fn scan(&self, mode: ScanMode, direction: Direction) -> Option<&ScanReport> {
        self.scans.iter().find(|s| s.mode == mode && s.direction == direction)
    }

    pub fn net_flow(&self, mode: FlowMode) -> Option<&NetFlowReport> {
        self.net_flows.iter().find(|f| f.mode == mode)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickerFailure {
    pub ticker: String,
    /// Process exit code class of the error (2 data, 3 numerical).
    pub exit_code: i32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub max_lag: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub mode: AnalysisMode,
    /// Sorted by ticker.
    pub tickers: Vec<TickerReport>,
    pub failures: Vec<TickerFailure>,
}

impl PipelineReport {
    /// Every stored star string agrees with its adjusted p-value.
    pub fn check_stars(&self) -> Result<()> {
        for t in &self.tickers {
            for s in &t.scans {
                for c in &s.cells {
                    if c.stars != stars(c.adjusted_pvalue) {
                        return Err(Error::Data(format!(
                            "{} lag {}: stars {:?} disagree with p = {}",
                            t.ticker, c.lag, c.stars, c.adjusted_pvalue
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn header_line(&self) -> String {
        format!(
            "# seed={} max_lag={} permutations={} alpha={} mode={}",
            self.seed,
            self.max_lag,
            self.permutations,
            self.alpha,
            match self.mode {
                AnalysisMode::Linear => "linear",
                AnalysisMode::Nonlinear => "nonlinear",
                AnalysisMode::Both => "both",
            }
        )
    }
}

fn lag_header(out: &mut String, first: &str, max_lag: usize) {
    out.push_str(first);
    for lag in 1..=max_lag {
        let _ = write!(out, "\tlag{lag}");
    }
    out.push('\n');
}

/// Per-lag adjusted p-values with stars, one row per ticker × mode × direction.
pub fn pvalue_table(report: &PipelineReport) -> String {
    let mut out = report.header_line() + " pvalues=bonferroni\n";
    lag_header(&mut out, "ticker\tmode\tdirection", report.max_lag);
    for t in &report.tickers {
        for s in &t.scans {
            let _ = write!(out, "{}\t{}\t{}", t.ticker, s.mode.label(), s.direction.label());
            for c in &s.cells {
                let _ = write!(out, "\t{}", format_pvalue(c.adjusted_pvalue));
            }
            out.push('\n');
        }
    }
    out
}

/// BDS statistic per lag; a trailing `!` marks a rejected (misspecified) fit.
pub fn bds_table(report: &PipelineReport) -> String {
    let mut out = report.header_line() + "\n";
    lag_header(&mut out, "ticker\tdirection", report.max_lag);
    for t in &report.tickers {
        for direction in [Direction::DriverToTarget, Direction::TargetToDriver] {
            let cells: Vec<&BdsCell> = t.bds.iter().filter(|b| b.direction == direction).collect();
            if cells.is_empty() {
                continue;
            }
            let _ = write!(out, "{}\t{}", t.ticker, direction.label());
            for b in cells {
                let _ = write!(out, "\t{:.3}{}", b.v_stat, if b.adequate { "" } else { "!" });
            }
            out.push('\n');
        }
    }
    out
}

/// Number of tickers significant at each lag, per mode and direction.
pub fn significance_by_lag_table(report: &PipelineReport) -> String {
    let columns: Vec<(ScanMode, Direction)> = [Direction::DriverToTarget, Direction::TargetToDriver]
        .into_iter()
        .flat_map(|d| [ScanMode::Linear, ScanMode::Nonlinear].map(|m| (m, d)))
        .filter(|(m, _)| report.mode.scan_modes().contains(m))
        .collect();
    let mut out = report.header_line() + "\n";
    out.push_str("lag");
    for (m, d) in &columns {
        let _ = write!(out, "\t{}:{}", m.label(), d.label());
    }
    out.push('\n');
    for lag in 1..=report.max_lag {
        let _ = write!(out, "{lag}");
        for (m, d) in &columns {
            let count = report
                .tickers
                .iter()
                .filter_map(|t| t.scan(*m, *d))
                .filter(|s| s.cells.iter().any(|c| c.lag == lag && c.adjusted_pvalue < report.alpha))
                .count();
            let _ = write!(out, "\t{count}");
        }
        out.push('\n');
    }
    out
}

/// Tickers ranked by total net flow (descending, ties by name), per mode.
pub fn ranking(report: &PipelineReport, mode: FlowMode) -> Vec<(&str, &NetFlowReport)> {
    let mut rows: Vec<(&str, &NetFlowReport)> =
        report.tickers.iter().filter_map(|t| t.net_flow(mode).map(|f| (t.ticker.as_str(), f))).collect();
    rows.sort_by(|a, b| b.1.total.total_cmp(&a.1.total).then_with(|| a.0.cmp(b.0)));
    rows
}

pub fn net_flow_ranking_table(report: &PipelineReport) -> String {
    let mut out = report.header_line() + "\n";
    lag_header(&mut out, "mode\trank\tticker\ttotal", report.max_lag);
    for mode in [FlowMode::Gaussian, FlowMode::Nonlinear] {
        for (rank, (ticker, flow)) in ranking(report, mode).into_iter().enumerate() {
            let _ = write!(out, "{}\t{}\t{}\t{:.6}", mode.label(), rank + 1, ticker, flow.total);
            for v in &flow.per_lag {
                let _ = write!(out, "\t{v:.6}");
            }
            out.push('\n');
        }
    }
    out
}

/// Functional-form matrix: `∘` adequate, `•` adequate and significant,
/// `-` misspecified, `err` when the form could not be evaluated.
pub fn forms_table(report: &PipelineReport) -> String {
    let mut out = report.header_line() + "\n";
    out.push_str("ticker");
    for f in FunctionalForm::ALL {
        let _ = write!(out, "\t{}", f.label());
    }
    out.push('\n');
    for t in &report.tickers {
        let Some(forms) = &t.forms else { continue };
        out.push_str(&t.ticker);
        for f in FunctionalForm::ALL {
            let cell = match forms.entries.iter().find(|e| e.form == f).and_then(|e| e.outcome.as_ref()) {
                Some(o) if !o.adequate => "-",
                Some(o) => o.status.symbol(),
                None => "err",
            };
            let _ = write!(out, "\t{cell}");
        }
        out.push('\n');
    }
    out
}

pub fn failures_table(report: &PipelineReport) -> String {
    let mut out = report.header_line() + "\n";
    out.push_str("ticker\texit_code\terror\n");
    for f in &report.failures {
        let _ = writeln!(out, "{}\t{}\t{}", f.ticker, f.exit_code, f.error.replace(['\t', '\n'], " "));
    }
    out
}

pub fn to_json(report: &PipelineReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(s: &str) -> Result<PipelineReport> {
    let report: PipelineReport = serde_json::from_str(s)?;
    report.check_stars()?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Tsv,
    Json,
}

/// File name and contents of every artifact for `formats`.
pub fn render(report: &PipelineReport, formats: &[OutputFormat]) -> Result<Vec<(&'static str, String)>> {
    let mut files = Vec::new();
    if formats.contains(&OutputFormat::Tsv) {
        files.push(("pvalues.tsv", pvalue_table(report)));
        if report.tickers.iter().any(|t| !t.bds.is_empty()) {
            files.push(("bds.tsv", bds_table(report)));
        }
        files.push(("significance_by_lag.tsv", significance_by_lag_table(report)));
        files.push(("net_flow_ranking.tsv", net_flow_ranking_table(report)));
        if report.tickers.iter().any(|t| t.forms.is_some()) {
            files.push(("forms.tsv", forms_table(report)));
        }
        files.push(("failures.tsv", failures_table(report)));
    }
    if formats.contains(&OutputFormat::Json) {
        files.push(("report.json", to_json(report)?));
    }
    Ok(files)
}

/// Write the artifacts into `dir` (created if missing); returns the paths.
pub fn emit_report(report: &PipelineReport, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, contents) in render(report, formats)? {
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn star_rendering() {
        assert_eq!(format_pvalue(0.004), "0.004**");
        assert_eq!(format_pvalue(0.03), "0.030*");
        assert_eq!(format_pvalue(0.5), "0.500");
        assert_eq!(format_pvalue(0.01), "0.010*");
        assert_eq!(format_pvalue(0.05), "0.050");
        assert_eq!(format_pvalue(0.0001), "0.000**");
        assert_eq!(format_pvalue(1.0), "1.000");
    }

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn sample_report(pvalues: &[f64]) -> PipelineReport {
        let cells: Vec<LagCell> =
            pvalues.iter().enumerate().map(|(i, p)| LagCell::new(i + 1, 0.1 * i as f64, *p / 2.0, *p)).collect();
        let n = cells.len();
        let flow = |sign: f64| NetFlowReport { mode: FlowMode::Gaussian, per_lag: vec![sign * 0.01; n], total: sign * 0.01 * n as f64 };
        let ticker = |name: &str, sign: f64| TickerReport {
            ticker: name.into(),
            n_obs: 500,
            first_date: d("2012-01-03"),
            last_date: d("2013-12-31"),
            coverage: 0.97,
            scans: vec![ScanReport { mode: ScanMode::Linear, direction: Direction::DriverToTarget, significant: true, cells: cells.clone() }],
            bds: vec![BdsCell { direction: Direction::DriverToTarget, lag: 1, v_stat: 2.5, adequate: false }],
            net_flows: vec![flow(sign)],
            forms: None,
        };
        PipelineReport {
            seed: 7,
            max_lag: n,
            permutations: 400,
            alpha: 0.05,
            mode: AnalysisMode::Linear,
            tickers: vec![ticker("AAA", -1.0), ticker("BBB", 1.0)],
            failures: vec![TickerFailure { ticker: "CCC".into(), exit_code: 2, error: "no price data".into() }],
        }
    }

    #[test]
    fn tables_have_expected_shape() {
        let r = sample_report(&[0.004, 0.03, 0.5]);
        let p = pvalue_table(&r);
        let lines: Vec<&str> = p.lines().collect();
        assert!(lines[0].starts_with("# seed=7 "));
        assert_eq!(lines[1], "ticker\tmode\tdirection\tlag1\tlag2\tlag3");
        assert_eq!(lines[2], "AAA\tlinear\tdriver->target\t0.004**\t0.030*\t0.500");
        let s = significance_by_lag_table(&r);
        assert_eq!(s.lines().nth(1).unwrap(), "lag\tlinear:driver->target\tlinear:target->driver");
        assert_eq!(s.lines().nth(2).unwrap(), "1\t2\t0");
        assert_eq!(s.lines().nth(4).unwrap(), "3\t0\t0");
        let rank = net_flow_ranking_table(&r);
        assert!(rank.lines().nth(2).unwrap().starts_with("linear\t1\tBBB\t0.030000"));
        assert!(bds_table(&r).lines().nth(2).unwrap().ends_with("2.500!"));
        assert!(failures_table(&r).contains("CCC\t2\tno price data"));
    }

    #[test]
    fn emit_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample_report(&[0.2, 0.01]);
        let paths = emit_report(&r, dir.path(), &[OutputFormat::Tsv, OutputFormat::Json]).unwrap();
        let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert!(names.contains(&"report.json".to_string()) && names.contains(&"pvalues.tsv".to_string()));
        assert!(!names.contains(&"forms.tsv".to_string()));
    }

    #[test]
    fn inconsistent_stars_rejected_on_load() {
        let mut r = sample_report(&[0.2]);
        r.tickers[0].scans[0].cells[0].stars = "*".into();
        assert!(from_json(&to_json(&r).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip_is_byte_identical(ps in proptest::collection::vec(0.0f64..=1.0, 1..10)) {
            let r = sample_report(&ps);
            let json = to_json(&r).unwrap();
            let back = from_json(&json).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!(to_json(&back).unwrap(), json);
        }

        #[test]
        fn stars_consistent_with_pvalues(ps in proptest::collection::vec(0.0f64..=1.0, 1..10)) {
            let r = sample_report(&ps);
            prop_assert!(r.check_stars().is_ok());
            for c in &r.tickers[0].scans[0].cells {
                let rendered = format_pvalue(c.adjusted_pvalue);
                prop_assert_eq!(rendered.ends_with("**"), c.adjusted_pvalue < 0.01);
                prop_assert_eq!(rendered.ends_with('*'), c.adjusted_pvalue < 0.05);
            }
        }
    }
}
