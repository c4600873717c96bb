//! Price and activity series, trading-day alignment and the deterministic
//! transforms applied before any causality test.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest aligned pair accepted for inference.
pub const MIN_ALIGNED_LEN: usize = 30;

fn check_increasing(dates: &[NaiveDate]) -> Result<()> {
    for (i, w) in dates.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::UnsortedDates { index: i + 1 });
        }
    }
    Ok(())
}

fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Daily closing, high and low prices on trading days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub close: Vec<f64>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, close: Vec<f64>, high: Vec<f64>, low: Vec<f64>) -> Result<Self> {
        let n = dates.len();
        for len in [close.len(), high.len(), low.len()] {
            if len != n {
                return Err(Error::LengthMismatch { left: n, right: len });
            }
        }
        check_increasing(&dates)?;
        for i in 0..n {
            for value in [close[i], high[i], low[i]] {
                if !(value > 0.0) || !value.is_finite() {
                    return Err(Error::NonPositivePrice { index: i, value });
                }
            }
            if high[i] < low[i] {
                return Err(Error::HighBelowLow { index: i });
            }
        }
        Ok(Self { dates, close, high, low })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn log_returns(&self) -> Result<Vec<f64>> {
        log_returns(&self.close)
    }

    pub fn volatility_proxy(&self) -> Result<Vec<f64>> {
        volatility_proxy(&self.high, &self.low)
    }
}

/// Daily bullish / bearish message counts on calendar days. Days not listed
/// carry zero counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivitySeries {
    pub dates: Vec<NaiveDate>,
    pub bullish: Vec<u64>,
    pub bearish: Vec<u64>,
}

impl ActivitySeries {
    pub fn new(dates: Vec<NaiveDate>, bullish: Vec<u64>, bearish: Vec<u64>) -> Result<Self> {
        if bullish.len() != dates.len() {
            return Err(Error::LengthMismatch { left: dates.len(), right: bullish.len() });
        }
        if bearish.len() != dates.len() {
            return Err(Error::LengthMismatch { left: dates.len(), right: bearish.len() });
        }
        check_increasing(&dates)?;
        Ok(Self { dates, bullish, bearish })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// The (driver, target) pair every test consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSeriesPair {
    pub dates: Vec<NaiveDate>,
    pub driver: Vec<f64>,
    pub target: Vec<f64>,
    /// Names of the transforms applied so far, oldest first.
    pub meta: Vec<String>,
}

impl AlignedSeriesPair {
    pub fn new(dates: Vec<NaiveDate>, driver: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if driver.len() != target.len() {
            return Err(Error::LengthMismatch { left: driver.len(), right: target.len() });
        }
        if dates.len() != target.len() {
            return Err(Error::LengthMismatch { left: dates.len(), right: target.len() });
        }
        if target.len() < MIN_ALIGNED_LEN {
            return Err(Error::TooShort { needed: MIN_ALIGNED_LEN, got: target.len() });
        }
        check_increasing(&dates)?;
        check_finite(&driver)?;
        check_finite(&target)?;
        Ok(Self { dates, driver, target, meta: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Same pair with driver and target roles exchanged.
    pub fn swapped(&self) -> Self {
        let mut meta = self.meta.clone();
        meta.push("swap".into());
        Self { dates: self.dates.clone(), driver: self.target.clone(), target: self.driver.clone(), meta }
    }

    /// Apply possibly length-reducing transforms to both columns; dates are
    /// trimmed from the front to match.
    pub fn transformed(
        &self,
        name: &str,
        driver: impl FnOnce(&[f64]) -> Result<Vec<f64>>,
        target: impl FnOnce(&[f64]) -> Result<Vec<f64>>,
    ) -> Result<Self> {
        let d = driver(&self.driver)?;
        let t = target(&self.target)?;
        let n = d.len().min(t.len());
        let dates = self.dates[self.dates.len() - n..].to_vec();
        let mut out = Self::new(dates, d[d.len() - n..].to_vec(), t[t.len() - n..].to_vec())?;
        out.meta = self.meta.clone();
        out.meta.push(name.to_string());
        Ok(out)
    }
}

/// `ln(close[i+1]) - ln(close[i])`.
pub fn log_returns(close: &[f64]) -> Result<Vec<f64>> {
    if close.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: close.len() });
    }
    if let Some(index) = close.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::NonPositivePrice { index, value: close[index] });
    }
    Ok(close.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
}

/// Map calendar-day bullish counts onto trading days. Each trading day
/// receives its own count plus every non-trading day since the previous
/// trading day; the first trading day absorbs everything before it. Days after
/// the last trading day are dropped.
pub fn align_to_trading_days(activity: &ActivitySeries, calendar: &[NaiveDate]) -> Result<Vec<f64>> {
    if calendar.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    check_increasing(calendar)?;
    let first = calendar[0];
    let last = calendar[calendar.len() - 1];
    if !activity.dates.iter().any(|d| *d >= first && *d <= last) {
        return Err(Error::EmptyOverlap);
    }
    let mut out = vec![0.0; calendar.len()];
    let mut slot = 0;
    for (date, &count) in activity.dates.iter().zip(&activity.bullish) {
        if *date > last {
            break;
        }
        while calendar[slot] < *date {
            slot += 1;
        }
        out[slot] += count as f64;
    }
    Ok(out)
}

/// Fraction of trading days with at least one activity record on or since the
/// previous trading day.
pub fn activity_coverage(activity: &ActivitySeries, calendar: &[NaiveDate]) -> f64 {
    if calendar.is_empty() {
        return 0.0;
    }
    let mut covered = vec![false; calendar.len()];
    let mut slot = 0;
    let last = calendar[calendar.len() - 1];
    for date in &activity.dates {
        if *date > last {
            break;
        }
        while calendar[slot] < *date {
            slot += 1;
        }
        covered[slot] = true;
    }
    covered.iter().filter(|c| **c).count() as f64 / calendar.len() as f64
}

/// First (`order = 1`) or second (`order = 2`) difference.
pub fn difference(x: &[f64], order: usize) -> Result<Vec<f64>> {
    if order == 0 || order > 2 {
        return Err(Error::InvalidParameter(format!("difference order must be 1 or 2, got {order}")));
    }
    if x.len() <= order {
        return Err(Error::TooShort { needed: order + 1, got: x.len() });
    }
    let mut out: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    if order == 2 {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

pub fn log1p_transform(x: &[f64]) -> Result<Vec<f64>> {
    if let Some(index) = x.iter().position(|&v| !(v > -1.0)) {
        return Err(Error::Domain { index, value: x[index] });
    }
    Ok(x.iter().map(|v| v.ln_1p()).collect())
}

pub fn abs_transform(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.abs()).collect()
}

/// Range-based daily volatility `2 (high - low) / (high + low)`.
pub fn volatility_proxy(high: &[f64], low: &[f64]) -> Result<Vec<f64>> {
    if high.len() != low.len() {
        return Err(Error::LengthMismatch { left: high.len(), right: low.len() });
    }
    let mut out = Vec::with_capacity(high.len());
    for (index, (&h, &l)) in high.iter().zip(low).enumerate() {
        if !(l > 0.0) {
            return Err(Error::NonPositivePrice { index, value: l });
        }
        if h < l {
            return Err(Error::HighBelowLow { index });
        }
        out.push(2.0 * (h - l) / (h + l));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn log_returns_examples() {
        assert_eq!(log_returns(&[100.0, 100.0, 100.0]).unwrap(), vec![0.0, 0.0]);
        let e = std::f64::consts::E;
        let r = log_returns(&[1.0, e, e * e]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
        let r = log_returns(&[100.0, 110.0]).unwrap();
        assert!((r[0] - 1.1f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_returns_rejects_bad_prices() {
        match log_returns(&[1.0, 2.0, 0.0, 3.0]) {
            Err(Error::NonPositivePrice { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(log_returns(&[1.0]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn weekend_counts_roll_forward() {
        // Fri 2015-06-19 .. Mon 2015-06-22
        let act = ActivitySeries::new(
            vec![day(2015, 6, 19), day(2015, 6, 20), day(2015, 6, 21), day(2015, 6, 22)],
            vec![5, 2, 3, 4],
            vec![0; 4],
        )
        .unwrap();
        let out = align_to_trading_days(&act, &[day(2015, 6, 19), day(2015, 6, 22)]).unwrap();
        assert_eq!(out, vec![5.0, 9.0]);
    }

    #[test]
    fn zero_counts_align_to_zeros() {
        let act = ActivitySeries::new(vec![day(2015, 6, 19), day(2015, 6, 22)], vec![0, 0], vec![1, 1]).unwrap();
        let out = align_to_trading_days(&act, &[day(2015, 6, 19), day(2015, 6, 22)]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn first_day_absorbs_preceding_idle_days() {
        let act = ActivitySeries::new(
            vec![day(2015, 6, 20), day(2015, 6, 21), day(2015, 6, 22), day(2015, 6, 23)],
            vec![1, 1, 1, 1],
            vec![0; 4],
        )
        .unwrap();
        assert_eq!(align_to_trading_days(&act, &[day(2015, 6, 23)]).unwrap(), vec![4.0]);
    }

    #[test]
    fn no_overlap_is_an_error() {
        let act = ActivitySeries::new(vec![day(2016, 1, 4)], vec![3], vec![0]).unwrap();
        assert!(matches!(align_to_trading_days(&act, &[day(2015, 6, 23)]), Err(Error::EmptyOverlap)));
        let empty = ActivitySeries::default();
        assert!(matches!(align_to_trading_days(&empty, &[day(2015, 6, 23)]), Err(Error::EmptyOverlap)));
    }

    #[test]
    fn difference_examples() {
        let x = [1.0, 2.0, 4.0, 7.0];
        assert_eq!(difference(&x, 1).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(difference(&x, 2).unwrap(), vec![1.0, 1.0]);
        assert_eq!(difference(&[3.0; 5], 1).unwrap(), vec![0.0; 4]);
        assert!(matches!(difference(&[1.0, 2.0], 2), Err(Error::TooShort { .. })));
        assert!(difference(&x, 3).is_err());
    }

    #[test]
    fn log1p_examples() {
        assert_eq!(log1p_transform(&[0.0]).unwrap(), vec![0.0]);
        let e = std::f64::consts::E;
        assert!((log1p_transform(&[e - 1.0]).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((log1p_transform(&[-0.5]).unwrap()[0] - 0.5f64.ln()).abs() < 1e-15);
        match log1p_transform(&[0.2, -1.0]) {
            Err(Error::Domain { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn abs_examples() {
        assert_eq!(abs_transform(&[-1.0, 2.0]), vec![1.0, 2.0]);
        assert_eq!(abs_transform(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(abs_transform(&[-0.03]), vec![0.03]);
    }

    #[test]
    fn volatility_examples() {
        assert_eq!(volatility_proxy(&[100.0], &[100.0]).unwrap(), vec![0.0]);
        assert!((volatility_proxy(&[110.0], &[90.0]).unwrap()[0] - 0.2).abs() < 1e-15);
        assert_eq!(volatility_proxy(&[3.0], &[1.0]).unwrap(), vec![1.0]);
        assert!(matches!(volatility_proxy(&[1.0], &[2.0]), Err(Error::HighBelowLow { index: 0 })));
    }

    #[test]
    fn price_series_validation() {
        let d = vec![day(2015, 6, 19), day(2015, 6, 22)];
        assert!(PriceSeries::new(d.clone(), vec![1.0, 2.0], vec![1.5, 2.5], vec![0.5, 1.5]).is_ok());
        assert!(PriceSeries::new(d.clone(), vec![1.0, -2.0], vec![1.5, 2.5], vec![0.5, 1.5]).is_err());
        assert!(PriceSeries::new(d.clone(), vec![1.0, 2.0], vec![1.5, 1.0], vec![0.5, 1.5]).is_err());
        assert!(PriceSeries::new(vec![d[1], d[0]], vec![1.0, 2.0], vec![1.5, 2.5], vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn pair_requires_minimum_length() {
        let dates: Vec<NaiveDate> = (0..29).map(|i| day(2015, 1, 1) + chrono::Days::new(i)).collect();
        let r = AlignedSeriesPair::new(dates, vec![0.0; 29], vec![0.0; 29]);
        assert!(matches!(r, Err(Error::TooShort { needed: 30, got: 29 })));
    }

    proptest! {
        #[test]
        fn returns_invert_cumulative_exp(steps in proptest::collection::vec(-0.2f64..0.2, 2..200)) {
            let mut close = vec![50.0];
            let mut level = 50.0f64.ln();
            for s in &steps {
                level += s;
                close.push(level.exp());
            }
            let r = log_returns(&close).unwrap();
            for (a, b) in r.iter().zip(&steps) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn second_difference_is_iterated_first(x in proptest::collection::vec(-1e3f64..1e3, 3..100)) {
            let twice = difference(&difference(&x, 1).unwrap(), 1).unwrap();
            prop_assert_eq!(difference(&x, 2).unwrap(), twice);
        }

        #[test]
        fn volatility_is_scale_invariant(
            lows in proptest::collection::vec(0.5f64..100.0, 1..50),
            spread in 0.0f64..0.5,
            c in 0.01f64..1e3,
        ) {
            let highs: Vec<f64> = lows.iter().map(|l| l * (1.0 + spread)).collect();
            let a = volatility_proxy(&highs, &lows).unwrap();
            let hs: Vec<f64> = highs.iter().map(|h| h * c).collect();
            let ls: Vec<f64> = lows.iter().map(|l| l * c).collect();
            let b = volatility_proxy(&hs, &ls).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-12);
                prop_assert!((0.0..2.0).contains(u));
            }
        }

        #[test]
        fn alignment_preserves_total_count(
            counts in proptest::collection::vec(0u64..50, 1..60),
            keep in proptest::collection::vec(any::<bool>(), 60),
        ) {
            let start = day(2014, 3, 1);
            let dates: Vec<NaiveDate> = (0..counts.len()).map(|i| start + chrono::Days::new(i as u64)).collect();
            let mut calendar: Vec<NaiveDate> = dates.iter().zip(&keep).filter(|(_, k)| **k).map(|(d, _)| *d).collect();
            if calendar.is_empty() {
                calendar.push(dates[dates.len() - 1]);
            }
            let act = ActivitySeries::new(dates.clone(), counts.clone(), vec![0; counts.len()]).unwrap();
            let last = *calendar.last().unwrap();
            let expected: u64 = dates.iter().zip(&counts).filter(|(d, _)| **d <= last).map(|(_, c)| *c).sum();
            let out = align_to_trading_days(&act, &calendar).unwrap();
            prop_assert_eq!(out.len(), calendar.len());
            prop_assert_eq!(out.iter().sum::<f64>(), expected as f64);
        }
    }
}
