//! Observed price series, regular-grid log returns and their histograms.

use alloc::vec::Vec;
use core::fmt;

use crate::estimator::{BinGrid, Estimator, PdfHistogram, PdfMeta, Slot};

/// Default gap threshold in units of the sampling interval.
pub const DEFAULT_GAP_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub enum MarketError {
    LengthMismatch,
    /// Index of the first offending observation.
    NonPositivePrice { index: usize },
    NonIncreasingTimestamp { index: usize },
    NonFinite { index: usize },
    InvalidInterval,
    InsufficientData,
    TooFewBins,
    EmptyRange,
}

impl fmt::Display for MarketError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarketError::LengthMismatch => f.write_str("timestamps and prices differ in length"),
            MarketError::NonPositivePrice { index } => write!(f, "non-positive price at observation {index}"),
            MarketError::NonIncreasingTimestamp { index } => {
                write!(f, "non-increasing timestamp at observation {index}")
            }
            MarketError::NonFinite { index } => write!(f, "non-finite value at observation {index}"),
            MarketError::InvalidInterval => f.write_str("sampling interval must be positive"),
            MarketError::InsufficientData => f.write_str("fewer than two grid points survive resampling"),
            MarketError::TooFewBins => f.write_str("need at least 2 bins"),
            MarketError::EmptyRange => f.write_str("no observation falls inside the histogram range"),
        }
    }
}

impl core::error::Error for MarketError {}

/// Prices at strictly increasing instants (epoch seconds).
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries {
    timestamps: Vec<f64>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(timestamps: Vec<f64>, prices: Vec<f64>) -> Result<Self, MarketError> {
        if timestamps.len() != prices.len() {
            return Err(MarketError::LengthMismatch);
        }
        for (index, (t, p)) in timestamps.iter().zip(&prices).enumerate() {
            if !t.is_finite() || !p.is_finite() {
                return Err(MarketError::NonFinite { index });
            }
            if *p <= 0.0 {
                return Err(MarketError::NonPositivePrice { index });
            }
            if index > 0 && *t <= timestamps[index - 1] {
                return Err(MarketError::NonIncreasingTimestamp { index });
            }
        }
        Ok(Self { timestamps, prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Same series in another currency unit.
    pub fn rescaled(&self, factor: f64) -> Result<Self, MarketError> {
        Self::new(self.timestamps.clone(), self.prices.iter().map(|p| p * factor).collect())
    }
}

/// Log returns on a grid of spacing `tau` seconds with the default gap rule.
pub fn log_returns(series: &PriceSeries, tau: f64) -> Result<Vec<f64>, MarketError> {
    log_returns_with_gap(series, tau, DEFAULT_GAP_FACTOR)
}

/// Splits the series wherever consecutive observations are more than
/// `gap_factor * tau` apart, resamples each piece onto `start + j tau` by
/// carrying the last observation forward, and returns consecutive log
/// returns within pieces.
pub fn log_returns_with_gap(series: &PriceSeries, tau: f64, gap_factor: f64) -> Result<Vec<f64>, MarketError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(MarketError::InvalidInterval);
    }
    let (t, p) = (series.timestamps(), series.prices());
    let mut out = Vec::new();
    let mut start = 0;
    while start < t.len() {
        let mut end = start + 1;
        while end < t.len() && t[end] - t[end - 1] <= gap_factor * tau {
            end += 1;
        }
        let mut k = start;
        let mut prev = libm::log(p[start]);
        let mut j = 1u64;
        loop {
            let g = t[start] + j as f64 * tau;
            if g > t[end - 1] {
                break;
            }
            while k + 1 < end && t[k + 1] <= g {
                k += 1;
            }
            let cur = libm::log(p[k]);
            out.push(cur - prev);
            prev = cur;
            j += 1;
        }
        start = end;
    }
    if out.is_empty() {
        return Err(MarketError::InsufficientData);
    }
    Ok(out)
}

/// Count histogram of returns with Poisson error bars.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalHistogram {
    pub grid: BinGrid,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    pub error_bars: Vec<f64>,
    /// Observations inside the range.
    pub n_obs: u64,
    pub underflow: u64,
    pub overflow: u64,
}

impl EmpiricalHistogram {
    pub fn to_pdf(&self) -> PdfHistogram {
        let mut meta = PdfMeta::new(Estimator::Empirical);
        meta.samples = self.n_obs;
        meta.underflow = self.underflow;
        meta.overflow = self.overflow;
        PdfHistogram {
            grid: self.grid,
            density: self.density.clone(),
            stderr: self.error_bars.clone(),
            counts: self.counts.clone(),
            meta,
        }
    }
}

/// Histogram of `returns` over `n_bins` equal bins spanning `[lo, hi)`.
pub fn empirical_histogram(returns: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<EmpiricalHistogram, MarketError> {
    if n_bins < 2 {
        return Err(MarketError::TooFewBins);
    }
    empirical_histogram_on(returns, BinGrid::new(lo, hi, n_bins))
}

/// Histogram of `returns` on an explicit grid; density is normalized over
/// in-range observations.
pub fn empirical_histogram_on(returns: &[f64], grid: BinGrid) -> Result<EmpiricalHistogram, MarketError> {
    let mut counts = alloc::vec![0u64; grid.n];
    let (mut underflow, mut overflow) = (0, 0);
    for &x in returns {
        match grid.locate(x) {
            Slot::Under => underflow += 1,
            Slot::Over => overflow += 1,
            Slot::Bin(b) => counts[b] += 1,
        }
    }
    let n_obs: u64 = counts.iter().sum();
    if n_obs == 0 {
        return Err(MarketError::EmptyRange);
    }
    let norm = n_obs as f64 * grid.width;
    let density = counts.iter().map(|&c| c as f64 / norm).collect();
    let error_bars = counts.iter().map(|&c| libm::sqrt(c as f64) / norm).collect();
    Ok(EmpiricalHistogram { grid, counts, density, error_bars, n_obs, underflow, overflow })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::vec;

    fn series(t: &[f64], p: &[f64]) -> PriceSeries {
        PriceSeries::new(t.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn validation() {
        assert_eq!(PriceSeries::new(vec![0.0, 1.0], vec![1.0, -1.0]), Err(MarketError::NonPositivePrice { index: 1 }));
        assert_eq!(
            PriceSeries::new(vec![0.0, 0.0], vec![1.0, 1.0]),
            Err(MarketError::NonIncreasingTimestamp { index: 1 })
        );
    }

    #[test]
    fn simple_returns() {
        assert_eq!(log_returns(&series(&[0.0, 60.0], &[100.0, 100.0]), 60.0).unwrap(), vec![0.0]);
        let x = log_returns(&series(&[0.0, 60.0], &[100.0, 200.0]), 60.0).unwrap();
        assert!((x[0] - 0.693147).abs() < 1e-6);
        assert_eq!(log_returns(&series(&[0.0], &[1.0]), 60.0), Err(MarketError::InsufficientData));
        assert_eq!(log_returns(&series(&[0.0, 60.0], &[1.0, 2.0]), 0.0), Err(MarketError::InvalidInterval));
    }

    #[test]
    fn gap_produces_no_return() {
        let s = series(&[0.0, 60.0, 60.0 + 7200.0, 7320.0], &[100.0, 101.0, 150.0, 151.0]);
        let x = log_returns(&s, 60.0).unwrap();
        assert_eq!(x.len(), 2);
        assert!(x.iter().all(|r| r.abs() < 0.01));
    }

    #[test]
    fn carries_last_observation_forward() {
        let s = series(&[0.0, 30.0, 150.0], &[1.0, 2.0, 4.0]);
        let x = log_returns(&s, 60.0).unwrap();
        // grid 60 -> 2, 120 -> 2
        assert_eq!(x.len(), 2);
        assert!((x[0] - libm::log(2.0)).abs() < 1e-15);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn histogram_cases() {
        let h = empirical_histogram(&[0.3; 5], 4, 0.0, 1.0).unwrap();
        assert_eq!(h.density, vec![0.0, 4.0, 0.0, 0.0]);
        assert_eq!(h.error_bars[0], 0.0);
        assert!((h.error_bars[1] - libm::sqrt(5.0) / 1.25).abs() < 1e-15);
        assert_eq!(empirical_histogram(&[5.0], 4, 0.0, 1.0), Err(MarketError::EmptyRange));
        assert_eq!(empirical_histogram(&[0.5], 1, 0.0, 1.0), Err(MarketError::TooFewBins));
    }

    proptest! {
        #[test]
        fn returns_are_unit_free(
            steps in proptest::collection::vec((1.0f64..900.0, -0.01f64..0.01), 2..60),
            lambda in 1e-3f64..1e3,
        ) {
            let mut t = vec![0.0];
            let mut p = vec![100.0];
            for (dt, r) in &steps {
                t.push(t.last().unwrap() + dt);
                p.push(p.last().unwrap() * libm::exp(*r));
            }
            let s = series(&t, &p);
            let a = log_returns(&s, 60.0);
            let b = log_returns(&s.rescaled(lambda).unwrap(), 60.0);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.len(), b.len());
                    for (x, y) in a.iter().zip(&b) {
                        prop_assert!((x - y).abs() < 1e-12);
                    }
                }
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }

        #[test]
        fn histogram_normalized(xs in proptest::collection::vec(-1.0f64..1.0, 1..200), k in prop::sample::select(vec![1usize, 2, 4, 5])) {
            let h = empirical_histogram(&xs, 20, -1.0, 1.0).unwrap();
            let mass: f64 = h.density.iter().sum::<f64>() * h.grid.width;
            prop_assert!((mass - 1.0).abs() < 1e-9);
            let pdf = h.to_pdf().rebin(k).unwrap();
            for (j, c) in h.counts.chunks(k).enumerate() {
                prop_assert_eq!(pdf.counts[j], c.iter().sum::<u64>());
            }
        }
    }
}
