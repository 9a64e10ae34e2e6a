//! Binned densities over `x_N = log S(T)`, their moments, the analytic GBM
//! reference, and PDF-to-PDF comparison.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;
use core::fmt;

use crate::engine::RawAccumulators;
use crate::params::AccumulationMode;

#[derive(Clone, Debug, PartialEq)]
pub enum EstimatorError {
    /// No in-range mass to normalize.
    EmptyRun,
    /// Zero variance; kurtosis undefined.
    Degenerate,
    BinMismatch,
    RebinFactor { factor: usize, bins: usize },
    NoReplicates,
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::EmptyRun => f.write_str("run produced no in-range samples"),
            EstimatorError::Degenerate => f.write_str("density has zero variance"),
            EstimatorError::BinMismatch => f.write_str("histograms have different bin edges"),
            EstimatorError::RebinFactor { factor, bins } => {
                write!(f, "cannot merge {bins} bins in groups of {factor}")
            }
            EstimatorError::NoReplicates => f.write_str("no replicates to aggregate"),
        }
    }
}

impl core::error::Error for EstimatorError {}

/// Uniform bins `[lo + k w, lo + (k+1) w)`, `k = 0..n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinGrid {
    pub lo: f64,
    pub width: f64,
    pub n: usize,
}

/// Where a value falls relative to a [`BinGrid`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Under,
    Bin(usize),
    Over,
}

impl BinGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, width: (hi - lo) / n as f64, n }
    }

    /// Odd number of bins of `width` with one centered on zero, covering at
    /// least `[-range, range]` up to half a bin.
    pub fn centered(width: f64, range: f64) -> Self {
        let half = libm::round(range / width).max(0.0) as usize;
        Self { lo: -(half as f64 + 0.5) * width, width, n: 2 * half + 1 }
    }

    pub fn hi(&self) -> f64 {
        self.edge(self.n)
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.width
    }

    pub fn center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * self.width
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|b| self.center(b))
    }

    pub fn locate(&self, x: f64) -> Slot {
        let k = libm::floor((x - self.lo) / self.width);
        if !(k >= 0.0) {
            Slot::Under
        } else if k >= self.n as f64 {
            Slot::Over
        } else {
            Slot::Bin(k as usize)
        }
    }

    /// Same edges up to floating-point noise.
    pub fn same_edges(&self, other: &BinGrid) -> bool {
        self.n == other.n
            && libm::fabs(self.lo - other.lo) <= 1e-9 * self.width
            && libm::fabs(self.width - other.width) <= 1e-12 * self.width
    }
}

/// How a density was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// Sample counts of a real-valued weight (orderless baseline).
    Counts,
    Coherent,
    Incoherent,
    /// Deterministic tensor-grid quadrature.
    Quadrature,
    Analytic,
    /// Histogram of observed returns.
    Empirical,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Counts => "counts",
            Estimator::Coherent => "coherent",
            Estimator::Incoherent => "incoherent",
            Estimator::Quadrature => "quadrature",
            Estimator::Analytic => "analytic",
            Estimator::Empirical => "empirical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Estimator::Counts,
            Estimator::Coherent,
            Estimator::Incoherent,
            Estimator::Quadrature,
            Estimator::Analytic,
            Estimator::Empirical,
        ]
        .into_iter()
        .find(|e| e.as_str() == s)
    }
}

impl From<AccumulationMode> for Estimator {
    fn from(m: AccumulationMode) -> Self {
        match m {
            AccumulationMode::Coherent => Estimator::Coherent,
            AccumulationMode::Incoherent => Estimator::Incoherent,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdfMeta {
    pub fingerprint: String,
    pub estimator: Estimator,
    /// Kept samples (or observations) behind the histogram.
    pub samples: u64,
    pub underflow: u64,
    pub overflow: u64,
    pub replicates: u32,
}

impl PdfMeta {
    pub fn new(estimator: Estimator) -> Self {
        Self { fingerprint: String::new(), estimator, samples: 0, underflow: 0, overflow: 0, replicates: 1 }
    }
}

/// Normalized binned density with per-bin standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct PdfHistogram {
    pub grid: BinGrid,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub counts: Vec<u64>,
    pub meta: PdfMeta,
}

impl PdfHistogram {
    /// Normalizes nonnegative per-bin masses to unit total mass.
    pub fn from_masses(grid: BinGrid, masses: &[f64], meta: PdfMeta) -> Result<Self, EstimatorError> {
        debug_assert_eq!(masses.len(), grid.n);
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(EstimatorError::EmptyRun);
        }
        let density = masses.iter().map(|m| m / (total * grid.width)).collect();
        Ok(Self { grid, density, stderr: alloc::vec![0.0; grid.n], counts: alloc::vec![0; grid.n], meta })
    }

    /// Like [`Self::from_masses`] with masses given as logarithms.
    pub fn from_log_masses(grid: BinGrid, log_masses: &[f64], meta: PdfMeta) -> Result<Self, EstimatorError> {
        let top = log_masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY || top.is_nan() {
            return Err(EstimatorError::EmptyRun);
        }
        let masses: Vec<f64> = log_masses.iter().map(|l| libm::exp(l - top)).collect();
        Self::from_masses(grid, &masses, meta)
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.width
    }

    pub fn log10_density(&self, b: usize) -> f64 {
        libm::log10(self.density[b])
    }

    /// Cumulative mass at each of the `n + 1` edges.
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.n + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for d in &self.density {
            acc += d * self.grid.width;
            out.push(acc);
        }
        out
    }

    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (b, d) in self.density.iter().enumerate() {
            if *d > self.density[best] {
                best = b;
            }
        }
        best
    }

    /// Merges groups of `factor` adjacent bins; mass is conserved exactly.
    pub fn rebin(&self, factor: usize) -> Result<Self, EstimatorError> {
        if factor == 0 || self.grid.n % factor != 0 {
            return Err(EstimatorError::RebinFactor { factor, bins: self.grid.n });
        }
        let grid = BinGrid { lo: self.grid.lo, width: self.grid.width * factor as f64, n: self.grid.n / factor };
        let k = factor as f64;
        let density = self.density.chunks(factor).map(|c| c.iter().sum::<f64>() / k).collect();
        let stderr =
            self.stderr.chunks(factor).map(|c| libm::sqrt(c.iter().map(|s| s * s).sum::<f64>()) / k).collect();
        let counts = self.counts.chunks(factor).map(|c| c.iter().sum()).collect();
        Ok(Self { grid, density, stderr, counts, meta: self.meta.clone() })
    }
}

/// Turns raw Monte Carlo accumulators into a normalized density.
///
/// Baseline runs carry real weights and are normalized from counts. For the
/// full model, coherent mode squares each bin's total complex amplitude;
/// incoherent mode adds the squared per-configuration bin amplitudes.
pub fn finalize_pdf(raw: &RawAccumulators, mode: AccumulationMode) -> Result<PdfHistogram, EstimatorError> {
    let grid = raw.grid;
    let mut meta = PdfMeta::new(if raw.is_amplitude() { mode.into() } else { Estimator::Counts });
    meta.samples = raw.samples;
    meta.underflow = raw.underflow;
    meta.overflow = raw.overflow;
    let mut pdf = if raw.is_amplitude() {
        let logs: Vec<f64> = match mode {
            AccumulationMode::Coherent => raw.coherent.iter().map(|a| a.log_norm_sqr()).collect(),
            AccumulationMode::Incoherent => raw.incoherent.iter().map(|a| a.value().log_mag).collect(),
        };
        PdfHistogram::from_log_masses(grid, &logs, meta)?
    } else {
        let masses: Vec<f64> = raw.counts.iter().map(|&c| c as f64).collect();
        PdfHistogram::from_masses(grid, &masses, meta)?
    };
    pdf.counts.clone_from(&raw.counts);
    Ok(pdf)
}

/// Central moments of a normalized density, by midpoint integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentValues {
    pub mean: f64,
    pub variance: f64,
    pub kurtosis: f64,
    pub moment6: f64,
    pub moment8: f64,
}

pub fn moments(pdf: &PdfHistogram) -> Result<MomentValues, EstimatorError> {
    let w = pdf.grid.width;
    let mass = pdf.total_mass();
    if !(mass > 0.0) {
        return Err(EstimatorError::EmptyRun);
    }
    let mean = pdf.grid.centers().zip(&pdf.density).map(|(x, d)| x * d * w).sum::<f64>() / mass;
    let mut m = [0.0f64; 9];
    for (x, d) in pdf.grid.centers().zip(&pdf.density) {
        let dx = x - mean;
        let mut p = d * w / mass;
        for slot in m.iter_mut() {
            *slot += p;
            p *= dx;
        }
    }
    let variance = m[2];
    if !(variance > 0.0) {
        return Err(EstimatorError::Degenerate);
    }
    Ok(MomentValues { mean, variance, kurtosis: m[4] / (variance * variance), moment6: m[6], moment8: m[8] })
}

/// A value with its replicate standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MomentReport {
    pub mean: Estimate,
    pub variance: Estimate,
    pub kurtosis: Estimate,
    pub moment6: Estimate,
    pub moment8: Estimate,
    pub replicates: u32,
}

impl MomentReport {
    /// Report for a single density (zero spread).
    pub fn single(v: &MomentValues) -> Self {
        let e = |value| Estimate { value, std: 0.0 };
        Self {
            mean: e(v.mean),
            variance: e(v.variance),
            kurtosis: e(v.kurtosis),
            moment6: e(v.moment6),
            moment8: e(v.moment8),
            replicates: 1,
        }
    }

    pub fn entries(&self) -> [(&'static str, Estimate); 5] {
        [
            ("mean", self.mean),
            ("variance", self.variance),
            ("kurtosis", self.kurtosis),
            ("moment6", self.moment6),
            ("moment8", self.moment8),
        ]
    }
}

/// Mean and sample standard deviation (`n - 1`); zero spread for one value.
pub fn mean_std(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || values.iter().all(|v| *v == values[0]) {
        return Estimate { value: mean, std: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Estimate { value: mean, std: libm::sqrt(var) }
}

/// Combines independent replicate densities: per-bin mean with the standard
/// error of that mean, and per-moment mean with the replicate standard
/// deviation.
pub fn aggregate_replicates(pdfs: &[PdfHistogram]) -> Result<(PdfHistogram, MomentReport), EstimatorError> {
    let first = pdfs.first().ok_or(EstimatorError::NoReplicates)?;
    if pdfs.iter().any(|p| !p.grid.same_edges(&first.grid)) {
        return Err(EstimatorError::BinMismatch);
    }
    let r = pdfs.len();
    let grid = first.grid;
    let mut density = Vec::with_capacity(grid.n);
    let mut stderr = Vec::with_capacity(grid.n);
    let mut column = Vec::with_capacity(r);
    for b in 0..grid.n {
        column.clear();
        column.extend(pdfs.iter().map(|p| p.density[b]));
        let e = mean_std(&column);
        density.push(e.value);
        stderr.push(e.std / libm::sqrt(r as f64));
    }
    let counts = (0..grid.n).map(|b| pdfs.iter().map(|p| p.counts[b]).sum()).collect();
    let mut meta = first.meta.clone();
    meta.samples = pdfs.iter().map(|p| p.meta.samples).sum();
    meta.underflow = pdfs.iter().map(|p| p.meta.underflow).sum();
    meta.overflow = pdfs.iter().map(|p| p.meta.overflow).sum();
    meta.replicates = r as u32;

    let each: Vec<MomentValues> = pdfs.iter().map(moments).collect::<Result<_, _>>()?;
    let pick = |f: fn(&MomentValues) -> f64| mean_std(&each.iter().map(f).collect::<Vec<_>>());
    let report = MomentReport {
        mean: pick(|m| m.mean),
        variance: pick(|m| m.variance),
        kurtosis: pick(|m| m.kurtosis),
        moment6: pick(|m| m.moment6),
        moment8: pick(|m| m.moment8),
        replicates: r as u32,
    };
    Ok((PdfHistogram { grid, density, stderr, counts, meta }, report))
}

/// Standard normal upper tail `P(Z > z)`.
fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// Probability that `N(mean, sd^2)` lands in `[lo, hi)`, accurate in both tails.
pub fn normal_interval_mass(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_sf(-b) - normal_sf(-a)
    } else {
        1.0 - normal_sf(-a) - normal_sf(b)
    }
}

/// Normal cumulative distribution function.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    normal_sf(-(x - mean) / sd)
}

/// Analytic GBM density of `log S(T)`: normal with variance `sigma^2 T`,
/// averaged over each bin (exact bin mass, renormalized to the grid).
pub fn gbm_reference_pdf(sigma: f64, horizon: f64, mean: f64, grid: BinGrid) -> PdfHistogram {
    let sd = sigma * libm::sqrt(horizon);
    let masses: Vec<f64> = (0..grid.n).map(|b| normal_interval_mass(grid.edge(b), grid.edge(b + 1), mean, sd)).collect();
    let mut meta = PdfMeta::new(Estimator::Analytic);
    meta.samples = 0;
    PdfHistogram::from_masses(grid, &masses, meta).expect("grid must overlap the normal's support")
}

/// Agreement between two densities on the same bins.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `log10 a - log10 b` per bin, `None` where either density is zero.
    pub log10_diff: Vec<Option<f64>>,
    /// Decades of log-density spanned by the contiguous agreeing region
    /// around the peak.
    pub overlap_decades: f64,
    /// Full dynamic range of the bins where both densities are positive.
    pub dynamic_range: f64,
    /// Kolmogorov-Smirnov distance at the bin edges.
    pub ks: f64,
    /// Total variation distance.
    pub tv: f64,
    pub band: f64,
}

pub const DEFAULT_OVERLAP_BAND: f64 = 0.15;

/// Compares `a` and `b`. The overlap span follows the convention of reading
/// agreement off a log-scale plot: starting from `a`'s peak, extend left and
/// right while the curves agree within `band` decades, and report how many
/// decades of log-density that region covers.
pub fn compare_pdfs(a: &PdfHistogram, b: &PdfHistogram, band: f64) -> Result<ComparisonReport, EstimatorError> {
    if !a.grid.same_edges(&b.grid) {
        return Err(EstimatorError::BinMismatch);
    }
    let n = a.grid.n;
    let log10_diff: Vec<Option<f64>> = (0..n)
        .map(|k| {
            (a.density[k] > 0.0 && b.density[k] > 0.0).then(|| a.log10_density(k) - b.log10_density(k))
        })
        .collect();
    // bins empty in both curves agree but carry no level
    let both_empty = |k: usize| a.density[k] == 0.0 && b.density[k] == 0.0;
    let agrees = |k: usize| both_empty(k) || log10_diff[k].is_some_and(|d| libm::fabs(d) <= band);
    let level = |k: usize| 0.5 * (a.log10_density(k) + b.log10_density(k));

    let overlap_decades = {
        let peak = a.peak_bin();
        if log10_diff[peak].is_some_and(|d| libm::fabs(d) <= band) {
            let (mut lo, mut hi) = (peak, peak);
            while lo > 0 && agrees(lo - 1) {
                lo -= 1;
            }
            while hi + 1 < n && agrees(hi + 1) {
                hi += 1;
            }
            let (mut top, mut bottom) = (f64::NEG_INFINITY, f64::INFINITY);
            for k in (lo..=hi).filter(|&k| !both_empty(k)) {
                top = top.max(level(k));
                bottom = bottom.min(level(k));
            }
            top - bottom
        } else {
            0.0
        }
    };
    let (mut top, mut bottom) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in (0..n).filter(|&k| log10_diff[k].is_some()) {
        top = top.max(level(k));
        bottom = bottom.min(level(k));
    }
    let dynamic_range = if top >= bottom { top - bottom } else { 0.0 };

    let (ca, cb) = (a.cdf(), b.cdf());
    let ks = ca.iter().zip(&cb).map(|(x, y)| libm::fabs(x - y)).fold(0.0, f64::max);
    let tv = 0.5 * a.density.iter().zip(&b.density).map(|(x, y)| libm::fabs(x - y)).sum::<f64>() * a.grid.width;
    Ok(ComparisonReport { log10_diff, overlap_decades, dynamic_range, ks, tv, band })
}
