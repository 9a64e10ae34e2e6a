//! The subcommands. Each writes its files plus a manifest into the output
//! directory and returns what it wrote.

use std::path::{Path, PathBuf};

use gauge_cspi_core::engine::replicate_report;
use gauge_cspi_core::estimator::{compare_pdfs, gbm_reference_pdf, moments, MomentReport};
use gauge_cspi_core::market::{empirical_histogram, log_returns_with_gap, DEFAULT_GAP_FACTOR};
use gauge_cspi_core::oracle::{with_discretization, MIN_GRID_POINTS};
use gauge_cspi_core::{ModelConfig, PdfHistogram, RunOptions, ValidatedConfig};

use crate::config_file::load_config;
use crate::manifest::RunManifest;
use crate::price_sheet::{load_price_sheet, SheetFormat};
use crate::runner::{budget_from_env, Runner};
use crate::tsv::{self, ConvergenceRow};
use crate::CliError;

pub const BASELINE_PDF: &str = "baseline_pdf.tsv";
pub const ANALYTIC_PDF: &str = "analytic_pdf.tsv";
pub const COMPARISON: &str = "comparison.tsv";
pub const SIMULATE_PDF: &str = "simulate_pdf.tsv";
pub const MOMENTS: &str = "moments.tsv";
pub const DIAGNOSTICS: &str = "diagnostics.tsv";
pub const ORACLE_PDF: &str = "oracle_pdf.tsv";
pub const CONVERGENCE: &str = "oracle_convergence.tsv";
pub const HISTOGRAM: &str = "histogram.tsv";
pub const REFERENCE_PDF: &str = "reference_pdf.tsv";

/// Settings shared by every subcommand.
#[derive(Clone, Debug)]
pub struct Context {
    pub out: PathBuf,
    pub workers: usize,
    /// Overrides the config's seed.
    pub seed: Option<u64>,
    pub budget: u64,
}

impl Context {
    /// Reads the sample-count cap from the environment.
    pub fn new(out: impl Into<PathBuf>, workers: usize, seed: Option<u64>) -> Result<Self, CliError> {
        Ok(Self { out: out.into(), workers, seed, budget: budget_from_env()? })
    }

    fn options(&self) -> RunOptions {
        RunOptions { budget_cap: self.budget, ..RunOptions::default() }
    }
}

/// Files written by a command and a few headline numbers.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub summary: Vec<(String, String)>,
}

impl Outcome {
    pub fn file(&self, name: &str) -> Option<&Path> {
        self.files.iter().map(PathBuf::as_path).find(|p| p.file_name().is_some_and(|f| f == name))
    }
}

struct Session {
    manifest: RunManifest,
    runner: Runner,
    files: Vec<PathBuf>,
    summary: Vec<(String, String)>,
}

impl Session {
    fn new(command: &str, ctx: &Context) -> Result<Self, CliError> {
        let runner = Runner::new(ctx.workers)?;
        Ok(Self { manifest: RunManifest::new(command, &ctx.out, ctx.workers)?, runner, files: Vec::new(), summary: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.manifest.write(name, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn report(&mut self, key: &str, value: impl std::fmt::Display) {
        let v = value.to_string();
        self.manifest.note(key, &v);
        self.summary.push((key.into(), v));
    }

    fn finish(self) -> Result<Outcome, CliError> {
        let manifest = self.manifest.finish()?;
        Ok(Outcome { files: self.files, manifest, summary: self.summary })
    }
}

fn load(path: &Path, ctx: &Context, session: &mut Session) -> Result<ModelConfig, CliError> {
    let mut c = load_config(path)?;
    session.manifest.add_input(path)?;
    if let Some(seed) = ctx.seed {
        c.seed = seed;
    }
    Ok(c)
}

fn stamp(session: &mut Session, config: &ValidatedConfig) {
    session.manifest.fingerprint = config.fingerprint();
    session.manifest.seed = Some(config.config().seed);
    session.report("burn_in", config.burn_in());
    session.report("thinning", config.thinning());
}

fn check_pdf(pdf: &PdfHistogram) -> Result<(), CliError> {
    let mass = pdf.total_mass();
    if (mass - 1.0).abs() > 1e-9 || pdf.density.iter().any(|d| !(*d >= 0.0)) {
        return Err(CliError::config(format!("internal check failed: density mass {mass}")));
    }
    Ok(())
}

/// Orderless Monte Carlo against the analytic normal in `log S(T)`.
pub fn cmd_baseline(config_path: &Path, ctx: &Context) -> Result<Outcome, CliError> {
    let mut s = Session::new("baseline", ctx)?;
    let c = load(config_path, ctx, &mut s)?;
    if !c.perturbation.is_empty() {
        return Err(CliError::Refused("baseline requires empty perturbation".into()));
    }
    let config = c.validate()?;
    stamp(&mut s, &config);
    let options = ctx.options();
    let runner = &s.runner;
    let mut kept = 0;
    let mut accepted = (0, 0);
    let (pdf, _) = replicate_report(&config, &options, |r| {
        let raw = runner.baseline(r, &options)?;
        kept += raw.samples;
        accepted = (accepted.0 + raw.accepted, accepted.1 + raw.proposed);
        Ok(raw)
    })?;
    check_pdf(&pdf)?;
    let m = config.config();
    let mean = (m.r1 - m.r2) * m.horizon;
    let mut reference = gbm_reference_pdf(m.sigma, m.horizon, mean, pdf.grid);
    reference.meta.fingerprint = config.fingerprint();
    let report = compare_pdfs(&pdf, &reference, gauge_cspi_core::estimator::DEFAULT_OVERLAP_BAND)?;
    s.write(BASELINE_PDF, &tsv::render_pdf(&pdf))?;
    s.write(ANALYTIC_PDF, &tsv::render_pdf(&reference))?;
    s.write(COMPARISON, &tsv::render_comparison(&report, &pdf, &reference))?;
    s.report("kept_samples", kept);
    s.report("acceptance", accepted.0 as f64 / accepted.1.max(1) as f64);
    s.report("overlap_decades", report.overlap_decades);
    s.report("ks", report.ks);
    s.finish()
}

/// Full model with replicate error bars.
pub fn cmd_simulate(config_path: &Path, ctx: &Context) -> Result<Outcome, CliError> {
    let mut s = Session::new("simulate", ctx)?;
    let config = load(config_path, ctx, &mut s)?.validate()?;
    stamp(&mut s, &config);
    let options = RunOptions { record_diagnostics: true, ..ctx.options() };
    let runner = &s.runner;
    let mut diagnostics = Vec::new();
    let (mut kept, mut overflow, mut accepted) = (0, 0, (0, 0));
    let mut replicate = 0u32;
    let (pdf, report) = replicate_report(&config, &options, |r| {
        let raw = runner.simulate(r, &options)?;
        diagnostics.extend(raw.diagnostics.iter().map(|d| (replicate, *d)));
        replicate += 1;
        kept += raw.samples;
        overflow += raw.underflow + raw.overflow;
        accepted = (accepted.0 + raw.accepted, accepted.1 + raw.proposed);
        Ok(raw)
    })?;
    check_pdf(&pdf)?;
    s.write(SIMULATE_PDF, &tsv::render_pdf(&pdf))?;
    s.write(MOMENTS, &tsv::render_moments(&report, &config.fingerprint()))?;
    s.write(DIAGNOSTICS, &tsv::render_diagnostics(&diagnostics))?;
    s.report("accumulation_mode", config.sampler().accumulation_mode.as_str());
    s.report("kept_samples", kept);
    s.report("out_of_range_samples", overflow);
    s.report("acceptance", accepted.0 as f64 / accepted.1.max(1) as f64);
    s.report("variance", fmt_estimate(&report, "variance"));
    s.report("kurtosis", fmt_estimate(&report, "kurtosis"));
    s.finish()
}

fn fmt_estimate(report: &MomentReport, key: &str) -> String {
    let (_, e) = report.entries().into_iter().find(|(k, _)| *k == key).expect("known moment");
    format!("{} +- {}", e.value, e.std)
}

/// Brute-force quadrature with a convergence table over grid doublings.
pub fn cmd_oracle(config_path: &Path, grid_points: usize, ctx: &Context) -> Result<Outcome, CliError> {
    let mut s = Session::new("oracle", ctx)?;
    let config = load(config_path, ctx, &mut s)?.validate()?;
    if grid_points < MIN_GRID_POINTS {
        return Err(CliError::config(format!("grid_points = {grid_points}, minimum {MIN_GRID_POINTS}")));
    }
    gauge_cspi_core::oracle::check_dimensions(&config, grid_points)?;
    stamp(&mut s, &config);
    let mut levels = vec![grid_points];
    while levels[levels.len() - 1] / 2 >= MIN_GRID_POINTS {
        levels.push(levels[levels.len() - 1] / 2);
    }
    levels.reverse();
    let mut rows = Vec::new();
    let mut previous: Option<PdfHistogram> = None;
    for &g in &levels {
        let pdf = s.runner.oracle_pdf(&config, g)?;
        let change = previous.as_ref().map(|p| {
            let max = pdf.density.iter().zip(&p.density).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let tv = 0.5 * pdf.grid.width * pdf.density.iter().zip(&p.density).map(|(a, b)| (a - b).abs()).sum::<f64>();
            (max, tv)
        });
        rows.push(ConvergenceRow {
            grid_points: g,
            max_change: change.map(|c| c.0),
            tv_change: change.map(|c| c.1),
            kurtosis: moments(&pdf).ok().map(|m| m.kurtosis),
        });
        previous = Some(pdf);
    }
    let fine = previous.expect("at least one level");
    let pdf = if levels.len() >= 2 {
        let coarse = s.runner.oracle_pdf(&config, levels[levels.len() - 2])?;
        with_discretization(fine, &coarse)
    } else {
        s.runner.brute_force_pdf(&config, grid_points)?
    };
    check_pdf(&pdf)?;
    s.write(ORACLE_PDF, &tsv::render_pdf(&pdf))?;
    s.write(CONVERGENCE, &tsv::render_convergence(&rows, &config.fingerprint()))?;
    s.report("grid_points", grid_points);
    s.report("max_discretization", pdf.stderr.iter().copied().fold(0.0, f64::max));
    s.finish()
}

/// Histogram settings for [`cmd_ingest`].
#[derive(Clone, Debug)]
pub struct IngestOptions {
    /// Sampling interval in seconds.
    pub tau: f64,
    pub n_bins: usize,
    /// Histogram half-width in log-return.
    pub range: f64,
    /// Gap threshold in units of `tau`.
    pub gap_factor: f64,
    pub format: SheetFormat,
    /// Volatility per square-root second; when given, the matching normal
    /// PDF is written next to the histogram.
    pub reference_sigma: Option<f64>,
}

impl IngestOptions {
    pub fn new(tau: f64, n_bins: usize, range: f64) -> Self {
        Self { tau, n_bins, range, gap_factor: DEFAULT_GAP_FACTOR, format: SheetFormat::default(), reference_sigma: None }
    }
}

/// Price sheet to normalized log-return histogram.
pub fn cmd_ingest(data: &Path, opts: &IngestOptions, ctx: &Context) -> Result<Outcome, CliError> {
    if !(opts.tau > 0.0) || !opts.tau.is_finite() {
        return Err(CliError::config(format!("tau must be positive, got {}", opts.tau)));
    }
    if !(opts.range > 0.0) || !opts.range.is_finite() {
        return Err(CliError::config(format!("range must be positive, got {}", opts.range)));
    }
    if !(opts.gap_factor >= 1.0) {
        return Err(CliError::config(format!("gap factor must be at least 1, got {}", opts.gap_factor)));
    }
    if let Some(sigma) = opts.reference_sigma.filter(|s| !(*s > 0.0)) {
        return Err(CliError::config(format!("reference sigma must be positive, got {sigma}")));
    }
    let mut s = Session::new("ingest", ctx)?;
    let series = load_price_sheet(data, &opts.format)?;
    s.manifest.add_input(data)?;
    let returns = log_returns_with_gap(&series, opts.tau, opts.gap_factor)?;
    let hist = empirical_histogram(&returns, opts.n_bins, -opts.range, opts.range)?;
    let mut pdf = hist.to_pdf();
    pdf.meta.fingerprint = crate::manifest::sha256_hex(format!("{}|{:?}", s.manifest.inputs[0].sha256, opts).as_bytes())
        [..16]
        .to_string();
    s.write(HISTOGRAM, &tsv::render_pdf(&pdf))?;
    if let Some(sigma) = opts.reference_sigma {
        let mut reference = gbm_reference_pdf(sigma, opts.tau, 0.0, pdf.grid);
        reference.meta.fingerprint = pdf.meta.fingerprint.clone();
        s.write(REFERENCE_PDF, &tsv::render_pdf(&reference))?;
    }
    s.manifest.fingerprint = pdf.meta.fingerprint.clone();
    s.report("observations", series.len());
    s.report("returns", returns.len());
    s.report("in_range", hist.n_obs);
    s.report("out_of_range", hist.underflow + hist.overflow);
    s.finish()
}

/// Overlap, KS and TV between two PDF files on the same bins.
pub fn cmd_compare(a: &Path, b: &Path, band: f64, ctx: &Context) -> Result<Outcome, CliError> {
    if !(band > 0.0) {
        return Err(CliError::config(format!("band must be positive, got {band}")));
    }
    let mut s = Session::new("compare", ctx)?;
    let (pa, pb) = (tsv::read_pdf(a)?, tsv::read_pdf(b)?);
    s.manifest.add_input(a)?;
    s.manifest.add_input(b)?;
    let report = compare_pdfs(&pa, &pb, band)?;
    s.write(COMPARISON, &tsv::render_comparison(&report, &pa, &pb))?;
    s.report("overlap_decades", report.overlap_decades);
    s.report("dynamic_range_decades", report.dynamic_range);
    s.report("ks", report.ks);
    s.report("tv", report.tv);
    s.finish()
}

/// Moment table of a PDF file.
pub fn cmd_moments(pdf_path: &Path, ctx: &Context) -> Result<Outcome, CliError> {
    let mut s = Session::new("moments", ctx)?;
    let pdf = tsv::read_pdf(pdf_path)?;
    s.manifest.add_input(pdf_path)?;
    s.manifest.fingerprint = pdf.meta.fingerprint.clone();
    let report = MomentReport::single(&moments(&pdf)?);
    s.write(MOMENTS, &tsv::render_moments(&report, &pdf.meta.fingerprint))?;
    s.report("variance", report.variance.value);
    s.report("kurtosis", report.kurtosis.value);
    s.finish()
}
