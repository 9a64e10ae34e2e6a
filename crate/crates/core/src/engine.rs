//! Metropolis-Hastings over price paths, nested inside uniform draws of the
//! hydrodynamical configuration.
//!
//! For every configuration the chain samples `exp(generalized_log_weight)`;
//! the remaining factors of the integrand (propagator, boundary projection,
//! measure) are carried as a complex residual weight on each kept sample.

use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;
use core::ops::Range;

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::action::{double_arbitrage_revenue, perturbation_drift, HydroConfig, PricePath};
use crate::amplitude::{full_log_integrand, ResidualWeight};
use crate::estimator::{aggregate_replicates, finalize_pdf, BinGrid, EstimatorError, MomentReport, PdfHistogram, Slot};
use crate::logc::{ComplexAccumulator, LogComplex};
use crate::params::ValidatedConfig;
use crate::rng;

/// Proposals pooled before each burn-in step-size update (at least one sweep).
pub const ADAPT_WINDOW: u64 = 50;

/// Default ceiling on `hydro_samples * chain_length`.
pub const DEFAULT_BUDGET: u64 = 400_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum RunError {
    Budget { requested: u64, cap: u64 },
    Estimator(EstimatorError),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Budget { requested, cap } => {
                write!(f, "run needs {requested} kept samples, above the cap of {cap}")
            }
            RunError::Estimator(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for RunError {}

impl From<EstimatorError> for RunError {
    fn from(e: EstimatorError) -> Self {
        RunError::Estimator(e)
    }
}

/// How outer configurations are chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HydroMode {
    /// `rho` uniform on `[0, 1)`, phases uniform on `[0, 2 pi)`.
    Uniform,
    /// Every configuration is `rho_i = value` with zero phases (diagnostics).
    Constant(f64),
}

/// What a kept sample contributes to its bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    /// The complex residual weight of the integrand.
    Residual,
    /// A plain count; reduces the run to a histogram of the sampled paths.
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub budget_cap: u64,
    pub record_diagnostics: bool,
    pub hydro_mode: HydroMode,
    pub weighting: Weighting,
    /// Replicates reuse the master seed instead of deriving new ones.
    pub identical_replicates: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            budget_cap: DEFAULT_BUDGET,
            record_diagnostics: false,
            hydro_mode: HydroMode::Uniform,
            weighting: Weighting::Residual,
            identical_replicates: false,
        }
    }
}

/// Log-density of a path as a sum over links `x_i -> x_{i+1}`.
pub trait PathTarget {
    fn steps(&self) -> usize;
    /// Contribution of link `i` with increment `d = x_{i+1} - x_i`.
    fn link(&self, i: usize, d: f64) -> f64;
    /// Increment maximizing link `i`.
    fn mode_increment(&self, i: usize) -> f64;
    /// Standard deviation of the Gaussian approximation to link `i`.
    fn link_scale(&self, i: usize) -> f64;

    fn log_weight(&self, path: &[f64]) -> f64 {
        path.windows(2).enumerate().map(|(i, w)| self.link(i, w[1] - w[0])).sum()
    }

    /// Path following every link's mode from `x_0 = 0`.
    fn mode_path(&self) -> PricePath {
        let d: Vec<f64> = (0..self.steps()).map(|i| self.mode_increment(i)).collect();
        PricePath::from_increments(&d)
    }

    /// Path with independent Gaussian links around their modes; an exact
    /// draw when every link is Gaussian.
    fn gaussian_path<R: RngCore + ?Sized>(&self, rng: &mut R) -> PricePath
    where
        Self: Sized,
    {
        let d: Vec<f64> = (0..self.steps())
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                self.mode_increment(i) + self.link_scale(i) * z
            })
            .collect();
        PricePath::from_increments(&d)
    }
}

/// The orderless weight `-(1/(2 delta sigma^2)) sum R_i`.
#[derive(Clone, Debug)]
pub struct OrderlessTarget<'a> {
    config: &'a ValidatedConfig,
    scale: f64,
}

impl<'a> OrderlessTarget<'a> {
    pub fn new(config: &'a ValidatedConfig) -> Self {
        Self { config, scale: 0.5 / (config.delta() * config.sigma() * config.sigma()) }
    }
}

impl PathTarget for OrderlessTarget<'_> {
    fn steps(&self) -> usize {
        self.config.steps()
    }

    fn link(&self, _i: usize, d: f64) -> f64 {
        -self.scale * double_arbitrage_revenue(0.0, d, self.config)
    }

    fn mode_increment(&self, _i: usize) -> f64 {
        let c = self.config.config();
        (c.r1 - c.r2) * self.config.delta()
    }

    fn link_scale(&self, _i: usize) -> f64 {
        self.config.sigma() * libm::sqrt(self.config.delta())
    }
}

/// The Gaussian weight with order-flow drift for one hydrodynamical
/// configuration.
#[derive(Clone, Debug)]
pub struct GeneralizedTarget {
    scale: f64,
    shift: Vec<f64>,
}

impl GeneralizedTarget {
    pub fn new(hydro: &HydroConfig, config: &ValidatedConfig) -> Self {
        let mu_delta = config.config().mu * config.delta();
        let shift = (0..hydro.steps()).map(|i| mu_delta + perturbation_drift(hydro.delta_rho(i), config.terms())).collect();
        Self { scale: 0.5 / (config.delta() * config.sigma() * config.sigma()), shift }
    }
}

impl PathTarget for GeneralizedTarget {
    fn steps(&self) -> usize {
        self.shift.len()
    }

    fn link(&self, i: usize, d: f64) -> f64 {
        let r = d - self.shift[i];
        -self.scale * r * r
    }

    fn mode_increment(&self, i: usize) -> f64 {
        self.shift[i]
    }

    fn link_scale(&self, _i: usize) -> f64 {
        libm::sqrt(0.5 / self.scale)
    }
}

/// Draws a configuration: all `rho`, then all `phi1`, then all `phi2`.
pub fn sample_hydro<R: RngCore + ?Sized>(rng: &mut R, config: &ValidatedConfig) -> HydroConfig {
    let n = config.steps() + 1;
    let rho = (0..n).map(|_| rng::uniform01(rng)).collect();
    let mut phase = || {
        let p = TAU * rng::uniform01(rng);
        if p < TAU {
            p
        } else {
            0.0
        }
    };
    let phi1 = (0..n).map(|_| phase()).collect();
    let phi2 = (0..n).map(|_| phase()).collect();
    HydroConfig { rho, phi1, phi2 }
}

/// One Metropolis-Hastings chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub current_path: PricePath,
    pub current_log_weight: f64,
    pub step_size: f64,
    /// Counts since the last reset (burn-in end).
    pub accept_count: u64,
    pub proposal_count: u64,
    window_accepts: u64,
    window_proposals: u64,
    frozen: bool,
}

impl ChainState {
    pub fn new<T: PathTarget + ?Sized>(path: PricePath, target: &T, step_size: f64) -> Self {
        let current_log_weight = target.log_weight(&path);
        Self {
            current_path: path,
            current_log_weight,
            step_size,
            accept_count: 0,
            proposal_count: 0,
            window_accepts: 0,
            window_proposals: 0,
            frozen: false,
        }
    }

    pub fn acceptance(&self) -> f64 {
        if self.proposal_count == 0 {
            return 0.0;
        }
        self.accept_count as f64 / self.proposal_count as f64
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Ends adaptation and clears the acceptance counters.
    pub fn freeze(&mut self) {
        self.frozen = true;
        self.accept_count = 0;
        self.proposal_count = 0;
        self.window_accepts = 0;
        self.window_proposals = 0;
    }

    fn check_consistent<T: PathTarget + ?Sized>(&self, target: &T) {
        let fresh = target.log_weight(&self.current_path);
        debug_assert!(
            libm::fabs(fresh - self.current_log_weight) <= 1e-10 * (1.0 + libm::fabs(fresh)),
            "cached log-weight {} drifted from {}",
            self.current_log_weight,
            fresh
        );
    }
}

/// One ascending sweep of single-site random-walk updates over `x_1..x_N`.
pub fn mh_sweep<T: PathTarget + ?Sized, R: RngCore + ?Sized>(state: &mut ChainState, target: &T, rng: &mut R) {
    let n = state.current_path.steps();
    for i in 1..=n {
        let x = state.current_path[i];
        let proposal = x + state.step_size * rng::uniform_symmetric(rng);
        let prev = state.current_path[i - 1];
        let mut delta = target.link(i - 1, proposal - prev) - target.link(i - 1, x - prev);
        if i < n {
            let next = state.current_path[i + 1];
            delta += target.link(i, next - proposal) - target.link(i, next - x);
        }
        let u = rng::uniform01(rng);
        state.proposal_count += 1;
        state.window_proposals += 1;
        if delta >= 0.0 || libm::log(u) < delta {
            state.current_path.set(i, proposal);
            state.current_log_weight += delta;
            state.accept_count += 1;
            state.window_accepts += 1;
        }
    }
}

/// Burn-in step-size update `step *= exp(observed - target)` over the
/// proposals since the previous update. No-op once frozen.
pub fn adapt_step(state: &mut ChainState, target_acceptance: f64) {
    if state.frozen || state.window_proposals == 0 {
        return;
    }
    let observed = state.window_accepts as f64 / state.window_proposals as f64;
    state.step_size *= libm::exp(observed - target_acceptance);
    state.window_accepts = 0;
    state.window_proposals = 0;
}

/// Starts from a Gaussian draw, burns in with adaptation, freezes the step,
/// then calls `visit` on every kept sample.
pub fn run_chain<T: PathTarget, R: RngCore + ?Sized>(
    target: &T,
    config: &ValidatedConfig,
    rng: &mut R,
    mut visit: impl FnMut(&PricePath),
) -> ChainState {
    let mut state = ChainState::new(target.gaussian_path(rng), target, config.initial_step());
    let window = ADAPT_WINDOW.max(config.steps() as u64);
    for _ in 0..config.burn_in() {
        mh_sweep(&mut state, target, rng);
        if state.window_proposals >= window {
            adapt_step(&mut state, config.sampler().target_acceptance);
        }
    }
    state.freeze();
    let step = state.step_size;
    for _ in 0..config.sampler().chain_length {
        for _ in 0..config.thinning() {
            mh_sweep(&mut state, target, rng);
        }
        if cfg!(debug_assertions) {
            state.check_consistent(target);
        }
        debug_assert_eq!(state.current_path[0], 0.0);
        visit(&state.current_path);
    }
    assert_eq!(state.step_size, step);
    state
}

/// Per-configuration diagnostics line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HydroDiagnostic {
    pub index: u64,
    pub step_size: f64,
    pub acceptance: f64,
}

/// Mergeable per-bin sums from part of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RawAccumulators {
    pub grid: BinGrid,
    amplitude: bool,
    pub counts: Vec<u64>,
    /// Sum of complex weights over all samples.
    pub coherent: Vec<ComplexAccumulator>,
    /// Sum over configurations of `|per-configuration bin sum|^2`.
    pub incoherent: Vec<ComplexAccumulator>,
    pub samples: u64,
    pub underflow: u64,
    pub overflow: u64,
    pub chains: u64,
    pub accepted: u64,
    pub proposed: u64,
    pub diagnostics: Vec<HydroDiagnostic>,
}

impl RawAccumulators {
    pub fn new(grid: BinGrid, amplitude: bool) -> Self {
        Self {
            grid,
            amplitude,
            counts: alloc::vec![0; grid.n],
            coherent: alloc::vec![ComplexAccumulator::new(); grid.n],
            incoherent: alloc::vec![ComplexAccumulator::new(); grid.n],
            samples: 0,
            underflow: 0,
            overflow: 0,
            chains: 0,
            accepted: 0,
            proposed: 0,
            diagnostics: Vec::new(),
        }
    }

    /// Whether bins carry complex weights (otherwise only counts).
    pub fn is_amplitude(&self) -> bool {
        self.amplitude
    }

    /// Post-burn-in acceptance pooled over chains.
    pub fn mean_acceptance(&self) -> f64 {
        if self.proposed == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposed as f64
    }

    /// Commutative, associative merge.
    pub fn merge(&mut self, other: &RawAccumulators) {
        assert!(self.grid.same_edges(&other.grid) && self.amplitude == other.amplitude);
        for b in 0..self.grid.n {
            self.counts[b] += other.counts[b];
            self.coherent[b].merge(&other.coherent[b]);
            self.incoherent[b].merge(&other.incoherent[b]);
        }
        self.samples += other.samples;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.chains += other.chains;
        self.accepted += other.accepted;
        self.proposed += other.proposed;
        self.diagnostics.extend_from_slice(&other.diagnostics);
        self.diagnostics.sort_by_key(|d| d.index);
    }

    fn record_chain(&mut self, index: u64, state: &ChainState, diagnostics: bool) {
        self.chains += 1;
        self.accepted += state.accept_count;
        self.proposed += state.proposal_count;
        if diagnostics {
            self.diagnostics.push(HydroDiagnostic { index, step_size: state.step_size, acceptance: state.acceptance() });
        }
    }

    fn bin(&mut self, x: f64) -> Option<usize> {
        match self.grid.locate(x) {
            Slot::Under => {
                self.underflow += 1;
                None
            }
            Slot::Over => {
                self.overflow += 1;
                None
            }
            Slot::Bin(b) => {
                self.samples += 1;
                self.counts[b] += 1;
                Some(b)
            }
        }
    }
}

/// Histogram grid implied by a config.
pub fn config_grid(config: &ValidatedConfig) -> BinGrid {
    BinGrid::centered(config.bin_width(), config.bin_range())
}

/// Fails when `hydro_samples * chain_length` exceeds the cap.
pub fn check_budget(config: &ValidatedConfig, options: &RunOptions) -> Result<(), RunError> {
    let s = config.sampler();
    let requested = s.hydro_samples.saturating_mul(s.chain_length);
    if requested > options.budget_cap {
        return Err(RunError::Budget { requested, cap: options.budget_cap });
    }
    Ok(())
}

/// A kept sample with the part of the integrand not covered by the sampler.
#[derive(Clone, Debug)]
pub struct WeightedSample<'a> {
    pub hydro: &'a HydroConfig,
    pub path: &'a PricePath,
    pub residual_log_weight: LogComplex,
}

fn check_split(sample: &WeightedSample<'_>, target_log: f64, config: &ValidatedConfig) {
    let full = full_log_integrand(sample.hydro, sample.path, config);
    let split = LogComplex::from_real(target_log) * sample.residual_log_weight;
    if full.is_zero() || split.is_zero() {
        debug_assert_eq!(full.is_zero(), split.is_zero());
        return;
    }
    let tol = 1e-10 * (1.0 + libm::fabs(full.log_mag));
    debug_assert!(libm::fabs(full.log_mag - split.log_mag) <= tol, "magnitude split {full:?} vs {split:?}");
    let dphase = crate::logc::reduce_phase(full.phase - split.phase);
    debug_assert!(libm::fabs(dphase) <= 1e-9, "phase split {full:?} vs {split:?}");
}

/// Runs the configurations with indices in `range`. Each index draws from
/// its own random stream, so any partition of `0..hydro_samples` merges to
/// the same totals.
pub fn run_hydro_range(config: &ValidatedConfig, options: &RunOptions, range: Range<u64>) -> RawAccumulators {
    let grid = config_grid(config);
    let amplitude = options.weighting == Weighting::Residual;
    let mut acc = RawAccumulators::new(grid, amplitude);
    let mut local = alloc::vec![ComplexAccumulator::new(); grid.n];
    let mut touched: Vec<usize> = Vec::new();
    let seed = config.config().seed;
    for index in range {
        let mut rng = rng::stream(seed, index);
        let hydro = match options.hydro_mode {
            HydroMode::Uniform => sample_hydro(&mut rng, config),
            HydroMode::Constant(rho) => HydroConfig::constant(config.steps(), rho),
        };
        let target = GeneralizedTarget::new(&hydro, config);
        let residual = amplitude.then(|| ResidualWeight::new(&hydro, config));
        let mut checked = false;
        let state = run_chain(&target, config, &mut rng, |path| {
            let Some(b) = acc.bin(path.final_log_price()) else { return };
            if let Some(residual) = &residual {
                let w = residual.evaluate(path, config);
                if cfg!(debug_assertions) && !checked {
                    let sample = WeightedSample { hydro: &hydro, path, residual_log_weight: w };
                    check_split(&sample, target.log_weight(path), config);
                    checked = true;
                }
                if local[b].is_empty() {
                    touched.push(b);
                }
                local[b].add(w);
            }
        });
        for &b in &touched {
            acc.coherent[b].merge(&local[b]);
            acc.incoherent[b].add_log_real(local[b].log_norm_sqr());
            local[b] = ComplexAccumulator::new();
        }
        touched.clear();
        acc.record_chain(index, &state, options.record_diagnostics);
    }
    acc
}

/// Full generalized-model run on one thread.
pub fn run_simulation(config: &ValidatedConfig, options: &RunOptions) -> Result<RawAccumulators, RunError> {
    check_budget(config, options)?;
    Ok(run_hydro_range(config, options, 0..config.sampler().hydro_samples))
}

/// Orderless chains with indices in `range`; counts only.
pub fn run_baseline_range(config: &ValidatedConfig, options: &RunOptions, range: Range<u64>) -> RawAccumulators {
    let mut acc = RawAccumulators::new(config_grid(config), false);
    let target = OrderlessTarget::new(config);
    let seed = config.config().seed;
    for index in range {
        let mut rng = rng::stream(seed, index);
        let state = run_chain(&target, config, &mut rng, |path| {
            acc.bin(path.final_log_price());
        });
        acc.record_chain(index, &state, options.record_diagnostics);
    }
    acc
}

/// Orderless run: `hydro_samples` independent chains on one thread.
pub fn run_baseline(config: &ValidatedConfig, options: &RunOptions) -> Result<RawAccumulators, RunError> {
    check_budget(config, options)?;
    Ok(run_baseline_range(config, options, 0..config.sampler().hydro_samples))
}

/// Seeds of the replicates of a config.
pub fn replicate_seeds(config: &ValidatedConfig, options: &RunOptions) -> Vec<u64> {
    let master = config.config().seed;
    (0..u64::from(config.sampler().replicates))
        .map(|r| if options.identical_replicates { master } else { rng::replicate_seed(master, r) })
        .collect()
}

/// Runs every replicate with `run`, finalizes each in the configured mode,
/// and aggregates.
pub fn replicate_report(
    config: &ValidatedConfig,
    options: &RunOptions,
    mut run: impl FnMut(&ValidatedConfig) -> Result<RawAccumulators, RunError>,
) -> Result<(PdfHistogram, MomentReport), RunError> {
    let mode = config.sampler().accumulation_mode;
    let mut pdfs = Vec::new();
    for seed in replicate_seeds(config, options) {
        let raw = run(&config.with_seed(seed))?;
        pdfs.push(finalize_pdf(&raw, mode)?);
    }
    let (mut pdf, report) = aggregate_replicates(&pdfs)?;
    pdf.meta.fingerprint = config.fingerprint();
    Ok((pdf, report))
}
