//! Model and sampler parameters, validation, and derived quantities.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

/// One order-flow term `2 alpha (d rho) |d rho|^(gamma - 1)` of the price drift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationTerm {
    /// Coupling strength `alpha = M / lambda` (dimensionless).
    pub alpha: f64,
    /// Exponent; must be a positive odd integer.
    pub gamma: u32,
}

impl PerturbationTerm {
    pub const fn new(alpha: f64, gamma: u32) -> Self {
        Self { alpha, gamma }
    }

    /// Builds the term from the total lot count and the share liquidity.
    pub fn from_liquidity(lots: u32, lambda: f64, gamma: u32) -> Self {
        Self { alpha: f64::from(lots) / lambda, gamma }
    }
}

/// How per-sample complex weights are combined into a density.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AccumulationMode {
    /// Sum all complex weights in a bin, then take the modulus squared.
    #[default]
    Coherent,
    /// Take the modulus squared of each hydrodynamical configuration's bin
    /// sum, then add those.
    Incoherent,
}

impl AccumulationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AccumulationMode::Coherent => "coherent",
            AccumulationMode::Incoherent => "incoherent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coherent" => Some(AccumulationMode::Coherent),
            "incoherent" => Some(AccumulationMode::Incoherent),
            _ => None,
        }
    }
}

/// Monte Carlo and histogram settings. `None` fields are derived from the
/// model at validation time.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerSettings {
    /// Outer hydrodynamical configurations (independent chains for the
    /// orderless baseline).
    pub hydro_samples: u64,
    /// Kept Metropolis-Hastings samples per configuration.
    pub chain_length: u64,
    /// Burn-in sweeps; defaults to `10 N`.
    pub burn_in: Option<u64>,
    /// Sweeps between kept samples; defaults to `N`.
    pub thinning: Option<u64>,
    pub target_acceptance: f64,
    /// Initial proposal half-width in log-price; defaults to `2 sigma sqrt(delta)`.
    pub initial_step: Option<f64>,
    /// Histogram bin width in `log S(T)`; defaults to `sigma sqrt(T) / 10`.
    pub bin_width: Option<f64>,
    /// Histogram half-range in `log S(T)`; defaults to `8 sigma sqrt(T)`.
    pub bin_range: Option<f64>,
    pub accumulation_mode: AccumulationMode,
    pub replicates: u32,
    /// When set, at least two replicates are required.
    pub error_bars: bool,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            hydro_samples: 1000,
            chain_length: 100,
            burn_in: None,
            thinning: None,
            target_acceptance: 0.25,
            initial_step: None,
            bin_width: None,
            bin_range: None,
            accumulation_mode: AccumulationMode::Coherent,
            replicates: 5,
            error_bars: true,
        }
    }
}

/// Every parameter of the model. Build one, then call [`ModelConfig::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Volatility per unit square-root time.
    pub sigma: f64,
    /// Horizon `T` in model time units.
    pub horizon: f64,
    /// Number of time steps `N`.
    pub steps: u32,
    /// Log-price drift per unit time.
    pub mu: f64,
    /// Cash rate.
    pub r1: f64,
    /// Asset rate.
    pub r2: f64,
    /// Relative transaction cost.
    pub tc: f64,
    /// Price-variation amplitude of the hopping Hamiltonian.
    pub beta_tilde: f64,
    /// Total number of lots `M`.
    pub lots: u32,
    /// Initial cash lots.
    pub n1: u32,
    /// Initial share lots.
    pub m1: u32,
    /// Final cash lots.
    pub n: u32,
    /// Final share lots.
    pub m: u32,
    /// Hamiltonian time step; defaults to `delta`.
    pub delta_prime: Option<f64>,
    /// Empty means the orderless model.
    pub perturbation: Vec<PerturbationTerm>,
    pub seed: u64,
    pub sampler: SamplerSettings,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sigma: 0.00648,
            horizon: 10.0,
            steps: 10,
            mu: 0.0,
            r1: 0.0,
            r2: 0.0,
            tc: 0.0,
            beta_tilde: 2.5,
            lots: 100,
            n1: 50,
            m1: 50,
            n: 50,
            m: 50,
            delta_prime: None,
            perturbation: Vec::new(),
            seed: 0,
            sampler: SamplerSettings::default(),
        }
    }
}

/// A single violated invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    SigmaNotPositive,
    HorizonNotPositive,
    ZeroSteps,
    /// `T / N * N != T` in floating point.
    DeltaNotExact,
    DeltaPrimeNotPositive,
    NotFinite(&'static str),
    TransactionCostOutOfRange,
    BetaTildeNotPositive,
    LotsNotEvenPositive,
    InitialLotsNotConserved,
    FinalLotsNotConserved,
    AlphaNegative { index: usize },
    GammaZero { index: usize },
    GammaEven { index: usize },
    TargetAcceptanceOutOfRange,
    ReplicatesTooFew,
    ZeroSamples,
    ZeroThinning,
    BinWidthNotPositive,
    BinRangeNotPositive,
    InitialStepNegative,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SigmaNotPositive => f.write_str("sigma must be > 0"),
            Violation::HorizonNotPositive => f.write_str("T must be > 0"),
            Violation::ZeroSteps => f.write_str("N must be >= 1"),
            Violation::DeltaNotExact => f.write_str("T/N*N != T in floating point; pick T, N with an exact step"),
            Violation::DeltaPrimeNotPositive => f.write_str("delta_prime must be > 0"),
            Violation::NotFinite(name) => write!(f, "{name} must be finite"),
            Violation::TransactionCostOutOfRange => f.write_str("tc must satisfy 0 <= tc < 1"),
            Violation::BetaTildeNotPositive => f.write_str("beta_tilde must be > 0"),
            Violation::LotsNotEvenPositive => f.write_str("M must be an even positive integer"),
            Violation::InitialLotsNotConserved => f.write_str("n1+m1 ≠ M"),
            Violation::FinalLotsNotConserved => f.write_str("n+m ≠ M"),
            Violation::AlphaNegative { index } => write!(f, "perturbation term {index}: alpha must be >= 0"),
            Violation::GammaZero { index } => write!(f, "perturbation term {index}: gamma must be >= 1"),
            Violation::GammaEven { index } => write!(f, "perturbation term {index}: gamma must be odd"),
            Violation::TargetAcceptanceOutOfRange => f.write_str("target_acceptance must lie in (0, 1)"),
            Violation::ReplicatesTooFew => f.write_str("error bars need replicates >= 2"),
            Violation::ZeroSamples => f.write_str("hydro_samples and chain_length must be >= 1"),
            Violation::ZeroThinning => f.write_str("thinning must be >= 1"),
            Violation::BinWidthNotPositive => f.write_str("bin_width must be > 0"),
            Violation::BinRangeNotPositive => f.write_str("bin_range must be > 0"),
            Violation::InitialStepNegative => f.write_str("initial_step must be >= 0"),
        }
    }
}

/// Every invariant a [`ModelConfig`] violates.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl ConfigError {
    pub fn contains(&self, v: &Violation) -> bool {
        self.violations.contains(v)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid configuration: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl core::error::Error for ConfigError {}

/// A configuration that passed validation, together with its resolved
/// defaults. Immutable; share freely across workers.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedConfig {
    config: ModelConfig,
    delta: f64,
    delta_prime: f64,
    burn_in: u64,
    thinning: u64,
    initial_step: f64,
    bin_width: f64,
    bin_range: f64,
}

impl ModelConfig {
    /// Orderless baseline with the default parameters.
    pub fn baseline(sigma: f64, horizon: f64, steps: u32) -> Self {
        Self { sigma, horizon, steps, ..Self::default() }
    }

    /// Sets `n1 = m1 = n = m = M / 2`.
    pub fn with_symmetric_lots(mut self, lots: u32) -> Self {
        self.lots = lots;
        self.n1 = lots / 2;
        self.m1 = lots / 2;
        self.n = lots / 2;
        self.m = lots / 2;
        self
    }

    pub fn with_perturbation(mut self, terms: &[PerturbationTerm]) -> Self {
        self.perturbation = terms.to_vec();
        self
    }

    /// Checks every invariant and resolves defaults. Never repairs values.
    pub fn validate(self) -> Result<ValidatedConfig, ConfigError> {
        let mut v = Vec::new();
        let finite = [
            ("sigma", self.sigma),
            ("T", self.horizon),
            ("mu", self.mu),
            ("r1", self.r1),
            ("r2", self.r2),
            ("tc", self.tc),
            ("beta_tilde", self.beta_tilde),
        ];
        for (name, x) in finite {
            if !x.is_finite() {
                v.push(Violation::NotFinite(name));
            }
        }
        if !(self.sigma > 0.0) {
            v.push(Violation::SigmaNotPositive);
        }
        if !(self.horizon > 0.0) {
            v.push(Violation::HorizonNotPositive);
        }
        if self.steps == 0 {
            v.push(Violation::ZeroSteps);
        }
        let delta = self.horizon / f64::from(self.steps.max(1));
        if self.steps > 0 && self.horizon > 0.0 && delta * f64::from(self.steps) != self.horizon {
            v.push(Violation::DeltaNotExact);
        }
        let delta_prime = self.delta_prime.unwrap_or(delta);
        if !(delta_prime > 0.0) || !delta_prime.is_finite() {
            v.push(Violation::DeltaPrimeNotPositive);
        }
        if !(self.tc >= 0.0 && self.tc < 1.0) {
            v.push(Violation::TransactionCostOutOfRange);
        }
        if !(self.beta_tilde > 0.0) {
            v.push(Violation::BetaTildeNotPositive);
        }
        if self.lots == 0 || self.lots % 2 != 0 {
            v.push(Violation::LotsNotEvenPositive);
        }
        if u64::from(self.n1) + u64::from(self.m1) != u64::from(self.lots) {
            v.push(Violation::InitialLotsNotConserved);
        }
        if u64::from(self.n) + u64::from(self.m) != u64::from(self.lots) {
            v.push(Violation::FinalLotsNotConserved);
        }
        for (index, term) in self.perturbation.iter().enumerate() {
            if !term.alpha.is_finite() {
                v.push(Violation::NotFinite("alpha"));
            } else if term.alpha < 0.0 {
                v.push(Violation::AlphaNegative { index });
            }
            if term.gamma == 0 {
                v.push(Violation::GammaZero { index });
            } else if term.gamma % 2 == 0 {
                v.push(Violation::GammaEven { index });
            }
        }

        let s = &self.sampler;
        if !(s.target_acceptance > 0.0 && s.target_acceptance < 1.0) {
            v.push(Violation::TargetAcceptanceOutOfRange);
        }
        if s.replicates == 0 || (s.error_bars && s.replicates < 2) {
            v.push(Violation::ReplicatesTooFew);
        }
        if s.hydro_samples == 0 || s.chain_length == 0 {
            v.push(Violation::ZeroSamples);
        }
        let steps = u64::from(self.steps.max(1));
        let thinning = s.thinning.unwrap_or(steps);
        if thinning == 0 {
            v.push(Violation::ZeroThinning);
        }
        let spread = self.sigma * libm::sqrt(self.horizon);
        let bin_width = s.bin_width.unwrap_or(spread / 10.0);
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            v.push(Violation::BinWidthNotPositive);
        }
        let bin_range = s.bin_range.unwrap_or(8.0 * spread);
        if !(bin_range > 0.0) || !bin_range.is_finite() {
            v.push(Violation::BinRangeNotPositive);
        }
        let initial_step = s.initial_step.unwrap_or(2.0 * self.sigma * libm::sqrt(delta));
        if !(initial_step >= 0.0) || !initial_step.is_finite() {
            v.push(Violation::InitialStepNegative);
        }

        if !v.is_empty() {
            return Err(ConfigError { violations: v });
        }
        let burn_in = s.burn_in.unwrap_or(10 * steps);
        Ok(ValidatedConfig { config: self, delta, delta_prime, burn_in, thinning, initial_step, bin_width, bin_range })
    }
}

impl ValidatedConfig {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn into_config(self) -> ModelConfig {
        self.config
    }

    /// Time step `T / N`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn delta_prime(&self) -> f64 {
        self.delta_prime
    }

    pub fn steps(&self) -> usize {
        self.config.steps as usize
    }

    pub fn sigma(&self) -> f64 {
        self.config.sigma
    }

    pub fn lots(&self) -> f64 {
        f64::from(self.config.lots)
    }

    pub fn terms(&self) -> &[PerturbationTerm] {
        &self.config.perturbation
    }

    pub fn sampler(&self) -> &SamplerSettings {
        &self.config.sampler
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in
    }

    pub fn thinning(&self) -> u64 {
        self.thinning
    }

    pub fn initial_step(&self) -> f64 {
        self.initial_step
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn bin_range(&self) -> f64 {
        self.bin_range
    }

    /// Returns a copy with a different seed (used to derive replicates).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.config.seed = seed;
        out
    }

    /// Canonical `key = value` rendering of every resolved parameter. Two
    /// configs produce the same text iff they describe the same run.
    pub fn canonical_text(&self) -> String {
        let c = &self.config;
        let s = &c.sampler;
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("sigma", &c.sigma);
        kv("T", &c.horizon);
        kv("N", &c.steps);
        kv("mu", &c.mu);
        kv("r1", &c.r1);
        kv("r2", &c.r2);
        kv("tc", &c.tc);
        kv("beta_tilde", &c.beta_tilde);
        kv("M", &c.lots);
        kv("n1", &c.n1);
        kv("m1", &c.m1);
        kv("n", &c.n);
        kv("m", &c.m);
        kv("delta_prime", &self.delta_prime);
        let mut terms = String::new();
        for (i, t) in c.perturbation.iter().enumerate() {
            if i > 0 {
                terms.push_str(", ");
            }
            let _ = write!(terms, "{}:{}", t.alpha, t.gamma);
        }
        kv("perturbation", &terms);
        kv("seed", &c.seed);
        kv("hydro_samples", &s.hydro_samples);
        kv("chain_length", &s.chain_length);
        kv("burn_in", &self.burn_in);
        kv("thinning", &self.thinning);
        kv("target_acceptance", &s.target_acceptance);
        kv("initial_step", &self.initial_step);
        kv("bin_width", &self.bin_width);
        kv("bin_range", &self.bin_range);
        kv("accumulation_mode", &s.accumulation_mode.as_str());
        kv("replicates", &s.replicates);
        kv("error_bars", &s.error_bars);
        out
    }

    /// 64-bit FNV-1a of [`Self::canonical_text`], as 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical_text().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        let mut out = String::with_capacity(16);
        let _ = write!(out, "{h:016x}");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_orderless() -> ModelConfig {
        ModelConfig::baseline(0.00648, 10.0, 10)
    }

    #[test]
    fn default_config_is_valid_with_unit_step() {
        let v = default_orderless().validate().unwrap();
        assert_eq!(v.delta(), 1.0);
        assert_eq!(v.delta_prime(), 1.0);
        assert_eq!(v.burn_in(), 100);
        assert_eq!(v.thinning(), 10);
    }

    #[test]
    fn unbalanced_initial_lots_rejected() {
        let mut c = default_orderless();
        c.n1 = 60;
        let err = c.validate().unwrap_err();
        assert!(err.contains(&Violation::InitialLotsNotConserved));
        assert!(std::format!("{err}").contains("n1+m1 ≠ M"));
    }

    #[test]
    fn even_gamma_rejected() {
        let c = default_orderless().with_perturbation(&[PerturbationTerm::new(0.1, 2)]);
        let err = c.validate().unwrap_err();
        assert!(err.contains(&Violation::GammaEven { index: 0 }));
        assert!(std::format!("{err}").contains("gamma must be odd"));
    }

    #[test]
    fn every_violation_is_reported() {
        let mut c = default_orderless();
        c.sigma = -1.0;
        c.tc = 1.0;
        c.n = 0;
        c.sampler.replicates = 1;
        let err = c.validate().unwrap_err();
        assert!(err.violations.len() >= 4, "{err}");
        assert!(err.contains(&Violation::ReplicatesTooFew));
    }

    #[test]
    fn single_replicate_allowed_without_error_bars() {
        let mut c = default_orderless();
        c.sampler.replicates = 1;
        assert!(c.clone().validate().is_err());
        c.sampler.error_bars = false;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn inexact_step_is_rejected_not_repaired() {
        let c = ModelConfig::baseline(0.01, 10.0, 77);
        assert!(c.validate().unwrap_err().contains(&Violation::DeltaNotExact));
    }

    #[test]
    fn liquidity_conversion() {
        let t = PerturbationTerm::from_liquidity(100, 400.0, 1);
        assert_eq!(t.alpha, 0.25);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = default_orderless().validate().unwrap();
        let b = a.with_seed(7);
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), default_orderless().validate().unwrap().fingerprint());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn validate_is_idempotent(sigma in 1e-6f64..1.0, horizon in 0.1f64..100.0, steps in 1u32..200, half in 1u32..60) {
                let c = ModelConfig { sigma, horizon, steps, ..ModelConfig::default() }.with_symmetric_lots(2 * half);
                if let Ok(v) = c.validate() {
                    let again = v.config().clone().validate().unwrap();
                    prop_assert_eq!(&again, &v);
                    prop_assert_eq!(v.delta() * f64::from(steps), horizon);
                }
            }
        }
    }
}
