//! Action functionals on log-price paths.
//!
//! Every function returns a log-weight (the exponent), never the
//! exponentiated weight: exponents of order `-1e4` are routine for
//! implausible paths.

use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;
use core::ops::Deref;

use crate::params::{PerturbationTerm, ValidatedConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum PathError {
    Empty,
    NotPinned,
    NotFinite { index: usize },
    RhoOutOfRange { index: usize },
    PhaseOutOfRange { index: usize },
    LengthMismatch,
}

impl fmt::Display for PathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathError::Empty => f.write_str("path must contain at least one point"),
            PathError::NotPinned => f.write_str("x_0 must be 0 (gauge S(0) = 1)"),
            PathError::NotFinite { index } => write!(f, "entry {index} is not finite"),
            PathError::RhoOutOfRange { index } => write!(f, "rho_{index} outside [0, 1]"),
            PathError::PhaseOutOfRange { index } => write!(f, "phase {index} outside [0, 2pi)"),
            PathError::LengthMismatch => f.write_str("rho, phi1 and phi2 must have equal length"),
        }
    }
}

impl core::error::Error for PathError {}

/// Log-price trajectory `x_0..x_N` with `x_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PricePath(Vec<f64>);

impl PricePath {
    pub fn new(x: Vec<f64>) -> Result<Self, PathError> {
        match x.first() {
            None => return Err(PathError::Empty),
            Some(&x0) if x0 != 0.0 => return Err(PathError::NotPinned),
            _ => {}
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(PathError::NotFinite { index });
        }
        Ok(Self(x))
    }

    /// The constant path at `S = 1`.
    pub fn flat(steps: usize) -> Self {
        Self(alloc::vec![0.0; steps + 1])
    }

    /// Path whose increments follow `drifts` exactly.
    pub fn from_increments(increments: &[f64]) -> Self {
        let mut x = Vec::with_capacity(increments.len() + 1);
        let mut acc = 0.0;
        x.push(0.0);
        for d in increments {
            acc += d;
            x.push(acc);
        }
        Self(x)
    }

    pub fn steps(&self) -> usize {
        self.0.len() - 1
    }

    pub fn final_log_price(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Sets `x_i`; `i = 0` is not allowed.
    pub(crate) fn set(&mut self, i: usize, value: f64) {
        debug_assert!(i > 0);
        self.0[i] = value;
    }
}

impl Deref for PricePath {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Hydrodynamical variables: `rho_i` is the cash share of the lots
/// (`rho_{2,i} = 1 - rho_i`), `phi1`/`phi2` the cash and share phases.
#[derive(Clone, Debug, PartialEq)]
pub struct HydroConfig {
    pub rho: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
}

impl HydroConfig {
    pub fn new(rho: Vec<f64>, phi1: Vec<f64>, phi2: Vec<f64>) -> Result<Self, PathError> {
        if rho.len() != phi1.len() || rho.len() != phi2.len() {
            return Err(PathError::LengthMismatch);
        }
        if rho.is_empty() {
            return Err(PathError::Empty);
        }
        if let Some(index) = rho.iter().position(|r| !(0.0..=1.0).contains(r)) {
            return Err(PathError::RhoOutOfRange { index });
        }
        let bad_phase = |p: &f64| !(0.0..TAU).contains(p);
        if let Some(index) = phi1.iter().chain(phi2.iter()).position(bad_phase) {
            return Err(PathError::PhaseOutOfRange { index: index % rho.len() });
        }
        Ok(Self { rho, phi1, phi2 })
    }

    /// Constant allocation `rho` with all phases zero.
    pub fn constant(steps: usize, rho: f64) -> Self {
        let n = steps + 1;
        Self { rho: alloc::vec![rho; n], phi1: alloc::vec![0.0; n], phi2: alloc::vec![0.0; n] }
    }

    pub fn steps(&self) -> usize {
        self.rho.len() - 1
    }

    /// `rho_{i+1} - rho_i`.
    pub fn delta_rho(&self, i: usize) -> f64 {
        self.rho[i + 1] - self.rho[i]
    }
}

/// `d |d|^(power - 1)`, defined for any real `power >= 1`.
pub fn signed_power(d: f64, power: f64) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    d * libm::pow(libm::fabs(d), power - 1.0)
}

/// Revenue of the double arbitrage between `t_i` and `t_{i+1}`:
/// `y + 1/y - 2` with `y = S_{i+1}/S_i e^{(r2 - r1) delta}`.
pub fn double_arbitrage_revenue(x_i: f64, x_next: f64, config: &ValidatedConfig) -> f64 {
    let c = config.config();
    let u = (x_next - x_i) + (c.r2 - c.r1) * config.delta();
    // y + 1/y - 2 = 4 sinh^2(u/2), exact and free of cancellation for small u
    let s = libm::sinh(0.5 * u);
    4.0 * s * s
}

/// Exponent of the orderless path weight, `-(1 / (2 delta sigma^2)) sum R_i`.
pub fn orderless_log_weight(path: &[f64], config: &ValidatedConfig) -> f64 {
    let scale = 0.5 / (config.delta() * config.sigma() * config.sigma());
    -scale * path.windows(2).map(|w| double_arbitrage_revenue(w[0], w[1], config)).sum::<f64>()
}

/// Order-flow contribution to one log-price increment.
pub fn perturbation_drift(delta_rho: f64, terms: &[PerturbationTerm]) -> f64 {
    terms.iter().map(|t| 2.0 * t.alpha * signed_power(delta_rho, f64::from(t.gamma))).sum()
}

/// Exponent of the order-perturbed Gaussian weight,
/// `-sum (dx_i - mu delta - drift(d rho_i))^2 / (2 sigma^2 delta)`.
pub fn generalized_log_weight(path: &[f64], hydro: &HydroConfig, config: &ValidatedConfig) -> f64 {
    debug_assert_eq!(path.len(), hydro.rho.len());
    let scale = 0.5 / (config.delta() * config.sigma() * config.sigma());
    let mu_delta = config.config().mu * config.delta();
    let terms = config.terms();
    (0..path.len() - 1)
        .map(|i| {
            let r = path[i + 1] - path[i] - mu_delta - perturbation_drift(hydro.delta_rho(i), terms);
            -scale * r * r
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelConfig;
    use proptest::prelude::*;
    use std::vec;

    fn default_orderless() -> ValidatedConfig {
        ModelConfig::baseline(0.00648, 10.0, 10).validate().unwrap()
    }

    fn with_steps(steps: u32, sigma: f64, terms: &[PerturbationTerm]) -> ValidatedConfig {
        ModelConfig::baseline(sigma, f64::from(steps), steps).with_perturbation(terms).validate().unwrap()
    }

    #[test]
    fn path_invariants() {
        assert_eq!(PricePath::new(vec![1.0, 0.0]), Err(PathError::NotPinned));
        assert_eq!(PricePath::new(vec![0.0, f64::NAN]), Err(PathError::NotFinite { index: 1 }));
        assert!(HydroConfig::new(vec![0.5, 1.1], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(HydroConfig::new(vec![0.5, 1.0], vec![0.0, TAU], vec![0.0; 2]).is_err());
    }

    #[test]
    fn revenue_examples() {
        let c = default_orderless();
        assert_eq!(double_arbitrage_revenue(0.3, 0.3, &c), 0.0);
        let r = double_arbitrage_revenue(0.0, libm::log(2.0), &c);
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orderless_examples() {
        let c = default_orderless();
        assert_eq!(orderless_log_weight(&PricePath::flat(10), &c), 0.0);
        let one = with_steps(1, 0.00648, &[]);
        let w = orderless_log_weight(&[0.0, libm::log(2.0)], &one);
        let expected = -0.5 / (2.0 * 0.00648 * 0.00648);
        assert!((w - expected).abs() < 1e-9 * expected.abs());
        assert!((w + 5953.74).abs() < 0.01);
    }

    #[test]
    fn drift_examples() {
        let t = [PerturbationTerm::new(0.266, 1)];
        assert_eq!(perturbation_drift(0.0, &t), 0.0);
        assert!((perturbation_drift(0.5, &t) - 0.266).abs() < 1e-15);
        let cubic = [PerturbationTerm::new(0.5, 3)];
        assert!((perturbation_drift(0.1, &cubic) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn generalized_examples() {
        let terms = [PerturbationTerm::new(0.3, 3), PerturbationTerm::new(0.01, 9)];
        let c = with_steps(3, 0.05, &terms);
        let hydro = HydroConfig::new(vec![0.1, 0.9, 0.4, 0.6], vec![0.0; 4], vec![0.0; 4]).unwrap();
        let incs: std::vec::Vec<f64> = (0..3).map(|i| perturbation_drift(hydro.delta_rho(i), &terms)).collect();
        let perfect = PricePath::from_increments(&incs);
        assert!(generalized_log_weight(&perfect, &hydro, &c).abs() < 1e-20);

        let sigma = 0.05;
        let plain = with_steps(1, sigma, &[]);
        let w = generalized_log_weight(&[0.0, sigma], &HydroConfig::constant(1, 0.5), &plain);
        assert!((w + 0.5).abs() < 1e-14);
    }

    #[test]
    fn small_increment_revenue_is_quadratic() {
        let c = default_orderless();
        for k in -100..=100 {
            let d = f64::from(k) * 1e-5;
            let r = double_arbitrage_revenue(0.0, d, &c);
            assert!((r - d * d).abs() <= d.powi(4), "d = {d}");
        }
    }

    proptest! {
        #[test]
        fn gauge_invariance(x in proptest::collection::vec(-0.2f64..0.2, 2..12), log_lambda in -5.0f64..5.0) {
            let c = default_orderless();
            let shifted: std::vec::Vec<f64> = x.iter().map(|v| v + log_lambda).collect();
            for i in 0..x.len() - 1 {
                let a = double_arbitrage_revenue(x[i], x[i + 1], &c);
                let b = double_arbitrage_revenue(shifted[i], shifted[i + 1], &c);
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-16);
            }
            let wa = orderless_log_weight(&x, &c);
            let wb = orderless_log_weight(&shifted, &c);
            prop_assert!((wa - wb).abs() <= 1e-9 * wa.abs().max(1.0));
        }

        #[test]
        fn drift_is_odd(d in -1.0f64..1.0, a1 in 0.0f64..2.0, a2 in 0.0f64..2.0, g in 0u32..7) {
            let t = [PerturbationTerm::new(a1, 2 * g + 1), PerturbationTerm::new(a2, 9)];
            prop_assert_eq!(perturbation_drift(-d, &t), -perturbation_drift(d, &t));
            let explicit = 2.0 * a1 * d.powi((2 * g + 1) as i32) + 2.0 * a2 * d.powi(9);
            prop_assert!((perturbation_drift(d, &t) - explicit).abs() <= 1e-13);
        }

        #[test]
        fn linear_term_is_shifted_gaussian(
            rho in proptest::collection::vec(0.0f64..1.0, 5),
            x in proptest::collection::vec(-0.3f64..0.3, 4),
            alpha in 0.0f64..1.0,
        ) {
            let c = with_steps(4, 0.02, &[PerturbationTerm::new(alpha, 1)]);
            let plain = with_steps(4, 0.02, &[]);
            let hydro = HydroConfig::new(rho.clone(), vec![0.0; 5], vec![0.0; 5]).unwrap();
            let mut path = vec![0.0];
            path.extend_from_slice(&x);
            // shift every increment by 2 alpha d rho and evaluate the orderless-drift form
            let mut shifted = vec![0.0];
            for i in 0..4 {
                let d = path[i + 1] - path[i] - 2.0 * alpha * (rho[i + 1] - rho[i]);
                shifted.push(shifted[i] + d);
            }
            let lhs = generalized_log_weight(&path, &hydro, &c);
            let rhs = generalized_log_weight(&shifted, &HydroConfig::constant(4, 0.5), &plain);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
            prop_assert!(lhs <= 0.0);
        }
    }
}
