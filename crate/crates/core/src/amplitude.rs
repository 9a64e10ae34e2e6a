//! The coherent-state path-integral integrand in hydrodynamical variables.
//!
//! Path-independent constants (`e^M`, `e^{-2M}`, `1/(n! m!)`, the `2 pi i`
//! factors of the measure) are dropped everywhere; every density built from
//! these amplitudes is normalized at the end.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::action::{generalized_log_weight, HydroConfig};
use crate::logc::LogComplex;
use crate::params::ValidatedConfig;

/// Off-diagonal entries `(H_12, H_21)` of the hopping Hamiltonian at
/// log-price `x` and time `t`.
pub fn hamiltonian_entries(x: f64, t: f64, config: &ValidatedConfig) -> (f64, f64) {
    let c = config.config();
    let gamma = (1.0 - c.tc) / config.delta_prime();
    let b = c.beta_tilde;
    let h12 = gamma * libm::exp(b * x - b * c.r1 * config.delta() - b * c.mu * t);
    let h21 = gamma * libm::exp(-b * x - b * c.r2 * config.delta() + b * c.mu * t);
    (h12, h21)
}

/// Price-independent parts of the propagator exponent for one hydrodynamical
/// configuration, so that evaluating it on many price paths costs one `exp`
/// per time step.
#[derive(Clone, Debug)]
pub struct HydroCouplings {
    beta_tilde: f64,
    /// `M sum [(phi1_{i+1}-phi1_i) sqrt(rho_{i+1} rho_i) + (phi2_{i+1}-phi2_i) sqrt(..)]`.
    kinetic_phase: f64,
    /// Coefficient of `S_i^{beta}` in link `i`, including `H_12 delta / S_i^{beta}`.
    up: Vec<Complex64>,
    /// Coefficient of `S_i^{-beta}` in link `i`.
    down: Vec<Complex64>,
}

impl HydroCouplings {
    pub fn new(hydro: &HydroConfig, config: &ValidatedConfig) -> Self {
        let steps = hydro.steps();
        let lots = config.lots();
        let delta = config.delta();
        let mut kinetic_phase = 0.0;
        let mut up = Vec::with_capacity(steps);
        let mut down = Vec::with_capacity(steps);
        for i in 0..steps {
            let (r0, r1) = (hydro.rho[i], hydro.rho[i + 1]);
            // phase differences of the raw samples, not wrapped representatives
            let d1 = hydro.phi1[i + 1] - hydro.phi1[i];
            let d2 = hydro.phi2[i + 1] - hydro.phi2[i];
            kinetic_phase += d1 * libm::sqrt(r1 * r0) + d2 * libm::sqrt((1.0 - r1) * (1.0 - r0));
            let (h12, h21) = hamiltonian_entries(0.0, i as f64 * delta, config);
            let a = lots * h12 * delta * libm::sqrt(r1 * (1.0 - r0));
            let b = lots * h21 * delta * libm::sqrt((1.0 - r1) * r0);
            up.push(Complex64::from_polar(a, hydro.phi1[i + 1] - hydro.phi2[i]));
            down.push(Complex64::from_polar(b, hydro.phi2[i + 1] - hydro.phi1[i]));
        }
        Self { beta_tilde: config.config().beta_tilde, kinetic_phase: lots * kinetic_phase, up, down }
    }

    /// Complex exponent of the propagator on `path`.
    pub fn exponent(&self, path: &[f64]) -> Complex64 {
        let mut z = Complex64::new(0.0, self.kinetic_phase);
        for (i, (u, d)) in self.up.iter().zip(&self.down).enumerate() {
            let s = libm::exp(self.beta_tilde * path[i]);
            z += u * s + d / s;
        }
        z
    }

    pub fn log_amplitude(&self, path: &[f64]) -> LogComplex {
        LogComplex::exp(self.exponent(path))
    }
}

/// Propagator over the portfolio-allocation paths for fixed prices, with the
/// constant `e^M` dropped.
pub fn propagator_log_amplitude(hydro: &HydroConfig, path: &[f64], config: &ValidatedConfig) -> LogComplex {
    HydroCouplings::new(hydro, config).log_amplitude(path)
}

fn power_log(exponent: f64, base: f64) -> f64 {
    if exponent == 0.0 {
        0.0
    } else {
        exponent * libm::log(base)
    }
}

/// Parts of the boundary factor that do not depend on the final price.
fn boundary_static(hydro: &HydroConfig, config: &ValidatedConfig) -> LogComplex {
    let c = config.config();
    let lots = config.lots();
    let last = hydro.steps();
    let (r0, rn) = (hydro.rho[0], hydro.rho[last]);
    let log_mag = power_log(0.5 * f64::from(c.n1), lots * r0)
        + power_log(0.5 * f64::from(c.m1), lots * (1.0 - r0))
        + power_log(0.5 * f64::from(c.n), lots * rn)
        + power_log(0.5 * f64::from(c.m), lots * (1.0 - rn));
    if log_mag == f64::NEG_INFINITY || log_mag.is_nan() {
        return LogComplex::ZERO;
    }
    let phase = f64::from(c.n1) * hydro.phi1[0] + f64::from(c.m1) * hydro.phi2[0]
        - f64::from(c.n) * hydro.phi1[last]
        - f64::from(c.m) * hydro.phi2[last];
    LogComplex::new(log_mag, phase)
}

/// `ln S(T)^{-beta (n - m)/2} S(0)^{beta (n1 - m1)/2}`.
fn boundary_price_log(path: &[f64], config: &ValidatedConfig) -> f64 {
    let c = config.config();
    let b = c.beta_tilde;
    let last = path.len() - 1;
    -b * (f64::from(c.n) - f64::from(c.m)) * path[last] / 2.0
        + b * (f64::from(c.n1) - f64::from(c.m1)) * path[0] / 2.0
}

/// Projection onto the initial and final portfolio allocations, expressed
/// through the boundary hydrodynamical variables.
pub fn boundary_log_factor(hydro: &HydroConfig, path: &[f64], config: &ValidatedConfig) -> LogComplex {
    boundary_static(hydro, config) * LogComplex::from_real(boundary_price_log(path, config))
}

/// `ln prod_i rho_{1,i} rho_{2,i} / pi^2` over interior sites.
pub fn measure_log_weight(hydro: &HydroConfig) -> f64 {
    let last = hydro.steps();
    hydro.rho[1..last].iter().map(|&r| libm::log(r * (1.0 - r) / (PI * PI))).sum()
}

/// The full integrand: Gaussian action weight, propagator, boundary
/// projection and measure.
pub fn full_log_integrand(hydro: &HydroConfig, path: &[f64], config: &ValidatedConfig) -> LogComplex {
    LogComplex::from_real(generalized_log_weight(path, hydro, config))
        * propagator_log_amplitude(hydro, path, config)
        * boundary_log_factor(hydro, path, config)
        * LogComplex::from_real(measure_log_weight(hydro))
}

/// Everything in [`full_log_integrand`] except the Gaussian action weight,
/// precomputed per hydrodynamical configuration.
#[derive(Clone, Debug)]
pub struct ResidualWeight {
    couplings: HydroCouplings,
    fixed: LogComplex,
}

impl ResidualWeight {
    pub fn new(hydro: &HydroConfig, config: &ValidatedConfig) -> Self {
        let fixed = boundary_static(hydro, config) * LogComplex::from_real(measure_log_weight(hydro));
        Self { couplings: HydroCouplings::new(hydro, config), fixed }
    }

    pub fn evaluate(&self, path: &[f64], config: &ValidatedConfig) -> LogComplex {
        if self.fixed.is_zero() {
            return LogComplex::ZERO;
        }
        let mut z = self.couplings.exponent(path);
        z.re += boundary_price_log(path, config);
        self.fixed * LogComplex::exp(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::PricePath;
    use crate::logc::reduce_phase;
    use crate::params::{ModelConfig, PerturbationTerm};
    use core::f64::consts::TAU;
    use proptest::prelude::*;
    use std::vec;

    fn cfg(steps: u32, lots: u32) -> ValidatedConfig {
        ModelConfig::baseline(0.05, f64::from(steps), steps).with_symmetric_lots(lots).validate().unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let c = cfg(1, 2);
        assert_eq!(hamiltonian_entries(0.0, 0.0, &c), (1.0, 1.0));
        let (h12, h21) = hamiltonian_entries(libm::log(2.0), 0.0, &c);
        assert!((h12 - 5.656854249).abs() < 1e-8);
        assert!((h21 - 0.1767766953).abs() < 1e-9);
    }

    #[test]
    fn propagator_examples() {
        let c = cfg(1, 2);
        let full = HydroConfig::constant(1, 1.0);
        assert_eq!(propagator_log_amplitude(&full, &[0.0, 0.3], &c), LogComplex::ONE);
        let half = HydroConfig::constant(1, 0.5);
        let z = propagator_log_amplitude(&half, &[0.0, 0.3], &c);
        assert!((z.log_mag - 2.0).abs() < 1e-14);
        assert_eq!(z.phase, 0.0);
    }

    #[test]
    fn boundary_examples() {
        let c = cfg(4, 100);
        let half = HydroConfig::constant(4, 0.5);
        let b = boundary_log_factor(&half, &[0.0, 0.1, 0.2, 0.1, 0.4], &c);
        assert_eq!(b.phase, 0.0);
        assert!((b.log_mag - 100.0 * libm::log(50.0)).abs() < 1e-10);

        let mut empty_cash = half.clone();
        empty_cash.rho[4] = 0.0;
        assert!(boundary_log_factor(&empty_cash, &[0.0; 5], &c).is_zero());

        // asymmetric allocations pick up the price factor
        let mut asym = ModelConfig::baseline(0.05, 4.0, 4).with_symmetric_lots(4);
        asym.n = 3;
        asym.m = 1;
        let asym = asym.validate().unwrap();
        let b = boundary_log_factor(&HydroConfig::constant(4, 0.5), &[0.0, 0.0, 0.0, 0.0, 0.2], &asym);
        let expected = -2.5 * 2.0 * 0.2 / 2.0 + 0.5 * libm::log(2.0) * 8.0;
        assert!((b.log_mag - expected).abs() < 1e-12);
    }

    #[test]
    fn integrand_is_product_of_factors() {
        let c = ModelConfig::baseline(0.05, 3.0, 3)
            .with_symmetric_lots(4)
            .with_perturbation(&[PerturbationTerm::new(0.3, 3)])
            .validate()
            .unwrap();
        let hydro = HydroConfig::new(vec![0.2, 0.7, 0.4, 0.55], vec![0.1, 5.0, 2.0, 3.0], vec![6.0, 0.3, 1.0, 2.2]).unwrap();
        let path = PricePath::new(vec![0.0, 0.05, -0.02, 0.11]).unwrap();
        let whole = full_log_integrand(&hydro, &path, &c);
        let parts = LogComplex::from_real(generalized_log_weight(&path, &hydro, &c))
            * propagator_log_amplitude(&hydro, &path, &c)
            * boundary_log_factor(&hydro, &path, &c)
            * LogComplex::from_real(measure_log_weight(&hydro));
        assert!((whole.log_mag - parts.log_mag).abs() < 1e-12);
        assert!(reduce_phase(whole.phase - parts.phase).abs() < 1e-12);

        let residual = ResidualWeight::new(&hydro, &c).evaluate(&path, &c);
        let split = LogComplex::from_real(generalized_log_weight(&path, &hydro, &c)) * residual;
        assert!((split.log_mag - whole.log_mag).abs() < 1e-10);
        assert!(reduce_phase(split.phase - whole.phase).abs() < 1e-10);
    }

    #[test]
    fn flat_half_configuration_is_real_positive() {
        let c = cfg(3, 4);
        let z = full_log_integrand(&HydroConfig::constant(3, 0.5), &PricePath::flat(3), &c);
        assert!(z.log_mag.is_finite());
        assert_eq!(z.phase, 0.0);
    }

    #[test]
    fn hopping_vanishes_at_pure_allocations() {
        let c = cfg(5, 4);
        for rho in [0.0, 1.0] {
            let h = HydroConfig::new(vec![rho; 6], vec![0.3, 1.0, 2.0, 3.0, 4.0, 5.0], vec![0.7; 6]).unwrap();
            let couplings = HydroCouplings::new(&h, &c);
            assert!(couplings.up.iter().chain(&couplings.down).all(|z| z.norm() == 0.0));
        }
    }

    /// The same displayed exponent, evaluated with plain complex arithmetic.
    fn naive_propagator(h: &HydroConfig, x: &[f64], beta: f64, lots: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..x.len() - 1 {
            let (a, b) = (h.rho[k], h.rho[k + 1]);
            let s = x[k].exp();
            sum += i * ((h.phi1[k + 1] - h.phi1[k]) * (b * a).sqrt()
                + (h.phi2[k + 1] - h.phi2[k]) * ((1.0 - b) * (1.0 - a)).sqrt());
            sum += s.powf(beta) * (b * (1.0 - a)).sqrt() * (i * (h.phi1[k + 1] - h.phi2[k])).exp();
            sum += s.powf(-beta) * ((1.0 - b) * a).sqrt() * (i * (h.phi2[k + 1] - h.phi1[k])).exp();
        }
        (lots * sum).exp()
    }

    proptest! {
        #[test]
        fn propagator_matches_naive_arithmetic(
            rho in proptest::collection::vec(0.0f64..1.0, 4),
            phi1 in proptest::collection::vec(0.0f64..TAU, 4),
            phi2 in proptest::collection::vec(0.0f64..TAU, 4),
            x in proptest::collection::vec(-0.5f64..0.5, 3),
        ) {
            let c = cfg(3, 2);
            let h = HydroConfig::new(rho, phi1, phi2).unwrap();
            let mut path = vec![0.0];
            path.extend_from_slice(&x);
            let got = propagator_log_amplitude(&h, &path, &c).to_complex();
            let want = naive_propagator(&h, &path, 2.5, 2.0);
            prop_assert!((got - want).norm() <= 1e-10 * want.norm());
        }

        #[test]
        fn beta_rescaling_leaves_hamiltonian_invariant(x in -1.0f64..1.0, b1 in 0.1f64..5.0, b2 in 0.1f64..5.0) {
            let mut c1 = ModelConfig::baseline(0.05, 2.0, 2);
            c1.beta_tilde = b1;
            let mut c2 = c1.clone();
            c2.beta_tilde = b2;
            let (c1, c2) = (c1.validate().unwrap(), c2.validate().unwrap());
            let (a12, a21) = hamiltonian_entries(x, 0.0, &c1);
            let (b12, b21) = hamiltonian_entries(x * b1 / b2, 0.0, &c2);
            prop_assert!((a12 - b12).abs() <= 1e-12 * a12);
            prop_assert!((a21 - b21).abs() <= 1e-12 * a21);
        }
    }
}
