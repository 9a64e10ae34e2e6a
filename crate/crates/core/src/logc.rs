//! Complex numbers in log-polar form, and a shifted accumulator for sums of
//! them.
//!
//! The amplitudes in this model routinely carry factors like `e^M` or
//! `(M rho)^(n/2)` with `M = 100`, far outside `f64` range, so products are
//! formed by adding logarithms and sums are formed relative to a running
//! reference magnitude.

use core::f64::consts::{PI, TAU};
use core::ops::{Mul, MulAssign};
use num_complex::Complex64;

/// `exp(log_mag) * exp(i phase)`. `log_mag = -inf` encodes zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogComplex {
    pub log_mag: f64,
    pub phase: f64,
}

/// Reduces an angle to `(-pi, pi]`.
pub fn reduce_phase(phase: f64) -> f64 {
    let mut r = libm::fmod(phase, TAU);
    if r < 0.0 {
        r += TAU;
    }
    if r > PI {
        r - TAU
    } else {
        r
    }
}

impl LogComplex {
    pub const ONE: LogComplex = LogComplex { log_mag: 0.0, phase: 0.0 };
    pub const ZERO: LogComplex = LogComplex { log_mag: f64::NEG_INFINITY, phase: 0.0 };

    /// Builds a normalized value (phase in `(-pi, pi]`).
    pub fn new(log_mag: f64, phase: f64) -> Self {
        if log_mag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        Self { log_mag, phase: reduce_phase(phase) }
    }

    /// `exp(z)` for a complex exponent, without evaluating the exponential.
    pub fn exp(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }

    pub fn from_real(log_mag: f64) -> Self {
        Self::new(log_mag, 0.0)
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.re == 0.0 && z.im == 0.0 {
            return Self::ZERO;
        }
        Self::new(libm::log(libm::hypot(z.re, z.im)), libm::atan2(z.im, z.re))
    }

    pub fn is_zero(self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    /// Converts to a plain complex number; overflows for `log_mag > ~709`.
    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(libm::exp(self.log_mag), self.phase)
    }

    pub fn conj(self) -> Self {
        Self::new(self.log_mag, -self.phase)
    }

    /// `ln |z|^2`.
    pub fn log_norm_sqr(self) -> f64 {
        2.0 * self.log_mag
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;

    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.log_mag + rhs.log_mag, self.phase + rhs.phase)
    }
}

impl MulAssign for LogComplex {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

/// Running complex sum stored as `exp(reference) * (re + i im)`.
///
/// The reference tracks the largest magnitude added so far, so the scaled
/// parts stay within a few orders of magnitude of one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexAccumulator {
    reference: f64,
    re: f64,
    im: f64,
}

impl Default for ComplexAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl ComplexAccumulator {
    pub const fn new() -> Self {
        Self { reference: f64::NEG_INFINITY, re: 0.0, im: 0.0 }
    }

    pub fn is_empty(&self) -> bool {
        self.reference == f64::NEG_INFINITY
    }

    fn add_scaled(&mut self, log_mag: f64, re: f64, im: f64) {
        if log_mag == f64::NEG_INFINITY {
            return;
        }
        if log_mag > self.reference {
            let scale = libm::exp(self.reference - log_mag);
            self.re *= scale;
            self.im *= scale;
            self.reference = log_mag;
            self.re += re;
            self.im += im;
        } else {
            let scale = libm::exp(log_mag - self.reference);
            self.re += re * scale;
            self.im += im * scale;
        }
    }

    pub fn add(&mut self, z: LogComplex) {
        if z.is_zero() {
            return;
        }
        let (s, c) = libm::sincos(z.phase);
        self.add_scaled(z.log_mag, c, s);
    }

    /// Adds a positive real `exp(log_value)`.
    pub fn add_log_real(&mut self, log_value: f64) {
        self.add_scaled(log_value, 1.0, 0.0);
    }

    pub fn merge(&mut self, other: &ComplexAccumulator) {
        if other.is_empty() {
            return;
        }
        self.add_scaled(other.reference, other.re, other.im);
    }

    pub fn value(&self) -> LogComplex {
        if self.is_empty() {
            return LogComplex::ZERO;
        }
        let m = libm::hypot(self.re, self.im);
        if m == 0.0 {
            return LogComplex::ZERO;
        }
        LogComplex::new(self.reference + libm::log(m), libm::atan2(self.im, self.re))
    }

    /// `ln |sum|^2`; `-inf` when empty or fully cancelled.
    pub fn log_norm_sqr(&self) -> f64 {
        self.value().log_norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::vec::Vec;

    fn close_rel(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * a.norm().max(b.norm())
    }

    #[test]
    fn identity_and_zero() {
        let z = LogComplex::new(3.0, 1.0);
        assert_eq!(z * LogComplex::ONE, z);
        assert!((z * LogComplex::ZERO).is_zero());
    }

    #[test]
    fn phase_normalization() {
        assert_eq!(reduce_phase(PI), PI);
        assert!((reduce_phase(-PI) - PI).abs() < 1e-15);
        assert!((reduce_phase(3.0 * TAU + 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn huge_magnitudes_stay_finite() {
        // e^100 * 50^50 overflows f64 but not here.
        let a = LogComplex::from_real(100.0);
        let b = LogComplex::from_real(50.0 * libm::log(50.0));
        let p = a * b;
        assert!(p.log_mag.is_finite());
        let mut acc = ComplexAccumulator::new();
        acc.add(p);
        acc.add(p);
        assert!((acc.value().log_mag - (p.log_mag + libm::log(2.0))).abs() < 1e-12);
    }

    #[test]
    fn opposite_phases_cancel() {
        let mut acc = ComplexAccumulator::new();
        acc.add(LogComplex::new(0.0, 0.0));
        acc.add(LogComplex::new(0.0, PI));
        assert!(acc.value().log_mag < -30.0);
    }

    proptest! {
        #[test]
        fn multiplication_associative_commutative(
            a in (-50.0f64..50.0, -10.0f64..10.0),
            b in (-50.0f64..50.0, -10.0f64..10.0),
            c in (-50.0f64..50.0, -10.0f64..10.0),
        ) {
            let (a, b, c) = (LogComplex::new(a.0, a.1), LogComplex::new(b.0, b.1), LogComplex::new(c.0, c.1));
            let l = ((a * b) * c).to_complex();
            let r = (a * (b * c)).to_complex();
            let s = (c * (b * a)).to_complex();
            prop_assert!(close_rel(l, r, 1e-12));
            prop_assert!(close_rel(l, s, 1e-12));
        }

        #[test]
        fn accumulator_permutation_invariant(
            terms in proptest::collection::vec((-20.0f64..20.0, -1.0f64..1.0), 1..60),
            seed in any::<u64>(),
        ) {
            let zs: Vec<LogComplex> = terms.iter().map(|&(m, p)| LogComplex::new(m, p)).collect();
            let mut fwd = ComplexAccumulator::new();
            zs.iter().for_each(|z| fwd.add(*z));
            let mut shuffled = zs.clone();
            // Fisher-Yates with a cheap LCG so the case is reproducible from `seed`.
            let mut s = seed | 1;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let mut perm = ComplexAccumulator::new();
            shuffled.iter().for_each(|z| perm.add(*z));
            // merging halves in either order
            let (l, r) = zs.split_at(zs.len() / 2);
            let mut left = ComplexAccumulator::new();
            l.iter().for_each(|z| left.add(*z));
            let mut right = ComplexAccumulator::new();
            r.iter().for_each(|z| right.add(*z));
            let mut merged = right;
            merged.merge(&left);

            let a = fwd.value();
            for other in [perm.value(), merged.value()] {
                prop_assert!((a.log_mag - other.log_mag).abs() <= 1e-12);
                let d = reduce_phase(a.phase - other.phase).abs();
                prop_assert!(d <= 1e-12);
            }
        }
    }
}
