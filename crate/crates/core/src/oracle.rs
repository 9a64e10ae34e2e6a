//! Deterministic quadrature of the full integrand for tiny instances.
//!
//! Allocations `rho_i` use a midpoint rule on `[0, 1]`; intermediate
//! log-prices sit on the histogram bin centers (midpoint rule) and the final
//! log-price is integrated exactly over each bin against the Gaussian link.
//! The phases are integrated in closed form: for fixed `rho` and prices the
//! propagator factorizes into two chains
//!
//! ```text
//! P: phi2_0 -> phi1_1 -> phi2_2 -> phi1_3
//! Q: phi1_0 -> phi2_1 -> phi1_2 -> phi2_3
//! ```
//!
//! whose links are `exp(c e^{i(u_next - u_prev)})`. Expanding every link in
//! powers of `c` leaves one-dimensional integrals of `e^{i k u}` over
//! `[0, 2 pi)`, which are elementary.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;
use core::ops::Range;
use num_complex::Complex64;

use crate::action::perturbation_drift;
use crate::amplitude::hamiltonian_entries;
use crate::engine::config_grid;
use crate::estimator::{normal_interval_mass, BinGrid, Estimator, EstimatorError, PdfHistogram, PdfMeta};
use crate::params::ValidatedConfig;

pub const MAX_STEPS: usize = 3;
pub const MAX_LOTS: u32 = 4;
pub const MIN_GRID_POINTS: usize = 8;

/// Relative size below which series terms and Gaussian weights are dropped.
const CUTOFF: f64 = 1e-17;

#[derive(Clone, Debug, PartialEq)]
pub enum OracleError {
    Dimension { steps: usize, lots: u32 },
    GridTooSmall { grid_points: usize },
    Estimator(EstimatorError),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::Dimension { steps, lots } => write!(
                f,
                "quadrature needs N <= {MAX_STEPS} and M <= {MAX_LOTS}, got N = {steps}, M = {lots}"
            ),
            OracleError::GridTooSmall { grid_points } => {
                write!(f, "grid_points = {grid_points}, minimum {MIN_GRID_POINTS}")
            }
            OracleError::Estimator(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for OracleError {}

impl From<EstimatorError> for OracleError {
    fn from(e: EstimatorError) -> Self {
        OracleError::Estimator(e)
    }
}

pub fn check_dimensions(config: &ValidatedConfig, grid_points: usize) -> Result<(), OracleError> {
    let lots = config.config().lots;
    if config.steps() > MAX_STEPS || lots > MAX_LOTS {
        return Err(OracleError::Dimension { steps: config.steps(), lots });
    }
    if grid_points < MIN_GRID_POINTS {
        return Err(OracleError::GridTooSmall { grid_points });
    }
    Ok(())
}

/// `int_0^{2 pi} e^{i (kappa + m) u} du` for integer shifts `m`.
#[derive(Clone, Copy, Debug)]
struct PhaseSite {
    kappa: f64,
    /// `e^{2 pi i kappa} - 1`, shared by every shift.
    numerator: Complex64,
}

impl PhaseSite {
    fn new(kappa: f64) -> Self {
        let (s, c) = libm::sincos(TAU * kappa);
        Self { kappa, numerator: Complex64::new(c - 1.0, s) }
    }

    fn integral(&self, shift: i64) -> Complex64 {
        let k = self.kappa + shift as f64;
        if libm::fabs(k) < 1e-9 {
            // limit of (e^{2 pi i k} - 1)/(i k)
            return Complex64::new(TAU, PI * TAU * k);
        }
        // numerator / (i k)
        Complex64::new(self.numerator.im / k, -self.numerator.re / k)
    }
}

/// `c^l / l!` until the terms are negligible.
fn series_terms(c: f64, out: &mut Vec<f64>) {
    out.clear();
    let mut t = 1.0;
    let mut peak = 1.0f64;
    let mut l = 0usize;
    loop {
        out.push(t);
        l += 1;
        t *= c / l as f64;
        peak = peak.max(t);
        if (l as f64) > c && t <= CUTOFF * peak {
            break;
        }
    }
}

/// One phase chain for fixed allocations.
#[derive(Clone, Debug)]
struct Chain {
    sites: Vec<PhaseSite>,
    /// Link coefficient at `x = 0` and the sign of its price exponent.
    base: Vec<f64>,
    sign: Vec<f64>,
}

/// Per-allocation quantities shared by both chains.
#[derive(Clone, Debug)]
struct Allocation {
    chains: [Chain; 2],
    /// Boundary magnitudes times the interior measure.
    weight: f64,
}

impl Allocation {
    fn new(rho: &[f64], config: &ValidatedConfig) -> Self {
        let c = config.config();
        let steps = rho.len() - 1;
        let lots = config.lots();
        let delta = config.delta();
        let a = |j: usize| libm::sqrt(rho[j + 1] * rho[j]);
        let b = |j: usize| libm::sqrt((1.0 - rho[j + 1]) * (1.0 - rho[j]));
        let mut kappa1 = alloc::vec![0.0; steps + 1];
        let mut kappa2 = alloc::vec![0.0; steps + 1];
        for j in 0..steps {
            kappa1[j] -= lots * a(j);
            kappa1[j + 1] += lots * a(j);
            kappa2[j] -= lots * b(j);
            kappa2[j + 1] += lots * b(j);
        }
        kappa1[0] += f64::from(c.n1);
        kappa2[0] += f64::from(c.m1);
        kappa1[steps] -= f64::from(c.n);
        kappa2[steps] -= f64::from(c.m);

        let mut up = Vec::with_capacity(steps);
        let mut down = Vec::with_capacity(steps);
        for j in 0..steps {
            let (h12, h21) = hamiltonian_entries(0.0, j as f64 * delta, config);
            up.push(lots * h12 * delta * libm::sqrt(rho[j + 1] * (1.0 - rho[j])));
            down.push(lots * h21 * delta * libm::sqrt((1.0 - rho[j + 1]) * rho[j]));
        }
        let chain = |starts_on_second: bool| {
            let mut sites = Vec::with_capacity(steps + 1);
            let mut base = Vec::with_capacity(steps);
            let mut sign = Vec::with_capacity(steps);
            for j in 0..=steps {
                let second = starts_on_second == (j % 2 == 0);
                sites.push(PhaseSite::new(if second { kappa2[j] } else { kappa1[j] }));
                if j < steps {
                    // from a phi2 site the link is H_12 (S^beta), from phi1 it is H_21
                    if second {
                        base.push(up[j]);
                        sign.push(1.0);
                    } else {
                        base.push(down[j]);
                        sign.push(-1.0);
                    }
                }
            }
            Chain { sites, base, sign }
        };

        let power = |e: u32, x: f64| if e == 0 { 1.0 } else { libm::pow(x, 0.5 * f64::from(e)) };
        let (r0, rn) = (rho[0], rho[steps]);
        let mut weight = power(c.n1, lots * r0)
            * power(c.m1, lots * (1.0 - r0))
            * power(c.n, lots * rn)
            * power(c.m, lots * (1.0 - rn));
        for &r in &rho[1..steps] {
            weight *= r * (1.0 - r) / (PI * PI);
        }
        Self { chains: [chain(true), chain(false)], weight }
    }
}

/// `W(l) = sum_m V(m) I(kappa + m - l)` for `l < len`.
fn convolve(v: &[Complex64], site: &PhaseSite, len: usize, out: &mut Vec<Complex64>) {
    out.clear();
    for l in 0..len {
        let mut s = Complex64::new(0.0, 0.0);
        for (m, vm) in v.iter().enumerate() {
            s += vm * site.integral(m as i64 - l as i64);
        }
        out.push(s);
    }
}

fn finish(v: &[Complex64], site: &PhaseSite) -> Complex64 {
    v.iter().enumerate().map(|(m, vm)| vm * site.integral(m as i64)).sum()
}

/// The phase integral of the propagator times the boundary factor, for
/// given allocations and log-prices, evaluated link by link without any of
/// the reuse the quadrature relies on. Gaussian weight and measure excluded.
pub fn phase_integrated_amplitude(rho: &[f64], path: &[f64], config: &ValidatedConfig) -> Complex64 {
    let alloc = Allocation::new(rho, config);
    let beta = config.config().beta_tilde;
    let steps = rho.len() - 1;
    let mut total = Complex64::new(1.0, 0.0);
    let mut terms = Vec::new();
    let mut w = Vec::new();
    for chain in &alloc.chains {
        let mut v = alloc::vec![Complex64::new(1.0, 0.0)];
        for j in 0..steps {
            let c = chain.base[j] * libm::exp(chain.sign[j] * beta * path[j]);
            series_terms(c, &mut terms);
            convolve(&v, &chain.sites[j], terms.len(), &mut w);
            v = w.iter().zip(&terms).map(|(a, t)| a * t).collect();
        }
        total *= finish(&v, &chain.sites[steps]);
    }
    let c = config.config();
    let price = -beta * (f64::from(c.n) - f64::from(c.m)) * path[steps] / 2.0;
    let mut weight = alloc.weight;
    for &r in &rho[1..steps] {
        weight /= r * (1.0 - r) / (PI * PI);
    }
    total * weight * libm::exp(price)
}

/// Gaussian link weights indexed by allocation change and bin offset.
struct LinkTables {
    offsets: usize,
    /// `w * pdf(offset w - shift)`, for intermediate prices on bin centers.
    density: Vec<Vec<f64>>,
    /// Mass of the bin at `offset` around a start on a bin center.
    mass: Vec<Vec<f64>>,
    /// Offset ranges holding non-negligible weight.
    density_span: Vec<Range<i64>>,
    mass_span: Vec<Range<i64>>,
}

fn span(row: &[f64], offsets: usize) -> Range<i64> {
    let peak = row.iter().copied().fold(0.0, f64::max);
    let keep = |v: &f64| *v > CUTOFF * peak;
    let lo = row.iter().position(keep).unwrap_or(0);
    let hi = row.iter().rposition(keep).map_or(0, |p| p + 1);
    (lo as i64 - offsets as i64 + 1)..(hi as i64 - offsets as i64 + 1)
}

impl LinkTables {
    fn new(config: &ValidatedConfig, grid: BinGrid, grid_points: usize) -> Self {
        let sd = config.sigma() * libm::sqrt(config.delta());
        let mu_delta = config.config().mu * config.delta();
        let offsets = grid.n;
        let w = grid.width;
        let norm = w / (sd * libm::sqrt(TAU));
        let mut density = Vec::new();
        let mut mass = Vec::new();
        let mut density_span = Vec::new();
        let mut mass_span = Vec::new();
        for d in 0..2 * grid_points - 1 {
            let drho = (d as f64 - (grid_points - 1) as f64) / grid_points as f64;
            let shift = mu_delta + perturbation_drift(drho, config.terms());
            let offs = (0..2 * offsets - 1).map(|k| (k as f64 - (offsets - 1) as f64) * w);
            let dens: Vec<f64> = offs
                .clone()
                .map(|o| {
                    let z = (o - shift) / sd;
                    norm * libm::exp(-0.5 * z * z)
                })
                .collect();
            let mas: Vec<f64> = offs.map(|o| normal_interval_mass(o - 0.5 * w, o + 0.5 * w, shift, sd)).collect();
            density_span.push(span(&dens, offsets));
            mass_span.push(span(&mas, offsets));
            density.push(dens);
            mass.push(mas);
        }
        Self { offsets, density, mass, density_span, mass_span }
    }

    fn at(row: &[f64], offsets: usize, off: i64) -> f64 {
        row[(off + offsets as i64 - 1) as usize]
    }
}

struct Quadrature<'a> {
    config: &'a ValidatedConfig,
    grid: BinGrid,
    grid_points: usize,
    tables: LinkTables,
    beta: f64,
}

/// Scratch vectors for one level of the price recursion.
#[derive(Default)]
struct Level {
    next: [Vec<Complex64>; 2],
    conv: [Vec<Complex64>; 2],
    terms: Vec<f64>,
}

impl Quadrature<'_> {
    fn drift_index(&self, k: &[usize], j: usize) -> usize {
        k[j + 1] + self.grid_points - 1 - k[j]
    }

    fn link_coefficient(&self, chain: &Chain, j: usize, x: f64) -> f64 {
        chain.base[j] * libm::exp(chain.sign[j] * self.beta * x)
    }

    /// Adds the contribution of one allocation cell to `amp`.
    fn cell(&self, k: &[usize], levels: &mut [Level], amp: &mut [Complex64]) {
        let rho: Vec<f64> = k.iter().map(|&i| (i as f64 + 0.5) / self.grid_points as f64).collect();
        let alloc = Allocation::new(&rho, self.config);
        if alloc.weight == 0.0 {
            return;
        }
        let one = [Complex64::new(1.0, 0.0)];
        let mut conv: [Vec<Complex64>; 2] = Default::default();
        let mut terms = Vec::new();
        for (ci, chain) in alloc.chains.iter().enumerate() {
            series_terms(self.link_coefficient(chain, 0, 0.0), &mut terms);
            convolve(&one, &chain.sites[0], terms.len(), &mut conv[ci]);
        }
        self.level(&alloc, k, 0, self.zero_bin(), alloc.weight, &conv, levels, amp);
    }

    /// Level `j` fixes `x_j` at the center of bin `bin`. `conv` holds the
    /// chains' site-`j` sums, which depend only on earlier prices.
    #[allow(clippy::too_many_arguments)]
    fn level(
        &self,
        alloc: &Allocation,
        k: &[usize],
        j: usize,
        bin: i64,
        weight: f64,
        conv: &[Vec<Complex64>; 2],
        levels: &mut [Level],
        amp: &mut [Complex64],
    ) {
        let steps = k.len() - 1;
        let x = self.grid.center(bin as usize);
        let (here, rest) = levels.split_first_mut().expect("one scratch level per step");
        for (ci, chain) in alloc.chains.iter().enumerate() {
            series_terms(self.link_coefficient(chain, j, x), &mut here.terms);
            here.next[ci].clear();
            here.next[ci].extend(conv[ci].iter().zip(&here.terms).map(|(a, t)| a * t));
        }
        let d = self.drift_index(k, j);
        let in_grid = |off: &i64| (0..self.grid.n as i64).contains(&(bin + off));
        if j + 1 == steps {
            let phi = finish(&here.next[0], &alloc.chains[0].sites[steps])
                * finish(&here.next[1], &alloc.chains[1].sites[steps]);
            let row = &self.tables.mass[d];
            for off in self.tables.mass_span[d].clone().filter(in_grid) {
                amp[(bin + off) as usize] += phi * (weight * LinkTables::at(row, self.tables.offsets, off));
            }
            return;
        }
        let offs = self.tables.density_span[d].clone().filter(in_grid);
        let mut longest = 0;
        for (ci, chain) in alloc.chains.iter().enumerate() {
            for off in offs.clone() {
                series_terms(self.link_coefficient(chain, j + 1, self.grid.center((bin + off) as usize)), &mut here.terms);
                longest = longest.max(here.terms.len());
            }
            convolve(&here.next[ci], &chain.sites[j + 1], longest, &mut here.conv[ci]);
        }
        let row = &self.tables.density[d];
        for off in offs {
            let w = weight * LinkTables::at(row, self.tables.offsets, off);
            self.level(alloc, k, j + 1, bin + off, w, &here.conv, rest, amp);
        }
    }

    /// Bin whose center is `x_0 = 0` (the config grid is centered).
    fn zero_bin(&self) -> i64 {
        let b = libm::round(-self.grid.lo / self.grid.width - 0.5);
        b as i64
    }
}

/// Unnormalized complex amplitude per bin from the allocation cells whose
/// `rho_0` index lies in `rho0_cells` (a subrange of `0..grid_points`).
/// Summing the results over a partition of `0..grid_points` gives the full
/// quadrature.
pub fn oracle_amplitudes(
    config: &ValidatedConfig,
    grid_points: usize,
    rho0_cells: Range<usize>,
) -> Result<Vec<Complex64>, OracleError> {
    check_dimensions(config, grid_points)?;
    Ok(amplitudes(config, grid_points, rho0_cells))
}

fn amplitudes(config: &ValidatedConfig, grid_points: usize, rho0_cells: Range<usize>) -> Vec<Complex64> {
    let grid = config_grid(config);
    let q = Quadrature {
        config,
        grid,
        grid_points,
        tables: LinkTables::new(config, grid, grid_points),
        beta: config.config().beta_tilde,
    };
    debug_assert!(libm::fabs(grid.center(q.zero_bin() as usize)) < 1e-9 * grid.width);
    let steps = config.steps();
    let mut amp = alloc::vec![Complex64::new(0.0, 0.0); grid.n];
    let mut levels: Vec<Level> = (0..steps).map(|_| Level::default()).collect();
    let mut k = alloc::vec![0usize; steps + 1];
    for k0 in rho0_cells {
        k[0] = k0;
        for rest in 0..grid_points.pow(steps as u32) {
            let mut r = rest;
            for slot in k[1..].iter_mut() {
                *slot = r % grid_points;
                r /= grid_points;
            }
            q.cell(&k, &mut levels, &mut amp);
        }
    }
    amp
}

/// Density `|amplitude|^2` with the final-price boundary factor, normalized.
pub fn pdf_from_amplitudes(config: &ValidatedConfig, amp: &[Complex64]) -> Result<PdfHistogram, OracleError> {
    let grid = config_grid(config);
    let c = config.config();
    let tilt = -c.beta_tilde * (f64::from(c.n) - f64::from(c.m)) / 2.0;
    let masses: Vec<f64> = amp
        .iter()
        .enumerate()
        .map(|(b, a)| {
            let f = libm::exp(tilt * grid.center(b));
            a.norm_sqr() * f * f
        })
        .collect();
    let mut meta = PdfMeta::new(Estimator::Quadrature);
    meta.fingerprint = config.fingerprint();
    Ok(PdfHistogram::from_masses(grid, &masses, meta)?)
}

/// Quadrature density over the config's histogram grid. `stderr` holds the
/// discretization estimate `|p(grid_points) - p(grid_points / 2)|` per bin.
pub fn brute_force_pdf(config: &ValidatedConfig, grid_points: usize) -> Result<PdfHistogram, OracleError> {
    check_dimensions(config, grid_points)?;
    let fine = pdf_from_amplitudes(config, &oracle_amplitudes(config, grid_points, 0..grid_points)?)?;
    let half = grid_points / 2;
    let coarse = pdf_from_amplitudes(config, &amplitudes(config, half, 0..half))?;
    Ok(with_discretization(fine, &coarse))
}

/// Attaches `|fine - coarse|` as the per-bin error estimate.
pub fn with_discretization(mut fine: PdfHistogram, coarse: &PdfHistogram) -> PdfHistogram {
    for (s, (a, b)) in fine.stderr.iter_mut().zip(fine.density.iter().zip(&coarse.density)) {
        *s = libm::fabs(a - b);
    }
    fine
}
