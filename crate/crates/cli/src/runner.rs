//! Thread-pool execution of Monte Carlo runs and quadratures.
//!
//! Work is cut into fixed index blocks that do not depend on the worker
//! count, and block results are merged in index order, so totals are
//! bit-identical for any number of workers.

use std::ops::Range;

use gauge_cspi_core::engine::{check_budget, config_grid, run_baseline_range, run_hydro_range, DEFAULT_BUDGET};
use gauge_cspi_core::oracle::{check_dimensions, oracle_amplitudes, pdf_from_amplitudes, with_discretization};
use gauge_cspi_core::{OracleError, PdfHistogram, RawAccumulators, RunError, RunOptions, ValidatedConfig};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::CliError;

/// Chains per work item.
pub const BLOCK: u64 = 64;

/// Environment variable overriding the sample-count cap.
pub const BUDGET_VAR: &str = "GAUGE_CSPI_BUDGET";

/// The cap from [`BUDGET_VAR`], or the default when unset.
pub fn budget_from_env() -> Result<u64, CliError> {
    match std::env::var(BUDGET_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::config(format!("{BUDGET_VAR} must be an integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

#[derive(Debug)]
pub struct Runner {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Runner {
    pub fn new(workers: usize) -> Result<Self, CliError> {
        if workers == 0 {
            return Err(CliError::config("workers must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn blocks(total: u64) -> Vec<Range<u64>> {
        (0..total.div_ceil(BLOCK)).map(|k| k * BLOCK..((k + 1) * BLOCK).min(total)).collect()
    }

    fn merged(&self, config: &ValidatedConfig, amplitude: bool, run: impl Fn(Range<u64>) -> RawAccumulators + Sync) -> RawAccumulators {
        let parts: Vec<RawAccumulators> =
            self.pool.install(|| Self::blocks(config.sampler().hydro_samples).into_par_iter().map(&run).collect());
        let mut total = RawAccumulators::new(config_grid(config), amplitude);
        for p in &parts {
            total.merge(p);
        }
        total
    }

    /// Full generalized-model run.
    pub fn simulate(&self, config: &ValidatedConfig, options: &RunOptions) -> Result<RawAccumulators, RunError> {
        check_budget(config, options)?;
        let amplitude = options.weighting == gauge_cspi_core::engine::Weighting::Residual;
        Ok(self.merged(config, amplitude, |r| run_hydro_range(config, options, r)))
    }

    /// Orderless baseline run.
    pub fn baseline(&self, config: &ValidatedConfig, options: &RunOptions) -> Result<RawAccumulators, RunError> {
        check_budget(config, options)?;
        Ok(self.merged(config, false, |r| run_baseline_range(config, options, r)))
    }

    /// Quadrature amplitudes, one `rho_0` cell per work item.
    pub fn amplitudes(&self, config: &ValidatedConfig, grid_points: usize) -> Result<Vec<Complex64>, OracleError> {
        check_dimensions(config, grid_points)?;
        let parts: Vec<Vec<Complex64>> = self.pool.install(|| {
            (0..grid_points).into_par_iter().map(|k| oracle_amplitudes(config, grid_points, k..k + 1)).collect::<Result<_, _>>()
        })?;
        let mut total = vec![Complex64::new(0.0, 0.0); config_grid(config).n];
        for p in &parts {
            for (t, a) in total.iter_mut().zip(p) {
                *t += a;
            }
        }
        Ok(total)
    }

    pub fn oracle_pdf(&self, config: &ValidatedConfig, grid_points: usize) -> Result<PdfHistogram, OracleError> {
        pdf_from_amplitudes(config, &self.amplitudes(config, grid_points)?)
    }

    /// Quadrature density with `|p(G) - p(G/2)|` as the per-bin error.
    pub fn brute_force_pdf(&self, config: &ValidatedConfig, grid_points: usize) -> Result<PdfHistogram, OracleError> {
        let fine = self.oracle_pdf(config, grid_points)?;
        let coarse = self.oracle_pdf(config, grid_points / 2);
        match coarse {
            Ok(coarse) => Ok(with_discretization(fine, &coarse)),
            // G/2 below the minimum: pair with the core routine's coarse level
            Err(OracleError::GridTooSmall { .. }) => gauge_cspi_core::brute_force_pdf(config, grid_points),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gauge_cspi_core::engine::run_simulation;
    use gauge_cspi_core::{ModelConfig, PerturbationTerm};

    fn small(hydro: u64) -> ValidatedConfig {
        let mut c = ModelConfig::baseline(0.05, 2.0, 2)
            .with_symmetric_lots(2)
            .with_perturbation(&[PerturbationTerm::new(0.3, 3)]);
        c.sampler.hydro_samples = hydro;
        c.sampler.chain_length = 5;
        c.sampler.bin_width = Some(0.02);
        c.sampler.bin_range = Some(1.0);
        c.validate().unwrap()
    }

    #[test]
    fn worker_count_does_not_change_totals() {
        let c = small(200);
        let o = RunOptions::default();
        let one = Runner::new(1).unwrap().simulate(&c, &o).unwrap();
        let three = Runner::new(3).unwrap().simulate(&c, &o).unwrap();
        assert_eq!(one, three);
        let serial = run_simulation(&c, &o).unwrap();
        assert_eq!(one.counts, serial.counts);
        for (a, b) in one.coherent.iter().zip(&serial.coherent) {
            let (a, b) = (a.value().to_complex(), b.value().to_complex());
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn parallel_quadrature_matches_serial() {
        let c = small(1);
        let par = Runner::new(2).unwrap().brute_force_pdf(&c, 16).unwrap();
        let ser = gauge_cspi_core::brute_force_pdf(&c, 16).unwrap();
        for (a, b) in par.density.iter().zip(&ser.density) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-12));
        }
        assert!(Runner::new(0).is_err());
    }

    #[test]
    fn budget_is_checked() {
        let c = small(1000);
        let o = RunOptions { budget_cap: 10, ..RunOptions::default() };
        assert!(matches!(Runner::new(1).unwrap().simulate(&c, &o), Err(RunError::Budget { .. })));
    }
}
