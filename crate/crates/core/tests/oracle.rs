use std::f64::consts::TAU;

use gauge_cspi_core::amplitude::{boundary_log_factor, propagator_log_amplitude};
use gauge_cspi_core::estimator::{compare_pdfs, moments, normal_interval_mass};
use gauge_cspi_core::oracle::{
    brute_force_pdf, oracle_amplitudes, pdf_from_amplitudes, phase_integrated_amplitude, OracleError,
};
use gauge_cspi_core::{HydroConfig, ModelConfig, PerturbationTerm, ValidatedConfig};
use num_complex::Complex64;

fn tiny(steps: u32, lots: u32, alpha: f64) -> ValidatedConfig {
    let mut c = ModelConfig::baseline(0.05, f64::from(steps), steps).with_symmetric_lots(lots);
    if alpha != 0.0 {
        c = c.with_perturbation(&[PerturbationTerm::new(alpha, 3)]);
    }
    c.sampler.bin_width = Some(0.02);
    c.sampler.bin_range = Some(1.0);
    c.validate().unwrap()
}

/// Gauss-Legendre nodes and weights mapped to `[0, 2 pi]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (std::f64::consts::PI * (x + 1.0), std::f64::consts::PI * w)
        })
        .collect()
}

#[test]
fn closed_form_phase_integral_matches_numerical_quadrature() {
    let c = tiny(1, 2, 0.3);
    let rho = [0.3, 0.8];
    let path = [0.0, 0.07];
    let nodes = gauss_legendre(24);
    assert!((nodes.iter().map(|n| n.1).sum::<f64>() - TAU).abs() < 1e-12);
    let mut total = Complex64::new(0.0, 0.0);
    for &(a, wa) in &nodes {
        for &(b, wb) in &nodes {
            for &(p, wp) in &nodes {
                for &(q, wq) in &nodes {
                    let hydro = HydroConfig::new(rho.to_vec(), vec![a, p], vec![b, q]).unwrap();
                    let z = propagator_log_amplitude(&hydro, &path, &c) * boundary_log_factor(&hydro, &path, &c);
                    total += z.to_complex() * (wa * wb * wp * wq);
                }
            }
        }
    }
    let closed = phase_integrated_amplitude(&rho, &path, &c);
    let rel = (closed - total).norm() / closed.norm();
    assert!(rel < 1e-9, "closed {closed} numerical {total} rel {rel}");
}

/// Direct tensor-product sum over allocations, intermediate price and final
/// bin, built on the link-by-link phase integral.
fn direct_pdf(c: &ValidatedConfig, g: usize) -> Vec<f64> {
    let grid = gauge_cspi_core::engine::config_grid(c);
    let sd = c.sigma() * c.delta().sqrt();
    let term = c.terms()[0];
    let drift = |d: f64| 2.0 * term.alpha * d * d * d;
    let mut amp = vec![Complex64::new(0.0, 0.0); grid.n];
    let mid = |k: usize| (k as f64 + 0.5) / g as f64;
    for k0 in 0..g {
        for k1 in 0..g {
            for k2 in 0..g {
                let rho = [mid(k0), mid(k1), mid(k2)];
                let measure = rho[1] * (1.0 - rho[1]) / (std::f64::consts::PI.powi(2));
                let (s0, s1) = (drift(rho[1] - rho[0]), drift(rho[2] - rho[1]));
                for j in 0..grid.n {
                    let x1 = grid.center(j);
                    let z = (x1 - s0) / sd;
                    let w1 = grid.width * (-0.5 * z * z).exp() / (sd * TAU.sqrt());
                    if w1 < 1e-30 {
                        continue;
                    }
                    let phi = phase_integrated_amplitude(&rho, &[0.0, x1, 0.0], c);
                    for (b, a) in amp.iter_mut().enumerate() {
                        let m = normal_interval_mass(grid.edge(b), grid.edge(b + 1), x1 + s1, sd);
                        *a += phi * (measure * w1 * m);
                    }
                }
            }
        }
    }
    let p: Vec<f64> = amp.iter().map(|a| a.norm_sqr()).collect();
    let total: f64 = p.iter().sum::<f64>() * grid.width;
    p.iter().map(|v| v / total).collect()
}

#[test]
fn quadrature_matches_direct_sum() {
    let c = tiny(2, 2, 0.3);
    let fast = pdf_from_amplitudes(&c, &oracle_amplitudes(&c, 8, 0..8).unwrap()).unwrap();
    let slow = direct_pdf(&c, 8);
    let peak = fast.density.iter().copied().fold(0.0, f64::max);
    for (b, (a, d)) in fast.density.iter().zip(&slow).enumerate() {
        assert!((a - d).abs() <= 1e-9 * peak, "bin {b}: {a} vs {d}");
    }
}

#[test]
fn amplitude_partition_is_additive() {
    let c = tiny(2, 2, 0.3);
    let whole = oracle_amplitudes(&c, 8, 0..8).unwrap();
    let a = oracle_amplitudes(&c, 8, 0..3).unwrap();
    let b = oracle_amplitudes(&c, 8, 3..8).unwrap();
    for ((w, x), y) in whole.iter().zip(&a).zip(&b) {
        assert!((w - (x + y)).norm() <= 1e-12 * w.norm().max(1e-300));
    }
}

#[test]
fn oracle_density_is_normalized_and_converges() {
    let c = tiny(2, 2, 0.3);
    let p16 = brute_force_pdf(&c, 16).unwrap();
    let p32 = brute_force_pdf(&c, 32).unwrap();
    assert!(p32.density.iter().all(|&d| d >= 0.0));
    assert!((p32.total_mass() - 1.0).abs() < 1e-9);
    let r = compare_pdfs(&p16, &p32, 0.15).unwrap();
    assert!(r.tv < 0.01, "TV between grids 16 and 32: {}", r.tv);
}

#[test]
fn cubic_order_flow_fattens_the_oracle_tails() {
    let with = moments(&brute_force_pdf(&tiny(2, 2, 0.3), 32).unwrap()).unwrap();
    let without = moments(&brute_force_pdf(&tiny(2, 2, 0.0), 32).unwrap()).unwrap();
    assert!(with.kurtosis > without.kurtosis, "{} vs {}", with.kurtosis, without.kurtosis);
}

#[test]
fn oracle_rejects_large_instances() {
    let big = ModelConfig::baseline(0.05, 10.0, 10).with_symmetric_lots(2).validate().unwrap();
    assert_eq!(brute_force_pdf(&big, 16), Err(OracleError::Dimension { steps: 10, lots: 2 }));
    let many_lots = ModelConfig::baseline(0.05, 2.0, 2).with_symmetric_lots(6).validate().unwrap();
    assert!(matches!(brute_force_pdf(&many_lots, 16), Err(OracleError::Dimension { .. })));
    assert_eq!(brute_force_pdf(&tiny(2, 2, 0.3), 4), Err(OracleError::GridTooSmall { grid_points: 4 }));
}
