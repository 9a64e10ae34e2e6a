//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment. Keys are listed in the
//! README. Sampler fields left out are derived from the model at
//! validation time.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use gauge_cspi_core::{AccumulationMode, ModelConfig, PerturbationTerm};

use crate::CliError;

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<ModelConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

fn canonical_key(key: &str) -> &str {
    match key {
        "horizon" => "T",
        "steps" => "N",
        "lots" => "M",
        other => other,
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::ConfigSyntax { line, reason: format!("{key}: cannot parse {raw:?}") })
}

/// `a:g, a:g, ...` with an empty string meaning no terms.
fn terms(line: usize, key: &str, raw: &str) -> Result<Vec<(f64, u32)>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (a, g) = t
                .split_once(':')
                .ok_or_else(|| CliError::ConfigSyntax { line, reason: format!("{key}: expected value:gamma, got {t:?}") })?;
            Ok((value(line, key, a.trim())?, value(line, key, g.trim())?))
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<ModelConfig, CliError> {
    let mut c = ModelConfig::default();
    let mut seen = HashSet::new();
    let mut lambda_terms = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, raw) = content
            .split_once('=')
            .ok_or_else(|| CliError::ConfigSyntax { line, reason: format!("expected key = value, got {content:?}") })?;
        let (key, raw) = (canonical_key(key.trim()), raw.trim());
        if !seen.insert(key.to_string()) {
            return Err(CliError::ConfigSyntax { line, reason: format!("{key} given twice") });
        }
        let s = &mut c.sampler;
        match key {
            "sigma" => c.sigma = value(line, key, raw)?,
            "T" => c.horizon = value(line, key, raw)?,
            "N" => c.steps = value(line, key, raw)?,
            "mu" => c.mu = value(line, key, raw)?,
            "r1" => c.r1 = value(line, key, raw)?,
            "r2" => c.r2 = value(line, key, raw)?,
            "tc" => c.tc = value(line, key, raw)?,
            "beta_tilde" => c.beta_tilde = value(line, key, raw)?,
            "M" => c.lots = value(line, key, raw)?,
            "n1" => c.n1 = value(line, key, raw)?,
            "m1" => c.m1 = value(line, key, raw)?,
            "n" => c.n = value(line, key, raw)?,
            "m" => c.m = value(line, key, raw)?,
            "delta_prime" => c.delta_prime = Some(value(line, key, raw)?),
            "perturbation" => {
                c.perturbation = terms(line, key, raw)?.into_iter().map(|(a, g)| PerturbationTerm::new(a, g)).collect()
            }
            "perturbation_lambda" => lambda_terms = Some((line, terms(line, key, raw)?)),
            "seed" => c.seed = value(line, key, raw)?,
            "hydro_samples" => s.hydro_samples = value(line, key, raw)?,
            "chain_length" => s.chain_length = value(line, key, raw)?,
            "burn_in" => s.burn_in = Some(value(line, key, raw)?),
            "thinning" => s.thinning = Some(value(line, key, raw)?),
            "target_acceptance" => s.target_acceptance = value(line, key, raw)?,
            "initial_step" => s.initial_step = Some(value(line, key, raw)?),
            "bin_width" => s.bin_width = Some(value(line, key, raw)?),
            "bin_range" => s.bin_range = Some(value(line, key, raw)?),
            "accumulation_mode" => {
                s.accumulation_mode = AccumulationMode::parse(raw).ok_or_else(|| CliError::ConfigSyntax {
                    line,
                    reason: format!("accumulation_mode must be coherent or incoherent, got {raw:?}"),
                })?
            }
            "replicates" => s.replicates = value(line, key, raw)?,
            "error_bars" => s.error_bars = value(line, key, raw)?,
            other => return Err(CliError::ConfigSyntax { line, reason: format!("unknown key {other:?}") }),
        }
    }
    if let Some((line, lambdas)) = lambda_terms {
        if !c.perturbation.is_empty() {
            return Err(CliError::ConfigSyntax {
                line,
                reason: "give either perturbation or perturbation_lambda, not both".into(),
            });
        }
        for (lambda, gamma) in lambdas {
            if !(lambda > 0.0) {
                return Err(CliError::ConfigSyntax { line, reason: format!("liquidity must be positive, got {lambda}") });
            }
            c.perturbation.push(PerturbationTerm::from_liquidity(c.lots, lambda, gamma));
        }
    }
    Ok(c)
}

/// Renders every field so that [`parse_config`] reproduces `c` exactly.
pub fn render_config(c: &ModelConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
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
    if let Some(d) = c.delta_prime {
        kv("delta_prime", &d);
    }
    let terms: Vec<String> = c.perturbation.iter().map(|t| format!("{}:{}", t.alpha, t.gamma)).collect();
    kv("perturbation", &terms.join(", "));
    kv("seed", &c.seed);
    let s = &c.sampler;
    kv("hydro_samples", &s.hydro_samples);
    kv("chain_length", &s.chain_length);
    for (k, v) in [("burn_in", s.burn_in), ("thinning", s.thinning)] {
        if let Some(v) = v {
            kv(k, &v);
        }
    }
    kv("target_acceptance", &s.target_acceptance);
    for (k, v) in [("initial_step", s.initial_step), ("bin_width", s.bin_width), ("bin_range", s.bin_range)] {
        if let Some(v) = v {
            kv(k, &v);
        }
    }
    kv("accumulation_mode", &s.accumulation_mode.as_str());
    kv("replicates", &s.replicates);
    kv("error_bars", &s.error_bars);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_orderless_file() {
        let c = parse_config("# orderless\nsigma = 0.00648\nT = 10   # horizon\nN = 10\n").unwrap();
        assert_eq!(c, ModelConfig::baseline(0.00648, 10.0, 10));
    }

    #[test]
    fn aliases_and_terms() {
        let c = parse_config("horizon = 2\nsteps = 2\nlots = 4\nperturbation = 0.3:3, 1.1e-3:9").unwrap();
        assert_eq!((c.horizon, c.steps, c.lots), (2.0, 2, 4));
        assert_eq!(c.perturbation, vec![PerturbationTerm::new(0.3, 3), PerturbationTerm::new(1.1e-3, 9)]);
    }

    #[test]
    fn liquidity_is_converted() {
        let c = parse_config("M = 100\nperturbation_lambda = 400:3").unwrap();
        assert_eq!(c.perturbation, vec![PerturbationTerm::new(0.25, 3)]);
        assert!(parse_config("perturbation = 0.1:3\nperturbation_lambda = 400:3").is_err());
    }

    #[test]
    fn syntax_errors_cite_lines() {
        let err = |t: &str| match parse_config(t) {
            Err(CliError::ConfigSyntax { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(err("sigma = 1\nbogus = 2"), 2);
        assert_eq!(err("sigma = x"), 1);
        assert_eq!(err("\nsigma = 1\nsigma = 2"), 3);
        assert_eq!(err("perturbation = 0.3"), 1);
        assert_eq!(err("accumulation_mode = loud"), 1);
        assert_eq!(err("just words"), 1);
    }

    #[test]
    fn render_round_trips() {
        let mut c = ModelConfig::baseline(6.28e-5, 10.0, 80)
            .with_perturbation(&[PerturbationTerm::new(2.6e-3, 3), PerturbationTerm::new(1.1e-3, 9)]);
        c.sampler.burn_in = Some(7);
        c.sampler.bin_width = Some(1.0 / 3.0);
        c.sampler.accumulation_mode = AccumulationMode::Incoherent;
        c.delta_prime = Some(0.1);
        assert_eq!(parse_config(&render_config(&c)).unwrap(), c);
        let d = ModelConfig::default();
        assert_eq!(parse_config(&render_config(&d)).unwrap(), d);
    }
}
