//! Tab-separated outputs. Every file opens with `# key = value` header
//! lines; numbers are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use gauge_cspi_core::engine::HydroDiagnostic;
use gauge_cspi_core::estimator::{Estimator, MomentReport, PdfMeta};
use gauge_cspi_core::{BinGrid, ComparisonReport, PdfHistogram};

use crate::CliError;

pub const PDF_COLUMNS: &str = "x_center\tdensity\tlog10_density\tstderr\tcount";

fn header(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "# {key} = {value}");
}

pub fn render_pdf(pdf: &PdfHistogram) -> String {
    let mut out = String::new();
    let m = &pdf.meta;
    header(&mut out, "fingerprint", &m.fingerprint);
    header(&mut out, "estimator", m.estimator.as_str());
    header(&mut out, "samples", m.samples);
    header(&mut out, "underflow", m.underflow);
    header(&mut out, "overflow", m.overflow);
    header(&mut out, "replicates", m.replicates);
    header(&mut out, "bin_lo", pdf.grid.lo);
    header(&mut out, "bin_width", pdf.grid.width);
    header(&mut out, "n_bins", pdf.grid.n);
    out.push_str(PDF_COLUMNS);
    out.push('\n');
    for b in 0..pdf.grid.n {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            pdf.grid.center(b),
            pdf.density[b],
            pdf.log10_density(b),
            pdf.stderr[b],
            pdf.counts[b]
        );
    }
    out
}

fn format_err(path: &Path, reason: impl Into<String>) -> CliError {
    CliError::Format { path: path.to_path_buf(), reason: reason.into() }
}

/// Parses `# key = value` headers, returning them and the remaining lines.
fn split_headers(text: &str) -> (Vec<(&str, &str)>, Vec<&str>) {
    let mut headers = Vec::new();
    let mut body = Vec::new();
    for line in text.lines() {
        if let Some(h) = line.strip_prefix('#') {
            if let Some((k, v)) = h.split_once('=') {
                headers.push((k.trim(), v.trim()));
            }
        } else if !line.trim().is_empty() {
            body.push(line);
        }
    }
    (headers, body)
}

pub fn parse_pdf(text: &str, path: &Path) -> Result<PdfHistogram, CliError> {
    let (headers, body) = split_headers(text);
    let get = |key: &str| {
        headers.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(|| format_err(path, format!("missing header {key}")))
    };
    let num = |key: &str| -> Result<f64, CliError> {
        get(key)?.parse().map_err(|_| format_err(path, format!("bad header {key}")))
    };
    let int = |key: &str| -> Result<u64, CliError> {
        get(key)?.parse().map_err(|_| format_err(path, format!("bad header {key}")))
    };
    let estimator = Estimator::parse(get("estimator")?).ok_or_else(|| format_err(path, "unknown estimator"))?;
    let mut meta = PdfMeta::new(estimator);
    meta.fingerprint = get("fingerprint")?.to_string();
    meta.samples = int("samples")?;
    meta.underflow = int("underflow")?;
    meta.overflow = int("overflow")?;
    meta.replicates = int("replicates")? as u32;
    let grid = BinGrid { lo: num("bin_lo")?, width: num("bin_width")?, n: int("n_bins")? as usize };
    let mut rows = body.into_iter();
    if rows.next() != Some(PDF_COLUMNS) {
        return Err(format_err(path, "missing column header"));
    }
    let (mut density, mut stderr, mut counts) = (Vec::new(), Vec::new(), Vec::new());
    for (i, row) in rows.enumerate() {
        let f: Vec<&str> = row.split('\t').collect();
        let bad = || format_err(path, format!("bad row {}", i + 1));
        if f.len() != 5 {
            return Err(bad());
        }
        density.push(f[1].parse::<f64>().map_err(|_| bad())?);
        stderr.push(f[3].parse::<f64>().map_err(|_| bad())?);
        counts.push(f[4].parse::<u64>().map_err(|_| bad())?);
    }
    if density.len() != grid.n {
        return Err(format_err(path, format!("{} rows for {} bins", density.len(), grid.n)));
    }
    Ok(PdfHistogram { grid, density, stderr, counts, meta })
}

pub fn read_pdf(path: &Path) -> Result<PdfHistogram, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_pdf(&text, path)
}

/// Key / value / replicate-std table. The std column is `NA` for a single
/// replicate.
pub fn render_moments(report: &MomentReport, fingerprint: &str) -> String {
    let mut out = String::new();
    header(&mut out, "fingerprint", fingerprint);
    header(&mut out, "replicates", report.replicates);
    out.push_str("key\tvalue\tstd\n");
    for (k, e) in report.entries() {
        if report.replicates >= 2 {
            let _ = writeln!(out, "{k}\t{}\t{}", e.value, e.std);
        } else {
            let _ = writeln!(out, "{k}\t{}\tNA", e.value);
        }
    }
    out
}

pub fn render_comparison(report: &ComparisonReport, a: &PdfHistogram, b: &PdfHistogram) -> String {
    let mut out = String::new();
    header(&mut out, "fingerprint_a", &a.meta.fingerprint);
    header(&mut out, "fingerprint_b", &b.meta.fingerprint);
    header(&mut out, "band_decades", report.band);
    header(&mut out, "overlap_decades", report.overlap_decades);
    header(&mut out, "dynamic_range_decades", report.dynamic_range);
    header(&mut out, "ks", report.ks);
    header(&mut out, "tv", report.tv);
    out.push_str("x_center\tlog10_a\tlog10_b\tlog10_diff\n");
    for (i, d) in report.log10_diff.iter().enumerate() {
        let diff = d.map_or_else(|| "NA".to_string(), |d| d.to_string());
        let _ = writeln!(out, "{}\t{}\t{}\t{diff}", a.grid.center(i), a.log10_density(i), b.log10_density(i));
    }
    out
}

/// Reads the summary headers of a comparison file.
pub fn parse_comparison_summary(text: &str) -> Vec<(String, f64)> {
    split_headers(text)
        .0
        .into_iter()
        .filter_map(|(k, v)| v.parse().ok().map(|v| (k.to_string(), v)))
        .collect()
}

pub fn render_diagnostics(rows: &[(u32, HydroDiagnostic)]) -> String {
    let mut out = String::from("replicate\tindex\tstep_size\tacceptance\n");
    for (r, d) in rows {
        let _ = writeln!(out, "{r}\t{}\t{}\t{}", d.index, d.step_size, d.acceptance);
    }
    out
}

/// One row per quadrature level.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub grid_points: usize,
    /// Largest per-bin density change from the previous level.
    pub max_change: Option<f64>,
    pub tv_change: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub fn render_convergence(rows: &[ConvergenceRow], fingerprint: &str) -> String {
    let mut out = String::new();
    header(&mut out, "fingerprint", fingerprint);
    out.push_str("grid_points\tmax_abs_change\ttv_change\tkurtosis\n");
    let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.grid_points, f(r.max_change), f(r.tv_change), f(r.kurtosis));
    }
    out
}
