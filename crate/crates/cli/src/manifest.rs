//! Run manifests: what was run, with which inputs, and the hash of every
//! file written.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.tsv";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// Collects outputs while a command runs; [`RunManifest::finish`] writes it.
#[derive(Debug)]
pub struct RunManifest {
    pub command: String,
    pub fingerprint: String,
    pub seed: Option<u64>,
    pub workers: usize,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    /// Extra `key = value` diagnostics such as sample counts.
    pub notes: Vec<(String, String)>,
    out_dir: PathBuf,
    started: chrono::DateTime<Utc>,
    clock: Instant,
}

impl RunManifest {
    pub fn new(command: &str, out_dir: &Path, workers: usize) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        Ok(Self {
            command: command.into(),
            fingerprint: String::new(),
            seed: None,
            workers,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
            out_dir: out_dir.to_path_buf(),
            started: Utc::now(),
            clock: Instant::now(),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileEntry { name: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    /// Writes `contents` to `name` inside the output directory and records
    /// its hash.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(FileEntry { name: name.into(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(path)
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.notes.push((key.into(), value.to_string()));
    }

    pub fn render(&self, finished: chrono::DateTime<Utc>) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k}\t{v}");
        };
        kv("command", &self.command);
        kv("version", &env!("CARGO_PKG_VERSION"));
        kv("fingerprint", &self.fingerprint);
        kv("seed", &self.seed.map_or_else(|| "NA".to_string(), |s| s.to_string()));
        kv("workers", &self.workers);
        kv("started", &self.started.to_rfc3339_opts(SecondsFormat::Millis, true));
        kv("finished", &finished.to_rfc3339_opts(SecondsFormat::Millis, true));
        kv("wall_seconds", &format!("{:.3}", self.clock.elapsed().as_secs_f64()));
        for (k, v) in &self.notes {
            kv(k, v);
        }
        for f in &self.inputs {
            let _ = writeln!(out, "input\t{}\t{}", f.name, f.sha256);
        }
        for f in &self.outputs {
            let _ = writeln!(out, "output\t{}\t{}", f.name, f.sha256);
        }
        out
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.render(Utc::now())).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Drops the lines that legitimately differ between reruns.
pub fn without_timestamps(manifest: &str) -> String {
    manifest
        .lines()
        .filter(|l| !["started\t", "finished\t", "wall_seconds\t"].iter().any(|p| l.starts_with(p)))
        .map(|l| format!("{l}\n"))
        .collect()
}
