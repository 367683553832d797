//! Run manifests written next to every checkpoint.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use scaffgen::training::{write_atomic, TrainConfig};

use crate::error::CliError;

/// Everything needed to repeat a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub config: TrainConfig,
    pub seed: u64,
    pub checkpoint: PathBuf,
    /// `(path, sha256 hex)` of each input file.
    pub datasets: Vec<(PathBuf, String)>,
    pub command_line: Vec<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(CliError::io(path))
}

pub fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl RunManifest {
    /// Manifest path belonging to a checkpoint file.
    pub fn path_for(checkpoint: &Path) -> PathBuf {
        checkpoint.with_extension("manifest")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "timestamp = {}", self.timestamp);
        let _ = writeln!(s, "command = {}", self.command_line.join(" "));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "checkpoint = {}", self.checkpoint.display());
        for (path, hash) in &self.datasets {
            let _ = writeln!(s, "dataset = {} sha256:{hash}", path.display());
        }
        s.push_str("\n[config]\n");
        s.push_str(&self.config.to_text());
        s
    }

    /// Inverse of [`RunManifest::to_text`].
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::Data(format!("manifest: {m}"));
        let (head, config) = text
            .split_once("\n[config]\n")
            .ok_or_else(|| bad("missing [config] section"))?;
        let mut timestamp = None;
        let mut command = None;
        let mut seed = None;
        let mut checkpoint = None;
        let mut datasets = Vec::new();
        for line in head.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad(line))?;
            match k {
                "timestamp" => timestamp = Some(v.parse().map_err(|_| bad("timestamp"))?),
                "command" => command = Some(v.split(' ').map(String::from).collect()),
                "seed" => seed = Some(v.parse().map_err(|_| bad("seed"))?),
                "checkpoint" => checkpoint = Some(PathBuf::from(v)),
                "dataset" => {
                    let (p, h) = v
                        .rsplit_once(" sha256:")
                        .ok_or_else(|| bad("dataset hash"))?;
                    datasets.push((PathBuf::from(p), h.to_string()));
                }
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        Ok(Self {
            config: TrainConfig::parse(config).map_err(|e| bad(&e.to_string()))?,
            seed: seed.ok_or_else(|| bad("missing seed"))?,
            checkpoint: checkpoint.ok_or_else(|| bad("missing checkpoint"))?,
            datasets,
            command_line: command.ok_or_else(|| bad("missing command"))?,
            timestamp: timestamp.ok_or_else(|| bad("missing timestamp"))?,
        })
    }

    pub fn write(&self) -> Result<PathBuf, CliError> {
        let path = Self::path_for(&self.checkpoint);
        write_atomic(&path, self.to_text().as_bytes()).map_err(CliError::io(&path))?;
        Ok(path)
    }
}
