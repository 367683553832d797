//! Flat `key = value` training configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::decoder::BuildOptions;
use crate::nets::ModelConfig;
use crate::props::check_property_name;

use super::TrainError;

pub const CONFIG_KEYS: [&str; 12] = [
    "hidden_dim",
    "latent_dim",
    "k_init",
    "k_build",
    "beta",
    "lr",
    "epochs",
    "batch_size",
    "seed",
    "properties",
    "max_added_atoms",
    "workers",
];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub k_init: usize,
    pub k_build: usize,
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub properties: Vec<String>,
    pub max_added_atoms: usize,
    /// Worker threads; 1 gives bit-reproducible runs, 0 uses all cores.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            latent_dim: 128,
            k_init: 3,
            k_build: 2,
            beta: 0.1,
            lr: 1e-4,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            properties: Vec::new(),
            max_added_atoms: 60,
            workers: 1,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, TrainError> {
    v.parse()
        .map_err(|_| TrainError::Config(format!("invalid value `{v}` for key `{key}`")))
}

impl TrainConfig {
    /// Parses a config file. Every key must be present exactly once; blank
    /// lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                TrainError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            let k = k.trim();
            if !CONFIG_KEYS.contains(&k) {
                return Err(TrainError::Config(format!("unknown key `{k}`")));
            }
            if map.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(TrainError::Config(format!("duplicate key `{k}`")));
            }
        }
        if let Some(missing) = CONFIG_KEYS.iter().find(|k| !map.contains_key(**k)) {
            return Err(TrainError::Config(format!("missing key `{missing}`")));
        }
        let get = |k: &str| map[k].as_str();
        let properties: Vec<String> = get("properties")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        for p in &properties {
            check_property_name(p).map_err(|e| TrainError::Config(e.to_string()))?;
        }
        let cfg = Self {
            hidden_dim: num("hidden_dim", get("hidden_dim"))?,
            latent_dim: num("latent_dim", get("latent_dim"))?,
            k_init: num("k_init", get("k_init"))?,
            k_build: num("k_build", get("k_build"))?,
            beta: num("beta", get("beta"))?,
            lr: num("lr", get("lr"))?,
            epochs: num("epochs", get("epochs"))?,
            batch_size: num("batch_size", get("batch_size"))?,
            seed: num("seed", get("seed"))?,
            properties,
            max_added_atoms: num("max_added_atoms", get("max_added_atoms"))?,
            workers: num("workers", get("workers"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("hidden_dim", self.hidden_dim),
            ("latent_dim", self.latent_dim),
            ("k_init", self.k_init),
            ("k_build", self.k_build),
            ("batch_size", self.batch_size),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(TrainError::Config(format!("`{k}` must be positive")));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config("`lr` must be positive".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(TrainError::Config("`beta` must be non-negative".into()));
        }
        Ok(())
    }

    /// Serializes in the format read by [`TrainConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hidden_dim = {}", self.hidden_dim);
        let _ = writeln!(s, "latent_dim = {}", self.latent_dim);
        let _ = writeln!(s, "k_init = {}", self.k_init);
        let _ = writeln!(s, "k_build = {}", self.k_build);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "properties = {}", self.properties.join(","));
        let _ = writeln!(s, "max_added_atoms = {}", self.max_added_atoms);
        let _ = writeln!(s, "workers = {}", self.workers);
        s
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden_dim: self.hidden_dim,
            latent_dim: self.latent_dim,
            k_init: self.k_init,
            k_build: self.k_build,
        }
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            max_added_atoms: self.max_added_atoms,
            ..BuildOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = TrainConfig {
            properties: vec!["mw".into(), "rings".into()],
            seed: 9,
            ..Default::default()
        };
        assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn missing_key_is_named() {
        let text = TrainConfig::default()
            .to_text()
            .replace("lr = 0.0001\n", "");
        let err = TrainConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("`lr`"), "{err}");
    }

    #[test]
    fn unknown_and_bad_values() {
        let base = TrainConfig::default().to_text();
        assert!(TrainConfig::parse(&format!("{base}dropout = 0.1\n")).is_err());
        assert!(TrainConfig::parse(&base.replace("epochs = 20", "epochs = many")).is_err());
        assert!(TrainConfig::parse(&base.replace("properties = ", "properties = tpsa")).is_err());
        assert!(TrainConfig::parse(&format!("{base}seed = 1\n")).is_err());
    }
}
