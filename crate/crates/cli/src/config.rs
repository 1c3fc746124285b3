use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::Failure;

/// `"auto"` or an explicit value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Named(String),
    Value(f64),
}

impl Setting {
    pub fn auto() -> Self {
        Setting::Named("auto".into())
    }

    pub fn parse(s: &str) -> Result<Self, Failure> {
        if s == "auto" {
            return Ok(Setting::auto());
        }
        s.parse::<f64>()
            .map(Setting::Value)
            .map_err(|_| Failure::Config(format!("expected a number or `auto`, got `{s}`")))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Setting::Value(v) => Some(*v),
            Setting::Named(_) => None,
        }
    }

    fn validate(&self, what: &str) -> Result<(), Failure> {
        match self {
            Setting::Named(s) if s == "auto" => Ok(()),
            Setting::Named(s) => Err(Failure::Config(format!("{what} must be a number or `auto`, got `{s}`"))),
            Setting::Value(v) if *v > 0.0 && *v <= 1.0 => Ok(()),
            Setting::Value(v) => Err(Failure::Config(format!("{what} = {v} outside (0, 1]"))),
        }
    }
}

pub const ALL_CHECKS: [&str; 5] = ["gronwall", "equivalence", "lemmaA2", "spectral", "scaling"];

fn default_checks() -> Vec<String> {
    ["gronwall", "equivalence", "lemmaA2"].map(String::from).to_vec()
}

fn default_profile() -> String {
    "sine".into()
}

fn default_nu() -> Vec<f64> {
    vec![1e-3]
}

fn default_data() -> String {
    "random".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: String,
    pub nu: Vec<f64>,
    pub beta: Setting,
    pub sigma: Setting,
    pub data: String,
    pub dt: Option<f64>,
    pub n: Option<usize>,
    pub t_end: Option<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub checks: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            profile: default_profile(),
            nu: default_nu(),
            beta: Setting::auto(),
            sigma: Setting::auto(),
            data: default_data(),
            dt: None,
            n: None,
            t_end: None,
            out: default_out(),
            seed: 0,
            workers: default_workers(),
            checks: default_checks(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_path(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.nu.is_empty() {
            return Err(Failure::Config("at least one --nu is required".into()));
        }
        for &nu in &self.nu {
            if !(nu > 0.0 && nu <= 1.0) {
                return Err(Failure::Config(format!("nu = {nu} outside (0, 1]")));
            }
        }
        self.beta.validate("beta")?;
        self.sigma.validate("sigma")?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Failure::Config(format!("dt = {dt} must be positive")));
            }
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Failure::Config(format!("t_end = {t} must be positive")));
            }
        }
        if self.workers == 0 {
            return Err(Failure::Config("workers must be at least 1".into()));
        }
        for c in &self.checks {
            if !ALL_CHECKS.contains(&c.as_str()) {
                return Err(Failure::Config(format!(
                    "unknown check `{c}` (known: {})",
                    ALL_CHECKS.join(",")
                )));
            }
        }
        Ok(())
    }

    /// Canonical byte-for-byte snapshot; hashed into plot provenance comments.
    pub fn canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn enabled(&self, check: &str) -> bool {
        self.checks.iter().any(|c| c == check)
    }
}

/// FNV-1a, the provenance hash embedded in emitted SVG files.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
