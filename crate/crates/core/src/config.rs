//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key read
//! through [`Config`] is recorded with its effective value (defaults
//! included) so outputs can carry the fully resolved configuration.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::activations::ActivationKind;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::spectral::{PriorFamily, WeightPrior};

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self {
            entries,
            ..Self::default()
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::parse(&text)
    }

    /// Sets `key`, replacing any value from the file.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn record(&self, key: &str, value: String) {
        self.used.borrow_mut().insert(key.to_string());
        self.resolved.borrow_mut().insert(key.to_string(), value);
    }

    /// Raw string for `key`, if present.
    pub fn get_str(&self, key: &str) -> Option<String> {
        let v = self.entries.get(key).cloned();
        if let Some(v) = &v {
            self.record(key, v.clone());
        }
        v
    }

    pub fn require_str(&self, key: &str) -> Result<String> {
        self.get_str(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
        raw.parse()
            .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{raw}`")))
    }

    pub fn get<T: FromStr + Display>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            Some(raw) => {
                let v: T = Self::parse_value(key, raw)?;
                self.record(key, v.to_string());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn get_or<T: FromStr + Display>(&self, key: &str, default: T) -> Result<T> {
        let v = self.get(key)?.unwrap_or(default);
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn require<T: FromStr + Display>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    /// Comma-separated list.
    pub fn get_list_or<T: FromStr + Display + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>> {
        let values = match self.entries.get(key) {
            Some(raw) => raw
                .split(',')
                .map(|s| Self::parse_value(key, s.trim()))
                .collect::<Result<Vec<T>>>()?,
            None => default.to_vec(),
        };
        let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.record(key, joined.join(","));
        Ok(values)
    }

    /// Fails on keys present in the file but never read.
    pub fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown or unused keys: {}", unknown.join(", "))))
        }
    }

    /// Every resolved `key=value`, sorted by key, on one line.
    pub fn provenance(&self) -> String {
        self.resolved
            .borrow()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn activation(&self, default: ActivationKind) -> Result<ActivationKind> {
        self.get_or("activation", default)
    }

    /// `prior.family` (normal | cauchy | student-t), `prior.dof` (default 3), `prior.scale`.
    pub fn prior(&self, default_family: &str) -> Result<WeightPrior> {
        let family = self.get_or("prior.family", default_family.to_string())?;
        let scale = self.get_or("prior.scale", 1.0)?;
        let family = match family.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => PriorFamily::Normal,
            "cauchy" => PriorFamily::Cauchy,
            "student-t" | "studentt" | "t" => PriorFamily::StudentT {
                dof: self.get_or("prior.dof", 3.0)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown prior family `{other}` (expected normal, cauchy, student-t)"
                )))
            }
        };
        WeightPrior::new(family, scale).map_err(|e| Error::Config(e.to_string()))
    }

    /// `kernel.family` plus its parameters, or `None` if no family is given.
    pub fn kernel(&self) -> Result<Option<KernelSpec>> {
        let Some(family) = self.get_str("kernel.family") else {
            return Ok(None);
        };
        let lengthscale = self.get_or("kernel.lengthscale", 1.0)?;
        let variance = self.get_or("kernel.variance", 1.0)?;
        let family = match family.to_ascii_lowercase().as_str() {
            "matern" => KernelFamily::Matern {
                nu: self.require("kernel.nu")?,
            },
            "rbf" => KernelFamily::Rbf,
            "exponential" => KernelFamily::Exponential,
            "arccos" => KernelFamily::ArcCos {
                order: self.get_or("kernel.order", 1u8)?,
            },
            "nn" | "sigmoid-nn" => KernelFamily::SigmoidNn {
                sigma0: self.get_or("kernel.sigma0", 1.0)?,
                sigma: self.get_or("kernel.sigma", 1.0)?,
            },
            "ls-matern" | "locally-stationary-matern" => KernelFamily::LocallyStationaryMatern {
                nu: self.require("kernel.nu")?,
                sigma_m: self.require("kernel.sigma_m")?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown kernel family `{other}` (expected matern, rbf, exponential, arccos, nn, ls-matern)"
                )))
            }
        };
        KernelSpec::new(family, lengthscale, variance)
            .map(Some)
            .map_err(|e| Error::Config(e.to_string()))
    }
}
