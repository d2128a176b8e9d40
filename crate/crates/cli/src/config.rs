//! Flat `key=value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Every key any command understands; anything else is rejected as a typo.
pub const KNOWN_KEYS: &[&str] = &[
    // data
    "kind",
    "d",
    "n",
    "coefficients",
    "intercept",
    "noise_scale",
    "offset",
    "seed",
    // set construction
    "method",
    "delta",
    "delta_e",
    "delta_p",
    "delta_q",
    "eps",
    "norm_bound",
    "loss_range",
    "target_miss",
    "e",
    "e_p",
    "e_q",
    "threshold_slack",
    "rademacher",
    "rademacher_draws",
    "class_size",
    "pac_c",
    "pac_alpha",
    "sigma",
    "confidence",
    "ridge",
    "fit_intercept",
    // decision problem
    "min_return",
    "long_only",
    "covariance",
    "scenarios",
    "sampler",
    "burn_in",
    "thin",
    // validation
    "m",
    "outer",
    "inner",
    "oracle_n",
    "sweep",
    "sweep_values",
];

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Config::default();
        if let Some(path) = path {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                cfg.insert(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
            }
        }
        for o in overrides {
            cfg.insert(o).with_context(|| format!("override `{o}`"))?;
        }
        Ok(cfg)
    }

    fn insert(&mut self, entry: &str) -> Result<()> {
        let (k, v) = entry.split_once('=').ok_or_else(|| anyhow!("expected key=value"))?;
        let k = k.trim();
        if !KNOWN_KEYS.contains(&k) {
            bail!("unknown key `{k}`");
        }
        self.values.insert(k.to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.values.get(key).map(String::as_str).unwrap_or(default)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}")))
            .transpose()
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// A probability in the open interval `(0, 1)`.
    pub fn prob(&self, key: &str, default: f64) -> Result<f64> {
        let p: f64 = self.or(key, default)?;
        if !(p > 0.0 && p < 1.0) {
            bail!("key `{key}`: {p} is not in (0, 1)");
        }
        Ok(p)
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.values.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("key `{key}`: `{s}`: {e}")))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}
