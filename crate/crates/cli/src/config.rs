//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use dtqw_core::walk::pi_separation_horizon;
use dtqw_core::{StepWindow, WalkConfig};
use ini::Ini;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::CliError;

pub const KEYS: [&str; 16] = [
    "d",
    "alpha_re",
    "alpha_im",
    "r",
    "g_tau",
    "omega_tau",
    "steps",
    "coin0_re",
    "coin0_im",
    "coin1_re",
    "coin1_im",
    "dephasing_p",
    "window_start",
    "window_end",
    "restarts",
    "seed",
];

/// Everything a command needs to run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub walk: WalkConfig,
    pub window: StepWindow,
    pub restarts: usize,
    pub seed: u64,
}

/// Raw key/value pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut raw = RawConfig::default();
        for (section, props) in ini.iter() {
            if let Some(name) = section {
                return Err(CliError::Config(format!("unexpected section [{name}]")));
            }
            for (k, v) in props.iter() {
                raw.set(k, v)?;
            }
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.values
            .insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k, v)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::Config(format!("invalid value `{v}` for `{key}`")))
            })
            .transpose()
    }

    fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Resolves defaults and validates. Missing frequencies fall back to the
    /// nominal walk; a missing window ends at the π-separation horizon.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let d = self.get_or("d", 31usize)?;
        let alpha = Complex64::new(
            self.get_or("alpha_re", -5.0)?,
            self.get_or("alpha_im", 0.0)?,
        );
        let r = self.get_or("r", 1.0)?;
        let mut walk = WalkConfig::new(d, alpha, r);
        walk.g_tau = self.get_or("g_tau", walk.g_tau)?;
        walk.omega_tau = self.get_or("omega_tau", walk.omega_tau)?;
        walk.steps = self.get_or("steps", 0usize)?;
        walk.dephasing_p = self.get_or("dephasing_p", 0.0)?;
        let coin = [
            Complex64::new(self.get_or("coin0_re", 1.0)?, self.get_or("coin0_im", 0.0)?),
            Complex64::new(self.get_or("coin1_re", 0.0)?, self.get_or("coin1_im", 0.0)?),
        ];
        let norm = (coin[0].norm_sqr() + coin[1].norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(CliError::Config("coin state must be nonzero".into()));
        }
        walk.coin_init = [coin[0] / norm, coin[1] / norm];
        walk.validate()?;

        let start = self.get_or("window_start", 1usize)?;
        let end = match self.get::<usize>("window_end")? {
            Some(e) => e,
            None => pi_separation_horizon(&walk)?.0,
        };
        let window = StepWindow::new(start, end)?;
        if window.start == 0 {
            return Err(CliError::Config("window_start must be at least 1".into()));
        }
        let restarts = self.get_or("restarts", 100usize)?;
        if restarts == 0 {
            return Err(CliError::Config("restarts must be at least 1".into()));
        }
        Ok(RunConfig {
            walk,
            window,
            restarts,
            seed: self.get_or("seed", 0u64)?,
        })
    }
}
