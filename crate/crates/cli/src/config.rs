//! Experiment configuration files (TOML).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use lrsens::estimators::EstimatorKind;
use lrsens::SignConvention;
use serde::{Deserialize, Serialize};

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::I2c, EstimatorKind::I3c, EstimatorKind::Cov]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Likelihood,
    Reversed,
}

impl From<Sign> for SignConvention {
    fn from(s: Sign) -> Self {
        match s {
            Sign::Likelihood => SignConvention::Likelihood,
            Sign::Reversed => SignConvention::Reversed,
        }
    }
}

/// One experiment. `run_experiment` fills in every optional field
/// so the emitted reports show the settings actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Builtin model name or path to a `.rxn` file (relative to the config).
    pub model: String,
    pub seed: u64,
    /// Times at which every estimator is reported; the last is the horizon.
    pub checkpoints: Vec<f64>,
    /// LR ensemble size.
    pub replicas: usize,
    /// Pairs per finite-difference ensemble; defaults to `replicas`.
    #[serde(default)]
    pub cfd_replicas: Option<usize>,
    /// Euler steps over the whole horizon (diffusion models only).
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    /// Finite-difference half-width.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Truncation window for `i4` / `i4c`.
    #[serde(default)]
    pub window: Option<f64>,
    /// Parameters to differentiate by finite differences; defaults to all.
    #[serde(default)]
    pub cfd_parameters: Option<Vec<String>>,
    /// Report derivatives with respect to `log θ`.
    #[serde(default)]
    pub log_scale: bool,
    #[serde(default)]
    pub sign: Sign,
    /// Parameter overrides.
    #[serde(default)]
    pub theta: BTreeMap<String, f64>,
    /// Initial state overrides by species name.
    #[serde(default)]
    pub initial: BTreeMap<String, f64>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).context("invalid experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn horizon(&self) -> f64 {
        *self.checkpoints.last().expect("validated")
    }

    pub fn cfd_replicas(&self) -> usize {
        self.cfd_replicas.unwrap_or(self.replicas)
    }

    pub fn needs_lr(&self) -> bool {
        self.estimators.iter().any(|e| !e.is_finite_difference())
    }

    pub fn needs_cfd(&self) -> bool {
        self.estimators.iter().any(|e| e.is_finite_difference())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas < 2 {
            bail!("`replicas` must be at least 2, got {}", self.replicas);
        }
        if let Some(m) = self.cfd_replicas {
            if m < 2 {
                bail!("`cfd_replicas` must be at least 2, got {m}");
            }
        }
        if self.checkpoints.is_empty() {
            bail!("`checkpoints` must list at least one time");
        }
        let mut prev = 0.0;
        for &t in &self.checkpoints {
            if !(t > prev && t.is_finite()) {
                bail!(
                    "`checkpoints` must be positive and strictly increasing, got {:?}",
                    self.checkpoints
                );
            }
            prev = t;
        }
        if self.estimators.is_empty() {
            bail!("`estimators` is empty");
        }
        let mut sorted = self.estimators.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.estimators.len() {
            bail!("`estimators` lists an estimator twice");
        }
        if self.needs_cfd() {
            match self.epsilon {
                None => bail!("estimators i1 and i5 need `epsilon`"),
                Some(e) if !(e > 0.0 && e.is_finite()) => bail!("`epsilon` must be positive, got {e}"),
                _ => {}
            }
        }
        if self.estimators.iter().any(|e| e.needs_window()) {
            match self.window {
                None => bail!("estimators i4 and i4c need `window`"),
                Some(w) if !(w > 0.0) => bail!("`window` must be positive, got {w}"),
                Some(w) if w > self.checkpoints[0] => {
                    bail!("`window` = {w} exceeds the first checkpoint {}", self.checkpoints[0])
                }
                _ => {}
            }
        }
        if self.steps == Some(0) {
            bail!("`steps` must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "model = \"birth-death\"\nseed = 1\ncheckpoints = [1.0]\nreplicas = 10\n";

    #[test]
    fn defaults_are_filled() {
        let c = Config::from_toml(BASE).unwrap();
        assert_eq!(c.estimators, default_estimators());
        assert_eq!(c.cfd_replicas(), 10);
        assert_eq!(c.sign, Sign::Likelihood);
    }

    #[test]
    fn zero_replicas_names_the_field() {
        let text = BASE.replace("replicas = 10", "replicas = 0");
        let err = format!("{:#}", Config::from_toml(&text).unwrap_err());
        assert!(err.contains("`replicas`"), "{err}");
    }

    #[test]
    fn requirement_mismatches() {
        let i4 = format!("{BASE}estimators = [\"i4\"]\n");
        assert!(format!("{:#}", Config::from_toml(&i4).unwrap_err()).contains("window"));
        let i1 = format!("{BASE}estimators = [\"i1\"]\n");
        assert!(format!("{:#}", Config::from_toml(&i1).unwrap_err()).contains("epsilon"));
        let unknown = format!("{BASE}estimators = [\"i7\"]\n");
        assert!(Config::from_toml(&unknown).is_err());
        let typo = format!("{BASE}replicaz = 3\n");
        assert!(Config::from_toml(&typo).is_err());
    }
}
