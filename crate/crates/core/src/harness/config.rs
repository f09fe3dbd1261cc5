//! TOML scenario documents.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::pde::{BoundaryConditions, Domain, ShapeFunction};
use crate::simulator::TimeProfile;

fn default_beta() -> f64 {
    2.0
}

fn default_input() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Cooling coefficient of the rod; sets the defaults `a3 = −β`, `k_u = β`.
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub a3: Option<f64>,
    pub k_u: Option<f64>,
    pub k_y: Option<f64>,
    pub domain: Option<Domain>,
    pub bc: Option<BoundaryConditions>,
    pub actuators: Option<Vec<ShapeFunction>>,
    pub initial: Option<ShapeFunction>,
    /// Constant manipulated input, one entry per actuator.
    #[serde(default = "default_input")]
    pub input: Vec<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            beta: default_beta(),
            a1: None,
            a2: None,
            a3: None,
            k_u: None,
            k_y: None,
            domain: None,
            bc: None,
            actuators: None,
            initial: None,
            input: default_input(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalTermConfig {
    pub mode: usize,
    pub time: TimeProfile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    #[default]
    Zero,
    /// `2φ₁` from 10 s, `3φ₂` from 40 s.
    Abrupt,
    /// `(2 − e^{−0.01(t−10)})φ₁`, `(3 − e^{−0.02(t−40)})φ₂`.
    Incipient,
    /// `2(H(z) − H(z − π/4))` from 10 s.
    HeavisideWindow,
    Modal { terms: Vec<ModalTermConfig> },
    Separable { shape: ShapeFunction, time: TimeProfile },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub positions: Option<Vec<f64>>,
    /// Interior-uniform layout with this many sensors.
    pub uniform: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainChoice {
    Solve,
    /// The printed design of the reference heat-rod study.
    Reference,
}

fn default_gamma() -> f64 {
    100.0
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub m: usize,
    /// Fast modes kept for diagnostics (default `2m`).
    pub k: Option<usize>,
    /// `Γ = gamma · I`.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_one")]
    pub sigma: f64,
    #[serde(default = "default_gains")]
    pub gains: GainChoice,
    /// Gain file (a saved design); overrides `gains`.
    pub pin_file: Option<PathBuf>,
}

fn default_gains() -> GainChoice {
    GainChoice::Solve
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default = "default_one")]
    pub mu1: f64,
    #[serde(default = "default_one")]
    pub mu2: f64,
    /// Fixed `ε₁`; a decision variable when absent.
    pub epsilon1: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_starts")]
    pub starts: usize,
}

fn default_starts() -> usize {
    5
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig { mu1: 1.0, mu2: 1.0, epsilon1: None, seed: 0, starts: default_starts() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Keep every n-th time row in field CSVs.
    #[serde(default = "default_stride")]
    pub field_stride: usize,
    pub out: Option<PathBuf>,
}

fn default_horizon() -> f64 {
    80.0
}

fn default_dt() -> f64 {
    0.01
}

fn default_nodes() -> usize {
    201
}

fn default_stride() -> usize {
    10
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: default_horizon(),
            dt: default_dt(),
            nodes: default_nodes(),
            field_stride: default_stride(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub sensors: SensorConfig,
    pub observer: ObserverConfig,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub run: RunConfig,
    /// Directory the config was read from; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// `√(2/π) sin z`, the first rod eigenfunction.
pub fn first_mode_shape() -> ShapeFunction {
    ShapeFunction::Sine { amplitude: (2.0 / PI).sqrt(), wavenumber: 1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let cfg = ScenarioConfig::from_toml("[observer]\nm = 2\n").unwrap();
        assert_eq!(cfg.observer.m, 2);
        assert_eq!(cfg.run.nodes, 201);
        assert_eq!(cfg.observer.gamma, 100.0);
        assert!(matches!(cfg.source, SourceConfig::Zero));
    }

    #[test]
    fn full_document() {
        let text = r#"
            name = "demo"
            [system]
            beta = 2.0
            input = [1.0]
            initial = { kind = "sine", amplitude = 0.7978845608028654, wavenumber = 1.0 }
            [source]
            kind = "separable"
            shape = { kind = "window", from = 0.0, to = 0.7853981633974483 }
            time = { kind = "step", onset = 10.0, amplitude = 2.0 }
            [sensors]
            uniform = 3
            [observer]
            m = 3
            gains = "reference"
            [design]
            seed = 4
            [run]
            dt = 0.02
        "#;
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(cfg.sensors.uniform, Some(3));
        assert!(matches!(cfg.observer.gains, GainChoice::Reference));
        assert_eq!(cfg.design.seed, 4);
        assert_eq!(cfg.run.dt, 0.02);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::from_toml("[observer]\nm = 2\nbogus = 1\n").is_err());
        assert!(ScenarioConfig::from_toml("[source]\nkind = \"nope\"\n[observer]\nm = 2\n").is_err());
    }
}
