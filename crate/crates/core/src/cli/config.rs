//! Run configuration: a TOML file plus dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{SceneConfig, SensorConfig, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::nn::NetConfig;
use crate::projection::DEFAULT_MAX_RANGE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Input bandwidth of projection and network.
    pub bw: usize,
    /// Sensor used by single-scan commands (`project`, `bench`).
    pub preset: String,
    pub net: ArchConfig,
    pub optim: OptimConfig,
    pub loss: LossConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub paths: PathsConfig,
    pub rotate: RotateConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            bw: 32,
            preset: "kitti".into(),
            net: ArchConfig::default(),
            optim: OptimConfig::default(),
            loss: LossConfig::default(),
            data: DataConfig::default(),
            train: TrainConfig::default(),
            paths: PathsConfig::default(),
            rotate: RotateConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub widths: Vec<usize>,
    pub dropout: f64,
    pub lift_ratio: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let n = NetConfig::default();
        Self { widths: n.widths, dropout: n.dropout, lift_ratio: n.lift_ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub name: String,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self { name: "adam".into(), lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, epochs: 50, batch_size: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Inverse log frequency over the training cells.
    Frequency,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub class_weights: WeightMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { class_weights: WeightMode::Frequency }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub root: PathBuf,
    /// Number of scans `synth` writes.
    pub count: usize,
    pub train_fraction: f64,
    /// Sensors cycled through by `synth`.
    pub presets: Vec<String>,
    pub extent: f64,
    pub vehicles: usize,
    pub persons: usize,
    pub walls: usize,
    pub vegetation: usize,
    pub azimuth_step_deg: f64,
    /// Range normalization of the network input.
    pub max_range: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = SceneConfig::default();
        Self {
            root: "data".into(),
            count: 200,
            train_fraction: 0.8,
            presets: vec!["kitti".into(), "nuscenes".into()],
            extent: s.extent,
            vehicles: s.vehicles,
            persons: s.persons,
            walls: s.walls,
            vegetation: s.vegetation,
            azimuth_step_deg: s.sensor.azimuth_step_deg,
            max_range: DEFAULT_MAX_RANGE,
        }
    }
}

impl DataConfig {
    pub fn scene(&self, preset: &str, rng_seed: u64) -> Result<SceneConfig> {
        let sensor = SensorConfig { azimuth_step_deg: self.azimuth_step_deg, ..SensorConfig::preset(preset)? };
        Ok(SceneConfig {
            rng_seed,
            extent: self.extent,
            vehicles: self.vehicles,
            persons: self.persons,
            walls: self.walls,
            vegetation: self.vegetation,
            sensor,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Stop once validation mIoU reaches this value.
    pub stop_at_miou: Option<f64>,
    /// Stop after the first epoch that ends past this many seconds.
    pub time_budget_secs: Option<f64>,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { stop_at_miou: None, time_budget_secs: None, log_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub cloud: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { out: "runs".into(), checkpoint: None, cloud: None, labels: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotateConfig {
    pub angles_deg: Vec<f64>,
    /// Subset evaluated: "val" or "train".
    pub split: String,
}

impl Default for RotateConfig {
    fn default() -> Self {
        Self { angles_deg: (0..=6).map(|i| 30.0 * i as f64).collect(), split: "val".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { repeats: 3 }
    }
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(e.to_string())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(config_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `key.path=value` overrides; values parse as TOML, else as strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut doc = toml::Table::try_from(self).map_err(config_error)?;
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| Error::InvalidConfig(format!("override {o:?} is not key=value")))?;
            let value = format!("v = {raw}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let parts: Vec<&str> = key.trim().split('.').collect();
            let mut table = &mut doc;
            for p in &parts[..parts.len() - 1] {
                table = table
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| Error::InvalidConfig(format!("{key}: {p} is not a table")))?;
            }
            table.insert(parts[parts.len() - 1].to_string(), value);
        }
        let cfg: Self = doc.try_into().map_err(config_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.optim.name != "adam" {
            return bad(format!("unknown optimizer {:?}", self.optim.name));
        }
        if self.optim.batch_size == 0 || !(self.optim.lr > 0.0) {
            return bad("batch size and learning rate must be positive".into());
        }
        if self.data.presets.is_empty() {
            return bad("data.presets is empty".into());
        }
        for p in self.data.presets.iter().chain(std::iter::once(&self.preset)) {
            SensorConfig::preset(p)?;
        }
        if !(self.data.max_range > 0.0) {
            return bad("data.max_range must be positive".into());
        }
        self.net_config().layers()?;
        Ok(())
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            bw_in: self.bw,
            in_channels: 2,
            num_classes: NUM_CLASSES,
            widths: self.net.widths.clone(),
            dropout: self.net.dropout,
            lift_ratio: self.net.lift_ratio,
        }
    }
}
