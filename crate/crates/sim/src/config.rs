//! Run configuration.
//!
//! A config file is flat TOML: one `key = value` per line, every key optional,
//! unknown keys rejected. Missing keys take the scenario preset.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use uabs_core::channel::{self, ChannelParams, LinkMode, RewardParams};
use uabs_core::comps::{MetaConfig, MetaGradMode};
use uabs_core::env::{AreaSpec, EncoderConfig, RandomTaskSpec, DEFAULT_ALTITUDE_M, TOY_ALTITUDE_M};
use uabs_core::policy::PolicyArch;
use uabs_core::reinforce::RLConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config is not valid flat TOML: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` is a table; only flat key = value lines are allowed")]
    NotFlat { key: String },
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Toy,
    Urban,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Toy => "toy",
            Scenario::Urban => "urban",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Conventional,
    Transfer,
    Comps,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Conventional, Method::Transfer, Method::Comps];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Conventional => "conventional",
            Method::Transfer => "transfer",
            Method::Comps => "comps",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown method `{s}`")))
    }
}

/// Every knob of a run. Field names are the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    // continual protocol
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,

    // learning
    pub eta: f64,
    pub kappa: f64,
    pub gamma: f64,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "I_meta")]
    pub i_meta: usize,
    pub ratio_clip: f64,
    pub meta_grad_mode: String,
    pub k_nn: usize,
    pub hidden: Vec<usize>,

    // world
    pub c_max: u32,
    pub v_u: f64,
    pub v_g: f64,
    pub p_msg: f64,
    pub horizon: u32,
    pub area_width: f64,
    pub area_height: f64,
    pub altitude_m: f64,
    pub g_min: usize,
    pub g_max: usize,
    pub speed_jitter: f64,

    // channel
    pub ptx_dbm: f64,
    pub pnoise_dbm: f64,
    pub gtx_db: f64,
    pub grx_db: f64,
    pub snr_th_db: f64,
    pub fc_ghz: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub link_mode: String,
    /// When positive, replaces `snr_th_db` by the threshold whose LoS
    /// coverage radius (slant range) is this many meters.
    pub coverage_radius_m: f64,
}

impl RunConfig {
    pub fn preset(scenario: Scenario) -> Self {
        let urban = ChannelParams::urban();
        let base = RunConfig {
            k: 50,
            n: 50,
            seeds: (0..10).collect(),
            methods: Method::ALL.to_vec(),
            eta: 0.001,
            kappa: 0.0001,
            gamma: 0.8,
            b: 5,
            i_meta: 100,
            ratio_clip: 10.0,
            meta_grad_mode: "first_order".into(),
            k_nn: 8,
            hidden: vec![64],
            c_max: 10,
            v_u: 20.0,
            v_g: 10.0,
            p_msg: 1.0,
            horizon: 300,
            area_width: 1500.0,
            area_height: 900.0,
            altitude_m: DEFAULT_ALTITUDE_M,
            g_min: 15,
            g_max: 30,
            speed_jitter: 0.5,
            ptx_dbm: urban.ptx_dbm,
            pnoise_dbm: urban.pnoise_dbm,
            gtx_db: urban.gtx_db,
            grx_db: urban.grx_db,
            snr_th_db: urban.snr_th_db,
            fc_ghz: urban.fc_mhz / 1000.0,
            alpha: urban.alpha,
            beta: urban.beta,
            eta_los_db: urban.eta_los_db,
            eta_nlos_db: urban.eta_nlos_db,
            link_mode: "sampled".into(),
            coverage_radius_m: 0.0,
        };
        match scenario {
            Scenario::Urban => base,
            Scenario::Toy => RunConfig {
                v_u: 1.0,
                v_g: 1.0,
                horizon: 60,
                area_width: 40.0,
                area_height: 40.0,
                altitude_m: TOY_ALTITUDE_M,
                g_min: 3,
                g_max: 3,
                speed_jitter: 0.0,
                ptx_dbm: 0.0,
                snr_th_db: 50.0,
                coverage_radius_m: channel::TOY_COVERAGE_RADIUS_M,
                ..base
            },
        }
    }

    /// Preset overlaid with the keys in `text`.
    pub fn from_toml_str(scenario: Scenario, text: &str) -> Result<Self, ConfigError> {
        let overrides: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::preset(scenario))
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (key, value) in overrides {
            if !merged.contains_key(&key) {
                return Err(ConfigError::UnknownKey(key));
            }
            if value.is_table() {
                return Err(ConfigError::NotFlat { key });
            }
            // allow integers where floats are expected
            let value = match (&merged[&key], value) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (_, v) => v,
            };
            merged.insert(key, value);
        }
        let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(scenario: Scenario, path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            None => Ok(Self::preset(scenario)),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?;
                Self::from_toml_str(scenario, &text)
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.k == 0 {
            return bad("K must be at least 1");
        }
        if self.n == 0 {
            return bad("N must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if self.b == 0 {
            return bad("B must be at least 1");
        }
        if self.ratio_clip.is_nan() || self.ratio_clip < 1.0 {
            return bad("ratio_clip must be at least 1");
        }
        if self.c_max == 0 {
            return bad("c_max must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_msg) {
            return bad("p_msg must lie in [0, 1]");
        }
        if self.g_min == 0 || self.g_min > self.g_max {
            return bad("need 1 <= g_min <= g_max");
        }
        if !(0.0..1.0).contains(&self.speed_jitter) {
            return bad("speed_jitter must lie in [0, 1)");
        }
        AreaSpec::new(self.area_width, self.area_height, self.altitude_m)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.grad_mode()?;
        self.channel()?.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn grad_mode(&self) -> Result<MetaGradMode, ConfigError> {
        match self.meta_grad_mode.as_str() {
            "first_order" => Ok(MetaGradMode::FirstOrder),
            "finite_difference" => Ok(MetaGradMode::FiniteDifference),
            other => Err(ConfigError::Invalid(format!("unknown meta_grad_mode `{other}`"))),
        }
    }

    pub fn channel(&self) -> Result<ChannelParams, ConfigError> {
        let link_mode = match self.link_mode.as_str() {
            "sampled" => LinkMode::Sampled,
            "expected" => LinkMode::Expected,
            other => return Err(ConfigError::Invalid(format!("unknown link_mode `{other}`"))),
        };
        let mut p = ChannelParams {
            alpha: self.alpha,
            beta: self.beta,
            eta_los_db: self.eta_los_db,
            eta_nlos_db: self.eta_nlos_db,
            fc_mhz: self.fc_ghz * 1000.0,
            ptx_dbm: self.ptx_dbm,
            gtx_db: self.gtx_db,
            grx_db: self.grx_db,
            pnoise_dbm: self.pnoise_dbm,
            snr_th_db: self.snr_th_db,
            link_mode,
        };
        if self.coverage_radius_m > 0.0 {
            p.snr_th_db = p.snr_threshold_for_los_radius(self.coverage_radius_m);
        }
        Ok(p)
    }

    pub fn reward(&self) -> RewardParams {
        RewardParams { c_max: self.c_max }
    }

    pub fn rl(&self) -> RLConfig {
        RLConfig { episodes: self.n, gamma: self.gamma, eta: self.eta }
    }

    pub fn meta(&self) -> Result<MetaConfig, ConfigError> {
        Ok(MetaConfig {
            kappa: self.kappa,
            eta: self.eta,
            gamma: self.gamma,
            batch_tasks: self.b,
            meta_iterations: self.i_meta,
            ratio_clip: self.ratio_clip,
            grad_mode: self.grad_mode()?,
        })
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig { k_nn: self.k_nn }
    }

    pub fn arch(&self) -> PolicyArch {
        PolicyArch::new(self.encoder().feature_len(), self.hidden.clone())
    }

    pub fn area(&self) -> AreaSpec {
        AreaSpec { width: self.area_width, height: self.area_height, altitude: self.altitude_m }
    }

    pub fn random_task_spec(&self) -> RandomTaskSpec {
        RandomTaskSpec {
            area: self.area(),
            g_min: self.g_min,
            g_max: self.g_max,
            gue_speed: self.v_g,
            speed_jitter: self.speed_jitter,
            horizon: self.horizon,
            uabs_speed: self.v_u,
            p_msg: self.p_msg,
        }
    }

    /// Canonical TOML of the resolved config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    /// SHA-256 of [`to_toml`](Self::to_toml), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// `(key, value)` pairs of the resolved config, in declaration order.
    pub fn key_values(&self) -> Vec<(String, String)> {
        toml::Table::try_from(self)
            .expect("flat config always serializes")
            .iter()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect()
    }
}
