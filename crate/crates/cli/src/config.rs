//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment. Values are JSON scalars or
//! bracketed arrays (`r = [0.05, 0.08]`, `Q = [[-1, 1], [1, -1]]`); anything
//! that is not valid JSON is taken as a bare word (`style = fixed-put`).

use std::collections::BTreeMap;
use std::path::Path;

use asian_regime::error::{ModelError, SpecError};
use asian_regime::fixedpoint::EngineConfig;
use asian_regime::model::{OptionSpec, OptionStyle, RegimeModel};
use asian_regime::oracle::McConfig;
use serde::de::DeserializeOwned;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("missing key '{0}'")]
    Missing(&'static str),
    #[error("key '{key}': {message}")]
    Value { key: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

pub const KEYS: &[&str] = &[
    // model
    "m",
    "Q",
    "r",
    "sigma",
    "delta",
    // option
    "t0",
    "s",
    "T",
    "x",
    "a",
    "K",
    "style",
    "regime",
    // numerics
    "layout",
    "time_nodes",
    "z_nodes",
    "z_width",
    "a_nodes",
    "a_width",
    "epsilon",
    "max_iterations",
    "max_clamp_fraction",
    "t_prime_min",
    "z_order",
    "z_panels",
    "w_order",
    "w_panels",
    "payoff_z_order",
    "payoff_z_panels",
    "quad_tolerance",
    "paths",
    "substeps",
    "antithetic",
    "seed",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: RegimeModel,
    pub spec: OptionSpec,
    pub regime: usize,
    pub engine: EngineConfig,
    pub mc: McConfig,
    pub paths: usize,
    pub seed: u64,
}

struct Entries(BTreeMap<String, Value>);

impl Entries {
    fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.0
            .get(key)
            .map(|v| {
                serde_json::from_value(v.clone()).map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    fn require<T: DeserializeOwned>(&self, key: &'static str) -> Result<T, ConfigError> {
        self.get(key)?.ok_or(ConfigError::Missing(key))
    }

    /// A per-regime array, also accepting a bare scalar when there is one regime.
    fn per_regime(&self, key: &'static str) -> Result<Vec<f64>, ConfigError> {
        match self.0.get(key) {
            Some(Value::Number(_)) => Ok(vec![self.require(key)?]),
            Some(_) => self.require(key),
            None => Err(ConfigError::Missing(key)),
        }
    }
}

fn parse_entries(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: n + 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        let value = value.trim();
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        if map.insert(key.to_string(), parsed).is_some() {
            return Err(ConfigError::Syntax {
                line: n + 1,
                message: format!("key '{key}' assigned twice"),
            });
        }
    }
    Ok(Entries(map))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let e = parse_entries(text)?;

        let rates = e.per_regime("r")?;
        let sigmas = e.per_regime("sigma")?;
        let m: usize = e.get("m")?.unwrap_or(rates.len());
        let generator: Vec<Vec<f64>> = match e.get("Q")? {
            Some(q) => q,
            None if m == 1 => vec![vec![0.0]],
            None => return Err(ConfigError::Missing("Q")),
        };
        if rates.len() != m || sigmas.len() != m || generator.len() != m {
            return Err(ConfigError::Value {
                key: "m".into(),
                message: format!(
                    "m = {m} but r has {}, sigma has {} and Q has {} entries",
                    rates.len(),
                    sigmas.len(),
                    generator.len()
                ),
            });
        }
        let model = RegimeModel::new(generator, rates, sigmas, e.get("delta")?.unwrap_or(0.0))?;

        let style: OptionStyle = match e.get::<String>("style")? {
            Some(s) => s.parse().map_err(|message| ConfigError::Value {
                key: "style".into(),
                message,
            })?,
            None => OptionStyle::FloatingCall,
        };
        let t0 = e.get("t0")?.unwrap_or(0.0);
        let spec = OptionSpec::new(
            t0,
            e.get("s")?.unwrap_or(t0),
            e.require("T")?,
            e.require("x")?,
            e.get("a")?.unwrap_or(0.0),
            e.get("K")?,
            style,
        )?;
        let regime = e.get("regime")?.unwrap_or(0);
        if regime >= model.regimes() {
            return Err(SpecError::RegimeOutOfRange {
                regime,
                regimes: model.regimes(),
            }
            .into());
        }

        let mut engine = EngineConfig::default();
        if let Some(layout) = e.get::<String>("layout")? {
            engine = match layout.as_str() {
                "scale-invariant" => EngineConfig::default(),
                "full" => EngineConfig::full_tensor(),
                other => {
                    return Err(ConfigError::Value {
                        key: "layout".into(),
                        message: format!("expected 'scale-invariant' or 'full', got '{other}'"),
                    })
                }
            };
        }
        macro_rules! set {
            ($target:expr, $key:literal) => {
                if let Some(v) = e.get($key)? {
                    $target = v;
                }
            };
        }
        set!(engine.time_nodes, "time_nodes");
        set!(engine.z_nodes, "z_nodes");
        set!(engine.z_half_width, "z_width");
        set!(engine.a_nodes, "a_nodes");
        set!(engine.a_width, "a_width");
        set!(engine.epsilon, "epsilon");
        set!(engine.max_iterations, "max_iterations");
        set!(engine.max_clamp_fraction, "max_clamp_fraction");
        let q = &mut engine.quadrature;
        set!(q.t_prime_min, "t_prime_min");
        set!(q.z_order, "z_order");
        set!(q.z_panels, "z_panels");
        set!(q.w_order, "w_order");
        set!(q.w_panels, "w_panels");
        set!(q.payoff_z_order, "payoff_z_order");
        set!(q.payoff_z_panels, "payoff_z_panels");
        set!(q.tolerance, "quad_tolerance");
        engine.validate()?;

        let mut mc = McConfig::default();
        set!(mc.substeps, "substeps");
        set!(mc.antithetic, "antithetic");
        let paths = e.get("paths")?.unwrap_or(200_000);
        let seed = e.get("seed")?.unwrap_or(1);
        Ok(Self {
            model,
            spec,
            regime,
            engine,
            mc,
            paths,
            seed,
        })
    }
}
