//! Run configuration: one JSON document plus dotted-path overrides.

use merw_core::analytics::MartingaleKind;
use merw_core::harness::{EnsembleConfig, PathStatistic};
use merw_core::{validate_params, Checkpoints, SizeLaw, StepSizeModel, Variant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("override `{0}` must look like path.to.field=value")]
    OverrideSyntax(String),
    #[error("override `{0}` walks into a non-object value")]
    OverridePath(String),
    #[error("invalid walk parameters: {0}")]
    Walk(#[from] merw_core::ModelError),
    #[error("invalid step sizes: {0}")]
    Sizes(#[from] merw_core::sizes::SizeError),
    #[error("invalid checkpoints: {0}")]
    Checkpoints(#[from] merw_core::WalkError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub d: usize,
    pub p: f64,
    #[serde(default)]
    pub r: f64,
}

/// Step sizes. A missing `first` law is the `later` law conditioned on
/// being positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizesSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<SizeLaw>,
    pub later: SizeLaw,
}

impl SizesSpec {
    pub fn model(&self) -> Result<StepSizeModel, ConfigError> {
        Ok(match &self.first {
            Some(first) => StepSizeModel::new(first.clone(), self.later.clone())?,
            None => StepSizeModel::from_later(self.later.clone())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckpointLadder {
    Dense,
    PowersOfTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckpointSpec {
    Ladder(CheckpointLadder),
    List(Vec<usize>),
}

/// The config document. Field names follow the ensemble configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub walk: WalkSpec,
    /// Defaults to `random-steps` when `sizes` is present, else `stops`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<SizesSpec>,
    pub n: usize,
    #[serde(default = "one")]
    pub replicas: usize,
    /// Defaults to `dense` for a single replica and `powers-of-two` for
    /// ensembles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<CheckpointSpec>,
    #[serde(alias = "seed")]
    pub master_seed: u64,
    /// Worker count; defaults to the available cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<MartingaleKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path_statistics: Vec<PathStatistic>,
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        Ok(serde_json::from_value(value)?)
    }

    pub fn variant(&self) -> Variant {
        self.variant.unwrap_or(if self.sizes.is_some() {
            Variant::RandomSteps
        } else {
            Variant::Stops
        })
    }

    /// Fills every defaulted field so the document alone fixes the run.
    pub fn resolved(&self, default_parallelism: usize) -> Self {
        let mut out = self.clone();
        out.variant = Some(self.variant());
        out.checkpoints
            .get_or_insert(CheckpointSpec::Ladder(if self.replicas == 1 {
                CheckpointLadder::Dense
            } else {
                CheckpointLadder::PowersOfTwo
            }));
        out.parallelism.get_or_insert(default_parallelism);
        out
    }

    pub fn to_ensemble(&self, default_parallelism: usize) -> Result<EnsembleConfig, ConfigError> {
        let cfg = self.resolved(default_parallelism);
        let variant = cfg.variant();
        let params = validate_params(cfg.walk.d, cfg.walk.p, cfg.walk.r)?;
        if cfg.n == 0 {
            return Err(ConfigError::Invalid("n must be at least 1".into()));
        }
        let sizes = match (variant, &cfg.sizes) {
            (Variant::RandomSteps, Some(s)) => Some(s.model()?),
            (Variant::RandomSteps, None) => {
                return Err(ConfigError::Invalid(
                    "the random-steps variant needs a `sizes` block".into(),
                ))
            }
            (Variant::Stops, Some(_)) => {
                return Err(ConfigError::Invalid(
                    "the stops variant takes no `sizes` block".into(),
                ))
            }
            (Variant::Stops, None) => None,
        };
        if variant == Variant::RandomSteps && cfg.walk.r != 0.0 {
            return Err(ConfigError::Walk(merw_core::ModelError::RestInRandomSteps(
                cfg.walk.r,
            )));
        }
        let checkpoints = match cfg.checkpoints.clone().expect("resolved") {
            CheckpointSpec::Ladder(CheckpointLadder::Dense) => Checkpoints::dense(cfg.n),
            CheckpointSpec::Ladder(CheckpointLadder::PowersOfTwo) => {
                Checkpoints::powers_of_two(cfg.n)
            }
            CheckpointSpec::List(list) => Checkpoints::new(list, cfg.n)?,
        };
        let ens = EnsembleConfig {
            params,
            variant,
            sizes,
            n: cfg.n,
            replicas: cfg.replicas,
            checkpoints,
            master_seed: cfg.master_seed,
            parallelism: cfg.parallelism.expect("resolved"),
            series: cfg.series.clone(),
            path_statistics: cfg.path_statistics.clone(),
        };
        ens.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(ens)
    }
}

/// Sets `a.b.c=value` in a JSON document. The value is parsed as JSON when
/// possible and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::OverrideSyntax(assignment.into()))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::OverrideSyntax(assignment.into()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ConfigError::OverridePath(assignment.into()))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| ConfigError::OverridePath(assignment.into()))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Reads a config or a run manifest (whose `config` block is used) and
/// applies the overrides in order.
pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let mut doc: Value = serde_json::from_str(&text)?;
    if crate::output::is_manifest(&doc) {
        doc = doc["config"].take();
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    RunConfig::from_value(doc)
}
