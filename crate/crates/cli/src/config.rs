//! Run configuration: the JSON file, command-line overrides, and the
//! classifier spec.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use quadleaf::evalbench::ImageLabelRule;
use quadleaf::predicates::ExternalClassifier;
use quadleaf::{BaselineModel, Classifier, Error, GroupingMode, PipelineConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Report,
    Image,
    Both,
}

/// Where verdicts come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassifierSpec {
    BuiltinBaseline,
    Baseline(PathBuf),
    External(String),
}

impl std::str::FromStr for ClassifierSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.split_once(':') {
            Some(("baseline", "builtin")) => Ok(Self::BuiltinBaseline),
            Some(("baseline", path)) if !path.is_empty() => Ok(Self::Baseline(PathBuf::from(path))),
            Some(("external", cmd)) if !cmd.trim().is_empty() => Ok(Self::External(cmd.to_string())),
            _ => Err(Error::Config(format!(
                "classifier must be baseline:builtin, baseline:<model.json> or external:<command>, got {s:?}"
            ))),
        }
    }
}

impl std::fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BuiltinBaseline => f.write_str("baseline:builtin"),
            Self::Baseline(p) => write!(f, "baseline:{}", p.display()),
            Self::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

impl Serialize for ClassifierSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassifierSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self::BuiltinBaseline
    }
}

impl ClassifierSpec {
    pub fn build(&self, pipeline: &PipelineConfig) -> anyhow::Result<Box<dyn Classifier>> {
        Ok(match self {
            Self::BuiltinBaseline => {
                log::info!("training builtin baseline");
                Box::new(BaselineModel::builtin())
            }
            Self::Baseline(path) => Box::new(BaselineModel::load(path).with_context(|| format!("loading {}", path.display()))?),
            Self::External(cmd) => Box::new(ExternalClassifier::new(cmd, pipeline.class_labels())?),
        })
    }
}

/// Contents of `--config`. Every field is optional.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub pipeline: PipelineConfig,
    pub grouping: GroupingMode,
    pub classifier: ClassifierSpec,
    pub output_format: OutputFormat,
    pub label_rule: ImageLabelRule,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            pipeline: PipelineConfig::default(),
            grouping: GroupingMode::default(),
            classifier: ClassifierSpec::default(),
            output_format: OutputFormat::default(),
            label_rule: ImageLabelRule::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!(Error::Config(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                cfg.schema_version
            )));
        }
        cfg.pipeline.validate()?;
        Ok(cfg)
    }

    /// SHA-256 over the canonical JSON of the settings that affect results.
    pub fn digest(&self) -> String {
        let canonical = serde_json::json!({
            "schema_version": self.schema_version,
            "pipeline": self.pipeline,
            "grouping": self.grouping,
            "classifier": self.classifier,
            "label_rule": self.label_rule,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}
