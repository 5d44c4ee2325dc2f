//! Optional TOML run configuration. Command-line flags override it.

use std::path::{Path, PathBuf};

use evalfilter::llm::PipelineConfig;
use evalfilter::model::TrainConfig;
use evalfilter::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub llm: LlmConfig,
    pub pipeline: PipelineConfig,
    pub evaluate: EvaluateConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct DataConfig {
    pub relations: Option<PathBuf>,
    /// TAB-separated `structured<TAB>natural` relation names.
    pub normalization: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ClientKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct LlmConfig {
    pub client: ClientKind,
    pub model: String,
    /// Canned responses for the mock client.
    pub script: Option<PathBuf>,
    pub timeout_secs: u64,
    pub parallelism: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            client: ClientKind::Mock,
            model: "gpt-3.5-turbo".into(),
            script: None,
            timeout_secs: 60,
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Minimum gold triples for the dense stratum; chosen from the dataset
    /// name when absent.
    pub triple_threshold: Option<usize>,
    /// Minimum content tokens for the long-sentence stratum.
    pub length_threshold: Option<usize>,
    pub curve: Vec<usize>,
    pub nfc: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes relative paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.data.relations);
        fix(&mut self.data.normalization);
        fix(&mut self.data.model);
        fix(&mut self.llm.script);
        if let Some(p) = &mut self.train.pretrained {
            if p.features.is_relative() {
                p.features = base.join(&p.features);
            }
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        for p in [
            &self.data.relations,
            &self.data.normalization,
            &self.data.model,
            &self.llm.script,
        ]
        .into_iter()
        .flatten()
        {
            require_file(p)?;
        }
        if self.llm.parallelism < 1 {
            return Err(Error::Config("llm.parallelism must be at least 1".into()));
        }
        Ok(())
    }
}

/// Configuration error unless `path` is an existing file.
pub fn require_file(path: &Path) -> Result<(), Error> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("file not found: {}", path.display())))
    }
}
