//! Pipeline configuration: one JSON file drives every stage, and the single
//! top-level seed overrides any per-section seed so a run is reproducible
//! from the config alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cybertrans_core::{SgnsConfig, TrainConfig};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelinePaths {
    pub ru_tweets: PathBuf,
    pub en_tweets: PathBuf,
    pub keywords: PathBuf,
    pub ru_synsets: PathBuf,
    pub en_synsets: PathBuf,
    pub pairing: PathBuf,
    pub labels: PathBuf,
    pub refs: PathBuf,
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub paths: PipelinePaths,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    #[serde(default)]
    pub embed: SgnsConfig,
    #[serde(default = "default_kappa_threshold")]
    pub kappa_threshold: f64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_semantic_threshold")]
    pub semantic_threshold: f64,
}

fn default_seed() -> u64 {
    1
}

fn default_min_count() -> u64 {
    5
}

fn default_kappa_threshold() -> f64 {
    0.66
}

fn default_semantic_threshold() -> f64 {
    0.7
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: PipelineConfig =
            serde_json::from_str(&text).context("cannot parse config json")?;
        config.embed.seed = config.seed;
        config.train.seed = config.seed;
        Ok(config)
    }

    pub fn validate_inputs(&self) -> Result<()> {
        let mut required = vec![
            ("ru_tweets", &self.paths.ru_tweets),
            ("en_tweets", &self.paths.en_tweets),
            ("keywords", &self.paths.keywords),
            ("ru_synsets", &self.paths.ru_synsets),
            ("en_synsets", &self.paths.en_synsets),
            ("pairing", &self.paths.pairing),
            ("labels", &self.paths.labels),
            ("refs", &self.paths.refs),
        ];
        if let Some(gazetteer) = &self.paths.gazetteer {
            required.push(("gazetteer", gazetteer));
        }
        for (name, path) in required {
            if !path.is_file() {
                bail!("input path {name} = {} does not exist", path.display());
            }
        }
        if self.min_count < 1 {
            bail!("min_count must be at least 1");
        }
        if !(-1.0..=1.0).contains(&self.kappa_threshold) {
            bail!("kappa_threshold {} outside [-1, 1]", self.kappa_threshold);
        }
        if !(0.0..=1.0).contains(&self.semantic_threshold) {
            bail!(
                "semantic_threshold {} outside [0, 1]",
                self.semantic_threshold
            );
        }
        Ok(())
    }
}
