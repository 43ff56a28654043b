use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cyents::linker::LinkConfig;
use cyents::ner::TrainConfig;
use cyents::schema::VersionId;
use serde::{Deserialize, Serialize};

/// Settings shared across subcommands, read from `--pipeline FILE`.
/// Command-line flags take precedence over every field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub store: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub gazetteers: Option<PathBuf>,
    pub schema_version: Option<VersionId>,
    pub tagger: Option<TrainConfig>,
    pub linker: Option<LinkConfig>,
    /// recorded linker responses; takes precedence over `endpoint`
    pub linker_fixture: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub port: Option<u16>,
    /// annotation service study config (groups, tokens)
    pub service: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).with_context(|| format!("reading pipeline config {}", path.display()))?;
        let cfg: PipelineConfig =
            serde_json::from_str(&raw).with_context(|| format!("parsing pipeline config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Input paths must exist; the store and annotation directories may be
    /// created by later commands.
    pub fn validate(&self) -> Result<()> {
        for (what, p) in [
            ("gazetteers", &self.gazetteers),
            ("linker_fixture", &self.linker_fixture),
            ("service", &self.service),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("pipeline config: {what} path {} does not exist", p.display());
                }
            }
        }
        if let Some(t) = &self.tagger {
            t.validate()?;
        }
        Ok(())
    }

    pub fn schema(&self) -> VersionId {
        self.schema_version.unwrap_or(VersionId::Round2)
    }
}

/// A missing or contradictory argument; exits with the usage status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// First of flag, then config value, else a usage error naming the flag.
pub fn pick(flag: Option<PathBuf>, config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match flag.or_else(|| config.clone()) {
        Some(p) => Ok(p),
        None => Err(UsageError(format!("missing --{name} (or `{}` in the pipeline config)", name.replace('-', "_"))).into()),
    }
}
