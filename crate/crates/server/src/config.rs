use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use ebm_triage::bundle::{self, BundleError};
use ebm_triage::embed::{build_provider, EmbedError, ProviderConfig};
use ebm_triage::ingest::parse_corpus;
use ebm_triage::triage::{Backend, CurationStore, ServiceConfig, TriageError, TriageService};

/// `serve` settings, usually read from a TOML file.
///
/// ```toml
/// bind = "127.0.0.1:8080"
/// model_dir = "models"
/// data_dir = "triage-data"
/// training_corpus = "corpus.jsonl"
/// default_backend = "forest"
///
/// [service]
/// min_new_labels = 25
///
/// [provider]
/// mode = "stub"
/// dimension = 256
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub model_dir: PathBuf,
    /// Feedback event log and snapshots.
    pub data_dir: PathBuf,
    /// Labelled corpus the linear head is retrained on with the feedback.
    pub training_corpus: Option<PathBuf>,
    pub default_backend: Backend,
    pub queue_limit: usize,
    pub snapshot_every: u64,
    pub auto_retrain: bool,
    pub service: ServiceConfig,
    pub provider: ProviderConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1:8080".into(),
            model_dir: "models".into(),
            data_dir: "triage-data".into(),
            training_corpus: None,
            default_backend: Backend::Forest,
            queue_limit: 50,
            snapshot_every: 100,
            auto_retrain: true,
            service: ServiceConfig::default(),
            provider: ProviderConfig::default(),
        }
    }
}

impl ServerConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("{0}")]
    Bundle(#[from] BundleError),
    #[error("{0}")]
    Embed(#[from] EmbedError),
    #[error("{0}")]
    Triage(#[from] TriageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Open the feedback store and load whichever models exist in `model_dir`.
pub fn build_service(config: &ServerConfig) -> Result<TriageService, ConfigError> {
    let provider = build_provider(&config.provider)?;
    let store = CurationStore::open(&config.data_dir, config.snapshot_every)?;
    log::info!(
        "feedback store: {} items ({} resolved)",
        store.len(),
        store.resolved_count()
    );
    let service = TriageService::new(provider.clone(), store, config.service.clone());
    if bundle::has_forest(&config.model_dir) {
        service.set_forest(bundle::load_forest_bundle(&config.model_dir)?);
    }
    if bundle::has_linear(&config.model_dir) {
        service.set_linear(bundle::load_linear_bundle(
            &config.model_dir,
            &provider.identity(),
        )?)?;
    }
    let versions = service.model_versions();
    if versions.forest.is_none() && versions.linear.is_none() {
        log::warn!("no models found in {}", config.model_dir.display());
    }
    if let Some(path) = &config.training_corpus {
        let parsed = parse_corpus(std::io::BufReader::new(std::fs::File::open(path)?))?;
        for e in &parsed.errors {
            log::warn!("{}: {e}", path.display());
        }
        service.set_training_corpus(parsed.records);
    }
    Ok(service)
}
