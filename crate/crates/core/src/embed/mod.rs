//! Document embeddings behind a provider boundary.
//!
//! Production deployments point [`RemoteProvider`] at a model service; tests
//! and offline runs use the deterministic [`StubProvider`]. Either can be
//! wrapped in a [`CachedProvider`] backed by an on-disk [`EmbeddingCache`].

mod cache;
mod remote;
mod stub;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CachedProvider, EmbeddingCache};
pub use remote::{embed_remote, EmbedRequest, EmbedResponse, RemoteProvider};
pub use stub::{embed_stub, StubProvider, STUB_ALGORITHM};

pub const DEFAULT_DIMENSION: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("embedding provider timed out after {attempts} attempt(s)")]
    Timeout { attempts: usize },
    #[error("embedding provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("item {index}: expected dimension {expected}, got {actual}")]
    BadDimension {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("item {index}: non-finite embedding value")]
    NonFiniteValue { index: usize },
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("batch of {size} exceeds max_batch {max}")]
    BatchTooLarge { size: usize, max: usize },
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
    #[error("embedding cache: {0}")]
    Cache(#[from] std::io::Error),
}

/// A dense document vector with finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DenseEmbedding(Vec<f64>);

impl DenseEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::BadDimension {
                index: 0,
                expected: 1,
                actual: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFiniteValue { index: 0 });
        }
        Ok(DenseEmbedding(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn cosine(&self, other: &DenseEmbedding) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        dot / (self.l2_norm() * other.l2_norm())
    }
}

impl TryFrom<Vec<f64>> for DenseEmbedding {
    type Error = EmbedError;
    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        DenseEmbedding::new(values)
    }
}

impl From<DenseEmbedding> for Vec<f64> {
    fn from(e: DenseEmbedding) -> Self {
        e.0
    }
}

/// Source of document embeddings.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier; part of the cache key and recorded in model files.
    fn identity(&self) -> String;

    fn dimension(&self) -> usize;

    /// Embeddings for `texts`, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<DenseEmbedding>, EmbedError>;

    fn embed(&self, text: &str) -> Result<DenseEmbedding, EmbedError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        out.pop()
            .ok_or_else(|| EmbedError::Protocol("provider returned no embedding".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Remote,
    #[default]
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub endpoint: Option<String>,
    pub dimension: usize,
    pub stub_seed: u64,
    pub timeout_ms: u64,
    pub max_batch: usize,
    /// Initial retry delay; doubles on each further attempt.
    pub retry_backoff_ms: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            mode: ProviderMode::Stub,
            endpoint: None,
            dimension: DEFAULT_DIMENSION,
            stub_seed: 0,
            timeout_ms: 30_000,
            max_batch: 32,
            retry_backoff_ms: 100,
            cache_dir: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dimension < 1 {
            return Err(EmbedError::InvalidConfig("dimension must be >= 1".into()));
        }
        if self.max_batch < 1 {
            return Err(EmbedError::InvalidConfig("max_batch must be >= 1".into()));
        }
        if self.mode == ProviderMode::Remote && self.endpoint.is_none() {
            return Err(EmbedError::InvalidConfig(
                "remote mode requires an endpoint".into(),
            ));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

/// Build the provider described by `config`, wrapped in a disk cache when
/// `cache_dir` is set.
pub fn build_provider(config: &ProviderConfig) -> Result<Arc<dyn EmbeddingProvider>, EmbedError> {
    config.validate()?;
    let inner: Arc<dyn EmbeddingProvider> = match config.mode {
        ProviderMode::Stub => Arc::new(StubProvider::new(config.dimension, config.stub_seed)),
        ProviderMode::Remote => Arc::new(RemoteProvider::new(config.clone())?),
    };
    Ok(match &config.cache_dir {
        Some(dir) => Arc::new(CachedProvider::new(inner, EmbeddingCache::open(dir)?)),
        None => inner,
    })
}
