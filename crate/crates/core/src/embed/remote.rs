//! HTTP client for an external embedding service.
//!
//! Wire format: `POST {endpoint}/embed` with `{"texts": [...]}`; a 200
//! response carries `{"embeddings": [[...], ...], "dimension": d}`.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use super::{DenseEmbedding, EmbedError, EmbeddingProvider, ProviderConfig};

pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embeddings: Vec<Vec<f64>>,
    pub dimension: usize,
}

/// Blocking client; safe to share between threads issuing concurrent
/// batches.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    config: ProviderConfig,
    url: String,
    client: Client,
}

impl RemoteProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, EmbedError> {
        config.validate()?;
        let endpoint = config
            .endpoint
            .as_deref()
            .ok_or_else(|| EmbedError::InvalidConfig("remote mode requires an endpoint".into()))?;
        let url = format!("{}/embed", endpoint.trim_end_matches('/'));
        let client = Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| EmbedError::InvalidConfig(e.to_string()))?;
        Ok(RemoteProvider {
            config,
            url,
            client,
        })
    }

    /// One request for one batch of at most `max_batch` texts.
    pub fn embed_remote(&self, batch: &[String]) -> Result<Vec<DenseEmbedding>, EmbedError> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        if batch.len() > self.config.max_batch {
            return Err(EmbedError::BatchTooLarge {
                size: batch.len(),
                max: self.config.max_batch,
            });
        }
        let request = EmbedRequest {
            texts: batch.to_vec(),
        };
        let mut delay = Duration::from_millis(self.config.retry_backoff_ms);
        let mut attempt = 1;
        loop {
            match self.send_once(&request) {
                Ok(response) => return validate_response(response, batch.len(), self.config.dimension),
                Err(err) if attempt < MAX_ATTEMPTS && is_retryable(&err) => {
                    log::warn!("embedding request attempt {attempt} failed: {err}; retrying");
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(err) => return Err(with_attempts(err, attempt)),
            }
        }
    }

    fn send_once(&self, request: &EmbedRequest) -> Result<EmbedResponse, EmbedError> {
        let response = self
            .client
            .post(&self.url)
            .json(request)
            .send()
            .map_err(transport_error)?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(EmbedError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let bytes = response.bytes().map_err(transport_error)?;
        serde_json::from_slice(&bytes).map_err(|e| EmbedError::Protocol(e.to_string()))
    }
}

fn transport_error(err: reqwest::Error) -> EmbedError {
    if err.is_timeout() {
        EmbedError::Timeout { attempts: 1 }
    } else {
        EmbedError::Transport {
            attempts: 1,
            message: err.to_string(),
        }
    }
}

fn is_retryable(err: &EmbedError) -> bool {
    match err {
        EmbedError::Transport { .. } | EmbedError::Timeout { .. } => true,
        EmbedError::Status { status, .. } => *status >= 500,
        _ => false,
    }
}

fn with_attempts(err: EmbedError, attempts: usize) -> EmbedError {
    match err {
        EmbedError::Transport { message, .. } => EmbedError::Transport { attempts, message },
        EmbedError::Timeout { .. } => EmbedError::Timeout { attempts },
        other => other,
    }
}

pub(crate) fn validate_response(
    response: EmbedResponse,
    expected_items: usize,
    dimension: usize,
) -> Result<Vec<DenseEmbedding>, EmbedError> {
    if response.embeddings.len() != expected_items {
        return Err(EmbedError::Protocol(format!(
            "expected {expected_items} embeddings, got {}",
            response.embeddings.len()
        )));
    }
    if response.dimension != dimension {
        return Err(EmbedError::BadDimension {
            index: 0,
            expected: dimension,
            actual: response.dimension,
        });
    }
    response
        .embeddings
        .into_iter()
        .enumerate()
        .map(|(index, values)| {
            if values.len() != dimension {
                return Err(EmbedError::BadDimension {
                    index,
                    expected: dimension,
                    actual: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::NonFiniteValue { index });
            }
            Ok(DenseEmbedding(values))
        })
        .collect()
}

/// One-shot helper: build a client from `config` and embed one batch.
pub fn embed_remote(
    config: &ProviderConfig,
    batch: &[String],
) -> Result<Vec<DenseEmbedding>, EmbedError> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    RemoteProvider::new(config.clone())?.embed_remote(batch)
}

impl EmbeddingProvider for RemoteProvider {
    fn identity(&self) -> String {
        format!("remote:{}:d{}", self.url, self.config.dimension)
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<DenseEmbedding>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.max_batch) {
            out.extend(self.embed_remote(chunk)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response(embeddings: Vec<Vec<f64>>, dimension: usize) -> EmbedResponse {
        EmbedResponse { embeddings, dimension }
    }

    #[test]
    fn short_vector_names_the_item() {
        let r = response(vec![vec![1.0, 0.0], vec![1.0]], 2);
        match validate_response(r, 2, 2) {
            Err(EmbedError::BadDimension { index, expected, actual }) => {
                assert_eq!((index, expected, actual), (1, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let r = response(vec![vec![1.0, 0.0], vec![f64::NAN, 0.0]], 2);
        assert!(matches!(
            validate_response(r, 2, 2),
            Err(EmbedError::NonFiniteValue { index: 1 })
        ));
    }

    #[test]
    fn count_and_declared_dimension_are_checked() {
        let r = response(vec![vec![1.0, 0.0]], 2);
        assert!(matches!(validate_response(r, 2, 2), Err(EmbedError::Protocol(_))));
        let r = response(vec![vec![1.0, 0.0]], 3);
        assert!(matches!(
            validate_response(r, 1, 2),
            Err(EmbedError::BadDimension { .. })
        ));
    }

    #[test]
    fn empty_batch_issues_no_request() {
        let config = ProviderConfig {
            mode: super::super::ProviderMode::Remote,
            endpoint: Some("http://127.0.0.1:9".into()),
            ..Default::default()
        };
        assert!(embed_remote(&config, &[]).unwrap().is_empty());
    }

    #[test]
    fn oversized_batch_is_refused() {
        let config = ProviderConfig {
            mode: super::super::ProviderMode::Remote,
            endpoint: Some("http://127.0.0.1:9".into()),
            max_batch: 1,
            ..Default::default()
        };
        let provider = RemoteProvider::new(config).unwrap();
        assert!(matches!(
            provider.embed_remote(&["a".into(), "b".into()]),
            Err(EmbedError::BatchTooLarge { size: 2, max: 1 })
        ));
    }
}
