//! On-disk embedding cache: one JSON file per entry, named by the SHA-256
//! of (provider identity, dimension, text). Writes go to a temporary file
//! that is then renamed into place.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DenseEmbedding, EmbedError, EmbeddingProvider};

#[derive(Debug)]
pub struct EmbeddingCache {
    dir: PathBuf,
    tmp_counter: AtomicU64,
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    digest: String,
    vector: DenseEmbedding,
}

impl EmbeddingCache {
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(EmbeddingCache {
            dir: dir.as_ref().to_path_buf(),
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn key(identity: &str, dimension: usize, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(identity.as_bytes());
        h.update([0]);
        h.update(dimension.to_le_bytes());
        h.update([0]);
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(format!("{digest}.json"))
    }

    pub fn get(&self, identity: &str, dimension: usize, text: &str) -> Option<DenseEmbedding> {
        let digest = Self::key(identity, dimension, text);
        let bytes = fs::read(self.path(&digest)).ok()?;
        let record: CacheRecord = serde_json::from_slice(&bytes).ok()?;
        (record.digest == digest && record.vector.dimension() == dimension)
            .then_some(record.vector)
    }

    pub fn put(
        &self,
        identity: &str,
        text: &str,
        vector: &DenseEmbedding,
    ) -> io::Result<()> {
        let digest = Self::key(identity, vector.dimension(), text);
        let record = CacheRecord {
            digest: digest.clone(),
            vector: vector.clone(),
        };
        let tmp = self.dir.join(format!(
            ".{digest}.{}.{}.tmp",
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let mut file = fs::File::create(&tmp)?;
        serde_json::to_writer(&mut file, &record)?;
        file.write_all(b"\n")?;
        file.sync_all()?;
        fs::rename(&tmp, self.path(&digest))
    }
}

/// Serves cached vectors and forwards misses to the wrapped provider.
pub struct CachedProvider {
    inner: Arc<dyn EmbeddingProvider>,
    cache: EmbeddingCache,
}

impl CachedProvider {
    pub fn new(inner: Arc<dyn EmbeddingProvider>, cache: EmbeddingCache) -> Self {
        CachedProvider { inner, cache }
    }
}

impl EmbeddingProvider for CachedProvider {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<DenseEmbedding>, EmbedError> {
        let identity = self.inner.identity();
        let dimension = self.inner.dimension();
        let mut out: Vec<Option<DenseEmbedding>> = texts
            .iter()
            .map(|t| self.cache.get(&identity, dimension, t))
            .collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let fresh = self.inner.embed_batch(&batch)?;
            for (&i, vector) in missing.iter().zip(fresh) {
                self.cache.put(&identity, &texts[i], &vector)?;
                out[i] = Some(vector);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}
