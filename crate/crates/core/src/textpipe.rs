//! Tokenizer, vocabulary and sparse count / TF-IDF features.
//!
//! Token grammar: text is Unicode-lowercased, a token is a maximal run of
//! letters and digits, and a hyphen is kept inside a token only when both of
//! its neighbours are alphanumeric (`covid-19`, `double-blind`). Tokens
//! shorter than two characters and the built-in English stopwords
//! ([`STOPWORDS`]) are dropped.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub type TokenList = Vec<String>;

pub const VOCABULARY_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MIN_DF: usize = 2;
pub const DEFAULT_MAX_DF_RATIO: f64 = 0.9;

/// Built-in English stopword list.
pub const STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "if", "in", "into", "is", "it", "its", "itself",
    "just", "may", "me", "might", "more", "most", "must", "my", "myself", "no", "nor", "not",
    "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
    "over", "own", "same", "shall", "she", "should", "so", "some", "such", "than", "that", "the",
    "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "upon", "us", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "within",
    "without", "would", "you", "your", "yours", "yourself", "yourselves",
];

#[derive(Debug, Error)]
pub enum TextPipeError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("invalid vocabulary parameters: {0}")]
    InvalidParams(String),
    #[error("no token satisfies min_df={min_df}, max_df_ratio={max_df_ratio}")]
    EmptyVocabulary { min_df: usize, max_df_ratio: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid sparse vector: {0}")]
    InvalidVector(String),
    #[error("corrupt vocabulary file: {0}")]
    Corrupt(String),
    #[error("unsupported vocabulary format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Configurable tokenizer. [`Tokenizer::default`] applies the documented
/// grammar and stopword list.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
    min_len: usize,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::new(STOPWORDS.iter().map(|s| s.to_string()), 2)
    }
}

impl Tokenizer {
    pub fn new(stopwords: impl IntoIterator<Item = String>, min_len: usize) -> Self {
        Tokenizer {
            stopwords: stopwords.into_iter().collect(),
            min_len,
        }
    }

    pub fn tokenize(&self, text: &str) -> TokenList {
        let lower = text.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let mut tokens = Vec::new();
        let mut current = String::new();
        for (i, &ch) in chars.iter().enumerate() {
            if ch.is_alphanumeric() {
                current.push(ch);
            } else if ch == '-'
                && !current.is_empty()
                && chars.get(i + 1).is_some_and(|c| c.is_alphanumeric())
            {
                current.push(ch);
            } else if !current.is_empty() {
                self.push_token(&mut tokens, std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            self.push_token(&mut tokens, current);
        }
        tokens
    }

    fn push_token(&self, tokens: &mut TokenList, token: String) {
        if token.chars().count() >= self.min_len && !self.stopwords.contains(&token) {
            tokens.push(token);
        }
    }
}

static DEFAULT_TOKENIZER: LazyLock<Tokenizer> = LazyLock::new(Tokenizer::default);

/// Tokenize with the default grammar and stopword list.
pub fn tokenize(text: &str) -> TokenList {
    DEFAULT_TOKENIZER.tokenize(text)
}

/// Learned token → index mapping with document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    document_frequency: Vec<usize>,
    index: HashMap<String, usize>,
    n_documents: usize,
    min_df: usize,
    max_df_ratio: f64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.document_frequency[index]
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn max_df_ratio(&self) -> f64 {
        self.max_df_ratio
    }

    /// Smoothed inverse document frequency: `ln((n + 1) / (df + 1)) + 1`.
    pub fn idf(&self, index: usize) -> f64 {
        let n = self.n_documents as f64;
        let df = self.document_frequency[index] as f64;
        ((n + 1.0) / (df + 1.0)).ln() + 1.0
    }

    /// SHA-256 over the parameters and the (token, df) list in index order.
    /// Models record this to detect a mismatched vocabulary at load time.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("v{VOCABULARY_FORMAT_VERSION}\n{}\n", self.n_documents));
        for (token, df) in self.tokens.iter().zip(&self.document_frequency) {
            hasher.update(token.as_bytes());
            hasher.update(format!("\t{df}\n"));
        }
        hex::encode(hasher.finalize())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TextPipeError> {
        let file = VocabularyFile {
            format_version: VOCABULARY_FORMAT_VERSION,
            min_df: self.min_df,
            max_df_ratio: self.max_df_ratio,
            n_documents: self.n_documents,
            entries: self
                .tokens
                .iter()
                .zip(&self.document_frequency)
                .enumerate()
                .map(|(index, (token, &df))| VocabularyEntry {
                    token: token.clone(),
                    df,
                    index,
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vocabulary, TextPipeError> {
        let text = fs::read_to_string(path)?;
        let file: VocabularyFile = serde_json::from_str(&text)?;
        if file.format_version != VOCABULARY_FORMAT_VERSION {
            return Err(TextPipeError::UnsupportedVersion(file.format_version));
        }
        let v = file.entries.len();
        let mut tokens = vec![None; v];
        let mut document_frequency = vec![0; v];
        for entry in file.entries {
            let slot = tokens.get_mut(entry.index).ok_or_else(|| {
                TextPipeError::Corrupt(format!("index {} out of range 0..{v}", entry.index))
            })?;
            if slot.is_some() {
                return Err(TextPipeError::Corrupt(format!(
                    "index {} assigned twice",
                    entry.index
                )));
            }
            *slot = Some(entry.token);
            document_frequency[entry.index] = entry.df;
        }
        let tokens: Vec<String> = tokens.into_iter().map(Option::unwrap).collect();
        let index: HashMap<_, _> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if index.len() != v {
            return Err(TextPipeError::Corrupt("duplicate token".into()));
        }
        Ok(Vocabulary {
            tokens,
            document_frequency,
            index,
            n_documents: file.n_documents,
            min_df: file.min_df,
            max_df_ratio: file.max_df_ratio,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    format_version: u32,
    min_df: usize,
    max_df_ratio: f64,
    n_documents: usize,
    entries: Vec<VocabularyEntry>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyEntry {
    token: String,
    df: usize,
    index: usize,
}

/// Build a vocabulary keeping tokens with `df >= min_df` and
/// `df / n_documents <= max_df_ratio`. Indices go by descending document
/// frequency, ties broken lexicographically.
pub fn build_vocabulary(
    corpus: &[TokenList],
    min_df: usize,
    max_df_ratio: f64,
) -> Result<Vocabulary, TextPipeError> {
    if corpus.is_empty() {
        return Err(TextPipeError::EmptyCorpus);
    }
    if min_df < 1 {
        return Err(TextPipeError::InvalidParams("min_df must be >= 1".into()));
    }
    if !(max_df_ratio > 0.0 && max_df_ratio <= 1.0) {
        return Err(TextPipeError::InvalidParams(format!(
            "max_df_ratio must be in (0, 1], got {max_df_ratio}"
        )));
    }
    let n_documents = corpus.len();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for token in unique {
            *df.entry(token).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = df
        .into_iter()
        .filter(|&(_, d)| d >= min_df && d as f64 / n_documents as f64 <= max_df_ratio)
        .collect();
    if kept.is_empty() {
        return Err(TextPipeError::EmptyVocabulary {
            min_df,
            max_df_ratio,
        });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let document_frequency = kept.iter().map(|&(_, d)| d).collect();
    let index = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        tokens,
        document_frequency,
        index,
        n_documents,
        min_df,
        max_df_ratio,
    })
}

/// Sparse feature vector: strictly ascending indices, finite non-zero
/// weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
    dimension: usize,
}

impl SparseVector {
    pub fn zeros(dimension: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dimension,
        }
    }

    /// Build from `(index, weight)` pairs, validating the invariants.
    /// Zero weights are dropped.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (usize, f64)>,
        dimension: usize,
    ) -> Result<Self, TextPipeError> {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (index, value) in pairs {
            if index >= dimension {
                return Err(TextPipeError::InvalidVector(format!(
                    "index {index} >= dimension {dimension}"
                )));
            }
            if !value.is_finite() {
                return Err(TextPipeError::InvalidVector(format!(
                    "non-finite weight at index {index}"
                )));
            }
            if let Some(&last) = indices.last() {
                if index as u32 <= last {
                    return Err(TextPipeError::InvalidVector(
                        "indices must be strictly ascending".into(),
                    ));
                }
            }
            if value != 0.0 {
                indices.push(index as u32);
                values.push(value);
            }
        }
        Ok(SparseVector {
            indices,
            values,
            dimension,
        })
    }

    /// Dense slice to sparse; zero entries are omitted.
    pub fn from_dense(values: &[f64]) -> Result<Self, TextPipeError> {
        Self::from_pairs(values.iter().copied().enumerate(), values.len())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    /// Value at `index`; absent coordinates read as 0.0.
    #[inline]
    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&(index as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Raw term counts of in-vocabulary tokens.
pub fn vectorize_counts(tokens: &[String], vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for token in tokens {
        if let Some(i) = vocab.index_of(token) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    SparseVector {
        indices: counts.keys().map(|&i| i as u32).collect(),
        values: counts.into_values().collect(),
        dimension: vocab.len(),
    }
}

/// `tf * idf` per entry, then L2-normalised. The zero vector stays zero.
pub fn tfidf_transform(
    counts: &SparseVector,
    vocab: &Vocabulary,
) -> Result<SparseVector, TextPipeError> {
    if counts.dimension != vocab.len() {
        return Err(TextPipeError::DimensionMismatch {
            expected: vocab.len(),
            actual: counts.dimension,
        });
    }
    let mut values: Vec<f64> = counts
        .iter()
        .map(|(i, tf)| tf * vocab.idf(i))
        .collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    Ok(SparseVector {
        indices: counts.indices.clone(),
        values,
        dimension: counts.dimension,
    })
}

/// Text → TF-IDF vector against a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct Featurizer {
    tokenizer: Tokenizer,
    vocabulary: Vocabulary,
}

impl Featurizer {
    pub fn new(vocabulary: Vocabulary) -> Self {
        Featurizer {
            tokenizer: Tokenizer::default(),
            vocabulary,
        }
    }

    pub fn with_tokenizer(tokenizer: Tokenizer, vocabulary: Vocabulary) -> Self {
        Featurizer {
            tokenizer,
            vocabulary,
        }
    }

    /// Tokenize a corpus and build its vocabulary in one step.
    pub fn fit<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        min_df: usize,
        max_df_ratio: f64,
    ) -> Result<Self, TextPipeError> {
        let tokenizer = Tokenizer::default();
        let corpus: Vec<TokenList> = texts.into_iter().map(|t| tokenizer.tokenize(t)).collect();
        let vocabulary = build_vocabulary(&corpus, min_df, max_df_ratio)?;
        Ok(Featurizer {
            tokenizer,
            vocabulary,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn featurize(&self, text: &str) -> SparseVector {
        let counts = vectorize_counts(&self.tokenizer.tokenize(text), &self.vocabulary);
        tfidf_transform(&counts, &self.vocabulary).expect("counts share the vocabulary dimension")
    }
}
