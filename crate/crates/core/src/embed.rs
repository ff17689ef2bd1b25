//! Text embedding providers.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::EmbedError;

/// Maps text to a fixed-dimension vector.
///
/// Implementations must be idempotent and order-independent: the index
/// builder may call `embed` concurrently and in any order.
pub trait Embedder: Send + Sync {
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Scales `v` to unit length.
pub fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>, EmbedError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(EmbedError::Degenerate);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Deterministic feature-hashing embedder over lowercase words and character
/// trigrams. Good enough to rank lexical overlap; meant for tests and offline use.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    fn bucket(&self, feature: &str) -> (usize, f64) {
        let digest = Sha256::digest(feature.as_bytes());
        let h = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        ((h % self.dim as u64) as usize, sign)
    }
}

impl Embedder for HashingEmbedder {
    fn id(&self) -> String {
        format!("hash-{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        // bias feature keeps the vector non-zero for empty text
        let (b, s) = self.bucket("\u{0}bias");
        v[b] += 0.5 * s;
        for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            let (i, s) = self.bucket(&format!("w:{word}"));
            v[i] += s;
            let chars: Vec<char> = format!("<{word}>").chars().collect();
            for tri in chars.windows(3) {
                let (i, s) = self.bucket(&format!("t:{}", tri.iter().collect::<String>()));
                v[i] += 0.5 * s;
            }
        }
        normalize(v)
    }
}

/// Connection settings for a remote embedding service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpEmbedderConfig {
    pub endpoint: String,
    pub model: String,
    pub dim: usize,
    /// Name of the environment variable holding the bearer token, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    30
}

/// Client for an embeddings endpoint accepting `{"model", "input"}` and
/// answering either `{"embedding": [...]}` or `{"data": [{"embedding": [...]}]}`.
pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig) -> Result<Self, EmbedError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| EmbedError::Provider(format!("environment variable {var} is not set")))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EmbedError::Provider(e.to_string()))?;
        Ok(Self { config, client, api_key })
    }
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EmbeddingResponse {
    Single { embedding: Vec<f64> },
    Batch { data: Vec<EmbeddingItem> },
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut req = self
            .client
            .post(&self.config.endpoint)
            .json(&serde_json::json!({ "model": self.config.model, "input": text }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().and_then(|r| r.error_for_status()).map_err(|e| EmbedError::Provider(e.to_string()))?;
        let body: EmbeddingResponse = resp.json().map_err(|e| EmbedError::Provider(e.to_string()))?;
        let v = match body {
            EmbeddingResponse::Single { embedding } => embedding,
            EmbeddingResponse::Batch { mut data } => {
                if data.is_empty() {
                    return Err(EmbedError::Provider("empty data array".into()));
                }
                data.swap_remove(0).embedding
            }
        };
        if v.len() != self.config.dim {
            return Err(EmbedError::Dimension { expected: self.config.dim, got: v.len() });
        }
        normalize(v)
    }
}
