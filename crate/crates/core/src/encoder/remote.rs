//! Client for an externally served encoder, with an on-disk embedding cache.
//!
//! Wire format: the request body is `{"texts": [...], "provider": "..."}` and
//! the response is `{"dim": d, "embeddings": [[...], ...]}` in input order.
//! The cache file holds one JSON object per line:
//! `{"content_hash", "provider_id", "dim", "vector"}`.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::stack::{SegmentEmbedding, TokenEmbeddingStack};
use super::Provider;
use crate::error::{Error, Result};

/// Known output sizes of common encoders.
pub fn registered_dim(provider: &str) -> Option<usize> {
    match provider {
        "xlm-roberta-base" | "bert-base-multilingual-cased" | "labse" => Some(768),
        "xlm-roberta-large" => Some(1024),
        _ => None,
    }
}

fn default_retries() -> u32 {
    3
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_batch() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub provider: String,
    /// Overrides the built-in registry entry for `provider`.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub cache_path: Option<PathBuf>,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, provider: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            provider: provider.into(),
            dim: None,
            cache_path: None,
            retries: default_retries(),
            timeout_ms: default_timeout_ms(),
            max_batch: default_max_batch(),
        }
    }

    pub fn expected_dim(&self) -> Result<usize> {
        self.dim.or_else(|| registered_dim(&self.provider)).ok_or_else(|| {
            Error::contract(format!(
                "provider `{}` is not in the registry; set its dim explicitly",
                self.provider
            ))
        })
    }
}

/// Sends one JSON body and returns the response body.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, body: &str) -> std::result::Result<String, String>;
}

#[cfg(feature = "http")]
pub struct HttpTransport {
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpTransport {
    pub fn new(timeout_ms: u64) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_millis(timeout_ms)))
            .build();
        HttpTransport {
            agent: config.into(),
        }
    }
}

#[cfg(feature = "http")]
impl Transport for HttpTransport {
    fn post_json(&self, url: &str, body: &str) -> std::result::Result<String, String> {
        let mut resp = self
            .agent
            .post(url)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        resp.body_mut().read_to_string().map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
    provider: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    content_hash: String,
    provider_id: String,
    dim: usize,
    vector: Vec<f64>,
}

pub fn content_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    use std::fmt::Write as _;
    let digest = Sha256::digest(text.as_bytes());
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Embeddings keyed by `(provider_id, content_hash)`, optionally backed by a
/// JSON-lines file that new entries are appended to.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: HashMap<(String, String), Vec<f64>>,
    path: Option<PathBuf>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        EmbeddingCache::default()
    }

    /// Loads `path` if it exists. A torn final line (from an interrupted
    /// append) is ignored.
    pub fn open(path: &Path) -> Result<Self> {
        let mut cache = EmbeddingCache {
            entries: HashMap::new(),
            path: Some(path.to_path_buf()),
        };
        if path.exists() {
            let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if let Ok(entry) = serde_json::from_str::<CacheLine>(&line) {
                    if entry.vector.len() == entry.dim {
                        cache.entries.insert((entry.provider_id, entry.content_hash), entry.vector);
                    }
                }
            }
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, provider_id: &str, hash: &str) -> Option<&Vec<f64>> {
        self.entries.get(&(provider_id.to_string(), hash.to_string()))
    }

    pub fn insert(&mut self, provider_id: &str, hash: String, vector: Vec<f64>) -> Result<()> {
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let line = serde_json::to_string(&CacheLine {
                content_hash: hash.clone(),
                provider_id: provider_id.to_string(),
                dim: vector.len(),
                vector: vector.clone(),
            })?;
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        self.entries.insert((provider_id.to_string(), hash), vector);
        Ok(())
    }
}

pub struct RemoteProvider {
    config: RemoteConfig,
    dim: usize,
    transport: Box<dyn Transport>,
    cache: Mutex<EmbeddingCache>,
    requests: AtomicUsize,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("config", &self.config)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl RemoteProvider {
    pub fn with_transport(config: RemoteConfig, transport: Box<dyn Transport>) -> Result<Self> {
        let dim = config.expected_dim()?;
        let cache = match &config.cache_path {
            Some(p) => EmbeddingCache::open(p)?,
            None => EmbeddingCache::in_memory(),
        };
        Ok(RemoteProvider {
            config,
            dim,
            transport,
            cache: Mutex::new(cache),
            requests: AtomicUsize::new(0),
        })
    }

    #[cfg(feature = "http")]
    pub fn connect(config: RemoteConfig) -> Result<Self> {
        let transport = HttpTransport::new(config.timeout_ms);
        Self::with_transport(config, Box::new(transport))
    }

    /// Number of requests sent to the endpoint so far.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let body = serde_json::to_string(&EmbedRequest {
            texts,
            provider: &self.config.provider,
        })?;
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for _ in 0..attempts {
            self.requests.fetch_add(1, Ordering::SeqCst);
            match self.transport.post_json(&self.config.endpoint, &body) {
                Ok(text) => {
                    let resp: EmbedResponse = serde_json::from_str(&text)
                        .map_err(|e| Error::contract(format!("malformed embedding response: {e}")))?;
                    if resp.dim != self.dim {
                        return Err(Error::contract(format!(
                            "provider `{}` returned dim {} but the registry says {}",
                            self.config.provider, resp.dim, self.dim
                        )));
                    }
                    if resp.embeddings.len() != texts.len() {
                        return Err(Error::contract(format!(
                            "asked for {} embeddings, received {}",
                            texts.len(),
                            resp.embeddings.len()
                        )));
                    }
                    if let Some(bad) = resp.embeddings.iter().find(|v| v.len() != self.dim) {
                        return Err(Error::contract(format!(
                            "provider `{}` returned a vector of length {} but the registry says {}",
                            self.config.provider,
                            bad.len(),
                            self.dim
                        )));
                    }
                    return Ok(resp.embeddings);
                }
                Err(e) => last = e,
            }
        }
        Err(Error::Transport {
            attempts,
            message: last,
        })
    }

    /// Order-preserving lookup; only cache misses go over the wire, in
    /// batches of at most `max_batch` distinct texts.
    pub fn fetch_embeddings(&self, texts: &[&str]) -> Result<Vec<SegmentEmbedding>> {
        let provider_id = self.config.provider.as_str();
        let hashes: Vec<String> = texts.iter().map(|t| content_hash(t)).collect();
        let mut cache = self.cache.lock().expect("embedding cache poisoned");
        let mut missing: Vec<usize> = Vec::new();
        let mut queued: HashMap<&str, ()> = HashMap::new();
        for (i, h) in hashes.iter().enumerate() {
            if cache.get(provider_id, h).is_none() && queued.insert(h.as_str(), ()).is_none() {
                missing.push(i);
            }
        }
        for chunk in missing.chunks(self.config.max_batch.max(1)) {
            let batch: Vec<&str> = chunk.iter().map(|&i| texts[i]).collect();
            let vectors = self.request(&batch)?;
            for (&i, v) in chunk.iter().zip(vectors) {
                cache.insert(provider_id, hashes[i].clone(), v)?;
            }
        }
        hashes
            .iter()
            .map(|h| {
                let v = cache.get(provider_id, h).expect("filled above").clone();
                SegmentEmbedding::new(v, provider_id)
            })
            .collect()
    }
}

impl Provider for RemoteProvider {
    fn id(&self) -> &str {
        &self.config.provider
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn num_layers(&self) -> usize {
        1
    }

    /// The remote encoder already pools; its vector is exposed as a single
    /// token on a single layer.
    fn encode(&self, text: &str) -> Result<TokenEmbeddingStack> {
        if text.trim().is_empty() {
            return Err(Error::contract("cannot encode an empty segment"));
        }
        let e = self.fetch_embeddings(&[text])?.remove(0);
        TokenEmbeddingStack::new(vec![e.vector().to_vec()], 1, self.dim)
    }

    fn encode_batch(&self, texts: &[&str]) -> Result<Vec<TokenEmbeddingStack>> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::contract("cannot encode an empty segment"));
        }
        self.fetch_embeddings(texts)?
            .into_iter()
            .map(|e| TokenEmbeddingStack::new(vec![e.vector().to_vec()], 1, self.dim))
            .collect()
    }
}
