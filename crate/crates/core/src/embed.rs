//! Turning description text into embedding vectors.
//!
//! The network path speaks a tiny JSON protocol: POST `{"texts": [...]}`,
//! receive `{"vectors": [[...], ...]}` with one vector per text, in order.
//! Texts are sent in batches with a bounded number of in-flight requests;
//! the offline path instead looks every description up in an existing
//! embedding corpus, for air-gapped runs and tests.

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

use crate::data::formats::DescriptionRecord;
use crate::data::{DataError, EmbeddingCorpus, EmbeddingKind, EmbeddingRecord};
use crate::num::{real, Scalar};

/// Environment variable consulted when no endpoint is given explicitly.
pub const ENDPOINT_ENV: &str = "TMETA_EMBED_ENDPOINT";

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub batch_size: usize,
    pub max_inflight: usize,
    /// Extra attempts after the first failure (transport or 5xx/429).
    pub retries: u32,
    pub timeout: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            batch_size: 16,
            max_inflight: 4,
            retries: 2,
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("embedding dimension changed from {expected} to {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no texts to embed")]
    Empty,
    #[error("no embedding for {kind} '{name}' in the lookup corpus")]
    MissingEntry { kind: EmbeddingKind, name: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Serialize)]
struct WireRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct WireResponse {
    vectors: Vec<Vec<f32>>,
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

fn fetch_batch(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    texts: &[String],
    retries: u32,
) -> Result<Vec<Vec<f32>>, EmbedError> {
    let mut attempt = 0;
    loop {
        let outcome = client
            .post(endpoint)
            .json(&WireRequest { texts })
            .send()
            .map_err(EmbedError::from)
            .and_then(|resp| {
                let status = resp.status().as_u16();
                if status != 200 {
                    let body = resp.text().unwrap_or_default();
                    return Err(EmbedError::Status { status, body });
                }
                resp.json::<WireResponse>()
                    .map_err(|e| EmbedError::BadResponse(e.to_string()))
            });
        match outcome {
            Ok(parsed) => {
                if parsed.vectors.len() != texts.len() {
                    return Err(EmbedError::BadResponse(format!(
                        "{} texts got {} vectors",
                        texts.len(),
                        parsed.vectors.len()
                    )));
                }
                for v in &parsed.vectors {
                    if v.is_empty() {
                        return Err(EmbedError::BadResponse("empty vector".into()));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(EmbedError::BadResponse("non-finite component".into()));
                    }
                }
                return Ok(parsed.vectors);
            }
            Err(err) => {
                let worth_retrying = match &err {
                    EmbedError::Status { status, .. } => retryable(*status),
                    EmbedError::Transport(_) => true,
                    _ => false,
                };
                if !worth_retrying || attempt >= retries {
                    return Err(err);
                }
                attempt += 1;
                std::thread::sleep(Duration::from_millis(25 * attempt as u64));
            }
        }
    }
}

/// Embed `texts` via the endpoint, preserving order. Batches run on up to
/// `max_inflight` worker threads; the first failure stops the rest.
pub fn fetch_embeddings(
    endpoint: &str,
    texts: &[String],
    opts: &FetchOptions,
) -> Result<Vec<Vec<f32>>, EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::Empty);
    }
    let batch_size = opts.batch_size.max(1);
    let batches: Vec<&[String]> = texts.chunks(batch_size).collect();
    let results: Vec<Mutex<Option<Vec<Vec<f32>>>>> =
        (0..batches.len()).map(|_| Mutex::new(None)).collect();
    let failure: Mutex<Option<EmbedError>> = Mutex::new(None);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);

    std::thread::scope(|scope| {
        for _ in 0..opts.max_inflight.max(1).min(batches.len()) {
            scope.spawn(|| {
                let client = reqwest::blocking::Client::builder()
                    .timeout(opts.timeout)
                    .build()
                    .expect("client construction only fails on bad options");
                loop {
                    let b = next.fetch_add(1, Ordering::Relaxed);
                    if b >= batches.len() || stop.load(Ordering::Relaxed) {
                        break;
                    }
                    match fetch_batch(&client, endpoint, batches[b], opts.retries) {
                        Ok(vectors) => *results[b].lock().unwrap() = Some(vectors),
                        Err(err) => {
                            failure.lock().unwrap().get_or_insert(err);
                            stop.store(true, Ordering::Relaxed);
                            break;
                        }
                    }
                }
            });
        }
    });

    if let Some(err) = failure.into_inner().unwrap() {
        return Err(err);
    }
    let mut out = Vec::with_capacity(texts.len());
    let mut dim = None;
    for slot in results {
        let vectors = slot
            .into_inner()
            .unwrap()
            .expect("every batch succeeded or a failure was recorded");
        for v in vectors {
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(EmbedError::DimensionMismatch { expected: d, got: v.len() })
                }
                _ => {}
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Build a corpus by embedding each description through the endpoint.
pub fn corpus_from_endpoint<R: Scalar>(
    descriptions: &[DescriptionRecord],
    endpoint: &str,
    opts: &FetchOptions,
) -> Result<EmbeddingCorpus<R>, EmbedError> {
    let texts: Vec<String> = descriptions.iter().map(|d| d.description.clone()).collect();
    let vectors = fetch_embeddings(endpoint, &texts, opts)?;
    let mut corpus = EmbeddingCorpus::new();
    for (desc, vector) in descriptions.iter().zip(vectors) {
        corpus.push(EmbeddingRecord {
            name: desc.name.clone(),
            kind: desc.kind,
            vector: vector.into_iter().map(|v| real::<R>(v as f64)).collect(),
        })?;
    }
    Ok(corpus)
}

/// Build a corpus by looking each description up in `source` by name and
/// kind. The description text itself is ignored; this is the offline path.
pub fn corpus_from_lookup<R: Scalar>(
    descriptions: &[DescriptionRecord],
    source: &EmbeddingCorpus<R>,
) -> Result<EmbeddingCorpus<R>, EmbedError> {
    let mut corpus = EmbeddingCorpus::new();
    for desc in descriptions {
        let found = source
            .lookup(desc.kind, &desc.name)
            .ok_or_else(|| EmbedError::MissingEntry { kind: desc.kind, name: desc.name.clone() })?;
        corpus.push(found.clone())?;
    }
    Ok(corpus)
}
