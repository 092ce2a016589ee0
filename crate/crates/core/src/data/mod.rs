//! Core data model: embedding corpora, labeled feature sets, score tables.
//!
//! File formats live in [`formats`]; HTTP ingestion of embeddings lives in
//! [`crate::embed`]. Vectors and matrices are stored at the working scalar
//! `R`, while every on-disk payload is 32-bit (see the format docs), so
//! loading quantizes to `f32` precision and saving is lossless after that.

pub mod formats;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{real, wide, Scalar};
use crate::rankcorr::descending_order;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// What a vector embeds: a target dataset's description or a metric's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Dataset,
    Metric,
}

impl std::fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmbeddingKind::Dataset => "dataset",
            EmbeddingKind::Metric => "metric",
        })
    }
}

/// One named embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord<R> {
    pub name: String,
    pub kind: EmbeddingKind,
    pub vector: Vec<R>,
}

/// An ordered collection of embedding records with a uniform dimension.
///
/// Names are unique per kind; insertion order is preserved and is the
/// iteration order everywhere.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingCorpus<R> {
    records: Vec<EmbeddingRecord<R>>,
}

impl<R: Scalar> EmbeddingCorpus<R> {
    pub fn new() -> Self {
        Self { records: Vec::new() }
    }

    pub fn push(&mut self, record: EmbeddingRecord<R>) -> Result<(), DataError> {
        if record.name.is_empty() {
            return Err(DataError::Invalid("embedding record has an empty name".into()));
        }
        if record.vector.is_empty() {
            return Err(DataError::Invalid(format!(
                "embedding '{}' has an empty vector",
                record.name
            )));
        }
        if let Some(bad) = record.vector.iter().position(|v| !v.is_finite()) {
            return Err(DataError::Invalid(format!(
                "embedding '{}' has a non-finite component at {bad}",
                record.name
            )));
        }
        if let Some(first) = self.records.first() {
            if first.vector.len() != record.vector.len() {
                return Err(DataError::Invalid(format!(
                    "embedding '{}' has dimension {} but the corpus uses {}",
                    record.name,
                    record.vector.len(),
                    first.vector.len()
                )));
            }
        }
        if self.lookup(record.kind, &record.name).is_some() {
            return Err(DataError::Invalid(format!(
                "duplicate {} embedding '{}'",
                record.kind, record.name
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[EmbeddingRecord<R>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Dimension of every vector in the corpus; `None` while empty.
    pub fn dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.vector.len())
    }

    pub fn lookup(&self, kind: EmbeddingKind, name: &str) -> Option<&EmbeddingRecord<R>> {
        self.records.iter().find(|r| r.kind == kind && r.name == name)
    }

    pub fn of_kind(&self, kind: EmbeddingKind) -> impl Iterator<Item = &EmbeddingRecord<R>> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    /// A new corpus without the named dataset record.
    pub fn without_dataset(&self, name: &str) -> Self {
        Self {
            records: self
                .records
                .iter()
                .filter(|r| !(r.kind == EmbeddingKind::Dataset && r.name == name))
                .cloned()
                .collect(),
        }
    }
}

/// Extracted features of one model on one dataset, with target labels.
#[derive(Debug, Clone)]
pub struct LabeledFeatureSet<R> {
    features: Array2<R>,
    labels: Vec<u32>,
    n_classes: u32,
}

impl<R: Scalar> LabeledFeatureSet<R> {
    pub fn new(features: Array2<R>, labels: Vec<u32>, n_classes: u32) -> Result<Self, DataError> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(DataError::Invalid("feature matrix must be non-empty".into()));
        }
        if features.nrows() != labels.len() {
            return Err(DataError::Invalid(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if n_classes == 0 {
            return Err(DataError::Invalid("class count must be positive".into()));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(DataError::Invalid(format!(
                "label {l} at row {i} exceeds class count {n_classes}"
            )));
        }
        if let Some(((i, j), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DataError::Invalid(format!("non-finite feature at ({i}, {j})")));
        }
        Ok(Self { features, labels, n_classes })
    }

    pub fn features(&self) -> &Array2<R> {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_classes(&self) -> u32 {
        self.n_classes
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Soft predictions of a source-task head: one probability row per sample.
#[derive(Debug, Clone)]
pub struct SourceProbs<R> {
    probs: Array2<R>,
}

impl<R: Scalar> SourceProbs<R> {
    /// Rows must be probability vectors: non-negative, summing to 1 within
    /// 1e-3 (roundoff from 32-bit storage and upstream softmax).
    pub fn new(probs: Array2<R>) -> Result<Self, DataError> {
        if probs.nrows() == 0 || probs.ncols() == 0 {
            return Err(DataError::Invalid("probability matrix must be non-empty".into()));
        }
        for (i, row) in probs.rows().into_iter().enumerate() {
            let mut sum = R::zero();
            for &v in row.iter() {
                if !v.is_finite() || v < R::zero() {
                    return Err(DataError::Invalid(format!(
                        "row {i} holds a negative or non-finite probability"
                    )));
                }
                sum += v;
            }
            if (wide(sum) - 1.0).abs() > 1e-3 {
                return Err(DataError::Invalid(format!(
                    "row {i} sums to {} instead of 1",
                    wide(sum)
                )));
            }
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &Array2<R> {
        &self.probs
    }

    pub fn n_samples(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_source_classes(&self) -> usize {
        self.probs.ncols()
    }
}

/// The meta-task: a complete grid of weighted-tau cells per (dataset, metric).
#[derive(Debug, Clone, PartialEq)]
pub struct MetaTaskTable<R> {
    datasets: Vec<String>,
    metrics: Vec<String>,
    /// Row per dataset, column per metric.
    values: Array2<R>,
}

impl<R: Scalar> MetaTaskTable<R> {
    pub fn new(datasets: Vec<String>, metrics: Vec<String>, values: Array2<R>) -> Result<Self, DataError> {
        if datasets.is_empty() || metrics.is_empty() {
            return Err(DataError::Invalid("table needs at least one dataset and one metric".into()));
        }
        if values.nrows() != datasets.len() || values.ncols() != metrics.len() {
            return Err(DataError::Invalid(format!(
                "value grid is {}x{} but {} datasets x {} metrics were named",
                values.nrows(),
                values.ncols(),
                datasets.len(),
                metrics.len()
            )));
        }
        for names in [&datasets, &metrics] {
            for (i, n) in names.iter().enumerate() {
                if n.is_empty() {
                    return Err(DataError::Invalid("empty name in table header".into()));
                }
                if names[..i].contains(n) {
                    return Err(DataError::Invalid(format!("duplicate name '{n}' in table")));
                }
            }
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() || v < real(-1.0 - 1e-9) || v > real(1.0 + 1e-9) {
                return Err(DataError::Invalid(format!(
                    "cell ({}, {}) holds {} outside [-1, 1]",
                    datasets[i], metrics[j], v
                )));
            }
        }
        Ok(Self { datasets, metrics, values })
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn metrics(&self) -> &[String] {
        &self.metrics
    }

    pub fn values(&self) -> &Array2<R> {
        &self.values
    }

    pub fn dataset_index(&self, name: &str) -> Option<usize> {
        self.datasets.iter().position(|d| d == name)
    }

    pub fn metric_index(&self, name: &str) -> Option<usize> {
        self.metrics.iter().position(|m| m == name)
    }

    pub fn cell(&self, dataset: &str, metric: &str) -> Option<R> {
        let i = self.dataset_index(dataset)?;
        let j = self.metric_index(metric)?;
        Some(self.values[[i, j]])
    }

    pub fn row(&self, dataset_idx: usize) -> Vec<R> {
        self.values.row(dataset_idx).to_vec()
    }

    /// Ground-truth metric ordering for a dataset: indices into `metrics`,
    /// best metric first, ties broken by metric index.
    pub fn ground_truth_order(&self, dataset_idx: usize) -> Vec<usize> {
        descending_order(&self.row(dataset_idx))
    }

    /// Per-metric mean of the tau cells across all datasets.
    pub fn metric_means(&self) -> Vec<R> {
        let inv = R::one() / real::<R>(self.datasets.len() as f64);
        (0..self.metrics.len())
            .map(|j| self.values.column(j).iter().copied().sum::<R>() * inv)
            .collect()
    }

    /// Sub-table keeping only the named datasets, in the order given.
    pub fn select_datasets(&self, names: &[String]) -> Result<Self, DataError> {
        let mut rows = Vec::with_capacity(names.len());
        for n in names {
            let i = self
                .dataset_index(n)
                .ok_or_else(|| DataError::Invalid(format!("dataset '{n}' not in table")))?;
            rows.push(i);
        }
        let mut values = Array2::<R>::zeros((rows.len(), self.metrics.len()));
        for (dst, &src) in rows.iter().enumerate() {
            for j in 0..self.metrics.len() {
                values[[dst, j]] = self.values[[src, j]];
            }
        }
        Self::new(names.to_vec(), self.metrics.clone(), values)
    }

    /// Sub-table keeping only the named metrics, in the order given.
    pub fn select_metrics(&self, names: &[String]) -> Result<Self, DataError> {
        let mut cols = Vec::with_capacity(names.len());
        for n in names {
            let j = self
                .metric_index(n)
                .ok_or_else(|| DataError::Invalid(format!("metric '{n}' not in table")))?;
            cols.push(j);
        }
        let mut values = Array2::<R>::zeros((self.datasets.len(), cols.len()));
        for i in 0..self.datasets.len() {
            for (dst, &src) in cols.iter().enumerate() {
                values[[i, dst]] = self.values[[i, src]];
            }
        }
        Self::new(self.datasets.clone(), names.to_vec(), values)
    }
}

/// Scores of one metric over a zoo of models on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScoreVector<R> {
    pub dataset: String,
    pub metric: String,
    /// `(model id, score)` pairs in zoo order.
    pub scores: Vec<(String, R)>,
}

impl<R: Scalar> ModelScoreVector<R> {
    pub fn values(&self) -> Vec<R> {
        self.scores.iter().map(|(_, v)| *v).collect()
    }
}

/// Externally computed metric scores, keyed by `(dataset, metric, model)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScoreTable<R> {
    rows: Vec<ExternalScoreRow<R>>,
}

impl<R> Default for ExternalScoreTable<R> {
    fn default() -> Self {
        Self { rows: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScoreRow<R> {
    pub dataset: String,
    pub model: String,
    pub metric: String,
    pub score: R,
}

impl<R: Scalar> ExternalScoreTable<R> {
    pub fn push(&mut self, row: ExternalScoreRow<R>) -> Result<(), DataError> {
        if !row.score.is_finite() {
            return Err(DataError::Invalid(format!(
                "non-finite score for ({}, {}, {})",
                row.dataset, row.model, row.metric
            )));
        }
        if self
            .rows
            .iter()
            .any(|r| r.dataset == row.dataset && r.model == row.model && r.metric == row.metric)
        {
            return Err(DataError::Invalid(format!(
                "duplicate score row for ({}, {}, {})",
                row.dataset, row.model, row.metric
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[ExternalScoreRow<R>] {
        &self.rows
    }

    pub fn get(&self, dataset: &str, model: &str, metric: &str) -> Option<R> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.model == model && r.metric == metric)
            .map(|r| r.score)
    }
}

/// Versioned serialization envelope for trained rankers and selectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankerModel {
    pub version: u32,
    pub kind: String,
    pub input_dim: usize,
    pub training_meta: serde_json::Value,
    pub payload: serde_json::Value,
}

pub const RANKER_MODEL_VERSION: u32 = 1;

impl RankerModel {
    pub fn check_version(&self) -> Result<(), DataError> {
        if self.version != RANKER_MODEL_VERSION {
            return Err(DataError::Invalid(format!(
                "unsupported model version {} (this build reads {})",
                self.version, RANKER_MODEL_VERSION
            )));
        }
        Ok(())
    }
}
