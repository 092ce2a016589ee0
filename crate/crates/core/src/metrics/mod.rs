//! Native transferability estimators and the model-zoo scoring front end.
//!
//! Six metrics are implemented from their definitions: [`h_score`],
//! [`nce`], [`leep`], [`nleep`], [`logme`] and [`gbc`]. Each consumes a
//! model's extracted features (and, for the log-likelihood family, its
//! source-head probabilities) on a target dataset and returns one real
//! score where larger means "transfers better". Scores computed elsewhere
//! can be merged in as [`MetricId::External`] columns via
//! [`crate::data::ExternalScoreTable`].

mod gbc;
pub(crate) mod gmm;
mod hscore;
mod leep;
mod logme;
mod nleep;

pub use gbc::gbc;
pub use gmm::{fit_gmm, pca_project, GmmFit};
pub use hscore::h_score;
pub use leep::{leep, nce};
pub use logme::{evidence_maximize, logme, EvidenceFit};
pub use nleep::nleep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ExternalScoreTable, LabeledFeatureSet, ModelScoreVector, SourceProbs};
use crate::linalg::LinalgError;
use crate::num::Scalar;
use crate::rng;

/// Identifier of a scoring column: one of the native implementations or an
/// externally ingested metric named by its table key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MetricId {
    HScore,
    Nce,
    Leep,
    Nleep,
    LogMe,
    Gbc,
    External(String),
}

impl MetricId {
    pub const NATIVE: [MetricId; 6] = [
        MetricId::HScore,
        MetricId::Nce,
        MetricId::Leep,
        MetricId::Nleep,
        MetricId::LogMe,
        MetricId::Gbc,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            MetricId::HScore => "HScore",
            MetricId::Nce => "NCE",
            MetricId::Leep => "LEEP",
            MetricId::Nleep => "NLEEP",
            MetricId::LogMe => "LogME",
            MetricId::Gbc => "GBC",
            MetricId::External(name) => name,
        }
    }
}

impl std::fmt::Display for MetricId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricId {
    type Err = std::convert::Infallible;

    /// Every string parses: unknown names become external columns.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "HScore" => MetricId::HScore,
            "NCE" => MetricId::Nce,
            "LEEP" => MetricId::Leep,
            "NLEEP" => MetricId::Nleep,
            "LogME" => MetricId::LogMe,
            "GBC" => MetricId::Gbc,
            other => MetricId::External(other.to_string()),
        })
    }
}

impl Serialize for MetricId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().expect("infallible"))
    }
}

/// Covariance family for the per-class Gaussians in [`gbc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GbcCovarianceKind {
    #[default]
    Diagonal,
}

/// Tunables shared by the native metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Fraction of feature variance the PCA stage must retain.
    pub nleep_pca_variance: f64,
    /// Mixture size; `None` means "one component per target class".
    pub nleep_components: Option<u32>,
    /// Ridge added to mixture covariances and floor for class variances.
    pub gmm_reg: f64,
    /// Stop threshold on the evidence change between accepted iterations.
    pub logme_tol: f64,
    pub logme_max_iters: u32,
    pub gbc_cov: GbcCovarianceKind,
    /// Relative eigenvalue cutoff for pseudo-inverses and rank decisions.
    pub pinv_rcond: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            nleep_pca_variance: 0.8,
            nleep_components: None,
            gmm_reg: 1e-6,
            logme_tol: 1e-3,
            logme_max_iters: 100,
            gbc_cov: GbcCovarianceKind::Diagonal,
            pinv_rcond: 1e-10,
        }
    }
}

/// Degeneracies a metric can survive while still producing a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricFlag {
    /// Only one class present; the score is a defined constant.
    SingleClass,
    /// Iterative optimization hit its cap before meeting the tolerance.
    NotConverged,
}

/// A metric score plus an optional degeneracy marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue<R> {
    pub value: R,
    pub flag: Option<MetricFlag>,
}

impl<R> MetricValue<R> {
    pub fn clean(value: R) -> Self {
        Self { value, flag: None }
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{left} samples vs {right} labels")]
    LabelMismatch { left: usize, right: usize },
    #[error("class {class} has {count} samples; need at least {needed}")]
    ClassTooSmall { class: u32, count: usize, needed: usize },
    #[error("need more than {needed} samples, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },
    #[error("one-vs-rest target for class {class} has zero variance")]
    ZeroVarianceTarget { class: u32 },
    #[error("zero variance in dimension {dim} of class {class} with no regularization")]
    ZeroVariance { class: u32, dim: usize },
    #[error("metric {metric} needs source probabilities, none given for model '{model}'")]
    MissingProbs { metric: String, model: String },
    #[error("no external score for dataset '{dataset}', model '{model}', metric '{metric}'")]
    MissingExternalScore { dataset: String, model: String, metric: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("scoring model '{model}': {source}")]
    ForModel {
        model: String,
        #[source]
        source: Box<MetricsError>,
    },
}

/// A model's inputs for scoring on one dataset.
#[derive(Debug, Clone)]
pub struct ZooModelInputs<'a, R> {
    pub model: String,
    pub features: &'a LabeledFeatureSet<R>,
    /// Source-head predictions; needed by NCE and LEEP only.
    pub probs: Option<&'a SourceProbs<R>>,
}

/// Scores one model with one metric.
pub fn score_metric<R: Scalar>(
    metric: &MetricId,
    inputs: &ZooModelInputs<'_, R>,
    cfg: &MetricConfig,
    seed: u64,
) -> Result<MetricValue<R>, MetricsError> {
    let features = inputs.features;
    let need_probs = || {
        inputs.probs.ok_or_else(|| MetricsError::MissingProbs {
            metric: metric.to_string(),
            model: inputs.model.clone(),
        })
    };
    match metric {
        MetricId::HScore => h_score(features, cfg),
        MetricId::Nce => nce(need_probs()?, features.labels()),
        MetricId::Leep => leep(need_probs()?, features.labels()),
        MetricId::Nleep => nleep(features, cfg, seed),
        MetricId::LogMe => logme(features, cfg),
        MetricId::Gbc => gbc(features, cfg),
        MetricId::External(name) => Err(MetricsError::Degenerate(format!(
            "external metric '{name}' cannot be computed natively"
        ))),
    }
}

/// Scores a whole model zoo with one metric on one dataset.
///
/// Native metrics are computed from the per-model inputs; an external
/// metric id is resolved against `external`, and any missing cell aborts
/// with the full key. The per-model seeds derive from `seed` and the model
/// position, so a repeated call is bitwise identical.
pub fn score_model_zoo<R: Scalar>(
    dataset: &str,
    models: &[ZooModelInputs<'_, R>],
    metric: &MetricId,
    cfg: &MetricConfig,
    seed: u64,
    external: Option<&ExternalScoreTable<R>>,
) -> Result<(ModelScoreVector<R>, Vec<Option<MetricFlag>>), MetricsError> {
    if models.is_empty() {
        return Err(MetricsError::Degenerate("empty model zoo".into()));
    }
    let mut scores = Vec::with_capacity(models.len());
    let mut flags = Vec::with_capacity(models.len());
    for (idx, m) in models.iter().enumerate() {
        if let MetricId::External(name) = metric {
            let value = external
                .and_then(|t| t.get(dataset, &m.model, name))
                .ok_or_else(|| MetricsError::MissingExternalScore {
                    dataset: dataset.to_string(),
                    model: m.model.clone(),
                    metric: name.clone(),
                })?;
            scores.push((m.model.clone(), value));
            flags.push(None);
            continue;
        }
        let model_seed = rng::derive(seed, &[rng::hash_bytes(dataset.as_bytes()), idx as u64]);
        let scored = score_metric(metric, m, cfg, model_seed).map_err(|e| MetricsError::ForModel {
            model: m.model.clone(),
            source: Box::new(e),
        })?;
        scores.push((m.model.clone(), scored.value));
        flags.push(scored.flag);
    }
    Ok((
        ModelScoreVector { dataset: dataset.to_string(), metric: metric.to_string(), scores },
        flags,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_ids_round_trip_through_strings() {
        for m in MetricId::NATIVE {
            let s = m.to_string();
            let back: MetricId = s.parse().unwrap();
            assert_eq!(back, m);
        }
        let ext: MetricId = "SFDA".parse().unwrap();
        assert_eq!(ext, MetricId::External("SFDA".into()));
        assert_eq!(ext.to_string(), "SFDA");
    }

    #[test]
    fn config_defaults_match_documented_values() {
        let c = MetricConfig::default();
        assert_eq!(c.nleep_pca_variance, 0.8);
        assert_eq!(c.nleep_components, None);
        assert_eq!(c.gmm_reg, 1e-6);
        assert_eq!(c.logme_tol, 1e-3);
        assert_eq!(c.logme_max_iters, 100);
        assert_eq!(c.pinv_rcond, 1e-10);
        let json = serde_json::to_string(&c).unwrap();
        let back: MetricConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.gmm_reg, c.gmm_reg);
    }
}
