//! Task-aware selection of transferability metrics.
//!
//! Given a new transfer task, the question is which cheap pre-training
//! metric (log-evidence, pseudo-label likelihoods, class overlap, ...) to
//! trust when ranking a zoo of source models. This crate scores the
//! candidate metrics natively, measures how well each one's ranking agrees
//! with ground truth, and learns to predict that agreement from semantic
//! embeddings of the task and metric descriptions, so an unseen task can
//! be routed to the metric most likely to rank its models well.
//!
//! Everything numeric is generic over [`num::Scalar`] (`f32` or `f64`);
//! the aliases at the crate root fix `f64` for ordinary use.

pub mod data;
pub mod embed;
pub mod gbdt;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod num;
pub mod rankcorr;
pub mod rng;
pub mod selectors;

/// Default scalar type for the concrete aliases below.
pub type Real = f64;

pub type Corpus = data::EmbeddingCorpus<Real>;
pub type FeatureSet = data::LabeledFeatureSet<Real>;
pub type Probs = data::SourceProbs<Real>;
pub type TauTable = data::MetaTaskTable<Real>;
pub type ExternalScores = data::ExternalScoreTable<Real>;
pub type ScoreVector = data::ModelScoreVector<Real>;
pub type Score = metrics::MetricValue<Real>;
