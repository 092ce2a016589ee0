//! Metric selectors: strategies that rank candidate transferability
//! metrics for a target dataset, trained on a table of per-dataset metric
//! quality plus semantic embeddings of datasets and metrics.
//!
//! All strategies share one calling convention: train on a
//! [`MetaTaskTable`] and an [`EmbeddingCorpus`], then
//! [`Selector::recommend`] for a query embedding against named candidates.
//! A candidate a strategy cannot score (no embedding, or never seen during
//! training) is reported in [`Recommendation::unknown`] and sinks to the
//! bottom of the ranking with a score of negative infinity.

pub mod als;
pub mod kmeans;
pub mod mlp;

use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    DataError, EmbeddingCorpus, EmbeddingKind, MetaTaskTable, RankerModel, RANKER_MODEL_VERSION,
};
use crate::gbdt::{GbdtError, GbdtModel, GbdtParams};
use crate::num::{count, wide, Scalar};
use crate::rankcorr::descending_order;
use crate::rng;
use als::{als_factorize, ridge_map, AlsError};
use kmeans::{kmeans, nearest_centroid, KmeansError};
use mlp::{train_mlp, Mlp, MlpError, MlpParams};

/// Strategy identifier, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectorKind {
    MetarankGbdt,
    MetarankMlp,
    GlobalBest,
    #[serde(rename = "argosmart_1nn")]
    Argosmart1nn,
    IsacKmeans,
    AlorsMf,
    NcfMlp,
    Random,
    Fixed { metric: String },
}

impl SelectorKind {
    /// Stable identifier used in model envelopes and configuration.
    pub fn tag(&self) -> &'static str {
        match self {
            SelectorKind::MetarankGbdt => "metarank_gbdt",
            SelectorKind::MetarankMlp => "metarank_mlp",
            SelectorKind::GlobalBest => "global_best",
            SelectorKind::Argosmart1nn => "argosmart_1nn",
            SelectorKind::IsacKmeans => "isac_kmeans",
            SelectorKind::AlorsMf => "alors_mf",
            SelectorKind::NcfMlp => "ncf_mlp",
            SelectorKind::Random => "random",
            SelectorKind::Fixed { .. } => "fixed",
        }
    }

    /// Short label used in report tables.
    pub fn display_name(&self) -> String {
        match self {
            SelectorKind::MetarankGbdt => "MetaRank".into(),
            SelectorKind::MetarankMlp => "MetaRankNN".into(),
            SelectorKind::GlobalBest => "GB".into(),
            SelectorKind::Argosmart1nn => "AS".into(),
            SelectorKind::IsacKmeans => "ISAC".into(),
            SelectorKind::AlorsMf => "ALORS".into(),
            SelectorKind::NcfMlp => "NCF".into(),
            SelectorKind::Random => "Random".into(),
            SelectorKind::Fixed { metric } => metric.clone(),
        }
    }
}

/// Tunables for every trainable strategy, with working defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorParams {
    pub gbdt: GbdtParams,
    pub mlp: MlpParams,
    /// Cluster count for the clustering strategy (capped at the number of
    /// training datasets).
    pub isac_k: usize,
    /// Latent rank for the factorization strategies (capped at the table's
    /// smaller dimension).
    pub alors_rank: usize,
    /// Ridge for the embedding-to-factor map.
    pub alors_ridge: f64,
    /// Ridge inside the alternating factorization itself.
    pub als_reg: f64,
    pub als_iters: u32,
}

impl Default for SelectorParams {
    fn default() -> Self {
        Self {
            gbdt: GbdtParams::default(),
            mlp: MlpParams::default(),
            isac_k: 3,
            alors_rank: 3,
            alors_ridge: 1e-2,
            als_reg: 1e-6,
            als_iters: 30,
        }
    }
}

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("no {kind} embedding for '{name}'")]
    MissingEmbedding { kind: EmbeddingKind, name: String },
    #[error("query embedding has dimension {got}, the model wants {want}")]
    QueryDimension { got: usize, want: usize },
    #[error("candidate '{name}' has embedding dimension {got}, the model wants {want}")]
    CandidateDimension { name: String, got: usize, want: usize },
    #[error("unknown selector kind '{0}' in model envelope")]
    UnknownKind(String),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error("regressor: {0}")]
    Mlp(#[from] MlpError),
    #[error("factorization: {0}")]
    Als(#[from] AlsError),
    #[error("clustering: {0}")]
    Kmeans(#[from] KmeansError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("model payload: {0}")]
    Payload(#[from] serde_json::Error),
}

/// A metric the caller wants ranked. The embedding is optional; strategies
/// that need one mark embedding-less candidates as unknown.
#[derive(Debug, Clone, Copy)]
pub struct MetricCandidate<'a, R> {
    pub name: &'a str,
    pub embedding: Option<&'a [R]>,
}

/// Ranked candidates, best first. Unknowns score negative infinity and
/// therefore trail the list in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation<R> {
    pub ranking: Vec<(String, R)>,
    pub unknown: Vec<String>,
}

impl<R> Recommendation<R> {
    pub fn top(&self) -> Option<&str> {
        self.ranking.first().map(|(name, _)| name.as_str())
    }
}

/// Pairwise ranking model over `[dataset embedding, metric embedding]`
/// feature rows.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairRankerModel<R> {
    pub embed_dim: usize,
    pub model: GbdtModel<R>,
}

/// Pointwise regression model over the same pair features.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairRegressorModel<R> {
    pub embed_dim: usize,
    pub model: Mlp<R>,
}

/// Per-metric training means; recommends the same order everywhere.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeanScoreModel<R> {
    pub metrics: Vec<String>,
    pub means: Vec<R>,
}

/// Memorized training rows; recommends the row of the most similar
/// training dataset by cosine.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NeighborModel<R> {
    pub datasets: Vec<String>,
    pub embeddings: Array2<R>,
    pub metrics: Vec<String>,
    pub scores: Array2<R>,
}

/// Cluster centroids with per-cluster metric means.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClusterModel<R> {
    pub centroids: Array2<R>,
    pub metrics: Vec<String>,
    pub cluster_means: Array2<R>,
}

/// Latent factors plus a ridge map from embeddings to dataset factors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FactorModel<R> {
    /// `(embed_dim, rank)` map from a dataset embedding to its factor.
    pub wmap: Array2<R>,
    pub metrics: Vec<String>,
    /// `(n_metrics, rank)` metric factors.
    pub v: Array2<R>,
}

/// Neural scorer over `[dataset factor, metric factor, dataset embedding,
/// metric embedding]` rows.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NcfModel<R> {
    pub wmap: Array2<R>,
    pub metrics: Vec<String>,
    pub v: Array2<R>,
    pub embed_dim: usize,
    pub model: Mlp<R>,
}

/// Seeded uniform shuffle; the query embedding only perturbs the stream.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RandomModel {
    pub seed: u64,
}

/// Always recommends one named metric.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FixedModel {
    pub metric: String,
}

/// A trained selector of any strategy.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector<R> {
    MetarankGbdt(PairRankerModel<R>),
    MetarankMlp(PairRegressorModel<R>),
    GlobalBest(MeanScoreModel<R>),
    Argosmart(NeighborModel<R>),
    Isac(ClusterModel<R>),
    Alors(FactorModel<R>),
    Ncf(NcfModel<R>),
    Random(RandomModel),
    Fixed(FixedModel),
}

/// Provenance stored alongside a serialized selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub n_datasets: usize,
    pub n_metrics: usize,
}

fn lookup_embedding<'a, R: Scalar>(
    corpus: &'a EmbeddingCorpus<R>,
    kind: EmbeddingKind,
    name: &str,
) -> Result<&'a [R], SelectorError> {
    corpus
        .lookup(kind, name)
        .map(|r| r.vector.as_slice())
        .ok_or_else(|| SelectorError::MissingEmbedding { kind, name: name.to_string() })
}

/// Dataset embeddings stacked in table row order.
fn dataset_matrix<R: Scalar>(
    table: &MetaTaskTable<R>,
    corpus: &EmbeddingCorpus<R>,
) -> Result<Array2<R>, SelectorError> {
    let first = lookup_embedding(corpus, EmbeddingKind::Dataset, &table.datasets()[0])?;
    let dim = first.len();
    let mut e = Array2::<R>::zeros((table.datasets().len(), dim));
    for (j, name) in table.datasets().iter().enumerate() {
        let v = lookup_embedding(corpus, EmbeddingKind::Dataset, name)?;
        for (col, value) in v.iter().enumerate() {
            e[[j, col]] = *value;
        }
    }
    Ok(e)
}

/// One training instance per table cell: `[dataset embedding, metric
/// embedding]` against the cell value. Rows are ordered by dataset name,
/// then metric name, so the layout is independent of table order; each
/// dataset forms one contiguous ranking group.
fn pair_instances<R: Scalar>(
    table: &MetaTaskTable<R>,
    corpus: &EmbeddingCorpus<R>,
) -> Result<(Array2<R>, Vec<R>, Vec<Range<usize>>, usize), SelectorError> {
    let mut dataset_order: Vec<usize> = (0..table.datasets().len()).collect();
    dataset_order.sort_by(|&a, &b| table.datasets()[a].cmp(&table.datasets()[b]));
    let mut metric_order: Vec<usize> = (0..table.metrics().len()).collect();
    metric_order.sort_by(|&a, &b| table.metrics()[a].cmp(&table.metrics()[b]));

    let embed_dim =
        lookup_embedding(corpus, EmbeddingKind::Dataset, &table.datasets()[0])?.len();
    let (j_n, k_n) = (dataset_order.len(), metric_order.len());
    let mut x = Array2::<R>::zeros((j_n * k_n, 2 * embed_dim));
    let mut y = Vec::with_capacity(j_n * k_n);
    let mut groups = Vec::with_capacity(j_n);
    let mut row = 0;
    for &j in &dataset_order {
        let start = row;
        let d = lookup_embedding(corpus, EmbeddingKind::Dataset, &table.datasets()[j])?;
        for &k in &metric_order {
            let s = lookup_embedding(corpus, EmbeddingKind::Metric, &table.metrics()[k])?;
            for (col, value) in d.iter().enumerate() {
                x[[row, col]] = *value;
            }
            for (col, value) in s.iter().enumerate() {
                x[[row, embed_dim + col]] = *value;
            }
            y.push(table.values()[[j, k]]);
            row += 1;
        }
        groups.push(start..row);
    }
    Ok((x, y, groups, embed_dim))
}

fn factorize_table<R: Scalar>(
    table: &MetaTaskTable<R>,
    corpus: &EmbeddingCorpus<R>,
    params: &SelectorParams,
    seed: u64,
) -> Result<FactorModel<R>, SelectorError> {
    let limit = table.datasets().len().min(table.metrics().len());
    let rank = params.alors_rank.clamp(1, limit);
    let f = als_factorize(table.values(), rank, params.als_reg, params.als_iters, seed)?;
    let e = dataset_matrix(table, corpus)?;
    let wmap = ridge_map(&e, &f.u, params.alors_ridge)?;
    Ok(FactorModel { wmap, metrics: table.metrics().to_vec(), v: f.v })
}

/// Fits the given strategy. `seed` fixes every stochastic choice, so equal
/// inputs produce byte-equal models.
pub fn train_selector<R: Scalar>(
    kind: &SelectorKind,
    table: &MetaTaskTable<R>,
    corpus: &EmbeddingCorpus<R>,
    params: &SelectorParams,
    seed: u64,
) -> Result<Selector<R>, SelectorError> {
    match kind {
        SelectorKind::MetarankGbdt => {
            let (x, y, groups, embed_dim) = pair_instances(table, corpus)?;
            let (model, _report) = crate::gbdt::train(&x, &y, &groups, &params.gbdt)?;
            Ok(Selector::MetarankGbdt(PairRankerModel { embed_dim, model }))
        }
        SelectorKind::MetarankMlp => {
            let (x, y, _groups, embed_dim) = pair_instances(table, corpus)?;
            let model = train_mlp(&x, &y, &params.mlp, seed)?;
            Ok(Selector::MetarankMlp(PairRegressorModel { embed_dim, model }))
        }
        SelectorKind::GlobalBest => Ok(Selector::GlobalBest(MeanScoreModel {
            metrics: table.metrics().to_vec(),
            means: table.metric_means(),
        })),
        SelectorKind::Argosmart1nn => {
            let embeddings = dataset_matrix(table, corpus)?;
            Ok(Selector::Argosmart(NeighborModel {
                datasets: table.datasets().to_vec(),
                embeddings,
                metrics: table.metrics().to_vec(),
                scores: table.values().clone(),
            }))
        }
        SelectorKind::IsacKmeans => {
            let embeddings = dataset_matrix(table, corpus)?;
            let k = params.isac_k.clamp(1, embeddings.nrows());
            let fit = kmeans(&embeddings, k, seed, 100)?;
            let k_n = table.metrics().len();
            let global = table.metric_means();
            let mut cluster_means = Array2::<R>::zeros((k, k_n));
            for c in 0..k {
                let members: Vec<usize> =
                    (0..fit.assignments.len()).filter(|&i| fit.assignments[i] == c).collect();
                if members.is_empty() {
                    // An emptied cluster falls back to the global means.
                    for col in 0..k_n {
                        cluster_means[[c, col]] = global[col];
                    }
                    continue;
                }
                let inv = R::one() / count::<R>(members.len());
                for col in 0..k_n {
                    let mut acc = R::zero();
                    for &j in &members {
                        acc += table.values()[[j, col]];
                    }
                    cluster_means[[c, col]] = acc * inv;
                }
            }
            Ok(Selector::Isac(ClusterModel {
                centroids: fit.centroids,
                metrics: table.metrics().to_vec(),
                cluster_means,
            }))
        }
        SelectorKind::AlorsMf => Ok(Selector::Alors(factorize_table(table, corpus, params, seed)?)),
        SelectorKind::NcfMlp => {
            let factors = factorize_table(table, corpus, params, rng::derive(seed, &[0]))?;
            let (pairs, y, _groups, embed_dim) = pair_instances(table, corpus)?;
            let e = dataset_matrix(table, corpus)?;
            let u = e.dot(&factors.wmap);
            let rank = factors.v.ncols();
            // Rebuild in the same sorted order pair_instances used.
            let mut dataset_order: Vec<usize> = (0..table.datasets().len()).collect();
            dataset_order.sort_by(|&a, &b| table.datasets()[a].cmp(&table.datasets()[b]));
            let mut metric_order: Vec<usize> = (0..table.metrics().len()).collect();
            metric_order.sort_by(|&a, &b| table.metrics()[a].cmp(&table.metrics()[b]));
            let mut x = Array2::<R>::zeros((pairs.nrows(), 2 * rank + 2 * embed_dim));
            let mut row = 0;
            for &j in &dataset_order {
                for &k in &metric_order {
                    for r in 0..rank {
                        x[[row, r]] = u[[j, r]];
                        x[[row, rank + r]] = factors.v[[k, r]];
                    }
                    for col in 0..2 * embed_dim {
                        x[[row, 2 * rank + col]] = pairs[[row, col]];
                    }
                    row += 1;
                }
            }
            let model = train_mlp(&x, &y, &params.mlp, rng::derive(seed, &[1]))?;
            Ok(Selector::Ncf(NcfModel {
                wmap: factors.wmap,
                metrics: factors.metrics,
                v: factors.v,
                embed_dim,
                model,
            }))
        }
        SelectorKind::Random => Ok(Selector::Random(RandomModel { seed })),
        SelectorKind::Fixed { metric } => {
            Ok(Selector::Fixed(FixedModel { metric: metric.clone() }))
        }
    }
}

fn cosine<R: Scalar>(a: ArrayView1<R>, b: ArrayView1<R>) -> R {
    let mut dot = R::zero();
    let mut na = R::zero();
    let mut nb = R::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        dot += *x * *y;
        na += *x * *x;
        nb += *y * *y;
    }
    if na <= R::zero() || nb <= R::zero() {
        return R::zero();
    }
    dot / (na.sqrt() * nb.sqrt())
}

fn check_query<R>(query: &[R], want: usize) -> Result<(), SelectorError> {
    if query.len() != want {
        return Err(SelectorError::QueryDimension { got: query.len(), want });
    }
    Ok(())
}

fn candidate_vector<'a, R>(
    c: &MetricCandidate<'a, R>,
    want: usize,
) -> Result<Option<&'a [R]>, SelectorError> {
    match c.embedding {
        None => Ok(None),
        Some(v) if v.len() == want => Ok(Some(v)),
        Some(v) => Err(SelectorError::CandidateDimension {
            name: c.name.to_string(),
            got: v.len(),
            want,
        }),
    }
}

impl<R: Scalar> Selector<R> {
    pub fn kind_tag(&self) -> &'static str {
        match self {
            Selector::MetarankGbdt(_) => "metarank_gbdt",
            Selector::MetarankMlp(_) => "metarank_mlp",
            Selector::GlobalBest(_) => "global_best",
            Selector::Argosmart(_) => "argosmart_1nn",
            Selector::Isac(_) => "isac_kmeans",
            Selector::Alors(_) => "alors_mf",
            Selector::Ncf(_) => "ncf_mlp",
            Selector::Random(_) => "random",
            Selector::Fixed(_) => "fixed",
        }
    }

    /// Query embedding dimension the model expects; 0 means any.
    pub fn embedding_dim(&self) -> usize {
        match self {
            Selector::MetarankGbdt(m) => m.embed_dim,
            Selector::MetarankMlp(m) => m.embed_dim,
            Selector::Argosmart(m) => m.embeddings.ncols(),
            Selector::Isac(m) => m.centroids.ncols(),
            Selector::Alors(m) => m.wmap.nrows(),
            Selector::Ncf(m) => m.wmap.nrows(),
            Selector::GlobalBest(_) | Selector::Random(_) | Selector::Fixed(_) => 0,
        }
    }

    /// Scores every candidate for the query embedding and returns them
    /// best first. See the module docs for the unknown-candidate contract.
    pub fn recommend(
        &self,
        query: &[R],
        candidates: &[MetricCandidate<'_, R>],
    ) -> Result<Recommendation<R>, SelectorError> {
        let n = candidates.len();
        let mut scores = vec![R::neg_infinity(); n];
        let mut known = vec![false; n];
        match self {
            Selector::MetarankGbdt(m) => {
                check_query(query, m.embed_dim)?;
                for (i, c) in candidates.iter().enumerate() {
                    if let Some(s) = candidate_vector(c, m.embed_dim)? {
                        let mut row = Array1::<R>::zeros(2 * m.embed_dim);
                        for (col, v) in query.iter().chain(s.iter()).enumerate() {
                            row[col] = *v;
                        }
                        scores[i] = m.model.predict_row(row.view());
                        known[i] = true;
                    }
                }
            }
            Selector::MetarankMlp(m) => {
                check_query(query, m.embed_dim)?;
                for (i, c) in candidates.iter().enumerate() {
                    if let Some(s) = candidate_vector(c, m.embed_dim)? {
                        let mut row = Array1::<R>::zeros(2 * m.embed_dim);
                        for (col, v) in query.iter().chain(s.iter()).enumerate() {
                            row[col] = *v;
                        }
                        scores[i] = m.model.predict_row(row.view());
                        known[i] = true;
                    }
                }
            }
            Selector::GlobalBest(m) => {
                for (i, c) in candidates.iter().enumerate() {
                    if let Some(k) = m.metrics.iter().position(|n| n == c.name) {
                        scores[i] = m.means[k];
                        known[i] = true;
                    }
                }
            }
            Selector::Argosmart(m) => {
                check_query(query, m.embeddings.ncols())?;
                let q = ArrayView1::from(query);
                let mut best = 0;
                let mut best_sim = R::neg_infinity();
                for (j, row) in m.embeddings.rows().into_iter().enumerate() {
                    let sim = cosine(q, row);
                    if sim > best_sim {
                        best_sim = sim;
                        best = j;
                    }
                }
                for (i, c) in candidates.iter().enumerate() {
                    if let Some(k) = m.metrics.iter().position(|n| n == c.name) {
                        scores[i] = m.scores[[best, k]];
                        known[i] = true;
                    }
                }
            }
            Selector::Isac(m) => {
                check_query(query, m.centroids.ncols())?;
                let cluster = nearest_centroid(&m.centroids, ArrayView1::from(query));
                for (i, c) in candidates.iter().enumerate() {
                    if let Some(k) = m.metrics.iter().position(|n| n == c.name) {
                        scores[i] = m.cluster_means[[cluster, k]];
                        known[i] = true;
                    }
                }
            }
            Selector::Alors(m) => {
                check_query(query, m.wmap.nrows())?;
                let u = ArrayView1::from(query).dot(&m.wmap);
                for (i, c) in candidates.iter().enumerate() {
                    if let Some(k) = m.metrics.iter().position(|n| n == c.name) {
                        scores[i] = u.dot(&m.v.row(k));
                        known[i] = true;
                    }
                }
            }
            Selector::Ncf(m) => {
                check_query(query, m.wmap.nrows())?;
                let u = ArrayView1::from(query).dot(&m.wmap);
                let rank = m.v.ncols();
                for (i, c) in candidates.iter().enumerate() {
                    let factor = m.metrics.iter().position(|n| n == c.name);
                    let embedding = candidate_vector(c, m.embed_dim)?;
                    // Both the latent factor and the embedding are needed.
                    if let (Some(k), Some(s)) = (factor, embedding) {
                        let mut row = Array1::<R>::zeros(2 * rank + 2 * m.embed_dim);
                        for r in 0..rank {
                            row[r] = u[r];
                            row[rank + r] = m.v[[k, r]];
                        }
                        for (col, v) in query.iter().chain(s.iter()).enumerate() {
                            row[2 * rank + col] = *v;
                        }
                        scores[i] = m.model.predict_row(row.view());
                        known[i] = true;
                    }
                }
            }
            Selector::Random(m) => {
                // The shuffle is a pure function of the stored seed and the
                // query bytes, so a given query always gets the same order
                // while different queries draw fresh permutations.
                let mut bytes = Vec::with_capacity(8 * query.len());
                for v in query {
                    bytes.extend_from_slice(&wide(*v).to_le_bytes());
                }
                let mut gen = rng::rng(m.seed ^ rng::hash_bytes(&bytes));
                let mut order: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    let j = gen.gen_range(0..=i);
                    order.swap(i, j);
                }
                for (pos, &i) in order.iter().enumerate() {
                    scores[i] = count::<R>(n - pos);
                    known[i] = true;
                }
            }
            Selector::Fixed(m) => {
                for (i, c) in candidates.iter().enumerate() {
                    scores[i] = if c.name == m.metric { R::one() } else { R::zero() };
                    known[i] = true;
                }
            }
        }
        let order = descending_order(&scores);
        let ranking =
            order.iter().map(|&i| (candidates[i].name.to_string(), scores[i])).collect();
        let unknown = candidates
            .iter()
            .zip(&known)
            .filter(|(_, &ok)| !ok)
            .map(|(c, _)| c.name.to_string())
            .collect();
        Ok(Recommendation { ranking, unknown })
    }
}

impl<R: Scalar + Serialize + DeserializeOwned> Selector<R> {
    /// Packs the model into the versioned envelope.
    pub fn to_model(&self, meta: &TrainingMeta) -> Result<RankerModel, SelectorError> {
        let payload = match self {
            Selector::MetarankGbdt(m) => serde_json::to_value(m)?,
            Selector::MetarankMlp(m) => serde_json::to_value(m)?,
            Selector::GlobalBest(m) => serde_json::to_value(m)?,
            Selector::Argosmart(m) => serde_json::to_value(m)?,
            Selector::Isac(m) => serde_json::to_value(m)?,
            Selector::Alors(m) => serde_json::to_value(m)?,
            Selector::Ncf(m) => serde_json::to_value(m)?,
            Selector::Random(m) => serde_json::to_value(m)?,
            Selector::Fixed(m) => serde_json::to_value(m)?,
        };
        Ok(RankerModel {
            version: RANKER_MODEL_VERSION,
            kind: self.kind_tag().to_string(),
            input_dim: self.embedding_dim(),
            training_meta: serde_json::to_value(meta)?,
            payload,
        })
    }

    pub fn from_model(envelope: &RankerModel) -> Result<Self, SelectorError> {
        envelope.check_version()?;
        let payload = envelope.payload.clone();
        Ok(match envelope.kind.as_str() {
            "metarank_gbdt" => Selector::MetarankGbdt(serde_json::from_value(payload)?),
            "metarank_mlp" => Selector::MetarankMlp(serde_json::from_value(payload)?),
            "global_best" => Selector::GlobalBest(serde_json::from_value(payload)?),
            "argosmart_1nn" => Selector::Argosmart(serde_json::from_value(payload)?),
            "isac_kmeans" => Selector::Isac(serde_json::from_value(payload)?),
            "alors_mf" => Selector::Alors(serde_json::from_value(payload)?),
            "ncf_mlp" => Selector::Ncf(serde_json::from_value(payload)?),
            "random" => Selector::Random(serde_json::from_value(payload)?),
            "fixed" => Selector::Fixed(serde_json::from_value(payload)?),
            other => return Err(SelectorError::UnknownKind(other.to_string())),
        })
    }
}
