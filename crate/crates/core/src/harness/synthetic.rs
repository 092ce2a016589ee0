//! Seeded synthetic meta-benchmark: queries and items with Gaussian
//! embeddings whose quality cells follow a known bilinear utility, so
//! ranking quality has a computable ground truth.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{EmbeddingCorpus, EmbeddingKind, EmbeddingRecord, MetaTaskTable};
use crate::num::{real, Scalar};
use crate::rng;

use super::HarnessError;

/// Generation recipe. Embeddings are standard normal; the quality of item
/// `k` on query `j` is `tanh` of the weighted coordinate-product utility
/// `sum_i latent[i] * d[j][i] * s[k][i] / sqrt(dim/2)` plus Gaussian noise,
/// clipped to the correlation range.
///
/// Every stream derives from `seed` per query/item, so a longer run is an
/// exact extension of a shorter one: the first `J` queries of any two
/// benchmarks differing only in `n_queries` coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMetaBenchmark {
    pub n_queries: usize,
    pub n_items: usize,
    /// Instance dimension: query and item embeddings get half each.
    pub feature_dim: usize,
    /// Bilinear weights, length `feature_dim / 2`: geometrically decaying
    /// magnitudes with signs drawn from the seed by
    /// [`SyntheticMetaBenchmark::new`].
    pub latent: Vec<f64>,
    /// Standard deviation of the additive noise on each cell.
    pub noise: f64,
    pub seed: u64,
}

const MAX_QUERIES: usize = 9999;

/// Magnitude profile of the latent weights: coordinate `i` carries
/// `LATENT_SCALE * LATENT_DECAY^i` with a seeded sign. The decay
/// concentrates the utility on the leading coordinates, which keeps the
/// induced rankings learnable from axis-aligned splits, and the scale
/// puts the utility spread near unit range before squashing.
const LATENT_DECAY: f64 = 0.7;
const LATENT_SCALE: f64 = 2.4;

impl SyntheticMetaBenchmark {
    pub fn new(
        n_queries: usize,
        n_items: usize,
        feature_dim: usize,
        noise: f64,
        seed: u64,
    ) -> Result<Self, HarnessError> {
        if n_queries < 2 || n_queries > MAX_QUERIES {
            return Err(HarnessError::BadBenchmark(format!(
                "n_queries {n_queries} outside 2..={MAX_QUERIES}"
            )));
        }
        if n_items < 2 {
            return Err(HarnessError::BadBenchmark(format!("n_items {n_items} below 2")));
        }
        if feature_dim < 2 || feature_dim % 2 != 0 {
            return Err(HarnessError::BadBenchmark(format!(
                "feature_dim {feature_dim} must be even and at least 2"
            )));
        }
        if !noise.is_finite() || noise < 0.0 {
            return Err(HarnessError::BadBenchmark(format!("noise {noise} must be finite and >= 0")));
        }
        let half = feature_dim / 2;
        let mut gen = rng::rng(rng::derive(seed, &[0]));
        let latent = (0..half)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut gen);
                let sign = if z >= 0.0 { 1.0 } else { -1.0 };
                sign * LATENT_SCALE * LATENT_DECAY.powi(i as i32)
            })
            .collect();
        Ok(Self { n_queries, n_items, feature_dim, latent, noise, seed })
    }

    /// The fixture recipe used by the ranking acceptance suite.
    pub fn standard() -> Self {
        Self::new(200, 9, 16, 0.05, 0).expect("standard recipe is valid")
    }

    fn item_embedding(&self, k: usize) -> Vec<f64> {
        let mut gen = rng::rng(rng::derive(self.seed, &[1, k as u64]));
        (0..self.feature_dim / 2).map(|_| StandardNormal.sample(&mut gen)).collect()
    }

    /// Query embedding plus one noise draw per item, all from the query's
    /// own stream.
    fn query_draws(&self, j: usize) -> (Vec<f64>, Vec<f64>) {
        let mut gen = rng::rng(rng::derive(self.seed, &[2, j as u64]));
        let d = (0..self.feature_dim / 2).map(|_| StandardNormal.sample(&mut gen)).collect();
        let eps = (0..self.n_items).map(|_| {
            let z: f64 = StandardNormal.sample(&mut gen);
            z * self.noise
        });
        (d, eps.collect())
    }

    /// Noiseless utility of item embedding `s` for query embedding `d`.
    pub fn utility(&self, d: &[f64], s: &[f64]) -> f64 {
        let half = self.latent.len();
        let raw: f64 = self
            .latent
            .iter()
            .zip(d.iter())
            .zip(s.iter())
            .map(|((w, a), b)| w * a * b)
            .sum();
        raw / (half as f64).sqrt()
    }
}

/// Builds the quality table and embedding corpus for the recipe.
pub fn generate_synthetic<R: Scalar>(
    bench: &SyntheticMetaBenchmark,
) -> Result<(MetaTaskTable<R>, EmbeddingCorpus<R>), HarnessError> {
    let half = bench.feature_dim / 2;
    if bench.latent.len() != half {
        return Err(HarnessError::BadBenchmark(format!(
            "latent has {} weights for half-dimension {half}",
            bench.latent.len()
        )));
    }
    let items: Vec<Vec<f64>> = (0..bench.n_items).map(|k| bench.item_embedding(k)).collect();
    let mut corpus = EmbeddingCorpus::new();
    for (k, s) in items.iter().enumerate() {
        corpus.push(EmbeddingRecord {
            name: format!("item{k}"),
            kind: EmbeddingKind::Metric,
            vector: s.iter().map(|&v| real::<R>(v)).collect(),
        })?;
    }
    let mut values = Array2::<R>::zeros((bench.n_queries, bench.n_items));
    let mut datasets = Vec::with_capacity(bench.n_queries);
    for j in 0..bench.n_queries {
        let (d, eps) = bench.query_draws(j);
        let name = format!("q{j:04}");
        corpus.push(EmbeddingRecord {
            name: name.clone(),
            kind: EmbeddingKind::Dataset,
            vector: d.iter().map(|&v| real::<R>(v)).collect(),
        })?;
        datasets.push(name);
        for (k, s) in items.iter().enumerate() {
            let cell = (bench.utility(&d, s).tanh() + eps[k]).clamp(-1.0, 1.0);
            values[[j, k]] = real::<R>(cell);
        }
    }
    let metrics = (0..bench.n_items).map(|k| format!("item{k}")).collect();
    Ok((MetaTaskTable::new(datasets, metrics, values)?, corpus))
}
