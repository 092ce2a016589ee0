//! Leave-one-dataset-out benchmark protocol.
//!
//! Each dataset in the quality table takes one turn as the held-out
//! target. The remaining datasets train every configured selector, with
//! hyperparameters grid-searched against a rotating validation slice, and
//! the refit selector picks one metric for the held-out dataset. A
//! selector's achieved value is the table cell of that pick, and methods
//! are compared by tie-averaged ranks of those cells per dataset.
//!
//! The whole protocol is a pure function of (table, corpus, config): folds
//! run in parallel but are assembled in fold order, and every stochastic
//! step derives its seed from the config seed, the fold, the selector
//! position and the grid position.

pub mod report;
pub mod synthetic;
mod tau_table;

pub use synthetic::{generate_synthetic, SyntheticMetaBenchmark};
pub use tau_table::{build_tau_table, DatasetZoo};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, EmbeddingCorpus, EmbeddingKind, MetaTaskTable};
use crate::metrics::MetricsError;
use crate::num::{wide, Scalar};
use crate::rankcorr::{ndcg, tie_average_ranks, RankCorrError, RelevanceVector};
use crate::rng;
use crate::selectors::{
    train_selector, MetricCandidate, Selector, SelectorError, SelectorKind, SelectorParams,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad benchmark recipe: {0}")]
    BadBenchmark(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("fold {fold} (held-out '{dataset}'): {source}")]
    Fold {
        fold: usize,
        dataset: String,
        #[source]
        source: Box<HarnessError>,
    },
    #[error("cell ({dataset}, {metric}): {source}")]
    Cell {
        dataset: String,
        metric: String,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    RankCorr(#[from] RankCorrError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("report i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// One selector entry of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorSpec {
    #[serde(flatten)]
    pub kind: SelectorKind,
    /// Report label; defaults to the kind's display name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl SelectorSpec {
    pub fn of(kind: SelectorKind) -> Self {
        Self { kind, label: None }
    }

    pub fn display_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.display_name())
    }
}

/// Hyperparameter search space. Only the axes a strategy understands are
/// consulted; strategies with no searchable axis train once on the base
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchGrid {
    pub n_trees: Vec<u32>,
    pub max_depth: Vec<u32>,
    pub learning_rate: Vec<f64>,
    pub isac_k: Vec<usize>,
    pub alors_rank: Vec<usize>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            n_trees: vec![50, 100, 200],
            max_depth: vec![2, 3, 4],
            learning_rate: vec![0.05, 0.1, 0.3],
            isac_k: vec![2, 3, 4],
            alors_rank: vec![2, 3, 4],
        }
    }
}

impl SearchGrid {
    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |what: &str| Err(HarnessError::BadConfig(format!("grid axis {what} is invalid")));
        if self.n_trees.is_empty() || self.n_trees.iter().any(|&t| t == 0) {
            return bad("n_trees");
        }
        if self.max_depth.is_empty() || self.max_depth.iter().any(|&d| d == 0) {
            return bad("max_depth");
        }
        if self.learning_rate.is_empty()
            || self.learning_rate.iter().any(|&r| !r.is_finite() || r <= 0.0 || r > 1.0)
        {
            return bad("learning_rate");
        }
        if self.isac_k.is_empty() || self.isac_k.iter().any(|&k| k == 0) {
            return bad("isac_k");
        }
        if self.alors_rank.is_empty() || self.alors_rank.iter().any(|&r| r == 0) {
            return bad("alors_rank");
        }
        Ok(())
    }
}

pub const LODO_CONFIG_VERSION: u32 = 1;

fn default_n_validation() -> usize {
    3
}

/// Serializable run configuration; the table and corpus travel as
/// separate files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LodoConfig {
    pub version: u32,
    pub selectors: Vec<SelectorSpec>,
    #[serde(default)]
    pub grid: SearchGrid,
    /// Starting point the grid perturbs; also the exact parameters for
    /// strategies without a searchable axis.
    #[serde(default)]
    pub base: SelectorParams,
    #[serde(default = "default_n_validation")]
    pub n_validation: usize,
    #[serde(default)]
    pub seed: u64,
    /// When set, selectors train on this metric subset only, while
    /// recommendations still rank the table's full metric list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_subset: Option<Vec<String>>,
}

impl LodoConfig {
    pub fn new(selectors: Vec<SelectorSpec>) -> Self {
        Self {
            version: LODO_CONFIG_VERSION,
            selectors,
            grid: SearchGrid::default(),
            base: SelectorParams::default(),
            n_validation: default_n_validation(),
            seed: 0,
            metric_subset: None,
        }
    }

    fn validate<R: Scalar>(&self, table: &MetaTaskTable<R>) -> Result<(), HarnessError> {
        if self.version != LODO_CONFIG_VERSION {
            return Err(HarnessError::BadConfig(format!(
                "unsupported config version {} (this build reads {LODO_CONFIG_VERSION})",
                self.version
            )));
        }
        if self.selectors.is_empty() {
            return Err(HarnessError::BadConfig("no selectors configured".into()));
        }
        let mut labels: Vec<String> = self.selectors.iter().map(|s| s.display_label()).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.selectors.len() {
            return Err(HarnessError::BadConfig("selector labels are not unique".into()));
        }
        self.grid.validate()?;
        let j = table.datasets().len();
        if self.n_validation == 0 || self.n_validation + 1 >= j {
            return Err(HarnessError::BadConfig(format!(
                "n_validation {} does not fit {j} datasets (need 1 <= v < {})",
                self.n_validation,
                j.saturating_sub(1)
            )));
        }
        for spec in &self.selectors {
            if let SelectorKind::Fixed { metric } = &spec.kind {
                if table.metric_index(metric).is_none() {
                    return Err(HarnessError::BadConfig(format!(
                        "fixed selector names metric '{metric}' absent from the table"
                    )));
                }
            }
        }
        if let Some(subset) = &self.metric_subset {
            if subset.len() < 2 {
                return Err(HarnessError::BadConfig(
                    "metric_subset needs at least 2 metrics".into(),
                ));
            }
            for m in subset {
                if table.metric_index(m).is_none() {
                    return Err(HarnessError::BadConfig(format!(
                        "metric_subset names '{m}' absent from the table"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What one selector did on one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub method: String,
    pub selected_metric: String,
    /// Table cell of the top recommendation for the held-out dataset.
    pub tau_w: f64,
    /// Hyperparameters the grid picked (empty object when nothing is
    /// searchable).
    pub params: serde_json::Value,
    /// Mean validation quality of the winning grid point; absent for
    /// singleton grids, which skip evaluation.
    pub validation_ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub dataset: String,
    pub validation: Vec<String>,
    /// Held-out row and embedding verified absent from all training
    /// inputs.
    pub leak_free: bool,
    pub selections: Vec<SelectionRecord>,
}

pub const EVALUATION_REPORT_VERSION: u32 = 1;

/// Complete outcome of a benchmark run; serializes as the report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub seed: u64,
    /// Canonical (alphabetical) dataset order; fold `i` holds out entry
    /// `i`.
    pub datasets: Vec<String>,
    /// Method labels in configuration order.
    pub methods: Vec<String>,
    pub folds: Vec<FoldRecord>,
    /// `ranks[dataset][method]`: tie-averaged rank of the method's
    /// achieved value on that dataset (1 is best).
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
    pub leak_checks_passed: usize,
}

/// The grid points a strategy exposes, in reporting form. Enumeration
/// order is the documented tie-break: trees, then depth, then rate.
fn combos_for(
    kind: &SelectorKind,
    grid: &SearchGrid,
    base: &SelectorParams,
) -> Vec<(SelectorParams, serde_json::Value)> {
    match kind {
        SelectorKind::MetarankGbdt => {
            let mut out = Vec::new();
            for &t in &grid.n_trees {
                for &d in &grid.max_depth {
                    for &r in &grid.learning_rate {
                        let mut p = base.clone();
                        p.gbdt.n_trees = t;
                        p.gbdt.max_depth = d;
                        p.gbdt.learning_rate = r;
                        out.push((
                            p,
                            serde_json::json!({
                                "n_trees": t,
                                "max_depth": d,
                                "learning_rate": r,
                            }),
                        ));
                    }
                }
            }
            out
        }
        SelectorKind::IsacKmeans => grid
            .isac_k
            .iter()
            .map(|&k| {
                let mut p = base.clone();
                p.isac_k = k;
                (p, serde_json::json!({ "isac_k": k }))
            })
            .collect(),
        SelectorKind::AlorsMf => grid
            .alors_rank
            .iter()
            .map(|&r| {
                let mut p = base.clone();
                p.alors_rank = r;
                (p, serde_json::json!({ "alors_rank": r }))
            })
            .collect(),
        _ => vec![(base.clone(), serde_json::json!({}))],
    }
}

fn candidate_list<'a, R: Scalar>(
    metrics: &'a [String],
    corpus: &'a EmbeddingCorpus<R>,
) -> Vec<MetricCandidate<'a, R>> {
    metrics
        .iter()
        .map(|name| MetricCandidate {
            name,
            embedding: corpus.lookup(EmbeddingKind::Metric, name).map(|r| r.vector.as_slice()),
        })
        .collect()
}

fn dataset_query<'a, R: Scalar>(corpus: &'a EmbeddingCorpus<R>, name: &str) -> &'a [R] {
    corpus.lookup(EmbeddingKind::Dataset, name).map(|r| r.vector.as_slice()).unwrap_or(&[])
}

/// Mean ranking quality of a selector's recommendations over the named
/// datasets, judged against their full table rows.
fn mean_validation_ndcg<R: Scalar>(
    selector: &Selector<R>,
    validation: &[String],
    full_table: &MetaTaskTable<R>,
    corpus: &EmbeddingCorpus<R>,
    candidates: &[MetricCandidate<'_, R>],
) -> Result<f64, HarnessError> {
    let mut acc = 0.0;
    for name in validation {
        let rec = selector.recommend(dataset_query(corpus, name), candidates)?;
        let order: Vec<usize> = rec
            .ranking
            .iter()
            .map(|(metric, _)| full_table.metric_index(metric).expect("candidate from table"))
            .collect();
        let idx = full_table
            .dataset_index(name)
            .ok_or_else(|| HarnessError::BadConfig(format!("unknown dataset '{name}'")))?;
        let relevance = RelevanceVector::from_scores(&full_table.row(idx))?;
        acc += wide(ndcg::<R>(&order, &relevance)?);
    }
    Ok(acc / validation.len() as f64)
}

/// Exhaustive search over a strategy's grid points by mean validation
/// quality; ties keep the earliest point. Singleton grids skip evaluation
/// and return the point untouched.
#[allow(clippy::too_many_arguments)]
pub fn grid_search<R: Scalar>(
    kind: &SelectorKind,
    train_table: &MetaTaskTable<R>,
    validation: &[String],
    full_table: &MetaTaskTable<R>,
    corpus: &EmbeddingCorpus<R>,
    grid: &SearchGrid,
    base: &SelectorParams,
    seed: u64,
) -> Result<(SelectorParams, serde_json::Value, Option<f64>), HarnessError> {
    grid.validate()?;
    let combos = combos_for(kind, grid, base);
    if combos.len() == 1 {
        let (params, desc) = combos.into_iter().next().unwrap();
        return Ok((params, desc, None));
    }
    let candidates = candidate_list(full_table.metrics(), corpus);
    let mut best: Option<(usize, f64)> = None;
    for (c, (params, _)) in combos.iter().enumerate() {
        let selector =
            train_selector(kind, train_table, corpus, params, rng::derive(seed, &[c as u64]))?;
        let score = mean_validation_ndcg(&selector, validation, full_table, corpus, &candidates)?;
        let better = match best {
            None => true,
            Some((_, s)) => score > s,
        };
        if better {
            best = Some((c, score));
        }
    }
    let (idx, score) = best.expect("at least one grid point");
    let (params, desc) = combos.into_iter().nth(idx).unwrap();
    Ok((params, desc, Some(score)))
}

struct FoldInputs<'a, R> {
    table: &'a MetaTaskTable<R>,
    corpus: &'a EmbeddingCorpus<R>,
    cfg: &'a LodoConfig,
    canonical: &'a [String],
}

fn run_fold<R: Scalar>(inputs: &FoldInputs<'_, R>, fold: usize) -> Result<FoldRecord, HarnessError> {
    let FoldInputs { table, corpus, cfg, canonical } = *inputs;
    let held = &canonical[fold];
    let rest: Vec<String> = canonical.iter().filter(|d| *d != held).cloned().collect();
    // Rotate the alphabetical remainder by the fold index and take the
    // tail, so validation membership is deterministic yet changes every
    // fold.
    let rotated: Vec<String> =
        (0..rest.len()).map(|i| rest[(i + fold) % rest.len()].clone()).collect();
    let validation = rotated[rest.len() - cfg.n_validation..].to_vec();
    let grid_train_names = &rotated[..rest.len() - cfg.n_validation];

    let restrict = |t: MetaTaskTable<R>| -> Result<MetaTaskTable<R>, HarnessError> {
        match &cfg.metric_subset {
            Some(subset) => Ok(t.select_metrics(subset)?),
            None => Ok(t),
        }
    };
    let fold_table = restrict(table.select_datasets(&rest)?)?;
    let grid_table = restrict(table.select_datasets(grid_train_names)?)?;
    let fold_corpus = corpus.without_dataset(held);
    let leak_free = fold_table.dataset_index(held).is_none()
        && grid_table.dataset_index(held).is_none()
        && fold_corpus.lookup(EmbeddingKind::Dataset, held).is_none();

    let candidates = candidate_list(table.metrics(), &fold_corpus);
    let mut selections = Vec::with_capacity(cfg.selectors.len());
    for (s, spec) in cfg.selectors.iter().enumerate() {
        let (params, desc, validation_ndcg) = grid_search(
            &spec.kind,
            &grid_table,
            &validation,
            table,
            &fold_corpus,
            &cfg.grid,
            &cfg.base,
            rng::derive(cfg.seed, &[1, fold as u64, s as u64]),
        )?;
        let selector = train_selector(
            &spec.kind,
            &fold_table,
            &fold_corpus,
            &params,
            rng::derive(cfg.seed, &[2, fold as u64, s as u64]),
        )?;
        // The held-out embedding is the query: legitimate test-time input,
        // deliberately taken from the full corpus.
        let rec = selector.recommend(dataset_query(corpus, held), &candidates)?;
        let top = rec
            .top()
            .ok_or_else(|| HarnessError::BadConfig("empty candidate list".into()))?
            .to_string();
        let tau = table
            .cell(held, &top)
            .expect("top recommendation is a table metric");
        selections.push(SelectionRecord {
            method: spec.display_label(),
            selected_metric: top,
            tau_w: wide(tau),
            params: desc,
            validation_ndcg,
        });
    }
    Ok(FoldRecord { fold, dataset: held.clone(), validation, leak_free, selections })
}

/// Runs the full protocol: one fold per dataset, in parallel, assembled
/// in canonical order.
pub fn run_lodo<R: Scalar>(
    table: &MetaTaskTable<R>,
    corpus: &EmbeddingCorpus<R>,
    cfg: &LodoConfig,
) -> Result<EvaluationReport, HarnessError> {
    cfg.validate(table)?;
    let mut canonical = table.datasets().to_vec();
    canonical.sort();
    let inputs = FoldInputs { table, corpus, cfg, canonical: &canonical };
    let folds: Vec<FoldRecord> = (0..canonical.len())
        .into_par_iter()
        .map(|fold| {
            run_fold(&inputs, fold).map_err(|e| HarnessError::Fold {
                fold,
                dataset: canonical[fold].clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;

    let methods: Vec<String> = cfg.selectors.iter().map(|s| s.display_label()).collect();
    let mut ranks = Vec::with_capacity(folds.len());
    for fold in &folds {
        let taus: Vec<f64> = fold.selections.iter().map(|s| s.tau_w).collect();
        ranks.push(tie_average_ranks(&taus)?);
    }
    let mean_ranks = (0..methods.len())
        .map(|m| ranks.iter().map(|r| r[m]).sum::<f64>() / ranks.len() as f64)
        .collect();
    let leak_checks_passed = folds.iter().filter(|f| f.leak_free).count();
    Ok(EvaluationReport {
        version: EVALUATION_REPORT_VERSION,
        seed: cfg.seed,
        datasets: canonical,
        methods,
        folds,
        ranks,
        mean_ranks,
        leak_checks_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_world() -> (MetaTaskTable<f64>, EmbeddingCorpus<f64>) {
        let bench = SyntheticMetaBenchmark::new(6, 4, 6, 0.02, 12).unwrap();
        generate_synthetic(&bench).unwrap()
    }

    fn quick_config(selectors: Vec<SelectorSpec>) -> LodoConfig {
        let mut cfg = LodoConfig::new(selectors);
        cfg.n_validation = 2;
        // One point per axis keeps protocol tests fast.
        cfg.grid = SearchGrid {
            n_trees: vec![10],
            max_depth: vec![2],
            learning_rate: vec![0.1],
            isac_k: vec![2],
            alors_rank: vec![2],
        };
        cfg
    }

    #[test]
    fn every_dataset_is_held_out_exactly_once() {
        let (table, corpus) = small_world();
        let cfg = quick_config(vec![
            SelectorSpec::of(SelectorKind::GlobalBest),
            SelectorSpec::of(SelectorKind::Random),
        ]);
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        assert_eq!(report.folds.len(), 6);
        let mut held: Vec<&str> = report.folds.iter().map(|f| f.dataset.as_str()).collect();
        held.sort();
        let mut expected: Vec<&str> = table.datasets().iter().map(|s| s.as_str()).collect();
        expected.sort();
        assert_eq!(held, expected);
        for fold in &report.folds {
            assert_eq!(fold.validation.len(), 2);
            assert!(!fold.validation.contains(&fold.dataset));
        }
        assert_eq!(report.leak_checks_passed, 6);
    }

    #[test]
    fn validation_slices_rotate_with_the_fold() {
        let (table, corpus) = small_world();
        let cfg = quick_config(vec![SelectorSpec::of(SelectorKind::Random)]);
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        let canonical = &report.datasets;
        for (f, fold) in report.folds.iter().enumerate() {
            let rest: Vec<&String> = canonical.iter().filter(|d| **d != fold.dataset).collect();
            let rotated: Vec<&String> =
                (0..rest.len()).map(|i| rest[(i + f) % rest.len()]).collect();
            let expected: Vec<String> =
                rotated[rest.len() - 2..].iter().map(|s| (*s).clone()).collect();
            assert_eq!(fold.validation, expected, "fold {f}");
        }
        // Across folds, every dataset serves in validation at least once.
        let mut seen: Vec<&str> =
            report.folds.iter().flat_map(|f| f.validation.iter().map(|s| s.as_str())).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), canonical.len());
    }

    #[test]
    fn fixed_selectors_achieve_their_own_table_cells() {
        let (table, corpus) = small_world();
        let cfg = quick_config(vec![
            SelectorSpec::of(SelectorKind::Fixed { metric: "item1".into() }),
            SelectorSpec::of(SelectorKind::Fixed { metric: "item3".into() }),
        ]);
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        for fold in &report.folds {
            for (sel, metric) in fold.selections.iter().zip(["item1", "item3"]) {
                assert_eq!(sel.selected_metric, metric);
                assert_eq!(sel.tau_w, table.cell(&fold.dataset, metric).unwrap());
            }
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let (table, corpus) = small_world();
        let mut cfg = quick_config(vec![
            SelectorSpec::of(SelectorKind::MetarankGbdt),
            SelectorSpec::of(SelectorKind::GlobalBest),
            SelectorSpec::of(SelectorKind::Argosmart1nn),
            SelectorSpec::of(SelectorKind::IsacKmeans),
            SelectorSpec::of(SelectorKind::AlorsMf),
            SelectorSpec::of(SelectorKind::Random),
        ]);
        cfg.grid.n_trees = vec![5, 10];
        cfg.seed = 4;
        let a = run_lodo(&table, &corpus, &cfg).unwrap();
        let b = run_lodo(&table, &corpus, &cfg).unwrap();
        assert_eq!(a, b);
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn rank_rows_sum_to_the_method_triangle() {
        let (table, corpus) = small_world();
        let cfg = quick_config(vec![
            SelectorSpec::of(SelectorKind::GlobalBest),
            SelectorSpec::of(SelectorKind::Random),
            SelectorSpec::of(SelectorKind::Fixed { metric: "item0".into() }),
        ]);
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        let r = report.methods.len() as f64;
        for row in &report.ranks {
            let sum: f64 = row.iter().sum();
            assert!((sum - r * (r + 1.0) / 2.0).abs() <= 1e-12);
        }
        for &m in &report.mean_ranks {
            assert!((1.0..=r).contains(&m));
        }
    }

    #[test]
    fn single_method_always_ranks_first() {
        let (table, corpus) = small_world();
        let cfg = quick_config(vec![SelectorSpec::of(SelectorKind::GlobalBest)]);
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        assert!(report.ranks.iter().all(|row| row == &vec![1.0]));
        assert_eq!(report.mean_ranks, vec![1.0]);
    }

    #[test]
    fn tied_methods_share_their_rank() {
        let (table, corpus) = small_world();
        let cfg = quick_config(vec![
            SelectorSpec {
                kind: SelectorKind::Fixed { metric: "item2".into() },
                label: Some("first copy".into()),
            },
            SelectorSpec {
                kind: SelectorKind::Fixed { metric: "item2".into() },
                label: Some("second copy".into()),
            },
            SelectorSpec::of(SelectorKind::Fixed { metric: "item0".into() }),
        ]);
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        for (row, fold) in report.ranks.iter().zip(&report.folds) {
            assert_eq!(row[0], row[1], "copies must tie on {}", fold.dataset);
            assert!(row[0].fract() == 0.5 || row[0].fract() == 0.0);
        }
    }

    #[test]
    fn grid_ties_keep_the_earliest_point() {
        // A constant table makes every trained ranker constant, so all
        // grid points score identically and the first must win.
        let (_, corpus) = small_world();
        let datasets: Vec<String> = (0..6).map(|j| format!("q{j:04}")).collect();
        let metrics: Vec<String> = (0..4).map(|k| format!("item{k}")).collect();
        let values = ndarray::Array2::from_elem((6, 4), 0.5);
        let table = MetaTaskTable::new(datasets, metrics, values).unwrap();
        let mut cfg = LodoConfig::new(vec![SelectorSpec::of(SelectorKind::MetarankGbdt)]);
        cfg.n_validation = 2;
        cfg.grid = SearchGrid {
            n_trees: vec![5, 10, 20],
            max_depth: vec![2, 3],
            learning_rate: vec![0.1, 0.3],
            isac_k: vec![2],
            alors_rank: vec![2],
        };
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        for fold in &report.folds {
            assert_eq!(
                fold.selections[0].params,
                serde_json::json!({"n_trees": 5, "max_depth": 2, "learning_rate": 0.1}),
                "fold {} must keep the first grid point",
                fold.fold
            );
        }
    }

    #[test]
    fn singleton_grids_skip_validation_scoring() {
        let (table, corpus) = small_world();
        let cfg = quick_config(vec![SelectorSpec::of(SelectorKind::GlobalBest)]);
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        for fold in &report.folds {
            assert_eq!(fold.selections[0].validation_ndcg, None);
            assert_eq!(fold.selections[0].params, serde_json::json!({}));
        }
    }

    #[test]
    fn searched_grids_report_their_winning_score() {
        let (table, corpus) = small_world();
        let mut cfg = quick_config(vec![SelectorSpec::of(SelectorKind::IsacKmeans)]);
        cfg.grid.isac_k = vec![2, 3];
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        for fold in &report.folds {
            let ndcg = fold.selections[0].validation_ndcg.expect("searched grid scores");
            assert!((0.0..=1.0).contains(&ndcg));
        }
    }

    #[test]
    fn bad_configurations_are_rejected_up_front() {
        let (table, corpus) = small_world();
        let mut cfg = quick_config(vec![]);
        assert!(matches!(
            run_lodo(&table, &corpus, &cfg),
            Err(HarnessError::BadConfig(_))
        ));
        cfg = quick_config(vec![SelectorSpec::of(SelectorKind::Random)]);
        cfg.n_validation = 5;
        assert!(run_lodo(&table, &corpus, &cfg).is_err());
        cfg = quick_config(vec![SelectorSpec::of(SelectorKind::Fixed { metric: "nope".into() })]);
        assert!(run_lodo(&table, &corpus, &cfg).is_err());
        cfg = quick_config(vec![
            SelectorSpec::of(SelectorKind::Random),
            SelectorSpec::of(SelectorKind::Random),
        ]);
        let err = run_lodo(&table, &corpus, &cfg).unwrap_err();
        assert!(err.to_string().contains("labels"), "{err}");
        cfg = quick_config(vec![SelectorSpec::of(SelectorKind::Random)]);
        cfg.grid.learning_rate = vec![];
        assert!(run_lodo(&table, &corpus, &cfg).is_err());
        cfg = quick_config(vec![SelectorSpec::of(SelectorKind::Random)]);
        cfg.metric_subset = Some(vec!["item0".into()]);
        assert!(run_lodo(&table, &corpus, &cfg).is_err());
    }

    #[test]
    fn metric_subset_restricts_training_but_not_the_ranking() {
        let (table, corpus) = small_world();
        let mut cfg = quick_config(vec![
            SelectorSpec::of(SelectorKind::GlobalBest),
            SelectorSpec::of(SelectorKind::MetarankGbdt),
        ]);
        cfg.metric_subset = Some(vec!["item0".into(), "item1".into()]);
        let report = run_lodo(&table, &corpus, &cfg).unwrap();
        for fold in &report.folds {
            // The mean-score strategy can only know the subset it saw.
            assert!(["item0", "item1"]
                .contains(&fold.selections[0].selected_metric.as_str()));
            // The embedding strategy still ranks all four items and may
            // pick outside the subset; its pick must be a table metric.
            assert!(table.metric_index(&fold.selections[1].selected_metric).is_some());
        }
    }

    #[test]
    fn config_files_round_trip() {
        let mut cfg = LodoConfig::new(vec![
            SelectorSpec::of(SelectorKind::MetarankGbdt),
            SelectorSpec {
                kind: SelectorKind::Fixed { metric: "LEEP".into() },
                label: Some("LEEP".into()),
            },
        ]);
        cfg.metric_subset = Some(vec!["a".into(), "b".into()]);
        cfg.seed = 9;
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: LodoConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.selectors, cfg.selectors);
        assert_eq!(back.grid, cfg.grid);
        assert_eq!(back.n_validation, cfg.n_validation);
        assert_eq!(back.seed, 9);
        assert_eq!(back.metric_subset, cfg.metric_subset);
        let minimal: LodoConfig =
            serde_json::from_str(r#"{"version":1,"selectors":[{"kind":"random"}]}"#).unwrap();
        assert_eq!(minimal.n_validation, 3);
        assert_eq!(minimal.grid, SearchGrid::default());
    }
}
