//! Builds the dataset-by-metric quality table from model zoos.
//!
//! Each cell is the weighted rank correlation between one metric's scores
//! over a dataset's model zoo and that zoo's measured transfer
//! accuracies. A cell that cannot be computed aborts the whole build with
//! the offending (dataset, metric) pair in the error.

use ndarray::Array2;

use crate::data::{ExternalScoreTable, MetaTaskTable};
use crate::metrics::{score_model_zoo, MetricConfig, MetricId, ZooModelInputs};
use crate::num::Scalar;
use crate::rankcorr::{weighted_kendall_tau, WeightScheme};

use super::HarnessError;

/// One dataset's scored models plus the ground-truth accuracies its
/// metric scores are judged against.
pub struct DatasetZoo<'a, R> {
    pub dataset: String,
    pub models: Vec<ZooModelInputs<'a, R>>,
    /// Transfer accuracy per model, in zoo order.
    pub accuracies: Vec<R>,
}

/// Scores every (dataset, metric) pair and correlates against the
/// accuracies. The seed is passed through unchanged to each zoo scoring,
/// so a single cell recomputed in isolation matches the table bitwise.
pub fn build_tau_table<R: Scalar>(
    zoos: &[DatasetZoo<'_, R>],
    metrics: &[MetricId],
    cfg: &MetricConfig,
    seed: u64,
    external: Option<&ExternalScoreTable<R>>,
) -> Result<MetaTaskTable<R>, HarnessError> {
    if zoos.is_empty() {
        return Err(HarnessError::BadConfig("no dataset zoos given".into()));
    }
    if metrics.is_empty() {
        return Err(HarnessError::BadConfig("no metrics given".into()));
    }
    for zoo in zoos {
        if zoo.models.len() < 2 {
            return Err(HarnessError::BadConfig(format!(
                "zoo '{}' holds {} model(s); correlation needs at least 2",
                zoo.dataset,
                zoo.models.len()
            )));
        }
        if zoo.models.len() != zoo.accuracies.len() {
            return Err(HarnessError::BadConfig(format!(
                "zoo '{}' holds {} models but {} accuracies",
                zoo.dataset,
                zoo.models.len(),
                zoo.accuracies.len()
            )));
        }
    }

    let mut cells = Vec::with_capacity(zoos.len() * metrics.len());
    for zoo in zoos {
        for metric in metrics {
            let with_context = |source: HarnessError| HarnessError::Cell {
                dataset: zoo.dataset.clone(),
                metric: metric.to_string(),
                source: Box::new(source),
            };
            let (scores, _) =
                score_model_zoo(&zoo.dataset, &zoo.models, metric, cfg, seed, external)
                    .map_err(|e| with_context(e.into()))?;
            let corr = weighted_kendall_tau(
                &scores.values(),
                &zoo.accuracies,
                WeightScheme::HyperbolicAdditive,
            )
            .map_err(|e| with_context(e.into()))?;
            cells.push(corr.value);
        }
    }
    let datasets: Vec<String> = zoos.iter().map(|z| z.dataset.clone()).collect();
    let names: Vec<String> = metrics.iter().map(|m| m.to_string()).collect();
    let values = Array2::from_shape_vec((zoos.len(), metrics.len()), cells)
        .expect("cell count matches the grid");
    Ok(MetaTaskTable::new(datasets, names, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ExternalScoreRow, LabeledFeatureSet};
    use ndarray::array;

    fn tiny_features(seed: u64) -> LabeledFeatureSet<f64> {
        use rand::Rng;
        let mut r = crate::rng::rng(seed);
        let n = 24;
        let dim = 4;
        let mut labels = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n * dim);
        for i in 0..n {
            let class = (i % 3) as u32;
            labels.push(class);
            for d in 0..dim {
                let center = if d == class as usize { 2.0 } else { 0.0 };
                rows.push(center + r.gen_range(-0.5..0.5));
            }
        }
        let features = Array2::from_shape_vec((n, dim), rows).unwrap();
        LabeledFeatureSet::new(features, labels, 3).unwrap()
    }

    fn external_only_zoo<'a>(
        dataset: &str,
        features: &'a LabeledFeatureSet<f64>,
        n_models: usize,
        accuracies: Vec<f64>,
    ) -> DatasetZoo<'a, f64> {
        let models = (0..n_models)
            .map(|i| ZooModelInputs {
                model: format!("model{i}"),
                features,
                probs: None,
            })
            .collect();
        DatasetZoo { dataset: dataset.into(), models, accuracies }
    }

    #[test]
    fn perfect_agreement_and_inversion_hit_the_bounds() {
        let features = tiny_features(0);
        let zoo = external_only_zoo("d", &features, 2, vec![0.6, 0.9]);
        let mut ext = ExternalScoreTable::default();
        for (model, (agree, invert)) in [("model0", (1.0, 2.0)), ("model1", (2.0, 1.0))] {
            ext.push(ExternalScoreRow {
                dataset: "d".into(),
                model: model.into(),
                metric: "Agree".into(),
                score: agree,
            })
            .unwrap();
            ext.push(ExternalScoreRow {
                dataset: "d".into(),
                model: model.into(),
                metric: "Invert".into(),
                score: invert,
            })
            .unwrap();
        }
        let metrics =
            vec![MetricId::External("Agree".into()), MetricId::External("Invert".into())];
        let table =
            build_tau_table(&[zoo], &metrics, &MetricConfig::default(), 0, Some(&ext)).unwrap();
        assert_eq!(table.cell("d", "Agree"), Some(1.0));
        assert_eq!(table.cell("d", "Invert"), Some(-1.0));
    }

    #[test]
    fn table_cells_match_standalone_zoo_scoring_bitwise() {
        let sets: Vec<LabeledFeatureSet<f64>> = (0..15).map(|i| tiny_features(100 + i)).collect();
        let mut zoos = Vec::new();
        for d in 0..5 {
            let models = (0..3)
                .map(|m| ZooModelInputs {
                    model: format!("m{m}"),
                    features: &sets[d * 3 + m],
                    probs: None,
                })
                .collect();
            zoos.push(DatasetZoo {
                dataset: format!("ds{d}"),
                models,
                accuracies: vec![0.5, 0.7, 0.9],
            });
        }
        let metrics = vec![MetricId::HScore, MetricId::LogMe, MetricId::Nleep];
        let cfg = MetricConfig::default();
        let seed = 7;
        let table = build_tau_table(&zoos, &metrics, &cfg, seed, None).unwrap();
        for zoo in &zoos {
            for metric in &metrics {
                let (scores, _) =
                    score_model_zoo(&zoo.dataset, &zoo.models, metric, &cfg, seed, None).unwrap();
                let by_hand = weighted_kendall_tau(
                    &scores.values(),
                    &zoo.accuracies,
                    WeightScheme::HyperbolicAdditive,
                )
                .unwrap();
                assert_eq!(
                    table.cell(&zoo.dataset, &metric.to_string()),
                    Some(by_hand.value),
                    "({}, {metric})",
                    zoo.dataset
                );
            }
        }
    }

    #[test]
    fn failed_cells_name_the_dataset_and_metric() {
        let features = tiny_features(3);
        let good = external_only_zoo("good", &features, 2, vec![0.4, 0.8]);
        let bad = external_only_zoo("bad", &features, 2, vec![0.4, 0.8]);
        let mut ext = ExternalScoreTable::default();
        for model in ["model0", "model1"] {
            ext.push(ExternalScoreRow {
                dataset: "good".into(),
                model: model.into(),
                metric: "Ext".into(),
                score: 1.0,
            })
            .unwrap();
        }
        let err = build_tau_table(
            &[good, bad],
            &[MetricId::External("Ext".into())],
            &MetricConfig::default(),
            0,
            Some(&ext),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad") && msg.contains("Ext"), "{msg}");
    }

    #[test]
    fn undersized_zoos_are_rejected() {
        let features = tiny_features(1);
        let solo = external_only_zoo("solo", &features, 1, vec![0.5]);
        let err = build_tau_table(
            &[solo],
            &[MetricId::HScore],
            &MetricConfig::default(),
            0,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("at least 2"), "{err}");
        let skewed = DatasetZoo {
            dataset: "skewed".into(),
            models: external_only_zoo("x", &features, 3, vec![]).models,
            accuracies: vec![0.1, 0.2],
        };
        assert!(build_tau_table(&[skewed], &[MetricId::HScore], &MetricConfig::default(), 0, None)
            .is_err());
    }

    #[test]
    fn composition_matches_a_hand_computed_example() {
        // Two models, external scores [3, 1] against accuracies [0.2, 0.9]:
        // the reference ranks model1 first, the metric ranks model0 first,
        // every pair is discordant, so the correlation is exactly -1.
        let features = tiny_features(2);
        let zoo = external_only_zoo("hand", &features, 2, vec![0.2, 0.9]);
        let mut ext = ExternalScoreTable::default();
        ext.push(ExternalScoreRow {
            dataset: "hand".into(),
            model: "model0".into(),
            metric: "E".into(),
            score: 3.0,
        })
        .unwrap();
        ext.push(ExternalScoreRow {
            dataset: "hand".into(),
            model: "model1".into(),
            metric: "E".into(),
            score: 1.0,
        })
        .unwrap();
        let table = build_tau_table(
            &[zoo],
            &[MetricId::External("E".into())],
            &MetricConfig::default(),
            0,
            Some(&ext),
        )
        .unwrap();
        let v = array![[table.cell("hand", "E").unwrap()]];
        assert_eq!(v[[0, 0]], -1.0);
    }
}
