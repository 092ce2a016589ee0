//! Subcommand bodies and the mapping from library errors onto exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::json;

use tmeta_core::data::formats::{
    load_descriptions, load_embeddings, load_external_scores, load_feature_set,
    load_meta_task_table, load_probs, save_embeddings, save_meta_task_table,
};
use tmeta_core::data::{DataError, EmbeddingKind, LabeledFeatureSet, RankerModel, SourceProbs};
use tmeta_core::embed::{
    corpus_from_endpoint, corpus_from_lookup, EmbedError, FetchOptions, ENDPOINT_ENV,
};
use tmeta_core::harness::report::write_reports;
use tmeta_core::harness::{
    build_tau_table, run_lodo, DatasetZoo, EvaluationReport, HarnessError, LodoConfig,
    EVALUATION_REPORT_VERSION,
};
use tmeta_core::metrics::{
    score_model_zoo, MetricConfig, MetricId, MetricsError, ZooModelInputs,
};
use tmeta_core::selectors::{
    train_selector, MetricCandidate, Selector, SelectorError, SelectorKind, SelectorParams,
    TrainingMeta,
};
use tmeta_core::{Corpus, ExternalScores, Real};

use crate::Command;

/// A failed run, already sorted into its exit-code class: 1 for bad usage or
/// configuration, 2 for unreadable or malformed data, 3 for runtime failures.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<EmbedError> for Failure {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Data(_) | EmbedError::Empty | EmbedError::MissingEntry { .. } => {
                Failure::Data(e.to_string())
            }
            // Everything else means the service misbehaved.
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<SelectorError> for Failure {
    fn from(e: SelectorError) -> Self {
        match e {
            SelectorError::UnknownKind(_) => Failure::Usage(e.to_string()),
            SelectorError::MissingEmbedding { .. }
            | SelectorError::QueryDimension { .. }
            | SelectorError::CandidateDimension { .. }
            | SelectorError::Data(_)
            | SelectorError::Payload(_) => Failure::Data(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::BadConfig(_) => Failure::Usage(e.to_string()),
            HarnessError::BadBenchmark(_) | HarnessError::Data(_) => Failure::Data(e.to_string()),
            HarnessError::Selector(inner) => inner.into(),
            HarnessError::Metrics(_) => Failure::Data(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

pub fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Embed { input, endpoint, from_file, out } => {
            cmd_embed(&input, endpoint, from_file, &out)
        }
        Command::Score { zoo, metric, external, seed } => cmd_score(&zoo, &metric, external, seed),
        Command::TauTable { zoo, metrics, external, seed, out } => {
            cmd_tau_table(&zoo, &metrics, external, seed, &out)
        }
        Command::Train { table, embeddings, selector, metric, params, metrics, seed, out } => {
            cmd_train(&table, &embeddings, &selector, metric, params, metrics, seed, &out)
        }
        Command::Rank { model, dataset_embedding, metrics } => {
            cmd_rank(&model, &dataset_embedding, &metrics)
        }
        Command::Lodo { table, embeddings, config, out } => {
            cmd_lodo(&table, &embeddings, &config, &out)
        }
        Command::Report { report, out } => cmd_report(&report, &out),
    }
}

fn log_config(sub: &str, cfg: serde_json::Value) {
    eprintln!("tmeta {sub}: config {cfg}");
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_failure(path: &Path) -> impl FnOnce(DataError) -> Failure + '_ {
    move |e| Failure::Runtime(format!("writing {}: {e}", path.display()))
}

enum EmbedSource {
    Endpoint(String),
    File(PathBuf),
}

fn cmd_embed(
    input: &Path,
    endpoint: Option<String>,
    from_file: Option<PathBuf>,
    out: &Path,
) -> Result<(), Failure> {
    let source = match (endpoint, from_file) {
        (Some(_), Some(_)) => {
            return Err(Failure::Usage(
                "--endpoint and --from-file are mutually exclusive; give exactly one source"
                    .into(),
            ))
        }
        (Some(url), None) => EmbedSource::Endpoint(url),
        (None, Some(path)) => EmbedSource::File(path),
        (None, None) => match std::env::var(ENDPOINT_ENV) {
            Ok(url) if !url.is_empty() => EmbedSource::Endpoint(url),
            _ => {
                return Err(Failure::Usage(format!(
                    "no embedding source: pass --endpoint or --from-file, or set {ENDPOINT_ENV}"
                )))
            }
        },
    };
    let source_json = match &source {
        EmbedSource::Endpoint(url) => json!({ "endpoint": url }),
        EmbedSource::File(path) => json!({ "from_file": path.display().to_string() }),
    };
    log_config(
        "embed",
        json!({
            "input": input.display().to_string(),
            "source": source_json,
            "out": out.display().to_string(),
            "seed": 0,
            "threads": rayon::current_num_threads(),
        }),
    );
    let descriptions = load_descriptions(input)?;
    let corpus: Corpus = match &source {
        EmbedSource::Endpoint(url) => {
            corpus_from_endpoint(&descriptions, url, &FetchOptions::default())?
        }
        EmbedSource::File(path) => {
            let source_corpus: Corpus = load_embeddings(path)?;
            corpus_from_lookup(&descriptions, &source_corpus)?
        }
    };
    save_embeddings(&corpus, out).map_err(write_failure(out))?;
    let n_datasets = corpus.of_kind(EmbeddingKind::Dataset).count();
    let n_metrics = corpus.of_kind(EmbeddingKind::Metric).count();
    eprintln!(
        "tmeta embed: wrote {} records ({n_datasets} datasets, {n_metrics} metrics) to {}",
        corpus.len(),
        out.display()
    );
    Ok(())
}

/// Manifest naming one dataset's model zoo. File paths are relative to the
/// manifest's own directory; accuracies are only needed to build tables.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ZooManifest {
    dataset: String,
    models: Vec<ZooModelManifest>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ZooModelManifest {
    name: String,
    features: String,
    labels: String,
    #[serde(default)]
    probs: Option<String>,
    #[serde(default)]
    accuracy: Option<f64>,
}

struct LoadedZoo {
    dataset: String,
    names: Vec<String>,
    features: Vec<LabeledFeatureSet<Real>>,
    probs: Vec<Option<SourceProbs<Real>>>,
    accuracies: Vec<Option<f64>>,
}

impl LoadedZoo {
    fn inputs(&self) -> Vec<ZooModelInputs<'_, Real>> {
        self.names
            .iter()
            .zip(&self.features)
            .zip(&self.probs)
            .map(|((name, features), probs)| ZooModelInputs {
                model: name.clone(),
                features,
                probs: probs.as_ref(),
            })
            .collect()
    }
}

fn resolve(base: &Path, relative: &str) -> PathBuf {
    let path = PathBuf::from(relative);
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}

fn load_zoo(path: &Path) -> Result<LoadedZoo, Failure> {
    let text = read_text(path)?;
    let manifest: ZooManifest = serde_json::from_str(&text)
        .map_err(|e| Failure::Data(format!("zoo manifest {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut zoo = LoadedZoo {
        dataset: manifest.dataset,
        names: Vec::new(),
        features: Vec::new(),
        probs: Vec::new(),
        accuracies: Vec::new(),
    };
    for model in manifest.models {
        zoo.features.push(load_feature_set(
            resolve(base, &model.features),
            resolve(base, &model.labels),
        )?);
        zoo.probs.push(match &model.probs {
            Some(p) => Some(load_probs(resolve(base, p))?),
            None => None,
        });
        zoo.names.push(model.name);
        zoo.accuracies.push(model.accuracy);
    }
    Ok(zoo)
}

fn load_external(path: Option<&Path>) -> Result<Option<ExternalScores>, Failure> {
    Ok(match path {
        Some(p) => Some(load_external_scores(p)?),
        None => None,
    })
}

fn cmd_score(
    zoo_path: &Path,
    metric: &str,
    external_path: Option<PathBuf>,
    seed: u64,
) -> Result<(), Failure> {
    log_config(
        "score",
        json!({
            "zoo": zoo_path.display().to_string(),
            "metric": metric,
            "external": external_path.as_ref().map(|p| p.display().to_string()),
            "seed": seed,
            "threads": rayon::current_num_threads(),
        }),
    );
    let zoo = load_zoo(zoo_path)?;
    let external = load_external(external_path.as_deref())?;
    let id: MetricId = metric.parse().expect("metric names always parse");
    let models = zoo.inputs();
    let (scores, flags) =
        score_model_zoo(&zoo.dataset, &models, &id, &MetricConfig::default(), seed, external.as_ref())?;
    for ((name, value), flag) in scores.scores.iter().zip(&flags) {
        println!("{name}\t{value}");
        if let Some(f) = flag {
            eprintln!("note: {name}: {f:?}");
        }
    }
    Ok(())
}

fn cmd_tau_table(
    zoo_paths: &[PathBuf],
    metrics: &[String],
    external_path: Option<PathBuf>,
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    log_config(
        "tau-table",
        json!({
            "zoos": zoo_paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "metrics": metrics,
            "external": external_path.as_ref().map(|p| p.display().to_string()),
            "seed": seed,
            "out": out.display().to_string(),
            "threads": rayon::current_num_threads(),
        }),
    );
    let loaded: Vec<LoadedZoo> =
        zoo_paths.iter().map(|p| load_zoo(p)).collect::<Result<_, _>>()?;
    let mut zoos: Vec<DatasetZoo<'_, Real>> = Vec::with_capacity(loaded.len());
    for zoo in &loaded {
        let mut accuracies = Vec::with_capacity(zoo.names.len());
        for (name, acc) in zoo.names.iter().zip(&zoo.accuracies) {
            accuracies.push(acc.ok_or_else(|| {
                Failure::Data(format!(
                    "zoo '{}': model '{name}' is missing its accuracy",
                    zoo.dataset
                ))
            })?);
        }
        zoos.push(DatasetZoo { dataset: zoo.dataset.clone(), models: zoo.inputs(), accuracies });
    }
    let ids: Vec<MetricId> =
        metrics.iter().map(|m| m.parse().expect("metric names always parse")).collect();
    let external = load_external(external_path.as_deref())?;
    let table =
        build_tau_table(&zoos, &ids, &MetricConfig::default(), seed, external.as_ref())?;
    save_meta_task_table(&table, out).map_err(write_failure(out))?;
    eprintln!(
        "tmeta tau-table: wrote {} datasets x {} metrics to {}",
        table.datasets().len(),
        table.metrics().len(),
        out.display()
    );
    Ok(())
}

fn parse_selector_kind(kind: &str, metric: Option<&str>) -> Result<SelectorKind, Failure> {
    if kind == "fixed" {
        let m = metric
            .ok_or_else(|| Failure::Usage("the fixed strategy needs --metric".into()))?;
        return Ok(SelectorKind::Fixed { metric: m.to_string() });
    }
    if metric.is_some() {
        return Err(Failure::Usage("--metric only applies to --selector fixed".into()));
    }
    Ok(match kind {
        "metarank_gbdt" => SelectorKind::MetarankGbdt,
        "metarank_mlp" => SelectorKind::MetarankMlp,
        "global_best" => SelectorKind::GlobalBest,
        "argosmart_1nn" => SelectorKind::Argosmart1nn,
        "isac_kmeans" => SelectorKind::IsacKmeans,
        "alors_mf" => SelectorKind::AlorsMf,
        "ncf_mlp" => SelectorKind::NcfMlp,
        "random" => SelectorKind::Random,
        other => return Err(Failure::Usage(format!("unknown selector kind '{other}'"))),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    table_path: &Path,
    embeddings: &Path,
    selector: &str,
    metric: Option<String>,
    params_path: Option<PathBuf>,
    metric_subset: Option<Vec<String>>,
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    let kind = parse_selector_kind(selector, metric.as_deref())?;
    let params: SelectorParams = match &params_path {
        Some(p) => serde_json::from_str(&read_text(p)?)
            .map_err(|e| Failure::Usage(format!("params {}: {e}", p.display())))?,
        None => SelectorParams::default(),
    };
    log_config(
        "train",
        json!({
            "table": table_path.display().to_string(),
            "embeddings": embeddings.display().to_string(),
            "selector": serde_json::to_value(&kind).expect("selector kinds serialize"),
            "params": serde_json::to_value(&params).expect("params serialize"),
            "metrics": metric_subset,
            "seed": seed,
            "out": out.display().to_string(),
            "threads": rayon::current_num_threads(),
        }),
    );
    let full = load_meta_task_table(table_path)?;
    let table = match &metric_subset {
        Some(names) => full.select_metrics(names)?,
        None => full,
    };
    let corpus: Corpus = load_embeddings(embeddings)?;
    let fitted = train_selector(&kind, &table, &corpus, &params, seed)?;
    let meta = TrainingMeta {
        seed,
        n_datasets: table.datasets().len(),
        n_metrics: table.metrics().len(),
    };
    let model = fitted.to_model(&meta)?;
    let mut text = serde_json::to_string_pretty(&model)
        .map_err(|e| Failure::Runtime(format!("serializing model: {e}")))?;
    text.push('\n');
    fs::write(out, text).map_err(|e| Failure::Runtime(format!("writing {}: {e}", out.display())))?;
    eprintln!("tmeta train: wrote {} model to {}", fitted.kind_tag(), out.display());
    Ok(())
}

fn cmd_rank(model_path: &Path, dataset_embedding: &str, metrics: &Path) -> Result<(), Failure> {
    log_config(
        "rank",
        json!({
            "model": model_path.display().to_string(),
            "dataset_embedding": dataset_embedding,
            "metrics": metrics.display().to_string(),
            "seed": 0,
            "threads": rayon::current_num_threads(),
        }),
    );
    let envelope: RankerModel = serde_json::from_str(&read_text(model_path)?)
        .map_err(|e| Failure::Data(format!("model {}: {e}", model_path.display())))?;
    let selector: Selector<Real> = Selector::from_model(&envelope)?;
    let corpus: Corpus = load_embeddings(metrics)?;
    let query: Vec<Real> = if dataset_embedding.trim_start().starts_with('[') {
        serde_json::from_str(dataset_embedding)
            .map_err(|e| Failure::Usage(format!("inline embedding: {e}")))?
    } else {
        corpus
            .lookup(EmbeddingKind::Dataset, dataset_embedding)
            .ok_or_else(|| {
                Failure::Data(format!(
                    "no dataset embedding named '{dataset_embedding}' in {}",
                    metrics.display()
                ))
            })?
            .vector
            .clone()
    };
    let candidates: Vec<MetricCandidate<'_, Real>> = corpus
        .of_kind(EmbeddingKind::Metric)
        .map(|r| MetricCandidate { name: &r.name, embedding: Some(&r.vector) })
        .collect();
    if candidates.is_empty() {
        return Err(Failure::Data(format!("{} holds no metric embeddings", metrics.display())));
    }
    let recommendation = selector.recommend(&query, &candidates)?;
    for (name, score) in &recommendation.ranking {
        println!("{name}\t{score}");
    }
    if !recommendation.unknown.is_empty() {
        eprintln!("note: no embedding for: {}", recommendation.unknown.join(", "));
    }
    Ok(())
}

fn cmd_lodo(
    table_path: &Path,
    embeddings: &Path,
    config_path: &Path,
    out: &Path,
) -> Result<(), Failure> {
    let cfg: LodoConfig = serde_json::from_str(&read_text(config_path)?)
        .map_err(|e| Failure::Usage(format!("config {}: {e}", config_path.display())))?;
    log_config(
        "lodo",
        json!({
            "table": table_path.display().to_string(),
            "embeddings": embeddings.display().to_string(),
            "out": out.display().to_string(),
            "config": serde_json::to_value(&cfg).expect("configs serialize"),
            "seed": cfg.seed,
            "threads": rayon::current_num_threads(),
        }),
    );
    let table = load_meta_task_table(table_path)?;
    let corpus: Corpus = load_embeddings(embeddings)?;
    let report = run_lodo(&table, &corpus, &cfg)?;
    write_reports(&report, out)
        .map_err(|e| Failure::Runtime(format!("writing reports to {}: {e}", out.display())))?;
    eprintln!(
        "tmeta lodo: {} folds, {} methods, leak checks passed {}/{}; reports in {}",
        report.folds.len(),
        report.methods.len(),
        report.leak_checks_passed,
        report.folds.len(),
        out.display()
    );
    Ok(())
}

fn cmd_report(report_path: &Path, out: &Path) -> Result<(), Failure> {
    log_config(
        "report",
        json!({
            "report": report_path.display().to_string(),
            "out": out.display().to_string(),
            "seed": 0,
            "threads": rayon::current_num_threads(),
        }),
    );
    let report: EvaluationReport = serde_json::from_str(&read_text(report_path)?)
        .map_err(|e| Failure::Data(format!("report {}: {e}", report_path.display())))?;
    if report.version != EVALUATION_REPORT_VERSION {
        return Err(Failure::Data(format!(
            "report {}: unsupported version {} (this build reads {})",
            report_path.display(),
            report.version,
            EVALUATION_REPORT_VERSION
        )));
    }
    write_reports(&report, out)
        .map_err(|e| Failure::Runtime(format!("writing reports to {}: {e}", out.display())))?;
    eprintln!(
        "tmeta report: rewrote reports for {} methods in {}",
        report.methods.len(),
        out.display()
    );
    Ok(())
}
