//! End-to-end runs of the `tmeta` binary: each subcommand once, plus the
//! exit-code contract (1 usage, 2 data, 3 runtime) on representative
//! failures.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::Array2;
use tmeta_core::data::{
    load_meta_task_table, save_feature_matrix, save_labels, save_probs, SourceProbs,
};

fn tmeta() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tmeta"));
    // Keep the environment from supplying an embedding endpoint.
    cmd.env_remove("TMETA_EMBED_ENDPOINT");
    cmd
}

fn run(cmd: &mut Command) -> (Output, String, String) {
    let out = cmd.output().expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    (out, stdout, stderr)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn paper(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/paper").join(file)
}

/// Minimal embedding service: answers every POST with one short vector per
/// text, first component the text length.
fn serve_embeddings() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/embed", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for conn in listener.incoming() {
            let Ok(mut conn) = conn else { continue };
            std::thread::spawn(move || {
                let mut buf = Vec::new();
                let mut chunk = [0u8; 1024];
                let header_end = loop {
                    let n = conn.read(&mut chunk).unwrap_or(0);
                    if n == 0 {
                        return;
                    }
                    buf.extend_from_slice(&chunk[..n]);
                    if let Some(p) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                        break p + 4;
                    }
                };
                let headers = String::from_utf8_lossy(&buf[..header_end]).to_lowercase();
                let length: usize = headers
                    .lines()
                    .find_map(|l| l.strip_prefix("content-length:"))
                    .and_then(|v| v.trim().parse().ok())
                    .unwrap_or(0);
                while buf.len() < header_end + length {
                    let n = conn.read(&mut chunk).unwrap_or(0);
                    if n == 0 {
                        break;
                    }
                    buf.extend_from_slice(&chunk[..n]);
                }
                #[derive(serde::Deserialize)]
                struct Incoming {
                    texts: Vec<String>,
                }
                let texts = serde_json::from_slice::<Incoming>(&buf[header_end..])
                    .map(|i| i.texts)
                    .unwrap_or_default();
                let vectors: Vec<Vec<f32>> =
                    texts.iter().map(|t| vec![t.len() as f32, 1.0]).collect();
                let body = serde_json::json!({ "vectors": vectors }).to_string();
                let _ = write!(
                    conn,
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
            });
        }
    });
    url
}

fn write_descriptions(path: &Path) {
    let lines = [
        r#"{"name":"birds","kind":"dataset","description":"bird photos"}"#,
        r#"{"name":"trees","kind":"dataset","description":"tree bark closeups"}"#,
        r#"{"name":"LEEP","kind":"metric","description":"log expected empirical prediction"}"#,
    ];
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn embed_pulls_vectors_from_the_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("descriptions.jsonl");
    let out = dir.path().join("embeddings.jsonl");
    write_descriptions(&input);
    let url = serve_embeddings();

    let (res, _, stderr) =
        run(tmeta().args(["embed", "--endpoint", &url]).arg("--input").arg(&input).arg("--out").arg(&out));
    assert_eq!(code(&res), 0, "stderr: {stderr}");
    assert!(stderr.contains("wrote 3 records"), "stderr: {stderr}");

    let text = std::fs::read_to_string(&out).unwrap();
    let records: Vec<serde_json::Value> =
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    assert_eq!(records[0]["name"], "birds");
    assert_eq!(records[2]["kind"], "metric");
    // The stub encodes the description length, so a match proves the vector
    // came back attached to the right record.
    assert_eq!(records[1]["vector"][0], "tree bark closeups".len() as f32);
}

#[test]
fn embed_reuses_vectors_from_a_lookup_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("descriptions.jsonl");
    let lookup = dir.path().join("lookup.jsonl");
    let out = dir.path().join("embeddings.jsonl");
    write_descriptions(&input);
    let lines = [
        r#"{"name":"trees","kind":"dataset","vector":[5.0,6.0]}"#,
        r#"{"name":"birds","kind":"dataset","vector":[1.0,2.0]}"#,
        r#"{"name":"LEEP","kind":"metric","vector":[9.0,0.5]}"#,
    ];
    std::fs::write(&lookup, lines.join("\n") + "\n").unwrap();

    let (res, _, stderr) = run(tmeta()
        .args(["embed"])
        .arg("--input")
        .arg(&input)
        .arg("--from-file")
        .arg(&lookup)
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 0, "stderr: {stderr}");

    let text = std::fs::read_to_string(&out).unwrap();
    let records: Vec<serde_json::Value> =
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    // Output follows the description order, not the lookup order.
    assert_eq!(records[0]["name"], "birds");
    assert_eq!(records[0]["vector"], serde_json::json!([1.0, 2.0]));
    assert_eq!(records[2]["vector"], serde_json::json!([9.0, 0.5]));
}

#[test]
fn embed_requires_exactly_one_source() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("descriptions.jsonl");
    write_descriptions(&input);
    let out = dir.path().join("o.jsonl");

    let (res, _, stderr) = run(tmeta()
        .args(["embed", "--endpoint", "http://localhost:1/e"])
        .arg("--from-file")
        .arg(&input)
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 1);
    assert!(stderr.contains("mutually exclusive"), "stderr: {stderr}");

    let (res, _, stderr) =
        run(tmeta().args(["embed"]).arg("--input").arg(&input).arg("--out").arg(&out));
    assert_eq!(code(&res), 1);
    assert!(stderr.contains("TMETA_EMBED_ENDPOINT"), "stderr: {stderr}");
}

#[test]
fn embed_missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (res, _, _) = run(tmeta()
        .args(["embed", "--endpoint", "http://localhost:1/e"])
        .arg("--input")
        .arg(dir.path().join("absent.jsonl"))
        .arg("--out")
        .arg(dir.path().join("o.jsonl")));
    assert_eq!(code(&res), 2);
}

#[test]
fn embed_unreachable_endpoint_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("descriptions.jsonl");
    write_descriptions(&input);
    // Grab a free port, then drop the listener so connections get refused.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();

    let (res, _, _) = run(tmeta()
        .args(["embed", "--endpoint", &format!("http://127.0.0.1:{port}/embed")])
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("o.jsonl")));
    assert_eq!(code(&res), 3);
}

#[test]
fn threads_zero_is_a_usage_error() {
    let (res, _, stderr) = run(tmeta().args([
        "--threads",
        "0",
        "rank",
        "--model",
        "m.json",
        "--dataset-embedding",
        "x",
        "--metrics",
        "e.jsonl",
    ]));
    assert_eq!(code(&res), 1);
    assert!(stderr.contains("--threads"), "stderr: {stderr}");
}

#[test]
fn train_then_rank_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");

    let (res, _, stderr) = run(tmeta()
        .args(["train", "--selector", "fixed", "--metric", "SFDA"])
        .arg("--table")
        .arg(paper("tau_table.csv"))
        .arg("--embeddings")
        .arg(paper("embeddings.jsonl"))
        .arg("--out")
        .arg(&model));
    assert_eq!(code(&res), 0, "stderr: {stderr}");
    assert!(stderr.contains("tmeta train: config {"), "stderr: {stderr}");

    let (res, stdout, stderr) = run(tmeta()
        .args(["rank", "--dataset-embedding", "cifar10"])
        .arg("--model")
        .arg(&model)
        .arg("--metrics")
        .arg(paper("embeddings.jsonl")));
    assert_eq!(code(&res), 0, "stderr: {stderr}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 9, "one line per candidate metric");
    assert!(lines[0].starts_with("SFDA\t"), "fixed model puts its metric first: {stdout}");
    for line in &lines {
        let (_, score) = line.split_once('\t').expect("name<TAB>score");
        score.parse::<f64>().expect("numeric score");
    }
}

#[test]
fn rank_rejects_a_wrong_dimension_query() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let (res, _, _) = run(tmeta()
        .args(["train", "--selector", "fixed", "--metric", "SFDA"])
        .arg("--table")
        .arg(paper("tau_table.csv"))
        .arg("--embeddings")
        .arg(paper("embeddings.jsonl"))
        .arg("--out")
        .arg(&model));
    assert_eq!(code(&res), 0);

    let (res, _, stderr) = run(tmeta()
        .args(["rank", "--dataset-embedding", "[0.5, -0.25]"])
        .arg("--model")
        .arg(&model)
        .arg("--metrics")
        .arg(paper("embeddings.jsonl")));
    assert_eq!(code(&res), 2, "stderr: {stderr}");
}

#[test]
fn lodo_names_an_unknown_selector_kind() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("lodo.json");
    std::fs::write(
        &config,
        r#"{"version":1,"selectors":[{"kind":"metarank_gdbt"}]}"#,
    )
    .unwrap();

    let (res, _, stderr) = run(tmeta()
        .args(["lodo"])
        .arg("--table")
        .arg(paper("tau_table.csv"))
        .arg("--embeddings")
        .arg(paper("embeddings.jsonl"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out")));
    assert_eq!(code(&res), 1);
    assert!(stderr.contains("metarank_gdbt"), "stderr: {stderr}");
}

/// Three checkpoints with dyadic probabilities (exactly representable, rows
/// sum to one exactly) and a fixed label pattern.
fn write_zoo(dir: &Path, dataset: &str, flip: bool) -> PathBuf {
    let n = 6;
    let feat = Array2::from_shape_fn((n, 3), |(i, j)| {
        let s = if flip { -1.0 } else { 1.0 };
        s * (i as f64 * 0.5 - j as f64 * 0.25)
    });
    let labels: Vec<u32> = vec![0, 1, 2, 0, 1, 2];
    let mut models = Vec::new();
    for (m, acc) in [(0usize, 0.9), (1, 0.75), (2, 0.6)] {
        let probs = Array2::from_shape_fn((n, 4), |(i, j)| {
            if (i + j + m) % 4 == 0 {
                0.625
            } else {
                0.125
            }
        });
        save_feature_matrix(&feat, dir.join(format!("m{m}.fmat"))).unwrap();
        save_labels(&labels, 3, dir.join(format!("m{m}.lbls"))).unwrap();
        save_probs(&SourceProbs::new(probs).unwrap(), dir.join(format!("m{m}.pmat"))).unwrap();
        models.push(serde_json::json!({
            "name": format!("m{m}"),
            "features": format!("m{m}.fmat"),
            "labels": format!("m{m}.lbls"),
            "probs": format!("m{m}.pmat"),
            "accuracy": acc,
        }));
    }
    let manifest = dir.join("zoo.json");
    let body = serde_json::json!({ "dataset": dataset, "models": models });
    std::fs::write(&manifest, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    manifest
}

#[test]
fn score_prints_one_value_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_zoo(dir.path(), "birds", false);

    let (res, stdout, stderr) =
        run(tmeta().args(["score", "--metric", "LEEP"]).arg("--zoo").arg(&manifest));
    assert_eq!(code(&res), 0, "stderr: {stderr}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    for (line, name) in lines.iter().zip(["m0", "m1", "m2"]) {
        let (got, value) = line.split_once('\t').unwrap();
        assert_eq!(got, name);
        let v: f64 = value.parse().unwrap();
        assert!(v.is_finite() && v <= 0.0, "average log-likelihoods are nonpositive: {v}");
    }
}

#[test]
fn tau_table_writes_a_loadable_table() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let zoo_a = write_zoo(dir_a.path(), "birds", false);
    let zoo_b = write_zoo(dir_b.path(), "trees", true);
    let out = dir_a.path().join("table.csv");

    let (res, _, stderr) = run(tmeta()
        .args(["tau-table", "--metrics", "LEEP,NCE"])
        .arg("--zoo")
        .arg(&zoo_a)
        .arg("--zoo")
        .arg(&zoo_b)
        .arg("--out")
        .arg(&out));
    assert_eq!(code(&res), 0, "stderr: {stderr}");

    let table = load_meta_task_table::<f64>(&out).unwrap();
    assert_eq!(table.datasets(), ["birds", "trees"]);
    assert_eq!(table.metrics(), ["LEEP", "NCE"]);
    for &v in table.values().iter() {
        assert!((-1.0..=1.0).contains(&v), "correlations stay in [-1, 1]: {v}");
    }
}

#[test]
fn tau_table_requires_model_accuracies() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_zoo(dir.path(), "birds", false);
    let text = std::fs::read_to_string(&manifest).unwrap();
    let mut body: serde_json::Value = serde_json::from_str(&text).unwrap();
    body["models"][1].as_object_mut().unwrap().remove("accuracy");
    std::fs::write(&manifest, body.to_string()).unwrap();

    let (res, _, stderr) = run(tmeta()
        .args(["tau-table", "--metrics", "LEEP"])
        .arg("--zoo")
        .arg(&manifest)
        .arg("--out")
        .arg(dir.path().join("table.csv")));
    assert_eq!(code(&res), 2);
    assert!(stderr.contains("m1") && stderr.contains("accuracy"), "stderr: {stderr}");
}

#[test]
fn lodo_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("lodo.json");
    std::fs::write(
        &config,
        r#"{"version":1,"selectors":[{"kind":"fixed","metric":"LogME"},{"kind":"global_best"}],"n_validation":3,"seed":0}"#,
    )
    .unwrap();
    let first = dir.path().join("first");
    let (res, _, stderr) = run(tmeta()
        .args(["lodo"])
        .arg("--table")
        .arg(paper("tau_table.csv"))
        .arg("--embeddings")
        .arg(paper("embeddings.jsonl"))
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&first));
    assert_eq!(code(&res), 0, "stderr: {stderr}");
    assert!(stderr.contains("leak checks passed 11/11"), "stderr: {stderr}");

    let second = dir.path().join("second");
    let (res, _, stderr) = run(tmeta()
        .args(["report"])
        .arg("--report")
        .arg(first.join("report.json"))
        .arg("--out")
        .arg(&second));
    assert_eq!(code(&res), 0, "stderr: {stderr}");
    for file in ["report.json", "per_dataset.csv", "mean_ranks.csv", "boxstats.csv"] {
        assert_eq!(
            std::fs::read(first.join(file)).unwrap(),
            std::fs::read(second.join(file)).unwrap(),
            "{file} survives a load-save cycle unchanged"
        );
    }

    // A report from a future format version is data this build cannot trust.
    let text = std::fs::read_to_string(first.join("report.json")).unwrap();
    let mut body: serde_json::Value = serde_json::from_str(&text).unwrap();
    body["version"] = serde_json::json!(99);
    let stale = dir.path().join("stale.json");
    std::fs::write(&stale, body.to_string()).unwrap();
    let (res, _, stderr) = run(tmeta()
        .args(["report"])
        .arg("--report")
        .arg(&stale)
        .arg("--out")
        .arg(dir.path().join("third")));
    assert_eq!(code(&res), 2);
    assert!(stderr.contains("unsupported version"), "stderr: {stderr}");
}
