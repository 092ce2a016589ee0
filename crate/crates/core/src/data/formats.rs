//! On-disk formats.
//!
//! * Embeddings travel as JSON Lines: `{"name": ..., "kind":
//!   "dataset"|"metric", "vector": [...]}` per line, 32-bit components.
//! * Feature matrices, label vectors and probability matrices are little-
//!   endian binary with 5-byte magics `FMAT1`, `LBLS1`, `PROB1`, shape
//!   fields as `u32`, then the row-major payload (`f32`, or `u32` for
//!   labels).
//! * The meta-task grid and external metric scores are UTF-8 CSV with
//!   fixed headers `dataset,metric,tau_w` and `dataset,model,metric,score`.
//!
//! Saving quantizes to the 32-bit payload width, so load(save(x)) is exact
//! once a value has passed through any of these formats.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    DataError, EmbeddingCorpus, EmbeddingKind, EmbeddingRecord, ExternalScoreRow,
    ExternalScoreTable, LabeledFeatureSet, MetaTaskTable, SourceProbs,
};
use crate::num::{real, wide, Scalar};

pub const FEATURE_MAGIC: &[u8; 5] = b"FMAT1";
pub const LABELS_MAGIC: &[u8; 5] = b"LBLS1";
pub const PROBS_MAGIC: &[u8; 5] = b"PROB1";
pub const META_TASK_HEADER: &str = "dataset,metric,tau_w";
pub const EXTERNAL_SCORES_HEADER: &str = "dataset,model,metric,score";

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io { path: path_str(path), source })
}

fn read_text(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path_str(path), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    std::fs::write(path, bytes).map_err(|source| DataError::Io { path: path_str(path), source })
}

#[derive(Serialize, Deserialize)]
struct EmbeddingWire {
    name: String,
    kind: EmbeddingKind,
    vector: Vec<f32>,
}

/// Loads an embedding corpus from a JSONL file.
pub fn load_embeddings<R: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingCorpus<R>, DataError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut corpus = EmbeddingCorpus::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let wire: EmbeddingWire = serde_json::from_str(line).map_err(|e| DataError::Parse {
            path: path_str(path),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        let record = EmbeddingRecord {
            name: wire.name,
            kind: wire.kind,
            vector: wire.vector.iter().map(|&v| real(v as f64)).collect(),
        };
        corpus.push(record).map_err(|e| DataError::Parse {
            path: path_str(path),
            line: idx + 1,
            msg: e.to_string(),
        })?;
    }
    if corpus.is_empty() {
        return Err(DataError::Format { path: path_str(path), msg: "no embedding records".into() });
    }
    Ok(corpus)
}

/// Writes an embedding corpus as JSONL, one record per line, LF-terminated.
pub fn save_embeddings<R: Scalar>(
    corpus: &EmbeddingCorpus<R>,
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in corpus.records() {
        let wire = EmbeddingWire {
            name: r.name.clone(),
            kind: r.kind,
            vector: r.vector.iter().map(|&v| wide(v) as f32).collect(),
        };
        serde_json::to_writer(&mut out, &wire).expect("in-memory JSON serialization");
        out.push(b'\n');
    }
    write_file(path, &out)
}

/// Text to be embedded, as consumed by the `embed` front end.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct DescriptionRecord {
    pub name: String,
    pub kind: EmbeddingKind,
    pub description: String,
}

/// Loads description records from a JSONL file.
pub fn load_descriptions(path: impl AsRef<Path>) -> Result<Vec<DescriptionRecord>, DataError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut records: Vec<DescriptionRecord> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let rec: DescriptionRecord = serde_json::from_str(line).map_err(|e| DataError::Parse {
            path: path_str(path),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if rec.name.is_empty() || rec.description.trim().is_empty() {
            return Err(DataError::Parse {
                path: path_str(path),
                line: idx + 1,
                msg: "name and description must be non-empty".into(),
            });
        }
        if records.iter().any(|r| r.name == rec.name && r.kind == rec.kind) {
            return Err(DataError::Parse {
                path: path_str(path),
                line: idx + 1,
                msg: format!("duplicate {} description '{}'", rec.kind, rec.name),
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(DataError::Format { path: path_str(path), msg: "no description records".into() });
    }
    Ok(records)
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8], path: &Path) -> Self {
        Self { bytes, pos: 0, path: path_str(path) }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        if self.pos + n > self.bytes.len() {
            return Err(DataError::Format {
                path: self.path.clone(),
                msg: format!(
                    "truncated file: wanted {} bytes at offset {}, have {}",
                    n,
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn magic(&mut self, expected: &[u8; 5]) -> Result<(), DataError> {
        let got = self.take(5)?;
        if got != expected {
            return Err(DataError::Format {
                path: self.path.clone(),
                msg: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            });
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32, DataError> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn finish(&self) -> Result<(), DataError> {
        if self.pos != self.bytes.len() {
            return Err(DataError::Format {
                path: self.path.clone(),
                msg: format!("{} trailing bytes after payload", self.bytes.len() - self.pos),
            });
        }
        Ok(())
    }
}

fn read_matrix<R: Scalar>(
    path: &Path,
    magic: &[u8; 5],
) -> Result<Array2<R>, DataError> {
    let bytes = read_file(path)?;
    let mut r = ByteReader::new(&bytes, path);
    r.magic(magic)?;
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    if n == 0 || d == 0 {
        return Err(DataError::Format { path: path_str(path), msg: format!("empty shape {n}x{d}") });
    }
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        values.push(real::<R>(r.f32()? as f64));
    }
    r.finish()?;
    Array2::from_shape_vec((n, d), values)
        .map_err(|e| DataError::Format { path: path_str(path), msg: e.to_string() })
}

fn write_matrix<R: Scalar>(path: &Path, magic: &[u8; 5], m: &Array2<R>) -> Result<(), DataError> {
    let mut out = Vec::with_capacity(13 + 4 * m.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for &v in m.iter() {
        out.extend_from_slice(&(wide(v) as f32).to_le_bytes());
    }
    write_file(path, &out)
}

/// Loads a raw `FMAT1` feature matrix.
pub fn load_feature_matrix<R: Scalar>(path: impl AsRef<Path>) -> Result<Array2<R>, DataError> {
    read_matrix(path.as_ref(), FEATURE_MAGIC)
}

/// Writes a feature matrix as `FMAT1`.
pub fn save_feature_matrix<R: Scalar>(m: &Array2<R>, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_matrix(path.as_ref(), FEATURE_MAGIC, m)
}

/// Loads an `LBLS1` label vector; returns `(labels, n_classes)`.
pub fn load_labels(path: impl AsRef<Path>) -> Result<(Vec<u32>, u32), DataError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let mut r = ByteReader::new(&bytes, path);
    r.magic(LABELS_MAGIC)?;
    let n = r.u32()? as usize;
    let c = r.u32()?;
    if n == 0 || c == 0 {
        return Err(DataError::Format { path: path_str(path), msg: format!("empty shape n={n} C={c}") });
    }
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let l = r.u32()?;
        if l >= c {
            return Err(DataError::Format {
                path: path_str(path),
                msg: format!("label {l} at row {i} exceeds class count {c}"),
            });
        }
        labels.push(l);
    }
    r.finish()?;
    Ok((labels, c))
}

/// Writes labels as `LBLS1`.
pub fn save_labels(labels: &[u32], n_classes: u32, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut out = Vec::with_capacity(13 + 4 * labels.len());
    out.extend_from_slice(LABELS_MAGIC);
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    out.extend_from_slice(&n_classes.to_le_bytes());
    for &l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    write_file(path.as_ref(), &out)
}

/// Loads a feature matrix and a label vector into one validated set.
pub fn load_feature_set<R: Scalar>(
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledFeatureSet<R>, DataError> {
    let features = load_feature_matrix(&features_path)?;
    let (labels, n_classes) = load_labels(&labels_path)?;
    LabeledFeatureSet::new(features, labels, n_classes).map_err(|e| DataError::Format {
        path: path_str(features_path.as_ref()),
        msg: e.to_string(),
    })
}

/// Loads a `PROB1` source-probability matrix.
pub fn load_probs<R: Scalar>(path: impl AsRef<Path>) -> Result<SourceProbs<R>, DataError> {
    let path = path.as_ref();
    let m = read_matrix(path, PROBS_MAGIC)?;
    SourceProbs::new(m).map_err(|e| DataError::Format { path: path_str(path), msg: e.to_string() })
}

/// Writes source probabilities as `PROB1`.
pub fn save_probs<R: Scalar>(p: &SourceProbs<R>, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_matrix(path.as_ref(), PROBS_MAGIC, p.probs())
}

fn split_csv_line<'a>(
    line: &'a str,
    want: usize,
    path: &Path,
    line_no: usize,
) -> Result<Vec<&'a str>, DataError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != want {
        return Err(DataError::Parse {
            path: path_str(path),
            line: line_no,
            msg: format!("expected {want} comma-separated fields, got {}", fields.len()),
        });
    }
    Ok(fields)
}

fn parse_real<R: Scalar>(s: &str, path: &Path, line_no: usize) -> Result<R, DataError> {
    let v: f64 = s.trim().parse().map_err(|_| DataError::Parse {
        path: path_str(path),
        line: line_no,
        msg: format!("'{s}' is not a number"),
    })?;
    Ok(real(v))
}

/// Loads the meta-task grid from `dataset,metric,tau_w` CSV. Every
/// (dataset, metric) pair must appear exactly once; datasets and metrics
/// keep first-appearance order.
pub fn load_meta_task_table<R: Scalar>(path: impl AsRef<Path>) -> Result<MetaTaskTable<R>, DataError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == META_TASK_HEADER => {}
        Some((_, header)) => {
            return Err(DataError::Parse {
                path: path_str(path),
                line: 1,
                msg: format!("bad header '{header}', expected '{META_TASK_HEADER}'"),
            })
        }
        None => {
            return Err(DataError::Format { path: path_str(path), msg: "empty file".into() })
        }
    }

    let mut datasets: Vec<String> = Vec::new();
    let mut metrics: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, usize, R)> = Vec::new();
    for (idx, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f = split_csv_line(line, 3, path, idx + 1)?;
        let (d, m) = (f[0].trim(), f[1].trim());
        if d.is_empty() || m.is_empty() {
            return Err(DataError::Parse {
                path: path_str(path),
                line: idx + 1,
                msg: "empty dataset or metric name".into(),
            });
        }
        let di = datasets.iter().position(|x| x == d).unwrap_or_else(|| {
            datasets.push(d.to_string());
            datasets.len() - 1
        });
        let mi = metrics.iter().position(|x| x == m).unwrap_or_else(|| {
            metrics.push(m.to_string());
            metrics.len() - 1
        });
        if cells.iter().any(|&(a, b, _)| a == di && b == mi) {
            return Err(DataError::Parse {
                path: path_str(path),
                line: idx + 1,
                msg: format!("duplicate cell ({d}, {m})"),
            });
        }
        cells.push((di, mi, parse_real(f[2], path, idx + 1)?));
    }

    let (nd, nm) = (datasets.len(), metrics.len());
    if cells.len() != nd * nm {
        return Err(DataError::Format {
            path: path_str(path),
            msg: format!(
                "incomplete grid: {} cells for {nd} datasets x {nm} metrics",
                cells.len()
            ),
        });
    }
    let mut values = Array2::<R>::zeros((nd, nm));
    for (di, mi, v) in cells {
        values[[di, mi]] = v;
    }
    MetaTaskTable::new(datasets, metrics, values)
        .map_err(|e| DataError::Format { path: path_str(path), msg: e.to_string() })
}

/// Writes the meta-task grid dataset-major with the fixed header.
pub fn save_meta_task_table<R: Scalar>(
    table: &MetaTaskTable<R>,
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "{META_TASK_HEADER}").expect("in-memory write");
    for (i, d) in table.datasets().iter().enumerate() {
        for (j, m) in table.metrics().iter().enumerate() {
            writeln!(out, "{d},{m},{}", wide(table.values()[[i, j]])).expect("in-memory write");
        }
    }
    write_file(path, &out)
}

/// Loads external metric scores from `dataset,model,metric,score` CSV.
pub fn load_external_scores<R: Scalar>(
    path: impl AsRef<Path>,
) -> Result<ExternalScoreTable<R>, DataError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == EXTERNAL_SCORES_HEADER => {}
        Some((_, header)) => {
            return Err(DataError::Parse {
                path: path_str(path),
                line: 1,
                msg: format!("bad header '{header}', expected '{EXTERNAL_SCORES_HEADER}'"),
            })
        }
        None => {
            return Err(DataError::Format { path: path_str(path), msg: "empty file".into() })
        }
    }
    let mut table = ExternalScoreTable::default();
    for (idx, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f = split_csv_line(line, 4, path, idx + 1)?;
        let row = ExternalScoreRow {
            dataset: f[0].trim().to_string(),
            model: f[1].trim().to_string(),
            metric: f[2].trim().to_string(),
            score: parse_real(f[3], path, idx + 1)?,
        };
        if row.dataset.is_empty() || row.model.is_empty() || row.metric.is_empty() {
            return Err(DataError::Parse {
                path: path_str(path),
                line: idx + 1,
                msg: "empty name field".into(),
            });
        }
        table.push(row).map_err(|e| DataError::Parse {
            path: path_str(path),
            line: idx + 1,
            msg: e.to_string(),
        })?;
    }
    Ok(table)
}

/// Writes external metric scores with the fixed header.
pub fn save_external_scores<R: Scalar>(
    table: &ExternalScoreTable<R>,
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let mut out = Vec::new();
    writeln!(out, "{EXTERNAL_SCORES_HEADER}").expect("in-memory write");
    for r in table.rows() {
        writeln!(out, "{},{},{},{}", r.dataset, r.model, r.metric, wide(r.score))
            .expect("in-memory write");
    }
    write_file(path.as_ref(), &out)
}
