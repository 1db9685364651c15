//! Evaluation records: one query with every model's recorded score and cost.
//!
//! On disk these are line-delimited JSON objects:
//!
//! ```text
//! {"query_id":"q1","query_text":"...","benchmark":"gpqa","results":{"m":{"score":1.0,"cost_usd":0.01,"input_tokens":900,"output_tokens":120}}}
//! ```
//!
//! A model that could not attempt a query is written as `{"unavailable": true}`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::RecordsError;
use crate::types::{EmbeddingVector, ModelId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ResultRepr", into = "ResultRepr")]
pub enum ModelResult {
    Available {
        score: f64,
        cost_usd: f64,
        input_tokens: u64,
        output_tokens: u64,
    },
    /// The model cannot serve this query (e.g. no tool-calling support).
    /// Counts as score 0 at cost 0.
    Unavailable,
}

#[derive(Serialize, Deserialize)]
struct ResultRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_usd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    unavailable: bool,
}

impl TryFrom<ResultRepr> for ModelResult {
    type Error = String;

    fn try_from(r: ResultRepr) -> Result<Self, Self::Error> {
        if r.unavailable {
            return Ok(Self::Unavailable);
        }
        let score = r.score.ok_or("missing `score`")?;
        let cost_usd = r.cost_usd.ok_or("missing `cost_usd`")?;
        if !(0.0..=1.0).contains(&score) {
            return Err(format!("score {score} outside [0, 1]"));
        }
        if !(cost_usd.is_finite() && cost_usd >= 0.0) {
            return Err(format!("cost_usd {cost_usd} must be finite and non-negative"));
        }
        Ok(Self::Available {
            score,
            cost_usd,
            input_tokens: r.input_tokens.unwrap_or(0),
            output_tokens: r.output_tokens.unwrap_or(0),
        })
    }
}

impl From<ModelResult> for ResultRepr {
    fn from(r: ModelResult) -> Self {
        match r {
            ModelResult::Available {
                score,
                cost_usd,
                input_tokens,
                output_tokens,
            } => Self {
                score: Some(score),
                cost_usd: Some(cost_usd),
                input_tokens: Some(input_tokens),
                output_tokens: Some(output_tokens),
                unavailable: false,
            },
            ModelResult::Unavailable => Self {
                score: None,
                cost_usd: None,
                input_tokens: None,
                output_tokens: None,
                unavailable: true,
            },
        }
    }
}

impl ModelResult {
    pub fn score(&self) -> f64 {
        match self {
            Self::Available { score, .. } => *score,
            Self::Unavailable => 0.0,
        }
    }

    pub fn cost_usd(&self) -> f64 {
        match self {
            Self::Available { cost_usd, .. } => *cost_usd,
            Self::Unavailable => 0.0,
        }
    }

    pub fn is_available(&self) -> bool {
        matches!(self, Self::Available { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query_id: String,
    pub query_text: String,
    #[serde(rename = "benchmark")]
    pub benchmark_tag: String,
    pub results: BTreeMap<ModelId, ModelResult>,
}

impl EvalRecord {
    pub fn result(&self, model: &ModelId) -> Option<&ModelResult> {
        self.results.get(model)
    }
}

pub fn parse_records(text: &str, origin: &Path) -> Result<Vec<EvalRecord>, RecordsError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EvalRecord = serde_json::from_str(line).map_err(|e| RecordsError::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>, RecordsError> {
    let file = File::open(path).map_err(|source| RecordsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| RecordsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| RecordsError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes any serializable rows as line-delimited JSON.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), RecordsError> {
    let io_err = |source| RecordsError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| io_err(e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_records(path: &Path, records: &[EvalRecord]) -> Result<(), RecordsError> {
    write_jsonl(path, records)
}

/// One line of an embedding sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub query_id: String,
    pub embedding: EmbeddingVector,
}

/// Reads a sidecar of precomputed embeddings. Vectors that are not already
/// unit-norm are normalized.
pub fn read_embedding_sidecar(path: &Path) -> Result<HashMap<String, EmbeddingVector>, RecordsError> {
    let text = std::fs::read_to_string(path).map_err(|source| RecordsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| RecordsError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let row: EmbeddingRow = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let v = if (row.embedding.norm() - 1.0).abs() <= 1e-9 {
            row.embedding
        } else {
            EmbeddingVector::normalized(row.embedding.into_values())
                .ok_or_else(|| parse_err("zero or non-finite embedding".into()))?
        };
        out.insert(row.query_id, v);
    }
    Ok(out)
}
