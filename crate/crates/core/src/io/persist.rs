//! Versioned on-disk formats: JSON documents, NDJSON datasets and CSV tables.
//! Every write goes to a temporary file in the target directory and is then
//! renamed into place.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, DatasetRecord, RewardTable, SkippedInstance};
use crate::error::{Error, Result};
use crate::inference::{BenchReport, Evaluation};
use crate::learner::network::MODEL_FORMAT_VERSION;
use crate::learner::RewardModel;
use crate::model::{Coordinate, ParameterizedFamily, StrategyLibrary};
use crate::reduction::EvalRecord;

pub const FORMAT_VERSION: u32 = 1;

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn check_version(found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::FormatVersion { found, expected });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    format_version: u32,
    #[serde(flatten)]
    body: T,
}

/// Pretty JSON with a top-level `format_version`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Versioned { format_version: FORMAT_VERSION, body: value })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let found = value.get("format_version").and_then(serde_json::Value::as_u64).unwrap_or(0);
    check_version(u32::try_from(found).unwrap_or(u32::MAX), FORMAT_VERSION)?;
    let v: Versioned<T> = serde_json::from_value(value)?;
    Ok(v.body)
}

/// A strategy library plus the coordinates that define `theta` for its family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LibraryFile {
    pub varying: Vec<Coordinate>,
    pub library: StrategyLibrary,
}

pub fn save_library(path: &Path, varying: &[Coordinate], library: &StrategyLibrary) -> Result<()> {
    write_json(path, &LibraryFile { varying: varying.to_vec(), library: library.clone() })
}

pub fn load_library(path: &Path) -> Result<LibraryFile> {
    read_json(path)
}

pub fn save_model(path: &Path, model: &RewardModel) -> Result<()> {
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<RewardModel> {
    let model: RewardModel = serde_json::from_str(&fs::read_to_string(path)?)?;
    check_version(model.format_version, MODEL_FORMAT_VERSION)?;
    if model.w_out.ncols() != 1 || model.w_out.nrows() != model.encoder.features() {
        return Err(Error::InvalidArgument("checkpoint weight shapes do not match its encoder".into()));
    }
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    format_version: u32,
    family: ParameterizedFamily,
    library: StrategyLibrary,
    skipped: Vec<SkippedInstance>,
    good_turing: f64,
    records: usize,
    /// Columns of the reward table, absent when unlabeled.
    reward_columns: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    #[serde(flatten)]
    record: DatasetRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rewards: Option<Vec<Option<EvalRecord>>>,
}

/// Header line followed by one line per record (with its reward-table row when present).
pub fn dataset_to_ndjson(ds: &Dataset) -> Result<String> {
    let header = DatasetHeader {
        format_version: FORMAT_VERSION,
        family: ds.family.clone(),
        library: ds.library.clone(),
        skipped: ds.skipped.clone(),
        good_turing: ds.good_turing,
        records: ds.records.len(),
        reward_columns: ds.reward_table.as_ref().map(|t| t.cols),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for (i, r) in ds.records.iter().enumerate() {
        let rewards = ds.reward_table.as_ref().map(|t| t.row(i).to_vec());
        out.push_str(&serde_json::to_string(&RecordLine { record: r.clone(), rewards })?);
        out.push('\n');
    }
    Ok(out)
}

pub fn dataset_from_ndjson(reader: impl BufRead) -> Result<Dataset> {
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| Error::InvalidArgument("empty dataset file".into()))??;
    let header: DatasetHeader = serde_json::from_str(&first)?;
    check_version(header.format_version, FORMAT_VERSION)?;
    let mut records = Vec::with_capacity(header.records);
    let mut table = header.reward_columns.map(|c| RewardTable::empty(header.records, c));
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rl: RecordLine = serde_json::from_str(&line)?;
        let i = records.len();
        if i >= header.records {
            return Err(Error::InvalidArgument("dataset has more records than its header declares".into()));
        }
        match (&mut table, rl.rewards) {
            (Some(t), Some(row)) if row.len() == t.cols => {
                for (j, cell) in row.into_iter().enumerate() {
                    t.cells[i * t.cols + j] = cell;
                }
            }
            (None, None) => {}
            _ => return Err(Error::InvalidArgument(format!("record {i}: reward row does not match the header"))),
        }
        records.push(rl.record);
    }
    if records.len() != header.records {
        return Err(Error::InvalidArgument(format!("dataset declares {} records, found {}", header.records, records.len())));
    }
    let ds = Dataset {
        family: header.family,
        records,
        library: header.library,
        skipped: header.skipped,
        good_turing: header.good_turing,
        reward_table: table,
    };
    ds.check_invariants()?;
    Ok(ds)
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_atomic(path, dataset_to_ndjson(ds)?.as_bytes())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_ndjson(BufReader::new(fs::File::open(path)?))
}

fn csv_to_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Per-instance quality rows; deterministic for a fixed model and test set.
pub fn metrics_csv(eval: &Evaluation) -> Result<String> {
    csv_to_string(|w| {
        w.write_record(["instance_id", "selected", "p", "d", "accurate", "all_infeasible"])?;
        for o in &eval.metrics.instances {
            w.write_record([
                o.instance_id.to_string(),
                o.selected.to_string(),
                o.p.to_string(),
                o.d.to_string(),
                o.accurate.to_string(),
                o.all_infeasible.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Per-instance wall-clock phases.
pub fn timings_csv(eval: &Evaluation) -> Result<String> {
    csv_to_string(|w| {
        w.write_record(["instance_id", "inference_s", "reduced_s"])?;
        for t in &eval.timings {
            w.write_record([t.instance_id.to_string(), t.inference_s.to_string(), t.reduced_s.to_string()])?;
        }
        Ok(())
    })
}

pub fn loss_csv(trace: &[f64]) -> Result<String> {
    csv_to_string(|w| {
        w.write_record(["epoch", "loss"])?;
        for (e, l) in trace.iter().enumerate() {
            w.write_record([e.to_string(), l.to_string()])?;
        }
        Ok(())
    })
}

pub fn bench_csv(report: &BenchReport) -> Result<String> {
    csv_to_string(|w| {
        w.write_record(["instance_id", "fast_s", "bnb_s", "accurate"])?;
        for r in &report.rows {
            w.write_record([r.instance_id.to_string(), r.fast_s.to_string(), r.bnb_s.to_string(), r.accurate.to_string()])?;
        }
        Ok(())
    })
}
