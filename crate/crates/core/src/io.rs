//! File formats: JSON-lines datasets and the persisted classifier document.
//!
//! A dataset file starts with a header line carrying the dimension and the
//! attribute schema, followed by one record object per line. The classifier
//! file is a single versioned JSON document. Both round-trip exactly:
//! numbers are serialized in the shortest form that re-parses to the same
//! double.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{CentroidClassifier, CentroidEntry};
use crate::dataset::{AttributeSchema, Dataset, EmbeddingRecord};
use crate::error::{Error, Result};
use crate::metric::MetricSpec;

/// Version written into classifier files; loading any other version fails.
pub const CLASSIFIER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    dimension: usize,
    schema: AttributeSchema,
}

fn parse_error(origin: &str, line: usize, err: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line,
        message: err.to_string(),
    }
}

/// Writes the header line and one record per line.
pub fn write_dataset<W: Write>(data: &Dataset, mut writer: W) -> Result<()> {
    let header = DatasetHeader {
        dimension: data.dimension(),
        schema: data.schema().clone(),
    };
    writeln!(
        writer,
        "{}",
        serde_json::to_string(&header).expect("header serializes")
    )?;
    for record in data.records() {
        writeln!(
            writer,
            "{}",
            serde_json::to_string(record).expect("record serializes")
        )?;
    }
    Ok(())
}

pub fn write_dataset_file(data: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    write_dataset(data, &mut writer)?;
    writer.flush()?;
    Ok(())
}

/// Parses and validates a dataset. `origin` names the source in parse errors.
pub fn read_dataset<R: BufRead>(reader: R, origin: &str) -> Result<Dataset> {
    let mut lines = reader.lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => return Err(parse_error(origin, 1, "empty file, expected a header line")),
    };
    let header: DatasetHeader =
        serde_json::from_str(&header_line).map_err(|e| parse_error(origin, 1, e))?;
    let mut records = Vec::new();
    for (index, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| parse_error(origin, index + 2, e))?;
        records.push(record);
    }
    let data = Dataset::validate(records, header.schema)?;
    if data.dimension() != header.dimension {
        return Err(Error::DimensionMismatch {
            id: data.records()[0].id.clone(),
            expected: header.dimension,
            actual: data.dimension(),
        });
    }
    Ok(data)
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    read_dataset(BufReader::new(file), &path.display().to_string())
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassifierFile {
    format_version: u32,
    dimension: usize,
    metric: MetricSpec,
    schema: AttributeSchema,
    entries: Vec<CentroidEntry>,
}

/// Writes the classifier as a pretty-printed, versioned JSON document.
pub fn save_classifier(classifier: &CentroidClassifier, path: &Path) -> Result<()> {
    let file = ClassifierFile {
        format_version: CLASSIFIER_FORMAT_VERSION,
        dimension: classifier.dimension(),
        metric: classifier.metric().clone(),
        schema: classifier.schema().clone(),
        entries: classifier.entries().to_vec(),
    };
    let mut writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut writer, &file)
        .map_err(|e| parse_error(&path.display().to_string(), 1, e))?;
    writeln!(writer)?;
    writer.flush()?;
    Ok(())
}

/// Loads and re-validates a persisted classifier, rejecting unknown format
/// versions before anything else.
pub fn load_classifier(path: &Path) -> Result<CentroidClassifier> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| parse_error(&origin, 1, e))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| parse_error(&origin, 1, "missing format_version field"))?;
    if found != u64::from(CLASSIFIER_FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: found.try_into().unwrap_or(u32::MAX),
            expected: CLASSIFIER_FORMAT_VERSION,
        });
    }
    let file: ClassifierFile =
        serde_json::from_value(value).map_err(|e| parse_error(&origin, 1, e))?;
    CentroidClassifier::new(file.dimension, file.metric, file.schema, file.entries)
}
