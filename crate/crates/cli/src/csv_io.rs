//! CSV ingestion and export.
//!
//! Files are UTF-8, comma separated, with a header row. The label and
//! sensitive columns may hold arbitrary text; every other column must be
//! numeric.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use geg_core::data::Dataset;
use geg_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Which columns carry the label and the sensitive attribute, and which
/// label value is the favourable one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label: String,
    pub sensitive: String,
    pub positive: String,
}

/// A loaded dataset plus the value ↔ id mappings of its label and group
/// columns.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    /// `class_values[id]` is the original label text.
    pub class_values: Vec<String>,
    /// `group_values[id]` is the original sensitive-attribute text.
    pub group_values: Vec<String>,
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> CliResult<LoadedData> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_csv(file, schema).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> CliResult<LoadedData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(CliError::Data("empty file".into()));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("missing column `{name}`")))
    };
    let label_col = find(&schema.label)?;
    let group_col = find(&schema.sensitive)?;
    if label_col == group_col {
        return Err(CliError::Usage("label and sensitive columns must differ".into()));
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_col && c != group_col).collect();
    let feature_names = feature_cols.iter().map(|&c| headers[c].to_string()).collect();

    let mut raw_labels = Vec::new();
    let mut raw_groups = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::Data(format!("line {line}: {e}")))?;
        if record.len() != headers.len() {
            return Err(CliError::Data(format!(
                "line {line}: expected {} cells, found {}",
                headers.len(),
                record.len()
            )));
        }
        for &c in &feature_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!("line {line}: non-numeric value `{cell}` in column `{}`", &headers[c]))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!("line {line}: non-finite value in column `{}`", &headers[c])));
            }
            values.push(v);
        }
        raw_labels.push(record[label_col].to_string());
        raw_groups.push(record[group_col].to_string());
    }
    if raw_labels.is_empty() {
        return Err(CliError::Data("empty file: no data rows".into()));
    }

    let (labels, class_values) = encode(&raw_labels);
    let (groups, group_values) = encode(&raw_groups);
    let positive = class_values
        .iter()
        .position(|v| v == &schema.positive)
        .ok_or_else(|| CliError::Data(format!("positive label absent: `{}` not in column `{}`", schema.positive, schema.label)))?;
    let features = Matrix::new(raw_labels.len(), feature_cols.len(), values).map_err(data_error)?;
    let dataset = Dataset::with_counts(features, groups, labels, positive, group_values.len(), class_values.len())
        .and_then(|d| d.with_names(group_values.clone(), class_values.clone()))
        .map_err(data_error)?;
    Ok(LoadedData {
        dataset,
        feature_names,
        class_values,
        group_values,
    })
}

/// Dense ids for a text column: ascending numeric order when every value is
/// an integer, first appearance otherwise.
fn encode(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut distinct: Vec<String> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for v in raw {
        if !index.contains_key(v.as_str()) {
            index.insert(v, distinct.len());
            distinct.push(v.clone());
        }
    }
    let integers: Option<Vec<i64>> = distinct.iter().map(|v| v.parse().ok()).collect();
    if let Some(ints) = integers {
        let mut order: Vec<usize> = (0..distinct.len()).collect();
        order.sort_by_key(|&i| ints[i]);
        distinct = order.iter().map(|&i| distinct[i].clone()).collect();
        index = distinct.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    }
    let ids = raw.iter().map(|v| index[v.as_str()]).collect();
    (ids, distinct)
}

fn data_error(e: geg_core::Error) -> CliError {
    CliError::Data(e.to_string())
}

/// Header used by [`write_csv`] when the dataset has no feature names.
pub fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

/// Writes `dataset` with columns `feature_names…, group, label`. Group and
/// label cells hold the dataset's names when present, ids otherwise.
pub fn write_csv<W: Write>(writer: W, dataset: &Dataset, feature_names: &[String]) -> CliResult<()> {
    if feature_names.len() != dataset.n_features() {
        return Err(CliError::Usage(format!(
            "{} feature names for {} features",
            feature_names.len(),
            dataset.n_features()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    let to_data = |e: csv::Error| CliError::Data(format!("cannot write CSV: {e}"));
    let mut header: Vec<&str> = feature_names.iter().map(String::as_str).collect();
    header.extend(["group", "label"]);
    w.write_record(&header).map_err(to_data)?;
    let name = |names: Option<&[String]>, id: usize| names.map_or_else(|| id.to_string(), |n| n[id].clone());
    for (j, row) in dataset.features().iter_rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        cells.push(name(dataset.group_names(), dataset.groups()[j]));
        cells.push(name(dataset.class_names(), dataset.labels()[j]));
        w.write_record(&cells).map_err(to_data)?;
    }
    w.flush().map_err(|e| CliError::Data(format!("cannot write CSV: {e}")))?;
    Ok(())
}
