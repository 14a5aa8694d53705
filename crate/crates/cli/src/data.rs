//! Delimited matrix files and tab-separated edge lists.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use enggnn_core::graph::{Directedness, FeatureGraph};
use log::warn;
use ndarray::Array2;

use crate::{HarnessError, Result};

/// Samples × features with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
}

fn detect_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Reads a comma- or tab-delimited matrix whose header names every feature
/// plus `label_column` and, optionally, a sample identifier column that is
/// skipped. Errors carry the offending line and column.
pub fn load_dataset(path: &Path, label_column: &str, id_column: Option<&str>) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    let header_line = text
        .lines()
        .next()
        .ok_or_else(|| HarnessError::parse(path, "file is empty"))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| HarnessError::parse(path, format!("label column '{label_column}' not found in header")))?;
    let id_idx = match id_column {
        Some(id) => Some(
            header
                .iter()
                .position(|h| h == id)
                .ok_or_else(|| HarnessError::parse(path, format!("id column '{id}' not found in header")))?,
        ),
        None => None,
    };
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx && Some(i) != id_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if names.is_empty() {
        return Err(HarnessError::parse(path, "no feature columns"));
    }

    let mut values = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => HarnessError::parse(
                path,
                format!(
                    "line {}: expected {expected_len} fields, found {len}",
                    pos.as_ref().map_or(0, |p| p.line())
                ),
            ),
            _ => HarnessError::parse(path, e.to_string()),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (i, cell) in record.iter().enumerate() {
            if Some(i) == id_idx {
                continue;
            }
            let cell = cell.trim();
            if i == label_idx {
                y.push(match cell {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(HarnessError::parse(
                            path,
                            format!("line {line}, column '{label_column}': label must be 0 or 1, found '{cell}'"),
                        ))
                    }
                });
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(HarnessError::parse(
                        path,
                        format!("line {line}, column '{}': '{cell}' is not a finite number", header[i]),
                    ))
                }
            }
        }
    }
    if y.is_empty() {
        return Err(HarnessError::parse(path, "no data rows"));
    }
    let x = Array2::from_shape_vec((y.len(), names.len()), values).expect("row lengths checked by the reader");
    Ok(Dataset { names, x, y })
}

/// Writes features then the label column. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn write_dataset(path: &Path, data: &Dataset, label_column: &str, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_path(path)?;
    w.write_record(data.names.iter().map(String::as_str).chain([label_column]))?;
    for (row, &label) in data.x.rows().into_iter().zip(&data.y) {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(label.to_string());
        w.write_record(&fields)?;
    }
    w.flush().map_err(HarnessError::io(path))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeListSummary {
    pub edges: usize,
    pub skipped_unknown: usize,
    pub duplicates: usize,
    pub weighted: bool,
}

/// Reads `src<TAB>dst[<TAB>weight]` lines into an undirected graph over
/// `names`. Blank lines and `#` comments are ignored; edges touching unknown
/// identifiers are skipped and counted; a weight column is ignored.
pub fn load_edge_list(path: &Path, names: &[String]) -> Result<(FeatureGraph, EdgeListSummary)> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut graph = FeatureGraph::new(names.len(), Directedness::Undirected);
    let mut summary = EdgeListSummary::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(HarnessError::parse(
                path,
                format!("line {}: expected 2 or 3 tab-separated fields", lineno + 1),
            ));
        }
        summary.weighted |= fields.len() == 3;
        match (index.get(fields[0]), index.get(fields[1])) {
            (Some(&u), Some(&v)) => {
                if graph.add_edge(u, v)? {
                    summary.edges += 1;
                } else {
                    summary.duplicates += 1;
                }
            }
            _ => summary.skipped_unknown += 1,
        }
    }
    if summary.weighted {
        warn!("{}: edge weights are ignored", path.display());
    }
    if summary.skipped_unknown > 0 {
        warn!(
            "{}: skipped {} edge(s) with identifiers absent from the matrix",
            path.display(),
            summary.skipped_unknown
        );
    }
    if summary.edges == 0 {
        warn!(
            "{}: no usable edges, external graph falls back to self-loops only",
            path.display()
        );
    }
    Ok((graph.with_names(names.to_vec())?, summary))
}

pub fn write_edge_list(path: &Path, graph: &FeatureGraph) -> Result<()> {
    let name = |i: usize| graph.names().map_or_else(|| i.to_string(), |n| n[i].clone());
    let mut out = String::new();
    for (u, v) in graph.edges() {
        out.push_str(&format!("{}\t{}\n", name(u), name(v)));
    }
    fs::write(path, out).map_err(HarnessError::io(path))
}
