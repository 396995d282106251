//! CSV / edge-list ingestion and atomic output writing.

use std::fs;
use std::io::Write;
use std::path::Path;

use magkit_core::graph::Graph;
use magkit_core::space::PointCloud;

use crate::errors::{CliError, CliResult};

/// Column selector: 0-based index, or a header name.
#[derive(Debug, Clone)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }
}

/// Points read from CSV, with the label column split off when requested.
pub struct LoadedPoints {
    pub cloud: PointCloud<f64>,
    pub labels: Option<Vec<f64>>,
}

/// Reads one point per row. The header is optional and detected by trying to
/// parse the first row as numbers; `label_col` marks a column excluded from
/// the geometry.
pub fn read_points(path: &Path, label_col: Option<&ColumnRef>) -> CliResult<LoadedPoints> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("error: cannot read {}: {e}", path.display())))?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("error: {} is empty", path.display())));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(CliError::data(format!("error: ragged rows in {}", path.display())));
    }

    let first_is_header = rows[0].iter().any(|c| c.parse::<f64>().is_err());
    let header: Option<Vec<String>> = first_is_header.then(|| rows[0].clone());
    let data_rows = if first_is_header { &rows[1..] } else { &rows[..] };
    if data_rows.is_empty() {
        return Err(CliError::data(format!("error: {} has a header but no data", path.display())));
    }

    let label_idx = match label_col {
        None => None,
        Some(ColumnRef::Index(i)) => {
            if *i >= width {
                return Err(CliError::usage(format!(
                    "error: label column {i} out of range (file has {width} columns)"
                )));
            }
            Some(*i)
        }
        Some(ColumnRef::Name(name)) => match &header {
            Some(h) => Some(h.iter().position(|c| c == name).ok_or_else(|| {
                CliError::usage(format!("error: no column named {name:?} in header {h:?}"))
            })?),
            None => {
                return Err(CliError::usage(format!(
                    "error: label column {name:?} given by name but the file has no header"
                )))
            }
        },
    };

    let mut points = Vec::with_capacity(data_rows.len());
    let mut labels = label_idx.map(|_| Vec::with_capacity(data_rows.len()));
    for (rownum, row) in data_rows.iter().enumerate() {
        let mut coords = Vec::with_capacity(width - usize::from(label_idx.is_some()));
        for (j, cell) in row.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::data(format!(
                    "error: non-numeric cell {cell:?} at row {rownum}, column {j}"
                ))
            })?;
            if Some(j) == label_idx {
                labels.as_mut().unwrap().push(v);
            } else {
                coords.push(v);
            }
        }
        points.push(coords);
    }
    let cloud = PointCloud::from_rows(&points).map_err(CliError::from)?;
    Ok(LoadedPoints { cloud, labels })
}

/// Edge list: one `u v` pair per line, 0-based nodes; blank lines and lines
/// starting with `#` are skipped.
pub fn read_edge_list(path: &Path) -> CliResult<Graph> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("error: cannot read {}: {e}", path.display())))?;
    let mut edges = Vec::new();
    let mut max_node = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |tok: Option<&str>| -> CliResult<usize> {
            tok.and_then(|t| t.parse().ok()).ok_or_else(|| {
                CliError::data(format!("error: bad edge at line {}: {line:?}", lineno + 1))
            })
        };
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(CliError::data(format!(
                "error: expected `u v` at line {}: {line:?}",
                lineno + 1
            )));
        }
        max_node = max_node.max(u).max(v);
        edges.push((u, v));
    }
    if edges.is_empty() {
        return Err(CliError::data(format!("error: no edges in {}", path.display())));
    }
    Graph::new(max_node + 1, edges).map_err(CliError::from)
}

/// 17 significant digits, enough for bit-faithful round trips.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes through a temp file in the destination directory, then renames.
pub fn atomic_write(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            tempfile::NamedTempFile::new_in(d)?
        }
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| CliError::data(format!("error: cannot write {}: {e}", path.display())))?;
    Ok(())
}
