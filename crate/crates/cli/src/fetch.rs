//! Benchmark-dataset fetcher with SHA-256 verification.
//!
//! Checksums are pinned three ways, in order of precedence: an explicit
//! `--sha256` flag, a registry constant, or a `<name>.sha256` sidecar written
//! on the first successful fetch. A cached file that matches its pin is never
//! re-downloaded; a mismatching one is deleted and fetched again.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::errors::{CliError, CliResult};

#[derive(Debug)]
pub struct DatasetSpec {
    pub name: &'static str,
    pub url: &'static str,
    /// Registry-pinned checksum of the raw download, when known at build time.
    pub sha256: Option<&'static str>,
    pub description: &'static str,
}

/// Known datasets. `breastw` is materialized from the UCI source file that
/// underlies the ODDS benchmark of the same name (683 points, 9 integer
/// features, 239 outliers after dropping rows with missing values).
pub const DATASETS: &[DatasetSpec] = &[DatasetSpec {
    name: "breastw",
    url: "https://archive.ics.uci.edu/ml/machine-learning-databases/breast-cancer-wisconsin/breast-cancer-wisconsin.data",
    sha256: None, // pinned on first fetch via the sidecar file
    description: "Wisconsin breast cancer (label 1 = malignant outlier)",
}];

pub fn dataset(name: &str) -> CliResult<&'static DatasetSpec> {
    DATASETS.iter().find(|d| d.name == name).ok_or_else(|| {
        let names: Vec<String> = DATASETS
            .iter()
            .map(|d| format!("{} ({})", d.name, d.description))
            .collect();
        CliError::usage(format!(
            "error: unknown dataset {name:?}; supported names: {}",
            names.join(", ")
        ))
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn sidecar_path(raw_path: &Path) -> PathBuf {
    raw_path.with_extension("sha256")
}

/// Outcome of [`fetch_dataset`].
#[derive(Debug)]
pub struct Fetched {
    /// Path of the processed, analysis-ready CSV.
    pub csv_path: PathBuf,
    /// Whether the network was touched.
    pub downloaded: bool,
    pub sha256: String,
}

/// Fetches `name` into `dir` using `download`, which maps a URL to raw bytes
/// (injected so the verification logic is testable without a network).
pub fn fetch_dataset(
    spec: &DatasetSpec,
    dir: &Path,
    explicit_sha: Option<&str>,
    download: &dyn Fn(&str) -> CliResult<Vec<u8>>,
) -> CliResult<Fetched> {
    fs::create_dir_all(dir)?;
    let raw_path = dir.join(format!("{}.raw", spec.name));
    let csv_path = dir.join(format!("{}.csv", spec.name));
    let sidecar = sidecar_path(&raw_path);

    let pinned: Option<String> = explicit_sha
        .map(str::to_string)
        .or_else(|| spec.sha256.map(str::to_string))
        .or_else(|| fs::read_to_string(&sidecar).ok().map(|s| s.trim().to_string()));

    // Valid cache: verified raw file plus derived CSV means no network call.
    if let (Some(pin), Ok(bytes)) = (&pinned, fs::read(&raw_path)) {
        let got = sha256_hex(&bytes);
        if &got == pin {
            if !csv_path.exists() {
                process_dataset(spec, &bytes, &csv_path)?;
            }
            return Ok(Fetched { csv_path, downloaded: false, sha256: got });
        }
        // Corrupted cache: remove and fall through to a fresh download.
        fs::remove_file(&raw_path)?;
        let _ = fs::remove_file(&csv_path);
    }

    let bytes = download(spec.url)?;
    let got = sha256_hex(&bytes);
    if let Some(pin) = &pinned {
        if &got != pin {
            return Err(CliError::data(format!(
                "error: checksum mismatch for {}: expected {pin}, got {got}; nothing written",
                spec.name
            )));
        }
    }
    fs::write(&raw_path, &bytes)?;
    fs::write(&sidecar, format!("{got}\n"))?;
    process_dataset(spec, &bytes, &csv_path)?;
    Ok(Fetched { csv_path, downloaded: true, sha256: got })
}

/// HTTPS download used by the CLI.
pub fn https_download(url: &str) -> CliResult<Vec<u8>> {
    let mut response = ureq::get(url)
        .call()
        .map_err(|e| CliError::data(format!("error: download failed: {e}")))?;
    let mut buf = Vec::new();
    std::io::Read::read_to_end(&mut response.body_mut().as_reader(), &mut buf)
        .map_err(|e| CliError::data(format!("error: download failed: {e}")))?;
    Ok(buf)
}

fn process_dataset(spec: &DatasetSpec, raw: &[u8], csv_path: &Path) -> CliResult<()> {
    match spec.name {
        "breastw" => process_breastw(raw, csv_path),
        other => Err(CliError::data(format!("error: no processor for {other}"))),
    }
}

/// UCI breast-cancer-wisconsin.data -> feature CSV with a 0/1 label column.
/// Columns: id, 9 integer features (missing as `?`), class (2 benign /
/// 4 malignant). Rows with missing values are dropped; label 1 = malignant.
fn process_breastw(raw: &[u8], csv_path: &Path) -> CliResult<()> {
    let text = String::from_utf8_lossy(raw);
    let mut out = String::from("f1,f2,f3,f4,f5,f6,f7,f8,f9,label\n");
    let mut kept = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 11 || cells.contains(&"?") {
            continue;
        }
        let class: u32 = cells[10]
            .parse()
            .map_err(|_| CliError::data(format!("error: bad class cell {:?}", cells[10])))?;
        let label = match class {
            2 => 0,
            4 => 1,
            other => {
                return Err(CliError::data(format!("error: unexpected class {other}")));
            }
        };
        out.push_str(&cells[1..10].join(","));
        out.push(',');
        out.push_str(&label.to_string());
        out.push('\n');
        kept += 1;
    }
    if kept == 0 {
        return Err(CliError::data("error: no usable rows in downloaded file".to_string()));
    }
    crate::io::atomic_write(csv_path, out.as_bytes())
}
