use std::fs;
use std::path::Path;

use billiard_core::analysis::PowerLawFit;
use billiard_core::{BilliardError, Result};
use serde::Serialize;

fn io_error(path: &Path, e: std::io::Error) -> BilliardError {
    BilliardError::Internal(format!("cannot write {}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Writes a CSV file from a header and pre-formatted rows.
pub fn write_csv<I>(dir: &Path, name: &str, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut text = String::new();
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| io_error(&path, e))
}

pub fn write_fit(dir: &Path, name: &str, fit: &PowerLawFit) -> Result<()> {
    write_csv(dir, name, PowerLawFit::CSV_HEADER, [fit.csv_row()])
}

#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a T,
}

/// Writes `run.json` with the resolved configuration.
pub fn write_run_record<T: Serialize>(dir: &Path, command: &str, config: &T) -> Result<()> {
    let record = RunRecord {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
    };
    let mut text = serde_json::to_string_pretty(&record)
        .map_err(|e| BilliardError::Internal(format!("cannot serialize run record: {e}")))?;
    text.push('\n');
    let path = dir.join("run.json");
    fs::write(&path, text).map_err(|e| io_error(&path, e))
}
