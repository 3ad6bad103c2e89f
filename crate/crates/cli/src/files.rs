use std::path::Path;

use crate::error::{CliError, CliResult};

pub fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Compute(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write(path, &text)
}

/// Rows of a numeric CSV with a header whose first columns are `expected`.
pub fn read_numeric_csv(path: &Path, expected: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    let text = read(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::validation(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    if header.len() < expected.len() || header[..expected.len()] != *expected {
        return Err(CliError::validation(format!(
            "{}: expected header starting with `{}`",
            path.display(),
            expected.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .take(expected.len())
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::validation(format!("{} line {}: {e}", path.display(), i + 2)))?;
        if row.len() < expected.len() {
            return Err(CliError::validation(format!(
                "{} line {}: expected {} columns",
                path.display(),
                i + 2,
                expected.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(rows)
}
