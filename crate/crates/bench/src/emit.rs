use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::{BenchError, ResultTable};

pub const CSV_HEADER: &str = "estimator,n,trials,mse_mean,mse_median,mse_stderr,failures";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (csv or json)")),
        }
    }
}

/// One row per cell; floats with 17 significant digits.
pub fn to_csv(table: &ResultTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &table.cells {
        let _ = writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e},{}",
            c.estimator, c.n, c.trials, c.mse_mean, c.mse_median, c.mse_stderr, c.failures
        );
    }
    out
}

pub fn to_json(table: &ResultTable) -> Result<String, BenchError> {
    let mut s = serde_json::to_string_pretty(table)?;
    s.push('\n');
    Ok(s)
}

pub fn emit(table: &ResultTable, format: OutputFormat, path: &Path) -> Result<(), BenchError> {
    let text = match format {
        OutputFormat::Csv => to_csv(table),
        OutputFormat::Json => to_json(table)?,
    };
    std::fs::write(path, text).map_err(|e| BenchError::Io(path.display().to_string(), e))
}
