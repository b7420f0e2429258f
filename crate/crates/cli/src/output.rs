//! Deterministic CSV output: shortest round-trip float formatting and a
//! fixed row order make repeated runs byte-identical.

use std::path::Path;

use crate::errors::CliError;

/// Shortest exact decimal representation (switches to exponent notation for
/// extreme magnitudes), deterministic for a given bit pattern.
pub fn fmt(value: f64) -> String {
    format!("{value:?}")
}

pub struct CsvFile {
    writer: csv::Writer<std::fs::File>,
}

impl CsvFile {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(CsvFile { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush()?;
        Ok(())
    }
}
