//! Dataset ingestion: CSV with a header row, `d` coordinate columns and one
//! value column, plus a small synthetic generator for self-contained runs.

use nalgebra::DVector;
use nested_krig::kernels::PointSet;
use serde::Deserialize;

use crate::errors::CliError;

/// Loads a dataset: header required, every row `d` coordinates then one
/// value, row order preserved. NaN and infinite entries are rejected with
/// the offending file line.
pub fn load_dataset(path: &str) -> Result<(PointSet, DVector<f64>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(format!("cannot open {path}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::io(format!("{path}: {e}")))?
        .clone();
    if headers.len() < 2 {
        return Err(CliError::validation(format!(
            "{path}: need at least one coordinate column and one value column, found {}",
            headers.len()
        )));
    }
    let d = headers.len() - 1;

    let mut coords: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::validation(format!("{path}: {e}")))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(values.len() as u64 + 2);
        if record.len() != d + 1 {
            return Err(CliError::validation(format!(
                "{path} line {line}: expected {} fields, found {}",
                d + 1,
                record.len()
            )));
        }
        let mut parsed = Vec::with_capacity(d + 1);
        for field in record.iter() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::validation(format!("{path} line {line}: '{field}' is not a number"))
            })?;
            if !value.is_finite() {
                return Err(CliError::validation(format!(
                    "{path} line {line}: non-finite value '{field}'"
                )));
            }
            parsed.push(value);
        }
        values.push(parsed.pop().expect("width checked"));
        coords.extend(parsed);
    }
    if values.is_empty() {
        return Err(CliError::validation(format!(
            "{path}: no data rows after the header"
        )));
    }
    let x = PointSet::from_flat(values.len(), d, coords)
        .map_err(|e| CliError::validation(e.to_string()))?;
    Ok((x, DVector::from_vec(values)))
}

/// Synthetic one-dimensional datasets: an equispaced midpoint design over
/// `[min, max]` with a named function.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    #[serde(default)]
    pub min: f64,
    #[serde(default = "one")]
    pub max: f64,
    pub function: SyntheticFunction,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticFunction {
    /// `sin(2 pi x) + x`
    SineRamp,
    Zero,
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<(PointSet, DVector<f64>), CliError> {
        if self.n == 0 {
            return Err(CliError::validation(
                "synthetic dataset needs n >= 1".into(),
            ));
        }
        if self.min.is_nan() || self.max.is_nan() || self.max <= self.min {
            return Err(CliError::validation(format!(
                "synthetic range [{}, {}] is empty",
                self.min, self.max
            )));
        }
        let xs: Vec<f64> = (0..self.n)
            .map(|i| self.min + (self.max - self.min) * (i as f64 + 0.5) / self.n as f64)
            .collect();
        let ys = DVector::from_iterator(
            self.n,
            xs.iter().map(|&x| match self.function {
                SyntheticFunction::SineRamp => (2.0 * std::f64::consts::PI * x).sin() + x,
                SyntheticFunction::Zero => 0.0,
            }),
        );
        Ok((PointSet::one_d(&xs), ys))
    }
}
