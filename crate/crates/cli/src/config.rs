//! The JSON run configuration and its merge with command-line flags.
//!
//! Parsing is strict: unknown keys anywhere in the document are rejected.
//! Wherever both the file and a flag provide a value, the flag wins.

use std::path::Path;

use nested_krig::kernels::KernelSpec;
use nested_krig::submodels::PartitionStrategy;
use serde::Deserialize;

use crate::dataset::SyntheticSpec;
use crate::errors::CliError;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Option<KernelSpec>,
    pub data: Option<DataConfig>,
    pub partition: Option<PartitionConfig>,
    pub method: Option<MethodName>,
    pub grid: Option<Vec<GridAxis>>,
    pub output: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        if let Some(kernel) = &config.kernel {
            kernel
                .validate()
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        }
        Ok(config)
    }
}

/// Either a CSV path or a synthetic generator; exactly one must be set.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<String>,
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub count: usize,
    pub strategy: PartitionStrategy,
    #[serde(default)]
    pub seed: u64,
}

/// Method names as used by `--method` and the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[clap(rename_all = "lower")]
pub enum MethodName {
    Poe,
    Gpoe,
    Bcm,
    Rbcm,
    Nested,
}

impl MethodName {
    pub fn as_variance_method(self) -> Option<nested_krig::aggregators::VarianceMethod> {
        use nested_krig::aggregators::VarianceMethod as V;
        match self {
            MethodName::Poe => Some(V::Poe),
            MethodName::Gpoe => Some(V::Gpoe),
            MethodName::Bcm => Some(V::Bcm),
            MethodName::Rbcm => Some(V::Rbcm),
            MethodName::Nested => None,
        }
    }
}

/// One grid dimension: `min,max,count` on the command line.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl std::str::FromStr for GridAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("expected min,max,count — got '{s}'"));
        }
        let min: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| format!("bad min in '{s}'"))?;
        let max: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| format!("bad max in '{s}'"))?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("bad count in '{s}'"))?;
        if count == 0 {
            return Err(format!("grid count must be >= 1 in '{s}'"));
        }
        if min.is_nan() || max.is_nan() || max < min {
            return Err(format!("grid range is empty in '{s}'"));
        }
        Ok(GridAxis { min, max, count })
    }
}

/// Builds the cartesian evaluation grid (last axis fastest).
pub fn build_grid(axes: &[GridAxis]) -> Result<nested_krig::kernels::PointSet, CliError> {
    if axes.is_empty() {
        return Err(CliError::validation("no grid axes given".into()));
    }
    let d = axes.len();
    let total: usize = axes.iter().map(|a| a.count).product();
    let mut data = Vec::with_capacity(total * d);
    let mut index = vec![0usize; d];
    for _ in 0..total {
        for (axis, &i) in axes.iter().zip(&index) {
            let value = if axis.count == 1 {
                axis.min
            } else {
                axis.min + (axis.max - axis.min) * i as f64 / (axis.count - 1) as f64
            };
            data.push(value);
        }
        for pos in (0..d).rev() {
            index[pos] += 1;
            if index[pos] < axes[pos].count {
                break;
            }
            index[pos] = 0;
        }
    }
    nested_krig::kernels::PointSet::from_flat(total, d, data)
        .map_err(|e| CliError::validation(e.to_string()))
}
