//! JSON run configuration.
//!
//! ```json
//! {
//!   "operator": { "n": 1, "a": [1.0], "b": [1.0] },
//!   "task": { "kind": "kernel", "x0": [0.0], "axes": [{ "lo": -1.0, "hi": 1.0, "points": 3 }], "times": [0.5] },
//!   "output": { "format": "csv", "path": "kernel.csv" },
//!   "seed": 42
//! }
//! ```

use std::path::PathBuf;

use mehler_core::{OperatorSpec, SymPosDefMatrix};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorBlock>,
    pub task: Task,
    #[serde(default, skip_serializing_if = "OutputBlock::is_empty")]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `L = -div(A∇) + ⟨Bx,x⟩ + ⟨f,∇⟩ + ⟨g,x⟩ + h` with row-major `A` and `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorBlock {
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Task {
    /// Kernel values from source `x0` on a tensor grid.
    Kernel {
        x0: Vec<f64>,
        axes: Vec<AxisConfig>,
        times: Vec<f64>,
    },
    Geodesic {
        x0: Vec<f64>,
        x1: Vec<f64>,
        t: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Riccati { times: Vec<f64> },
    /// Empty `suites` runs all of them.
    Verify {
        #[serde(default)]
        suites: Vec<String>,
    },
}

fn default_samples() -> usize {
    101
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Kernel { .. } => "kernel",
            Task::Geodesic { .. } => "geodesic",
            Task::Riccati { .. } => "riccati",
            Task::Verify { .. } => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl OutputBlock {
    fn is_empty(&self) -> bool {
        self.format.is_none() && self.path.is_none()
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("cannot parse config: {e}")))
    }

    /// Canonical form: pretty JSON with absent optional fields omitted.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn operator_spec(&self) -> Result<OperatorSpec, CliError> {
        self.operator
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("the {} task needs an operator block", self.task.kind())))?
            .spec()
    }
}

fn check_len(name: &str, v: &[f64], expected: usize) -> Result<(), CliError> {
    if v.len() != expected {
        return Err(CliError::Config(format!(
            "{name} has {} entries, expected {expected}",
            v.len()
        )));
    }
    Ok(())
}

impl OperatorBlock {
    pub fn spec(&self) -> Result<OperatorSpec, CliError> {
        let n = self.n;
        if n == 0 {
            return Err(CliError::Config("operator dimension n must be at least 1".into()));
        }
        check_len("operator.a", &self.a, n * n)?;
        check_len("operator.b", &self.b, n * n)?;
        let a = SymPosDefMatrix::new(DMatrix::from_row_slice(n, n, &self.a)).map_err(CliError::from_config)?;
        let spec = OperatorSpec::new(a, DMatrix::from_row_slice(n, n, &self.b)).map_err(CliError::from_config)?;
        if self.f.is_none() && self.g.is_none() && self.h.is_none() {
            return Ok(spec);
        }
        let vector = |name: &str, v: &Option<Vec<f64>>| -> Result<DVector<f64>, CliError> {
            match v {
                Some(v) => {
                    check_len(name, v, n)?;
                    Ok(DVector::from_column_slice(v))
                }
                None => Ok(DVector::zeros(n)),
            }
        };
        spec.with_lower_order(vector("operator.f", &self.f)?, vector("operator.g", &self.g)?, self.h.unwrap_or(0.0))
            .map_err(CliError::from_config)
    }
}
