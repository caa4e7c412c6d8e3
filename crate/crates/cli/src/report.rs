//! JSON and CSV artifacts. Field names are part of the stable output schema.

use std::io::Write;
use std::path::Path;

use biot_core::spectral::SpectralEstimates;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{CliError, CliResult};

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            config_hash: config.hash(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub n: usize,
    pub h: f64,
    pub mode: Mode,
    pub tol: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// `α² / (λ_max − 1/M)`
    pub k_star: f64,
    /// `1 / λ_max(Ddiv, A)`; only computed by `estimate`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_star_divdiv: Option<f64>,
    pub beta: f64,
    pub omega_opt: f64,
    pub l_opt: f64,
    pub d_opt: f64,
    pub rho_opt: f64,
    pub iterations_used: [usize; 2],
    pub converged: bool,
}

impl EstimateRecord {
    pub fn new(
        n: usize,
        mode: Mode,
        tol: f64,
        alpha: f64,
        est: &SpectralEstimates<f64>,
        k_star_divdiv: Option<f64>,
    ) -> Self {
        Self {
            n,
            h: 1.0 / n as f64,
            mode,
            tol,
            lambda_max: est.lambda_max,
            lambda_min: est.lambda_min,
            k_star: est.k_star,
            k_star_divdiv,
            beta: est.beta,
            omega_opt: est.omega_opt,
            l_opt: est.l_opt,
            d_opt: alpha * alpha / est.l_opt,
            rho_opt: est.rho_opt,
            iterations_used: [est.iterations_used.0, est.iterations_used.1],
            converged: est.converged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub provenance: Provenance,
    pub estimates: Vec<EstimateRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LSource {
    Optimal,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub provenance: Provenance,
    pub n: usize,
    pub h: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub l_source: LSource,
    /// Fixed-stress iterations of each time step, up to the first failed step.
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Mean iterations per step; absent when a step diverged.
    pub average: Option<f64>,
    pub diverged: bool,
    /// `‖p‖_M` of the final pressure.
    pub pressure_norm: f64,
    /// `‖u‖_A` of the final displacement.
    pub displacement_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<EstimateRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub h: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// Mean iterations per step, or `max_iter` for a diverged row.
    pub avg_iterations: f64,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n: usize,
    /// Predicted optimum `α² / L_opt`.
    pub d_opt: f64,
    /// Grid value with the fewest average iterations (first on ties).
    pub d_best: f64,
    pub avg_best: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub rows: Vec<SweepRow>,
    pub estimates: Vec<EstimateRecord>,
    pub summary: Vec<SweepSummary>,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| CliError::Serialize(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Serialize(e.to_string()))
    }

    pub fn read_csv_rows(text: &str) -> CliResult<Vec<SweepRow>> {
        csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Serialize(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
    /// Reported for information only; does not affect the verdict.
    #[serde(default)]
    pub informational: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub provenance: Provenance,
    pub n: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed && !c.informational).count()
    }

    /// One aligned line per check.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let verdict = match (c.passed, c.informational) {
                (_, true) => "INFO",
                (true, false) => "PASS",
                (false, false) => "FAIL",
            };
            s.push_str(&format!(
                "{verdict:<5}{:<36}measured {:>12.4e}  bound {:>12.4e}\n",
                c.name, c.measured, c.bound
            ));
        }
        s
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Write {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
