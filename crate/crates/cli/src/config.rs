//! Experiment configuration: a sectioned TOML file in which every key is optional.
//! Missing keys fall back to the reference setup; unknown keys are rejected.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::Path;

use biot_core::assembly::ManufacturedSources;
use biot_core::params::{MaterialParams, TimeGrid};
use biot_core::spectral::PowerOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub material: MaterialSection,
    pub temporal: TemporalSection,
    pub mesh: MeshSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub spectral: SpectralSection,
    pub sources: SourcesSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSection {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    #[serde(rename = "inv_M")]
    pub inv_m: f64,
    pub kappa: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        let p = MaterialParams::<f64>::reference();
        Self {
            mu: p.mu,
            lambda: p.lambda,
            alpha: p.alpha,
            inv_m: p.inv_m,
            kappa: p.kappa,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalSection {
    pub t0: f64,
    pub tau: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
}

impl Default for TemporalSection {
    fn default() -> Self {
        Self {
            t0: 0.0,
            tau: 0.1,
            t_end: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    /// Subdivisions per side, one problem per entry.
    pub n: Vec<usize>,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            n: vec![16, 32, 64, 128],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub eps_r: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            eps_r: 1e-6,
            max_iter: 500,
            inner_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    /// Equally spaced in `D = α²/L`.
    #[default]
    LinearD,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub d_min: f64,
    pub d_max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            d_min: 0.6e11,
            d_max: 1.6e11,
            count: 31,
            spacing: Spacing::LinearD,
        }
    }
}

impl SweepSection {
    /// The `D` values of the sweep in increasing order.
    pub fn d_values(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::LinearD => {
                let step = (self.d_max - self.d_min) / (self.count - 1) as f64;
                (0..self.count)
                    .map(|i| {
                        if i + 1 == self.count {
                            self.d_max
                        } else {
                            self.d_min + step * i as f64
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Fine,
    Coarse,
}

impl Mode {
    pub fn default_tol(self) -> f64 {
        match self {
            Mode::Fine => PowerOptions::<f64>::fine().tol,
            Mode::Coarse => PowerOptions::<f64>::coarse().tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSection {
    /// Overrides the tolerance implied by `mode`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub maxit: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for SpectralSection {
    fn default() -> Self {
        let fine = PowerOptions::<f64>::fine();
        Self {
            tol: None,
            maxit: fine.max_iter,
            seed: fine.seed,
            mode: Mode::Fine,
        }
    }
}

impl SpectralSection {
    pub fn options(&self) -> PowerOptions<f64> {
        PowerOptions {
            tol: self.tol.unwrap_or(self.mode.default_tol()),
            max_iter: self.maxit,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourcesSection {
    /// Multiplier of the parabolic profile in both momentum components.
    pub momentum_scale: f64,
    /// Overall amplitude; 0 switches both sources off.
    pub amplitude: f64,
}

impl Default for SourcesSection {
    fn default() -> Self {
        let s = ManufacturedSources::<f64>::default();
        Self {
            momentum_scale: s.momentum_scale,
            amplitude: s.amplitude,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.material_params()?;
        self.time_grid()?;
        if self.mesh.n.is_empty() {
            return bad("mesh.n must list at least one mesh".into());
        }
        if let Some(&n) = self.mesh.n.iter().find(|&&n| n < 2) {
            return bad(format!(
                "mesh.n entries must be at least 2 (coarser meshes have no interior pressure), got {n}"
            ));
        }
        let s = &self.solver;
        if !(s.eps_r > 0.0) {
            return bad(format!("solver.eps_r must be positive, got {}", s.eps_r));
        }
        if s.max_iter == 0 {
            return bad("solver.max_iter must be at least 1".into());
        }
        if !(s.inner_tol > 0.0) {
            return bad(format!("solver.inner_tol must be positive, got {}", s.inner_tol));
        }
        let w = &self.sweep;
        if w.count < 2 {
            return bad(format!("sweep.count must be at least 2, got {}", w.count));
        }
        if !(w.d_min > 0.0 && w.d_max > w.d_min && w.d_max.is_finite()) {
            return bad(format!(
                "sweep needs 0 < d_min < d_max, got [{}, {}]",
                w.d_min, w.d_max
            ));
        }
        let sp = &self.spectral;
        if let Some(tol) = sp.tol {
            if !(tol > 0.0) {
                return bad(format!("spectral.tol must be positive, got {tol}"));
            }
        }
        if sp.maxit == 0 {
            return bad("spectral.maxit must be at least 1".into());
        }
        if !self.sources.momentum_scale.is_finite() || !self.sources.amplitude.is_finite() {
            return bad("sources must be finite".into());
        }
        Ok(())
    }

    pub fn material_params(&self) -> CliResult<MaterialParams<f64>> {
        let m = &self.material;
        MaterialParams::new(m.mu, m.lambda, m.alpha, m.inv_m, m.kappa)
            .map_err(|e| CliError::Config(format!("material: {e}")))
    }

    pub fn time_grid(&self) -> CliResult<TimeGrid<f64>> {
        let t = &self.temporal;
        TimeGrid::new(t.t0, t.tau, t.t_end).map_err(|e| CliError::Config(format!("temporal: {e}")))
    }

    pub fn sources(&self) -> ManufacturedSources<f64> {
        ManufacturedSources {
            momentum_scale: self.sources.momentum_scale,
            amplitude: self.sources.amplitude,
        }
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
