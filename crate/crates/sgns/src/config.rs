//! Experiment configuration: a plain TOML file with key = value sections.
//! Unknown keys are rejected, and every referenced library invariant is
//! re-validated at load time so a bad file fails before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgns_core::basis::assemble_torus_basis;
use sgns_core::noise::{Coloring, ColoringSpec};
use sgns_core::{Backend, Integrator, SolverConfig, Spectrum, TriadTable};

use crate::error::CliError;
use crate::registry;

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub output_dir: PathBuf,
    pub model: ModelSection,
    #[serde(default)]
    pub coloring: Option<ColoringSection>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub mc: Option<McSection>,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub backend: String,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ColoringSection {
    /// "power-law" or "sigma".
    pub kind: String,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default)]
    pub band_low: Option<f64>,
    #[serde(default)]
    pub band_high: Option<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub integrator: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub samples: usize,
    #[serde(default)]
    pub burn_in: Option<f64>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-validates every library invariant the file touches.
    pub fn validate(&self) -> Result<(), CliError> {
        if registry::find(&self.experiment).is_none() {
            return Err(CliError::Config(format!(
                "unknown experiment {:?}; run `list` for the registry",
                self.experiment
            )));
        }
        let s = self.spectrum()?;
        if let Some(c) = &self.coloring {
            c.build(&s)?;
        }
        if let Some(sv) = &self.solver {
            sv.build(self.model.n)?;
        }
        if let Some(mc) = &self.mc {
            if mc.samples < 2 {
                return Err(CliError::Config("mc.samples must be at least 2".into()));
            }
            if let (Some(b), Some(sv)) = (mc.burn_in, &self.solver) {
                if !(b >= 0.0 && b < sv.horizon) {
                    return Err(CliError::Config(
                        "mc.burn_in must be nonnegative and below solver.horizon".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn backend(&self) -> Result<Backend, CliError> {
        Backend::parse(&self.model.backend).map_err(CliError::from_core)
    }

    pub fn spectrum(&self) -> Result<Spectrum, CliError> {
        match self.backend()? {
            Backend::Torus => Spectrum::torus(self.model.n),
            Backend::Synthetic => Spectrum::synthetic(self.model.n, 1.0),
        }
        .map_err(CliError::from_core)
    }

    /// Basis-backed operators for the configured model; the synthetic
    /// backend carries no triad interactions.
    pub fn operators(&self) -> Result<(Spectrum, TriadTable), CliError> {
        match self.backend()? {
            Backend::Torus => {
                let (basis, s) = assemble_torus_basis(self.model.n).map_err(CliError::from_core)?;
                Ok((s, TriadTable::assemble(&basis)))
            }
            Backend::Synthetic => Ok((
                Spectrum::synthetic(self.model.n, 1.0).map_err(CliError::from_core)?,
                TriadTable::empty(self.model.n),
            )),
        }
    }
}

impl ColoringSection {
    pub fn build(&self, s: &Spectrum) -> Result<Coloring, CliError> {
        let spec = match self.kind.as_str() {
            "power-law" => ColoringSpec::PowerLaw {
                gamma: self
                    .gamma
                    .ok_or_else(|| CliError::Config("power-law coloring needs gamma".into()))?,
            },
            "sigma" => ColoringSpec::SigmaSequence {
                sigmas: self
                    .sigmas
                    .clone()
                    .ok_or_else(|| CliError::Config("sigma coloring needs sigmas".into()))?,
                a: self
                    .band_low
                    .ok_or_else(|| CliError::Config("sigma coloring needs band_low".into()))?,
                b: self
                    .band_high
                    .ok_or_else(|| CliError::Config("sigma coloring needs band_high".into()))?,
            },
            other => {
                return Err(CliError::Config(format!(
                    "coloring.kind must be \"power-law\" or \"sigma\", got {other:?}"
                )))
            }
        };
        Coloring::make(spec, s, self.epsilon).map_err(CliError::from_core)
    }
}

impl SolverSection {
    pub fn build(&self, n: usize) -> Result<SolverConfig, CliError> {
        let cfg = SolverConfig::new(n, self.dt, self.horizon).map_err(CliError::from_core)?;
        let cfg = match self.integrator.as_deref() {
            None | Some("exponential-euler") => cfg.with_integrator(Integrator::ExponentialEuler),
            Some("etd2") => cfg.with_integrator(Integrator::Etd2),
            Some(other) => {
                return Err(CliError::Config(format!(
                    "solver.integrator must be \"exponential-euler\" or \"etd2\", got {other:?}"
                )))
            }
        };
        Ok(cfg)
    }
}
