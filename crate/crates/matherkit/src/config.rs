//! Run configuration: the Lagrangian source, grid, tolerances, output
//! location and seed, resolved from a JSON document plus flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};
use crate::experiments::PipelineParams;
use crate::grids::PhaseGrid;
use crate::model::LagrangianSpec;

/// The three externally tunable tolerances; everything else derives from
/// them (see [`crate::defaults`]).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default = "d_eps_pot")]
    pub eps_pot: f64,
    #[serde(default = "d_alpha_tol")]
    pub alpha_tol: f64,
    #[serde(default = "d_lp_feas")]
    pub lp_feas: f64,
}

fn d_eps_pot() -> f64 {
    defaults::EPS_POT
}
fn d_alpha_tol() -> f64 {
    defaults::ALPHA_TOL
}
fn d_lp_feas() -> f64 {
    defaults::LP_FEAS
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_pot: defaults::EPS_POT,
            alpha_tol: defaults::ALPHA_TOL,
            lp_feas: defaults::LP_FEAS,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_pot > 0.0 && self.alpha_tol > 0.0 && self.lp_feas > 0.0) {
            return Err(Error::Config("tolerances must be positive".to_string()));
        }
        Ok(())
    }
}

/// Fully resolved run configuration; serialized into every JSON output as
/// the audit trail.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub spec: LagrangianSpec,
    pub grid: PhaseGrid,
    pub tolerances: Tolerances,
    pub fourier_order: usize,
    pub lax_max_iters: usize,
    pub output: PathBuf,
    pub seed: u64,
}

#[derive(Deserialize)]
struct RawConfig {
    spec: Option<serde_json::Value>,
    #[serde(default)]
    grid: Option<PhaseGrid>,
    #[serde(default)]
    tolerances: Option<Tolerances>,
    #[serde(default)]
    fourier_order: Option<usize>,
    #[serde(default)]
    lax_max_iters: Option<usize>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
}

impl RunConfig {
    /// Load from a JSON file.  The document is either a full run config
    /// (`{"spec": <path or inline>, "grid": …, …}`) or a bare Lagrangian
    /// (`{"mass": …, "potential": …}`), in which case everything else
    /// defaults.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;

        if value.get("potential").is_some() {
            let spec: LagrangianSpec = serde_json::from_value(value)?;
            spec.validate()?;
            return Ok(RunConfig::with_spec(spec));
        }

        let raw: RawConfig = serde_json::from_value(value)?;
        let spec_value = raw
            .spec
            .ok_or_else(|| Error::Config("config needs a \"spec\" entry".to_string()))?;
        let spec = match spec_value {
            serde_json::Value::String(rel) => {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                LagrangianSpec::from_json_file(&base.join(rel))?
            }
            inline => {
                let spec: LagrangianSpec = serde_json::from_value(inline)?;
                spec.validate()?;
                spec
            }
        };
        let config = RunConfig {
            spec,
            grid: raw.grid.unwrap_or_default(),
            tolerances: raw.tolerances.unwrap_or_default(),
            fourier_order: raw.fourier_order.unwrap_or(defaults::FOURIER_ORDER),
            lax_max_iters: raw.lax_max_iters.unwrap_or(defaults::LAX_MAX_ITERS),
            output: raw.output.unwrap_or_else(|| PathBuf::from("out")),
            seed: raw.seed.unwrap_or(defaults::SEED),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_spec(spec: LagrangianSpec) -> RunConfig {
        RunConfig {
            spec,
            grid: PhaseGrid::default(),
            tolerances: Tolerances::default(),
            fourier_order: defaults::FOURIER_ORDER,
            lax_max_iters: defaults::LAX_MAX_ITERS,
            output: PathBuf::from("out"),
            seed: defaults::SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.grid.validate()?;
        self.tolerances.validate()?;
        Ok(())
    }

    /// Pipeline knobs implied by this configuration.
    pub fn params(&self) -> PipelineParams {
        PipelineParams {
            eps_pot: self.tolerances.eps_pot,
            alpha_tol: self.tolerances.alpha_tol,
            lp_feas: self.tolerances.lp_feas,
            fourier_order: self.fourier_order,
            lax_max_iters: self.lax_max_iters,
            aubry_epsilon: self.tolerances.eps_pot,
            mane_epsilon: 3.0 * self.tolerances.eps_pot,
            ..PipelineParams::default()
        }
    }
}
