//! Declarative run configuration: a TOML file with one optional section per
//! subcommand. Flags given on the command line take precedence.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub root_system: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub phi: PhiParams,
    pub transform: TransformParams,
    pub kernel: KernelConfig,
    pub decay: DecayParams,
    pub dispersive: DispersiveParams,
    pub solve: SolveParams,
    pub admissible: AdmissibleParams,
    pub gwp: GwpParams,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhiParams {
    pub lambda: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformParams {
    /// Width `w` of the test profile `exp(-|H|^2 / w^2)`.
    pub width: f64,
    pub radial_radius: f64,
    pub radial_spacing: f64,
    pub spectral_radius: f64,
    pub spectral_spacing: f64,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            width: 1.0,
            radial_radius: 12.0,
            radial_spacing: 0.1,
            spectral_radius: 11.0,
            spectral_spacing: 0.3,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub t: f64,
    /// Defaults to `(d+1)/2 + i`.
    pub sigma_re: Option<f64>,
    pub sigma_im: Option<f64>,
    /// `low`, `high_reg` or `total`.
    pub part: String,
    /// `bump_integral` or `exp_quotient`.
    pub mollifier: String,
    /// Chamber grid radius; defaults to the time-adapted grid.
    pub radius: Option<f64>,
    pub points: Option<usize>,
    pub panels: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            t: 1.0,
            sigma_re: None,
            sigma_im: None,
            part: "high_reg".into(),
            mollifier: "bump_integral".into(),
            radius: None,
            points: None,
            panels: 64,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayParams {
    /// `small` or `large`.
    pub regime: String,
    pub sigma_re: Option<f64>,
    pub sigma_im: Option<f64>,
    pub t_max: f64,
    pub times: Option<Vec<f64>>,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            regime: "small".into(),
            sigma_re: None,
            sigma_im: None,
            t_max: 40.0,
            times: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersiveParams {
    pub q: f64,
    pub sigma_im: f64,
    pub t_max: f64,
    pub small_times: Option<Vec<f64>>,
    pub large_times: Option<Vec<f64>>,
}

impl Default for DispersiveParams {
    fn default() -> Self {
        Self {
            q: 4.0,
            sigma_im: 1.0,
            t_max: 40.0,
            small_times: None,
            large_times: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    pub gamma: f64,
    pub t_final: f64,
    pub steps: Option<usize>,
    pub mu: f64,
    pub width: f64,
    pub amplitude: f64,
    /// Rescale the data to this size in `H^s x H^{s-1}`, `s` from the
    /// well-posedness table; `amplitude` is used as given when absent.
    pub delta: Option<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Write every n-th time step as a CSV snapshot.
    pub snapshot_every: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            gamma: 3.0,
            t_final: 10.0,
            steps: None,
            mu: 1.0,
            width: 1.0,
            amplitude: 1.0,
            delta: Some(1e-2),
            max_iterations: 50,
            tolerance: 1e-8,
            snapshot_every: 10,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibleParams {
    pub d: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwpParams {
    pub d: Option<usize>,
    pub gamma: Option<f64>,
    pub zero_plus: f64,
}

impl Default for GwpParams {
    fn default() -> Self {
        Self {
            d: None,
            gamma: None,
            zero_plus: wavesym::evolution::ZERO_PLUS,
        }
    }
}
