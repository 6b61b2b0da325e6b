use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use dqm_core::network::{FourModePhases, Scheme};
use dqm_core::protocols::{BuiltinFunction, FirstStepModel, ResourceContext};
use dqm_core::qfim::StateFamily;
use dqm_core::states::SingleModeState;
use dqm_core::Complex64;

use crate::CliError;

fn default_scheme() -> Scheme {
    Scheme::Paired
}

fn default_pure_cutoff() -> usize {
    60
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub state: SingleModeState,
    /// Coherent amplitude `[re, im]`; only `|α|²` matters after alignment.
    #[serde(with = "dqm_core::serde_complex::scalar")]
    pub alpha: Complex64,
    pub weights: Vec<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Fock cutoff for states without closed-form moments.
    #[serde(default = "default_pure_cutoff")]
    pub cutoff: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub weights: Vec<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Free phases of the explicit four-mode construction.
    #[serde(default)]
    pub four_mode_phases: Option<FourModePhases>,
}

fn default_threshold() -> f64 {
    1e-10
}

fn default_oracle_tol() -> f64 {
    1e-6
}

fn default_no_go_range() -> [f64; 2] {
    [0.45, 0.55]
}

fn default_photon_numbers() -> Vec<f64> {
    vec![10.0, 30.0, 100.0, 300.0, 1000.0]
}

fn default_grid() -> usize {
    64
}

fn default_cfi_fraction() -> f64 {
    0.99
}

#[derive(Debug, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum VerifyCheck {
    /// Analytic QFIM against the Fock-space oracle.
    Oracle {
        state: SingleModeState,
        #[serde(with = "dqm_core::serde_complex::scalar")]
        alpha: Complex64,
        weights: Vec<f64>,
        #[serde(default = "default_scheme")]
        scheme: Scheme,
        cutoff: usize,
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default = "default_oracle_tol")]
        tolerance: f64,
    },
    /// Fitted exponent of `Δq` against `N` for a squeezed vacuum alone, and
    /// with a coherent input at `σ = 1`.
    NoGo {
        weights: Vec<f64>,
        #[serde(default = "default_photon_numbers")]
        photon_numbers: Vec<f64>,
        #[serde(default = "default_no_go_range")]
        alone_range: [f64; 2],
        #[serde(default)]
        paired_range: Option<[f64; 2]>,
    },
    /// Photon-counting information at the best operating point against
    /// `4N + c_v`.
    Cfi {
        state: SingleModeState,
        #[serde(with = "dqm_core::serde_complex::scalar")]
        alpha: Complex64,
        weights: Vec<f64>,
        cutoff: usize,
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default = "default_grid")]
        grid: usize,
        #[serde(default = "default_cfi_fraction")]
        min_fraction: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub checks: Vec<VerifyCheck>,
}

/// Explicit values or an evenly spaced range.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range(GridRange),
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Linear
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            Grid::Values(v) => {
                if v.is_empty() {
                    return Err("empty grid".into());
                }
                Ok(v.clone())
            }
            Grid::Range(r) => {
                if r.count < 2 || !(r.start.is_finite() && r.stop.is_finite()) {
                    return Err("a range grid needs finite bounds and count >= 2".into());
                }
                if r.spacing == Spacing::Log && !(r.start > 0.0 && r.stop > 0.0) {
                    return Err("log grid bounds must be positive".into());
                }
                let n = (r.count - 1) as f64;
                Ok((0..r.count)
                    .map(|i| {
                        let t = i as f64 / n;
                        match r.spacing {
                            Spacing::Linear => r.start + t * (r.stop - r.start),
                            Spacing::Log => (r.start.ln() + t * (r.stop.ln() - r.start.ln())).exp(),
                        }
                    })
                    .collect())
            }
        }
    }
}

fn default_cat_n1() -> f64 {
    10.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityCurves {
    pub photon_numbers: Grid,
    /// Photon ratios at which each family is evaluated.
    pub sigmas: Vec<f64>,
    /// Fixed nonclassical photon number of the even-cat comparison curve.
    #[serde(default = "default_cat_n1")]
    pub cat_n1: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub families: Vec<StateFamily>,
    pub sigma_grid: Grid,
    pub n_total: f64,
    #[serde(default)]
    pub sensitivity: Option<SensitivityCurves>,
}

fn default_s() -> f64 {
    1.0
}

fn default_prefactor() -> f64 {
    1.0
}

fn default_context() -> ResourceContext {
    ResourceContext::Family {
        family: StateFamily::SqueezedVacuum,
        n2_fraction: 0.5,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuncestConfig {
    pub function: BuiltinFunction,
    pub theta: Vec<f64>,
    pub n_total: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_prefactor")]
    pub allocation_prefactor: f64,
    #[serde(default = "default_context")]
    pub context: ResourceContext,
    #[serde(default)]
    pub first_step: FirstStepModel,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}
