//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sigmahom::algebra::AlgebraSpec;
use sigmahom::heat::{CellGrid, HeatConfig, HeatConstants, HeatGrid};
use sigmahom::neural_field::{WcDiscretization, WilsonCowanConfig};
use sigmahom::registry::{Density, Flux, MemoryKernel, Profile, TorusFunction, ZerothOrder};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MeanValue,
    SigmaCheck,
    ConvolutionCheck,
    WilsonCowan,
    NonlocalHeat,
    CellSolve,
}

impl Experiment {
    pub fn block_name(self) -> &'static str {
        match self {
            Experiment::MeanValue => "mean_value",
            Experiment::SigmaCheck => "sigma_check",
            Experiment::ConvolutionCheck => "convolution_check",
            Experiment::WilsonCowan => "wilson_cowan",
            Experiment::NonlocalHeat => "nonlocal_heat",
            Experiment::CellSolve => "cell_solve",
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mean_value: Option<MeanValueBlock>,
    #[serde(default)]
    pub sigma_check: Option<SigmaCheckBlock>,
    #[serde(default)]
    pub convolution_check: Option<ConvolutionCheckBlock>,
    #[serde(default)]
    pub wilson_cowan: Option<WilsonCowanBlock>,
    #[serde(default)]
    pub nonlocal_heat: Option<HeatBlock>,
    #[serde(default)]
    pub cell_solve: Option<CellBlock>,
}

fn one_e3() -> f64 {
    1e-3
}

fn one_e2() -> f64 {
    1e-2
}

fn sigma_tol() -> f64 {
    sigmahom::sigma::DEFAULT_SIGMA_TOL
}

fn unit_mode() -> u32 {
    1
}

fn four() -> usize {
    4
}

fn radii() -> Vec<f64> {
    sigmahom::algebra::default_radii()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanValueBlock {
    pub algebra: AlgebraSpec,
    pub function: TorusFunction,
    #[serde(default = "radii")]
    pub radii: Vec<f64>,
    #[serde(default = "one_e3")]
    pub tol: f64,
    /// Torus grid for the Haar average; 256 points per axis when absent.
    #[serde(default)]
    pub torus_dims: Option<Vec<usize>>,
    /// Seeded random trigonometric polynomials compared the same way.
    #[serde(default)]
    pub random_polynomials: usize,
}

fn limit_nodes() -> usize {
    65
}

fn torus_32() -> Vec<usize> {
    vec![32]
}

fn macro_nodes() -> usize {
    4097
}

/// Translations of `u_ε(x) = sin(2π·mode·x/ε)` on `(0, 1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaCheckBlock {
    #[serde(default = "unit_mode")]
    pub mode: u32,
    pub eps: Vec<f64>,
    pub micro_shift: f64,
    pub macro_shift: f64,
    /// Schedule for the macro shift; `frac(macro_shift/ε)` must be constant.
    pub macro_eps: Vec<f64>,
    #[serde(default = "macro_nodes")]
    pub macro_nodes: usize,
    #[serde(default = "limit_nodes")]
    pub limit_nodes: usize,
    #[serde(default = "torus_32")]
    pub torus_dims: Vec<usize>,
    #[serde(default = "four")]
    pub bumps: usize,
    #[serde(default = "four")]
    pub modes: usize,
    /// Absolute bound on the final max residual.
    #[serde(default = "one_e2")]
    pub residual_tol: f64,
}

fn pairs() -> usize {
    1000
}

fn young_pairs() -> usize {
    100
}

fn young_n() -> usize {
    64
}

fn exponents() -> [f64; 3] {
    [2.0, 1.0, 2.0]
}

/// Group and Young checks, then `u_ε ∗ v_ε` with `u_ε = g·sin(2π·mode·x/ε)`
/// on `(0, 1)` and `v_ε = h·sin(2π·mode·x/ε)` on a centered box.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionCheckBlock {
    #[serde(default = "pairs")]
    pub homomorphism_pairs: usize,
    #[serde(default = "young_pairs")]
    pub young_pairs: usize,
    #[serde(default = "young_n")]
    pub young_n: usize,
    pub eps: Vec<f64>,
    pub g: Profile,
    pub h: Profile,
    #[serde(default = "unit_mode")]
    pub mode: u32,
    /// Power of two; the field grid spans `[0, 1]`.
    pub nodes: usize,
    /// Power of two; the kernel grid is centered at the origin with the
    /// field spacing.
    pub kernel_nodes: usize,
    #[serde(default = "torus_32")]
    pub torus_dims: Vec<usize>,
    #[serde(default = "four")]
    pub bumps: usize,
    #[serde(default = "four")]
    pub modes: usize,
    #[serde(default = "exponents")]
    pub exponents: [f64; 3],
    #[serde(default = "sigma_tol")]
    pub tol: f64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WilsonCowanBlock {
    #[serde(flatten)]
    pub problem: WilsonCowanConfig,
    #[serde(flatten)]
    pub disc: WcDiscretization,
    pub eps_list: Vec<f64>,
    #[serde(default = "torus_32")]
    pub torus_dims: Vec<usize>,
    #[serde(default = "sigma_tol")]
    pub tol: f64,
    /// Run the homogenized solve and the Σ comparison.
    #[serde(default = "yes")]
    pub compare: bool,
}

fn lambda_points() -> usize {
    33
}

fn snapshots() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorBlock {
    /// Nodes per axis of the coarse `(x, t)` grid of the gradient check.
    pub coarse: usize,
    /// Torus nodes of the gradient check.
    pub torus: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatBlock {
    #[serde(flatten)]
    pub problem: HeatConfig,
    pub eps_list: Vec<f64>,
    pub grid: HeatGrid,
    /// Explicit `λ` axes; a presolve picks a symmetric axis when absent.
    #[serde(default)]
    pub lambda_axes: Option<Vec<Vec<f64>>>,
    #[serde(default = "lambda_points")]
    pub lambda_points: usize,
    pub cell_grid: CellGrid,
    #[serde(default)]
    pub corrector: Option<CorrectorBlock>,
    #[serde(default = "snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub plot: bool,
    #[serde(default = "sigma_tol")]
    pub tol: f64,
}

fn periodic_tau() -> AlgebraSpec {
    AlgebraSpec::periodic(1).expect("one-dimensional periodic algebra")
}

fn zero_zeroth() -> ZerothOrder {
    ZerothOrder::Zero
}

fn zero_memory() -> MemoryKernel {
    MemoryKernel::Zero
}

/// Coefficients of a cell-problem run; no initial data or horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellBlock {
    pub algebra: AlgebraSpec,
    #[serde(default = "periodic_tau")]
    pub algebra_tau: AlgebraSpec,
    pub density: Density,
    pub flux: Flux,
    #[serde(default = "zero_zeroth")]
    pub zeroth: ZerothOrder,
    #[serde(default = "zero_memory")]
    pub memory: MemoryKernel,
    pub constants: HeatConstants,
    pub lambda_axes: Vec<Vec<f64>>,
    pub cell_grid: CellGrid,
}

impl CellBlock {
    pub fn heat_config(&self) -> HeatConfig {
        HeatConfig {
            algebra: self.algebra.clone(),
            algebra_tau: self.algebra_tau.clone(),
            density: self.density.clone(),
            flux: self.flux.clone(),
            zeroth: self.zeroth.clone(),
            memory: self.memory.clone(),
            memory_horizon: None,
            source: Profile::Zero,
            initial: Profile::Zero,
            horizon: 1.0,
            constants: self.constants,
        }
    }
}

impl ExperimentConfig {
    /// Parses a config and checks that exactly the block named by
    /// `experiment` is present.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        let present: Vec<&str> = [
            ("mean_value", cfg.mean_value.is_some()),
            ("sigma_check", cfg.sigma_check.is_some()),
            ("convolution_check", cfg.convolution_check.is_some()),
            ("wilson_cowan", cfg.wilson_cowan.is_some()),
            ("nonlocal_heat", cfg.nonlocal_heat.is_some()),
            ("cell_solve", cfg.cell_solve.is_some()),
        ]
        .iter()
        .filter(|(_, p)| *p)
        .map(|(n, _)| *n)
        .collect();
        let want = cfg.experiment.block_name();
        if present != [want] {
            return Err(CliError::Parse(format!(
                "experiment {want:?} needs exactly one block \"{want}\", found {present:?}"
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(text)?, bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_mean_value_config() {
        let cfg = ExperimentConfig::parse(
            r#"{"experiment":"mean-value","mean_value":{
                "algebra":{"kind":"periodic","dims":1},
                "function":{"name":"sin-squared","params":{}}}}"#,
        )
        .unwrap();
        let block = cfg.mean_value.unwrap();
        assert_eq!(block.tol, 1e-3);
        assert_eq!(block.radii.len(), 11);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn block_must_match_experiment() {
        let wrong = r#"{"experiment":"sigma-check","mean_value":{
            "algebra":{"kind":"periodic","dims":1},"function":{"name":"sin-squared","params":{}}}}"#;
        assert!(matches!(ExperimentConfig::parse(wrong), Err(CliError::Parse(_))));
        assert!(matches!(ExperimentConfig::parse(r#"{"experiment":"cell-solve"}"#), Err(CliError::Parse(_))));
        assert!(matches!(ExperimentConfig::parse(r#"{"experiment":"fourier"}"#), Err(CliError::Parse(_))));
    }

    #[test]
    fn unknown_registry_name_is_a_parse_error() {
        let bad = r#"{"experiment":"mean-value","mean_value":{
            "algebra":{"kind":"periodic","dims":1},"function":{"name":"cos-cubed"}}}"#;
        assert!(matches!(ExperimentConfig::parse(bad), Err(CliError::Parse(_))));
    }
}
