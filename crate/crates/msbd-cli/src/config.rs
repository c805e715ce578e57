//! JSON configuration for the CLI: one document per command carrying a
//! `"cmd"` discriminator. Command-line flags override config-file fields,
//! and the effective configuration is echoed into every output's metadata.

use serde::{Deserialize, Serialize};

use crate::experiments::{Axis, NoisePreset, Pattern, TrialModel};
use msbd::optimize::Mode;
use msbd::scalar::Field;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
pub enum Config {
    Synth(SynthConfig),
    Solve(SolveConfig),
    Phase(PhaseConfig),
    Demo2d(Demo2dConfig),
    Verify(VerifyConfig),
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthModel {
    GaussianBernoulli,
    ConditionedBernoulli,
    ComplexJointSparse,
    LinearSparse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    /// 1 entry for 1-D, 2 for 2-D.
    pub dims: Vec<usize>,
    pub channels: usize,
    pub model: SynthModel,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub s: Option<usize>,
    /// Channel length before zero-padding (linear model).
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub sigma: f64,
    pub seed: u64,
    pub out: String,
}

impl SynthConfig {
    pub fn field(&self) -> Field {
        match self.model {
            SynthModel::ComplexJointSparse => Field::Complex,
            _ => Field::Real,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    pub instance: String,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Named perturbation preset (PMGD), e.g. "D0.2c0.5".
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub perturb_radius: Option<f64>,
    #[serde(default = "default_interval")]
    pub perturb_interval: usize,
    #[serde(default)]
    pub grad_tolerance: Option<f64>,
    /// Overrides the instance's theta for preconditioning; the fallback
    /// estimate is used when the instance theta is unusable.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub record_every: usize,
    /// Output prefix; writes `<prefix>.recovery.msbd` and `<prefix>.trace.csv`.
    pub out: String,
}

fn default_mode() -> Mode {
    Mode::Mgd
}
fn default_gamma() -> f64 {
    0.1
}
fn default_iters() -> usize {
    100
}
fn default_interval() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub model: PhaseModel,
    pub axis1: Axis,
    pub axis1_values: Vec<f64>,
    pub axis2: Axis,
    pub axis2_values: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub noise: Option<NoisePreset>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub out: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModel {
    RealCircular,
    Conditioned,
    ComplexJoint,
    LinearSparse,
}

fn default_n() -> usize {
    128
}
fn default_channels() -> usize {
    256
}
fn default_theta() -> f64 {
    0.1
}
fn default_trials() -> usize {
    20
}

impl PhaseConfig {
    pub fn trial_model(&self) -> msbd::Result<TrialModel> {
        Ok(match self.model {
            PhaseModel::RealCircular => TrialModel::RealCircular,
            PhaseModel::Conditioned => TrialModel::Conditioned {
                kappa: self.kappa.unwrap_or(1.0),
            },
            PhaseModel::ComplexJoint => TrialModel::ComplexJoint {
                s: self
                    .s
                    .ok_or_else(|| msbd::Error::invalid("s", "complex_joint model needs s"))?,
            },
            PhaseModel::LinearSparse => TrialModel::LinearSparse {
                s: self
                    .s
                    .ok_or_else(|| msbd::Error::invalid("s", "linear_sparse model needs s"))?,
                m: self
                    .m
                    .ok_or_else(|| msbd::Error::invalid("m", "linear_sparse model needs m"))?,
            },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Demo2dConfig {
    #[serde(default = "default_demo_side")]
    pub rows: usize,
    #[serde(default = "default_demo_side")]
    pub cols: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_demo_theta")]
    pub theta: f64,
    #[serde(default = "default_demo_gamma")]
    pub gamma: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_demo_seed")]
    pub seed: u64,
    /// PGM (P5) image to deconvolve; the builtin pattern when absent.
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default = "default_pattern")]
    pub pattern: Pattern,
    pub out_dir: String,
}

fn default_demo_side() -> usize {
    64
}
fn default_demo_theta() -> f64 {
    0.01
}
fn default_demo_gamma() -> f64 {
    0.05
}
fn default_demo_seed() -> u64 {
    2024
}
fn default_pattern() -> Pattern {
    Pattern::Blobs
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyConfig {
    #[serde(default = "default_verify_seed")]
    pub seed: u64,
    #[serde(default = "default_partition_samples")]
    pub partition_samples: usize,
    #[serde(default = "default_mc_channels")]
    pub mc_channels: usize,
}

fn default_verify_seed() -> u64 {
    39
}
fn default_partition_samples() -> usize {
    10_000
}
fn default_mc_channels() -> usize {
    100_000
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: default_verify_seed(),
            partition_samples: default_partition_samples(),
            mc_channels: default_mc_channels(),
        }
    }
}

pub fn load_config(path: &std::path::Path) -> anyhow::Result<Config> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
