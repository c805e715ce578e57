//! Deterministic experiment primitives: single solve trials across the
//! synthesis regimes, Monte-Carlo phase grids, and the 2-D demo.
//!
//! Every random quantity derives from an explicit seed path
//! (master, cell-i, cell-j, trial), so any cell can be reproduced in
//! isolation and results do not depend on thread count or execution order.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use msbd::fourier::{circ_shift_flat, Lattice};
use msbd::io::GridCell;
use msbd::objective::Problem;
use msbd::optimize::{self, Mode, OptimizerConfig, Trace};
use msbd::precond::build_preconditioner;
use msbd::recovery;
use msbd::rng::mix_seed;
use msbd::scalar::{self};
use msbd::synth::{self, GroundTruth, NoiseSpec};
use msbd::{Error, Result};

/// Success thresholds per metric family.
pub const ACCURACY_SUCCESS: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePreset {
    None,
    /// sigma = 0.01·sqrt(n·theta), roughly 40 dB SNR.
    Db40,
    /// sigma = 0.1·sqrt(n·theta), roughly 20 dB SNR.
    Db20,
}

impl NoisePreset {
    pub fn sigma(self, n: usize, theta: f64) -> f64 {
        match self {
            NoisePreset::None => 0.0,
            NoisePreset::Db40 => 0.01 * (n as f64 * theta).sqrt(),
            NoisePreset::Db20 => 0.1 * (n as f64 * theta).sqrt(),
        }
    }
}

/// Synthesis regime of a trial. The success rule follows the metric the
/// corresponding experiment family uses: the h-space sharpness for real
/// circular data, the spectral ratio elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialModel {
    /// Gaussian signal, Bernoulli(theta)-Rademacher channels.
    RealCircular,
    /// Condition-number-controlled signal, Bernoulli-Rademacher channels.
    Conditioned { kappa: f64 },
    /// Complex Gaussian signal, jointly s-sparse complex channels.
    ComplexJoint { s: usize },
    /// Linear convolutions of length-m s-sparse channels, zero-padded.
    LinearSparse { s: usize, m: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialParams {
    pub n: usize,
    pub channels: usize,
    pub theta: f64,
    pub model: TrialModel,
    pub noise: NoisePreset,
    pub step_size: f64,
    pub iters: usize,
    pub mode: Mode,
    pub perturb_radius: f64,
    pub perturb_interval: usize,
    pub grad_tolerance: f64,
}

impl TrialParams {
    pub fn mgd(n: usize, channels: usize, theta: f64) -> Self {
        TrialParams {
            n,
            channels,
            theta,
            model: TrialModel::RealCircular,
            noise: NoisePreset::None,
            step_size: 0.1,
            iters: 100,
            mode: Mode::Mgd,
            perturb_radius: 0.0,
            perturb_interval: 10,
            grad_tolerance: 0.0,
        }
    }

    fn optimizer_config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            mode: self.mode,
            step_size: self.step_size,
            iters: self.iters,
            perturb_radius: self.perturb_radius,
            perturb_interval: self.perturb_interval,
            grad_tolerance: self.grad_tolerance,
            seed,
            record_every: self.iters.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub metric: f64,
    pub success: bool,
    pub seconds: f64,
}

/// Runs one synth → precondition → solve → score trial.
pub fn run_trial(p: &TrialParams, seed: u64) -> Result<TrialOutcome> {
    let start = Instant::now();
    let lat = Lattice::line(p.n)?;
    let outcome = match p.model {
        TrialModel::RealCircular | TrialModel::Conditioned { .. } => {
            let gt = match p.model {
                TrialModel::Conditioned { kappa } => {
                    GroundTruth::conditioned_bernoulli(&lat, p.channels, p.theta, kappa, seed)?
                }
                _ => GroundTruth::gaussian_bernoulli(&lat, p.channels, p.theta, seed)?,
            };
            let noise = NoiseSpec::new(p.noise.sigma(p.n, p.theta))?;
            let obs = synth::observe(&gt, &noise, mix_seed(&[seed, 0xE0]))?;
            let pre = build_preconditioner(&obs, p.theta)?;
            let prob = Problem::new(&obs, &pre)?;
            let h0 = optimize::random_sphere_init::<f64>(&lat, mix_seed(&[seed, 0x10]))?;
            let cfg = p.optimizer_config(mix_seed(&[seed, 0x20]));
            let (h, _) = optimize::run(&prob, h0, &cfg, None)?;
            let metric = recovery::accuracy_metric(&gt.f, &lat, &pre, h.as_slice())?;
            TrialOutcome {
                metric,
                success: metric > ACCURACY_SUCCESS,
                seconds: 0.0,
            }
        }
        TrialModel::ComplexJoint { s } => {
            let gt = GroundTruth::complex_joint_sparse(&lat, p.channels, s, seed)?;
            let theta = s as f64 / p.n as f64;
            let noise = NoiseSpec::new(p.noise.sigma(p.n, theta))?;
            let obs = synth::observe(&gt, &noise, mix_seed(&[seed, 0xE0]))?;
            let pre = build_preconditioner(&obs, theta)?;
            let prob = Problem::new(&obs, &pre)?;
            let h0 = optimize::random_sphere_init::<Complex64>(&lat, mix_seed(&[seed, 0x10]))?;
            let cfg = p.optimizer_config(mix_seed(&[seed, 0x20]));
            let (h, _) = optimize::run(&prob, h0, &cfg, None)?;
            let rec = recovery::recover(&obs, &pre, h.as_slice())?;
            let metric = recovery::spectral_ratio_metric(&gt.f, &rec.f_hat, &lat)?;
            TrialOutcome {
                metric,
                success: metric > recovery::SPECTRAL_RATIO_SUCCESS,
                seconds: 0.0,
            }
        }
        TrialModel::LinearSparse { s, m } => {
            if m > p.n {
                return Err(Error::invalid("m", "need m <= n"));
            }
            let channels_short = synth::gen_sparse_gaussian_channels(m, p.channels, s, seed)?;
            let sig_lat = Lattice::line((p.n - m + 1).max(2))?;
            let f_short = synth::gen_gaussian_signal(&sig_lat, mix_seed(&[seed, 0xF0]));
            let theta = s as f64 / p.n as f64;
            let gt = synth::embed_linear_conv(
                &channels_short,
                &f_short[..p.n - m + 1],
                p.n,
                theta,
                seed,
            )?;
            let noise = NoiseSpec::new(p.noise.sigma(p.n, theta))?;
            let obs = synth::observe(&gt, &noise, mix_seed(&[seed, 0xE0]))?;
            let pre = build_preconditioner(&obs, theta)?;
            let prob = Problem::new(&obs, &pre)?;
            let h0 = optimize::random_sphere_init::<f64>(&lat, mix_seed(&[seed, 0x10]))?;
            let cfg = p.optimizer_config(mix_seed(&[seed, 0x20]));
            let (h, _) = optimize::run(&prob, h0, &cfg, None)?;
            let rec = recovery::recover(&obs, &pre, h.as_slice())?;
            let metric = recovery::spectral_ratio_metric(&gt.f, &rec.f_hat, &lat)?;
            TrialOutcome {
                metric,
                success: metric > recovery::SPECTRAL_RATIO_SUCCESS,
                seconds: 0.0,
            }
        }
    };
    Ok(TrialOutcome {
        seconds: start.elapsed().as_secs_f64(),
        ..outcome
    })
}

/// Success statistics of `trials` seeded repetitions of one parameter point.
pub fn run_trials(p: &TrialParams, master_seed: u64, trials: usize) -> Result<Vec<TrialOutcome>> {
    (0..trials)
        .map(|t| run_trial(p, mix_seed(&[master_seed, t as u64])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    N,
    Channels,
    Theta,
    Kappa,
    S,
    M,
}

impl Axis {
    fn apply(self, p: &mut TrialParams, value: f64) -> Result<()> {
        match self {
            Axis::N => p.n = value as usize,
            Axis::Channels => p.channels = value as usize,
            Axis::Theta => p.theta = value,
            Axis::Kappa => match &mut p.model {
                TrialModel::Conditioned { kappa } => *kappa = value,
                _ => return Err(Error::invalid("axis", "kappa axis needs the conditioned model")),
            },
            Axis::S => match &mut p.model {
                TrialModel::ComplexJoint { s } | TrialModel::LinearSparse { s, .. } => {
                    *s = value as usize
                }
                _ => return Err(Error::invalid("axis", "s axis needs a sparse model")),
            },
            Axis::M => match &mut p.model {
                TrialModel::LinearSparse { m, .. } => *m = value as usize,
                _ => return Err(Error::invalid("axis", "m axis needs the linear model")),
            },
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub axis1: Axis,
    pub axis1_values: Vec<f64>,
    pub axis2: Axis,
    pub axis2_values: Vec<f64>,
    pub base: TrialParams,
    pub trials: usize,
    pub master_seed: u64,
}

/// Runs the full grid, cells and trials in parallel, with order-free
/// seeding: cell (i, j), trial t uses seed mix(master, i, j, t).
pub fn run_phase_grid(spec: &GridSpec) -> Result<Vec<GridCell>> {
    let mut jobs = Vec::new();
    for (i, &a) in spec.axis1_values.iter().enumerate() {
        for (j, &b) in spec.axis2_values.iter().enumerate() {
            for t in 0..spec.trials {
                jobs.push((i, j, t, a, b));
            }
        }
    }
    let outcomes: Vec<Result<(usize, usize, TrialOutcome)>> = jobs
        .par_iter()
        .map(|&(i, j, t, a, b)| {
            let mut p = spec.base.clone();
            spec.axis1.apply(&mut p, a)?;
            spec.axis2.apply(&mut p, b)?;
            let seed = mix_seed(&[spec.master_seed, i as u64, j as u64, t as u64]);
            Ok((i, j, run_trial(&p, seed)?))
        })
        .collect();

    let cols = spec.axis2_values.len();
    let mut cells: Vec<GridCell> = Vec::with_capacity(spec.axis1_values.len() * cols);
    for &a in &spec.axis1_values {
        for &b in &spec.axis2_values {
            cells.push(GridCell {
                axis1: a,
                axis2: b,
                trials: 0,
                successes: 0,
                mean_accuracy: 0.0,
                mean_seconds: 0.0,
            });
        }
    }
    for r in outcomes {
        let (i, j, o) = r?;
        let cell = &mut cells[i * cols + j];
        cell.trials += 1;
        cell.successes += usize::from(o.success);
        cell.mean_accuracy += o.metric;
        cell.mean_seconds += o.seconds;
    }
    for c in &mut cells {
        if c.trials > 0 {
            c.mean_accuracy /= c.trials as f64;
            c.mean_seconds /= c.trials as f64;
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Seeded standard-normal image.
    Gauss,
    /// Deterministic blob-and-stripe test image with a bounded spectral
    /// condition number.
    Blobs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Demo2dParams {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub theta: f64,
    pub step_size: f64,
    pub iters: usize,
    pub seed: u64,
    pub pattern: Pattern,
}

impl Default for Demo2dParams {
    fn default() -> Self {
        Demo2dParams {
            rows: 64,
            cols: 64,
            channels: 256,
            theta: 0.01,
            step_size: 0.05,
            iters: 100,
            seed: 2024,
            pattern: Pattern::Blobs,
        }
    }
}

/// Deterministic image: three Gaussian blobs over a diagonal stripe field,
/// spectrally floored so the signal stays invertible with condition number
/// at most `kappa_cap`.
pub fn builtin_pattern(lat: &Lattice, pattern: Pattern, seed: u64, kappa_cap: f64) -> Result<Vec<f64>> {
    let dims = lat.dims();
    let (rows, cols) = match dims {
        [r, c] => (*r, *c),
        _ => return Err(Error::invalid("lattice", "builtin patterns are 2-D")),
    };
    let raw: Vec<f64> = match pattern {
        Pattern::Gauss => synth::gen_gaussian_signal(lat, seed),
        Pattern::Blobs => {
            let mut img = vec![0.0_f64; rows * cols];
            let blobs = [
                (0.3_f64, 0.35_f64, 0.12_f64, 1.0_f64),
                (0.65, 0.6, 0.18, -0.8),
                (0.75, 0.25, 0.08, 0.6),
            ];
            for r in 0..rows {
                for c in 0..cols {
                    let y = r as f64 / rows as f64;
                    let x = c as f64 / cols as f64;
                    let mut v = 0.25 * ((x * 12.0 + y * 5.0) * std::f64::consts::PI).sin();
                    for (by, bx, w, amp) in blobs {
                        let d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                        v += amp * (-d2 / (2.0 * w * w)).exp();
                    }
                    img[r * cols + c] = v;
                }
            }
            img
        }
    };
    // clamp spectral magnitudes from below, preserving phases
    let mut spec = msbd::fourier::dft(&raw, lat)?;
    let max = spec.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let floor = max / kappa_cap;
    for v in spec.values.iter_mut() {
        let m = v.norm();
        if m < floor {
            *v = if m == 0.0 {
                Complex64::new(floor, 0.0)
            } else {
                *v * (floor / m)
            };
        }
    }
    // re-enforce conjugate symmetry after flooring zero bins
    let f = msbd::fourier::idft(&spec);
    Ok(f.into_iter().map(|v| v.re).collect())
}

#[derive(Debug)]
pub struct Demo2dOutput {
    pub gt: GroundTruth<f64>,
    pub observed_first: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub corrected: Vec<f64>,
    pub trace: Trace,
    pub final_accuracy: f64,
}

/// 2-D blind deconvolution demo: synthesizes sparse channels for the given
/// (or builtin) image, solves with MGD, and sign/shift-corrects the result.
pub fn run_demo2d(p: &Demo2dParams, image: Option<Vec<f64>>) -> Result<Demo2dOutput> {
    let lat = Lattice::grid(p.rows, p.cols)?;
    let f = match image {
        Some(img) => img,
        None => builtin_pattern(&lat, p.pattern, p.seed, 64.0)?,
    };
    let gt = GroundTruth::with_signal(f, &lat, p.channels, p.theta, p.seed)?;
    let obs = synth::observe(&gt, &NoiseSpec::none(), mix_seed(&[p.seed, 0xE0]))?;
    let pre = build_preconditioner(&obs, p.theta)?;
    let prob = Problem::new(&obs, &pre)?;
    let h0 = optimize::random_sphere_init::<f64>(&lat, mix_seed(&[p.seed, 0x10]))?;
    let mut cfg = OptimizerConfig::mgd(p.step_size, p.iters);
    cfg.seed = mix_seed(&[p.seed, 0x20]);
    let probe = |h: &[f64]| recovery::accuracy_metric(&gt.f, &lat, &pre, h).unwrap_or(f64::NAN);
    let (h, trace) = optimize::run(&prob, h0, &cfg, Some(&probe))?;

    let rec = recovery::recover(&obs, &pre, h.as_slice())?;
    let alignment = recovery::align(&gt, &rec)?;
    let corrected = scalar::scale(
        &circ_shift_flat(&rec.f_hat, &lat, alignment.shift as i64)?,
        alignment.sign,
    );
    let final_accuracy = trace
        .final_record()
        .and_then(|r| r.accuracy)
        .unwrap_or(f64::NAN);
    Ok(Demo2dOutput {
        observed_first: obs.y[0].clone(),
        f_hat: rec.f_hat,
        corrected,
        trace,
        final_accuracy,
        gt,
    })
}

/// First trace time at which the accuracy crosses the given level, if any.
pub fn accuracy_crossing(trace: &Trace, level: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| r.accuracy.map(|a| a >= level).unwrap_or(false))
        .map(|r| r.t)
}
