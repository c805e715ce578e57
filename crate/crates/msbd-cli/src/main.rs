//! `msbd`: experiment CLI for multichannel sparse blind deconvolution.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use msbd::fourier::Lattice;
use msbd::io;
use msbd::objective::Problem;
use msbd::optimize::{self, Mode, OptimizerConfig};
use msbd::precond::build_preconditioner;
use msbd::recovery;
use msbd::rng::mix_seed;
use msbd::scalar::Scalar;
use msbd::synth::{self, GroundTruth, NoiseSpec, Observations};

use msbd_cli::config::{self, Config, Demo2dConfig, SolveConfig, SynthConfig, SynthModel};
use msbd_cli::experiments::{self, Demo2dParams, GridSpec, Pattern};
use msbd_cli::verify::{self, VerifyParams};

#[derive(Parser)]
#[command(
    name = "msbd",
    about = "Multichannel sparse blind deconvolution experiments",
    version
)]
struct Cli {
    /// Worker threads for Monte-Carlo grids (or env MSBD_THREADS); results
    /// do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth instance and its observations.
    Synth(SynthArgs),
    /// Solve an instance file; writes recovery and trace outputs.
    Solve(SolveArgs),
    /// Monte-Carlo success-rate grid over two parameter axes.
    Phase(PhaseArgs),
    /// 2-D blind image deconvolution demo.
    Demo2d(Demo2dArgs),
    /// Run the property-verification battery; nonzero exit on violation.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON config with {"cmd": "synth", ...}; flags override fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Rows,cols for a 2-D instance, e.g. --dims 64,64.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// gaussian_bernoulli | conditioned_bernoulli | complex_joint_sparse | linear_sparse
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    instance: Option<PathBuf>,
    /// mgd | pmgd
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// PMGD preset, one of D0.04c0.1, D0.08c0.2, D0.2c0.5, D0.4c1.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Demo2dArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// PGM (P5) image for the unknown signal.
    #[arg(long)]
    image: Option<PathBuf>,
    /// gauss | blobs
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    partition_samples: Option<usize>,
    #[arg(long)]
    mc_channels: Option<usize>,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("MSBD_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")?;

    match cli.cmd {
        Command::Synth(args) => cmd_synth(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Phase(args) => pool.install(|| cmd_phase(args)),
        Command::Demo2d(args) => cmd_demo2d(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn load_expected<T>(path: Option<&Path>, pick: impl FnOnce(Config) -> Option<T>) -> anyhow::Result<Option<T>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let cfg = config::load_config(p)?;
            match pick(cfg) {
                Some(t) => Ok(Some(t)),
                None => bail!("config file {} holds a different cmd", p.display()),
            }
        }
    }
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let mut cfg = load_expected(args.config.as_deref(), |c| match c {
        Config::Synth(s) => Some(s),
        _ => None,
    })?
    .unwrap_or(SynthConfig {
        dims: vec![128],
        channels: 256,
        model: SynthModel::GaussianBernoulli,
        theta: 0.1,
        kappa: None,
        s: None,
        m: None,
        sigma: 0.0,
        seed: 0,
        out: "instance.msbd".into(),
    });
    if let Some(n) = args.n {
        cfg.dims = vec![n];
    }
    if let Some(dims) = args.dims {
        cfg.dims = dims;
    }
    if let Some(v) = args.channels {
        cfg.channels = v;
    }
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
    if let Some(v) = args.kappa {
        cfg.kappa = Some(v);
    }
    if let Some(v) = args.s {
        cfg.s = Some(v);
    }
    if let Some(v) = args.m {
        cfg.m = Some(v);
    }
    if let Some(v) = args.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.model {
        cfg.model = serde_json::from_value(serde_json::Value::String(v))?;
    }
    if let Some(v) = args.out {
        cfg.out = v.display().to_string();
    }

    if !matches!(cfg.model, SynthModel::ComplexJointSparse | SynthModel::LinearSparse)
        && !(cfg.theta > 0.0 && cfg.theta < 1.0)
    {
        bail!("invalid parameter `theta`: need 0 < theta < 1, got {}", cfg.theta);
    }
    let lat = Lattice::from_dims(&cfg.dims)?;
    let noise = NoiseSpec::new(cfg.sigma)?;
    let echo = serde_json::to_value(&Config::Synth(cfg.clone()))?;
    let out = PathBuf::from(&cfg.out);

    match cfg.model {
        SynthModel::GaussianBernoulli => {
            let gt = GroundTruth::gaussian_bernoulli(&lat, cfg.channels, cfg.theta, cfg.seed)?;
            let obs = synth::observe(&gt, &noise, mix_seed(&[cfg.seed, 0xE0]))?;
            io::write_instance(&out, &gt, &obs, &noise, Some(echo))?;
        }
        SynthModel::ConditionedBernoulli => {
            let kappa = cfg.kappa.context("conditioned model needs --kappa")?;
            let gt =
                GroundTruth::conditioned_bernoulli(&lat, cfg.channels, cfg.theta, kappa, cfg.seed)?;
            let obs = synth::observe(&gt, &noise, mix_seed(&[cfg.seed, 0xE0]))?;
            io::write_instance(&out, &gt, &obs, &noise, Some(echo))?;
        }
        SynthModel::ComplexJointSparse => {
            let s = cfg.s.context("complex_joint_sparse model needs --s")?;
            let gt = GroundTruth::complex_joint_sparse(&lat, cfg.channels, s, cfg.seed)?;
            let obs = synth::observe(&gt, &noise, mix_seed(&[cfg.seed, 0xE0]))?;
            io::write_instance(&out, &gt, &obs, &noise, Some(echo))?;
        }
        SynthModel::LinearSparse => {
            let s = cfg.s.context("linear_sparse model needs --s")?;
            let m = cfg.m.context("linear_sparse model needs --m")?;
            let n = lat.n();
            let channels_short = synth::gen_sparse_gaussian_channels(m, cfg.channels, s, cfg.seed)?;
            let sig_lat = Lattice::line((n - m + 1).max(2))?;
            let f_short = synth::gen_gaussian_signal(&sig_lat, mix_seed(&[cfg.seed, 0xF0]));
            let gt = synth::embed_linear_conv(
                &channels_short,
                &f_short[..n - m + 1],
                n,
                s as f64 / n as f64,
                cfg.seed,
            )?;
            let obs = synth::observe(&gt, &noise, mix_seed(&[cfg.seed, 0xE0]))?;
            io::write_instance(&out, &gt, &obs, &noise, Some(echo))?;
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn solve_loaded<S: Scalar>(
    gt: &GroundTruth<S>,
    obs: &Observations<S>,
    cfg: &SolveConfig,
    echo: serde_json::Value,
) -> anyhow::Result<()> {
    let theta = cfg.theta.unwrap_or_else(|| {
        if obs.theta_hint > 0.0 && obs.theta_hint < 1.0 {
            obs.theta_hint
        } else {
            synth::estimate_theta(&obs.y)
        }
    });
    let pre = build_preconditioner(obs, theta)?;
    let prob = Problem::new(obs, &pre)?;
    let h0 = optimize::random_sphere_init::<S>(&obs.lat, mix_seed(&[cfg.seed, 0x10]))?;

    let (radius, tolerance) = match (&cfg.preset, cfg.perturb_radius, cfg.grad_tolerance) {
        (Some(name), _, _) => optimize::pmgd_preset(name)
            .with_context(|| format!("unknown PMGD preset `{name}`"))?,
        (None, r, t) => (r.unwrap_or(0.0), t.unwrap_or(0.0)),
    };
    let mode = cfg.mode;
    let run_cfg = OptimizerConfig {
        mode,
        step_size: cfg.gamma,
        iters: cfg.iters,
        perturb_radius: radius,
        perturb_interval: cfg.perturb_interval,
        grad_tolerance: tolerance,
        seed: mix_seed(&[cfg.seed, 0x20]),
        record_every: cfg.record_every,
    };

    let lat = obs.lat.clone();
    let f = gt.f.clone();
    let pre_probe = pre.clone();
    let probe = move |h: &[S]| {
        recovery::accuracy_metric(&f, &lat, &pre_probe, h).unwrap_or(f64::NAN)
    };
    let (h, trace) = optimize::run(&prob, h0, &run_cfg, Some(&probe))?;

    let rec = recovery::recover(obs, &pre, h.as_slice())?;
    let out = PathBuf::from(&cfg.out);
    let rec_path = out.with_extension("recovery.msbd");
    let trace_path = out.with_extension("trace.csv");
    io::write_recovery(&rec_path, &rec, theta, cfg.seed, Some(echo.clone()))?;
    io::write_trace_csv(&trace_path, &trace)?;
    io::write_meta_json(&trace_path, &echo)?;

    let final_acc = trace.final_record().and_then(|r| r.accuracy).unwrap_or(f64::NAN);
    println!(
        "final accuracy {final_acc:.6}  reconstruction residual {:.3e}",
        rec.reconstruction_residual
    );
    println!("wrote {} and {}", rec_path.display(), trace_path.display());
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> anyhow::Result<()> {
    let mut cfg = load_expected(args.config.as_deref(), |c| match c {
        Config::Solve(s) => Some(s),
        _ => None,
    })?
    .unwrap_or(SolveConfig {
        instance: String::new(),
        mode: Mode::Mgd,
        gamma: 0.1,
        iters: 100,
        preset: None,
        perturb_radius: None,
        perturb_interval: 10,
        grad_tolerance: None,
        theta: None,
        seed: 0,
        record_every: 1,
        out: "solve_out".into(),
    });
    if let Some(v) = args.instance {
        cfg.instance = v.display().to_string();
    }
    if let Some(v) = args.mode {
        cfg.mode = match v.as_str() {
            "mgd" => Mode::Mgd,
            "pmgd" => Mode::Pmgd,
            other => bail!("unknown mode `{other}`"),
        };
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.iters {
        cfg.iters = v;
    }
    if let Some(v) = args.preset {
        cfg.preset = Some(v);
        cfg.mode = Mode::Pmgd;
    }
    if let Some(v) = args.theta {
        cfg.theta = Some(v);
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.record_every {
        cfg.record_every = v;
    }
    if let Some(v) = args.out {
        cfg.out = v.display().to_string();
    }
    if cfg.instance.is_empty() {
        bail!("solve needs --instance (or a config file naming one)");
    }

    let echo = serde_json::to_value(&Config::Solve(cfg.clone()))?;
    match io::load_instance(Path::new(&cfg.instance))? {
        io::LoadedInstance::Real(data) => solve_loaded(&data.gt, &data.obs, &cfg, echo),
        io::LoadedInstance::Complex(data) => solve_loaded(&data.gt, &data.obs, &cfg, echo),
    }
}

fn cmd_phase(args: PhaseArgs) -> anyhow::Result<()> {
    let mut cfg = load_expected(args.config.as_deref(), |c| match c {
        Config::Phase(p) => Some(p),
        _ => None,
    })?
    .context("phase needs --config with a phase document")?;
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.out {
        cfg.out = v.display().to_string();
    }

    let mut base = experiments::TrialParams::mgd(cfg.n, cfg.channels, cfg.theta);
    base.model = cfg.trial_model()?;
    base.noise = cfg.noise.unwrap_or(experiments::NoisePreset::None);
    base.step_size = cfg.gamma;
    base.iters = cfg.iters;
    let spec = GridSpec {
        axis1: cfg.axis1,
        axis1_values: cfg.axis1_values.clone(),
        axis2: cfg.axis2,
        axis2_values: cfg.axis2_values.clone(),
        base,
        trials: cfg.trials,
        master_seed: cfg.seed,
    };
    let cells = experiments::run_phase_grid(&spec)?;
    let out = PathBuf::from(&cfg.out);
    io::write_grid_csv(&out, &cells)?;
    io::write_meta_json(&out, &serde_json::to_value(&Config::Phase(cfg))?)?;
    println!("wrote {} ({} cells)", out.display(), cells.len());
    Ok(())
}

/// Minimal binary-PGM (P5) reader for demo input images.
fn read_pgm(path: &Path) -> anyhow::Result<(Vec<f64>, usize, usize)> {
    let bytes = std::fs::read(path)?;
    let header_text = String::from_utf8_lossy(&bytes[..bytes.len().min(64)]).to_string();
    let mut fields = header_text
        .split_whitespace()
        .take(4)
        .map(str::to_string)
        .collect::<Vec<_>>();
    if fields.len() < 4 || fields[0] != "P5" {
        bail!("{} is not a binary PGM (P5) file", path.display());
    }
    let cols: usize = fields.remove(1).parse()?;
    let rows: usize = fields.remove(1).parse()?;
    let data = &bytes[bytes.len() - rows * cols..];
    Ok((
        data.iter().map(|&b| b as f64 / 255.0).collect(),
        rows,
        cols,
    ))
}

fn cmd_demo2d(args: Demo2dArgs) -> anyhow::Result<()> {
    let mut cfg = load_expected(args.config.as_deref(), |c| match c {
        Config::Demo2d(d) => Some(d),
        _ => None,
    })?
    .unwrap_or(Demo2dConfig {
        rows: 64,
        cols: 64,
        channels: 256,
        theta: 0.01,
        gamma: 0.05,
        iters: 100,
        seed: 2024,
        image: None,
        pattern: Pattern::Blobs,
        out_dir: "demo2d_out".into(),
    });
    if let Some(v) = args.image {
        cfg.image = Some(v.display().to_string());
    }
    if let Some(v) = args.pattern {
        cfg.pattern = serde_json::from_value(serde_json::Value::String(v))?;
    }
    if let Some(v) = args.channels {
        cfg.channels = v;
    }
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.iters {
        cfg.iters = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.out_dir {
        cfg.out_dir = v.display().to_string();
    }

    let mut params = Demo2dParams {
        rows: cfg.rows,
        cols: cfg.cols,
        channels: cfg.channels,
        theta: cfg.theta,
        step_size: cfg.gamma,
        iters: cfg.iters,
        seed: cfg.seed,
        pattern: cfg.pattern,
    };
    let image = match &cfg.image {
        None => None,
        Some(p) => {
            let (img, rows, cols) = read_pgm(Path::new(p))?;
            if rows > 128 || cols > 128 {
                bail!("demo images are capped at 128x128, got {rows}x{cols}");
            }
            params.rows = rows;
            params.cols = cols;
            Some(img)
        }
    };

    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let result = experiments::run_demo2d(&params, image)?;
    let lat = Lattice::grid(params.rows, params.cols)?;
    io::write_pgm(&out_dir.join("true.pgm"), &result.gt.f, &lat)?;
    io::write_pgm(&out_dir.join("observed.pgm"), &result.observed_first, &lat)?;
    io::write_pgm(&out_dir.join("recovered.pgm"), &result.f_hat, &lat)?;
    io::write_pgm(&out_dir.join("corrected.pgm"), &result.corrected, &lat)?;
    io::write_trace_csv(&out_dir.join("trace.csv"), &result.trace)?;
    io::write_meta_json(
        &out_dir.join("trace.csv"),
        &serde_json::to_value(&Config::Demo2d(cfg))?,
    )?;
    println!(
        "final accuracy {:.6}; 0.5-crossing at t = {:?}",
        result.final_accuracy,
        experiments::accuracy_crossing(&result.trace, 0.5)
    );
    println!("wrote images and trace under {}", out_dir.display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<()> {
    let mut cfg = load_expected(args.config.as_deref(), |c| match c {
        Config::Verify(v) => Some(v),
        _ => None,
    })?
    .unwrap_or_default();
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.partition_samples {
        cfg.partition_samples = v;
    }
    if let Some(v) = args.mc_channels {
        cfg.mc_channels = v;
    }
    let params = VerifyParams {
        seed: cfg.seed,
        partition_samples: cfg.partition_samples,
        mc_channels: cfg.mc_channels,
    };
    let results = verify::run_battery(&params)?;
    let mut failed = 0;
    for r in &results {
        println!(
            "[{}] {:<28} margin {:+.3e}  {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.margin,
            r.details
        );
        if !r.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} verification checks failed");
    }
    println!("all {} checks passed", results.len());
    Ok(())
}
