//! Manifold gradient descent over the unit sphere, plain and perturbed.
//!
//! Each step retracts `h - gamma·rgrad` back onto the sphere by
//! renormalization. The perturbed variant additionally kicks the iterate by
//! a uniform tangent-sphere vector whenever the gradient falls below the
//! tolerance and the previous kick is old enough, which bounds the time
//! spent near strict saddle points.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fourier::Lattice;
use crate::objective::{Evaluation, Problem, SpherePoint};
use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mgd,
    Pmgd,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct OptimizerConfig {
    pub mode: Mode,
    /// Step size gamma.
    pub step_size: f64,
    /// Iteration count T.
    pub iters: usize,
    /// Perturbation radius (PMGD only).
    pub perturb_radius: f64,
    /// Minimum iterations between perturbations (PMGD only).
    pub perturb_interval: usize,
    /// Gradient-norm tolerance that triggers perturbations (PMGD only).
    pub grad_tolerance: f64,
    pub seed: u64,
    /// Trace stride; every `record_every`-th iterate is recorded, plus the
    /// final one.
    pub record_every: usize,
}

impl OptimizerConfig {
    pub fn mgd(step_size: f64, iters: usize) -> Self {
        OptimizerConfig {
            mode: Mode::Mgd,
            step_size,
            iters,
            perturb_radius: 0.0,
            perturb_interval: 1,
            grad_tolerance: 0.0,
            seed: 0,
            record_every: 1,
        }
    }

    pub fn pmgd(
        step_size: f64,
        iters: usize,
        perturb_radius: f64,
        perturb_interval: usize,
        grad_tolerance: f64,
        seed: u64,
    ) -> Self {
        OptimizerConfig {
            mode: Mode::Pmgd,
            step_size,
            iters,
            perturb_radius,
            perturb_interval,
            grad_tolerance,
            seed,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::invalid("step_size", format!("need gamma > 0, got {}", self.step_size)));
        }
        if self.mode == Mode::Pmgd {
            if !(self.perturb_radius >= 0.0 && self.perturb_radius < 1.0) {
                return Err(Error::invalid(
                    "perturb_radius",
                    format!("need 0 <= D < 1, got {}", self.perturb_radius),
                ));
            }
            if self.perturb_interval < 1 {
                return Err(Error::invalid("perturb_interval", "need T_interval >= 1"));
            }
            if !(self.grad_tolerance >= 0.0) {
                return Err(Error::invalid("grad_tolerance", "need c >= 0"));
            }
        }
        if self.record_every < 1 {
            return Err(Error::invalid("record_every", "need stride >= 1"));
        }
        Ok(())
    }
}

/// Perturbation presets used by the parameter-comparison experiment, with
/// interval 10: (radius, tolerance).
pub const PMGD_PRESETS: [(&str, f64, f64); 4] = [
    ("D0.04c0.1", 0.04, 0.1),
    ("D0.08c0.2", 0.08, 0.2),
    ("D0.2c0.5", 0.2, 0.5),
    ("D0.4c1", 0.4, 1.0),
];

pub fn pmgd_preset(name: &str) -> Option<(f64, f64)> {
    PMGD_PRESETS
        .iter()
        .find(|(preset, _, _)| *preset == name)
        .map(|(_, d, c)| (*d, *c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// True when a perturbation fired since the previous record (inclusive
    /// of this iteration).
    pub perturbed: bool,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn perturbation_count(&self) -> usize {
        self.records.iter().filter(|r| r.perturbed).count()
    }
}

/// One retraction step: h <- (h - gamma·rgrad) / ‖·‖.
pub fn retract_step<S: Scalar>(ev: &Evaluation<S>, gamma: f64) -> SpherePoint<S> {
    let stepped = scalar::axpy(ev.iterate(), -gamma, &ev.rgrad);
    let n = scalar::norm(&stepped);
    // a gradient step of size < 1 cannot reach the origin from the sphere
    assert!(n > 0.0, "retraction hit the origin");
    SpherePoint::project(stepped)
}

/// One MGD step against a fresh evaluation.
pub fn mgd_step<S: Scalar>(prob: &Problem<S>, h: &SpherePoint<S>, gamma: f64) -> Result<SpherePoint<S>> {
    let ev = prob.eval(h)?;
    Ok(retract_step(&ev, gamma))
}

/// Uniform draw from the radius-`radius` sphere of the tangent space at `h`.
pub fn tangent_perturbation<S: Scalar>(
    h: &SpherePoint<S>,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<S>> {
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::invalid("radius", format!("need 0 < D < 1, got {radius}")));
    }
    // a Gaussian projected to the tangent space is isotropic there
    loop {
        let g: Vec<S> = (0..h.len()).map(|_| S::sample_standard(rng)).collect();
        let t = scalar::project_tangent(h.as_slice(), &g);
        let n = scalar::norm(&t);
        if n > 1e-12 {
            return Ok(scalar::scale(&t, radius / n));
        }
    }
}

/// Applies the perturbation update h <- sqrt(1 - ‖z‖²)·h + z.
pub fn perturbed_point<S: Scalar>(h: &SpherePoint<S>, z: &[S]) -> SpherePoint<S> {
    let r2 = scalar::dot_re(z, z);
    let scaled = scalar::scale(h.as_slice(), (1.0 - r2).sqrt());
    SpherePoint::project(scalar::axpy(&scaled, 1.0, z))
}

/// Runs the configured optimizer for `cfg.iters` iterations. When an
/// accuracy probe is supplied (ground truth available), every trace record
/// carries its value at the recorded iterate.
pub fn run<S: Scalar>(
    prob: &Problem<S>,
    h0: SpherePoint<S>,
    cfg: &OptimizerConfig,
    probe: Option<&dyn Fn(&[S]) -> f64>,
) -> Result<(SpherePoint<S>, Trace)> {
    cfg.validate()?;
    let mut rng = crate::rng::rng(cfg.seed);
    let mut h = h0;
    let mut trace = Trace::default();
    let mut t_perturb = 0usize;
    let mut perturbed_since_record = false;

    for t in 0..cfg.iters {
        let mut ev = prob.eval(&h)?;
        if cfg.mode == Mode::Pmgd
            && cfg.perturb_radius > 0.0
            && ev.rgrad_norm < cfg.grad_tolerance
            && t.saturating_sub(t_perturb) > cfg.perturb_interval
        {
            let zp = tangent_perturbation(&h, cfg.perturb_radius, &mut rng)?;
            h = perturbed_point(&h, &zp);
            t_perturb = t;
            perturbed_since_record = true;
            ev = prob.eval(&h)?;
        }
        if t % cfg.record_every == 0 {
            trace.records.push(TraceRecord {
                t,
                objective: ev.value,
                grad_norm: ev.rgrad_norm,
                perturbed: perturbed_since_record,
                accuracy: probe.map(|p| p(h.as_slice())),
            });
            perturbed_since_record = false;
        }
        h = retract_step(&ev, cfg.step_size);
    }

    let ev = prob.eval(&h)?;
    trace.records.push(TraceRecord {
        t: cfg.iters,
        objective: ev.value,
        grad_norm: ev.rgrad_norm,
        perturbed: perturbed_since_record,
        accuracy: probe.map(|p| p(h.as_slice())),
    });
    Ok((h, trace))
}

/// Uniform random point on the sphere: a standard normal vector (one per
/// real degree of freedom) renormalized.
pub fn random_sphere_init<S: Scalar>(lat: &Lattice, seed: u64) -> Result<SpherePoint<S>> {
    let n = lat.n();
    if n < 2 {
        return Err(Error::invalid("n", "need n >= 2"));
    }
    let mut r = crate::rng::rng_from(&[seed, 0x1A17]);
    let v: Vec<S> = (0..n).map(|_| S::sample_standard(&mut r)).collect();
    Ok(SpherePoint::project(v))
}

/// The guaranteed parameter schedule. `log` is the natural logarithm and
/// `xi` defaults to 700 (the analysis admits any value above 640). The
/// prescribed iteration count is astronomically pessimistic, so the returned
/// config caps it at `iter_ceiling` and reports both.
#[derive(Debug, Clone)]
pub struct TheoreticalSchedule {
    pub config: OptimizerConfig,
    pub gap_tolerance: f64,
    pub prescribed_iters: f64,
    pub capped: bool,
    pub xi: f64,
}

pub fn theoretical_schedule(
    n: usize,
    theta: f64,
    rho: f64,
    xi: f64,
    iter_ceiling: usize,
    seed: u64,
) -> Result<TheoreticalSchedule> {
    let nf = n as f64;
    if !(theta > 0.0 && theta < 1.0 / 3.0) {
        return Err(Error::invalid(
            "theta",
            format!("need 0 < theta < 1/3, got {theta}"),
        ));
    }
    if !(rho > 0.0 && rho < 1e-3) {
        return Err(Error::invalid("rho", format!("need 0 < rho < 1e-3, got {rho}")));
    }
    if !(xi > 640.0) {
        return Err(Error::invalid("xi", format!("need xi > 640, got {xi}")));
    }
    let a = theta * (1.0 - 3.0 * theta);
    let logn = nf.ln();
    let gamma = 1.0 / (128.0 * nf.powi(3));
    let radius = a * a / (xi * xi * nf.powi(6) * logn * logn);
    let interval = xi * nf.powi(3) * logn / (25.0 * a);
    let tolerance = crate::landscape::gap_constant(n, theta, rho);
    let prescribed = 5000.0 * nf.powi(8) / (a * a * rho.powi(4))
        + xi.powi(4) * nf.powi(12) * logn.powi(4) / (800.0 * a.powi(4));
    let capped = prescribed > iter_ceiling as f64;
    let iters = if capped {
        iter_ceiling
    } else {
        prescribed.ceil() as usize
    };
    Ok(TheoreticalSchedule {
        config: OptimizerConfig {
            mode: Mode::Pmgd,
            step_size: gamma,
            iters,
            perturb_radius: radius,
            perturb_interval: interval.ceil() as usize,
            grad_tolerance: tolerance,
            seed,
            record_every: 1,
        },
        gap_tolerance: tolerance,
        prescribed_iters: prescribed,
        capped,
        xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::delta;
    use crate::precond::build_preconditioner;
    use crate::synth::{GroundTruth, NoiseSpec, Observations};
    use approx::assert_relative_eq;

    fn toy_problem(n: usize, channels: usize, theta: f64, seed: u64) -> Problem<f64> {
        let lat = Lattice::line(n).unwrap();
        let gt = GroundTruth::gaussian_bernoulli(&lat, channels, theta, seed).unwrap();
        let obs = crate::synth::observe(&gt, &NoiseSpec::none(), seed).unwrap();
        let pre = build_preconditioner(&obs, theta).unwrap();
        Problem::new(&obs, &pre).unwrap()
    }

    #[test]
    fn stationary_point_is_fixed() {
        let lat = Lattice::line(8).unwrap();
        let obs = Observations {
            y: vec![delta::<f64>(&lat, 0)],
            lat: lat.clone(),
            theta_hint: 0.2,
        };
        let pre = build_preconditioner(&obs, 0.2).unwrap();
        let prob = Problem::new(&obs, &pre).unwrap();
        let h = SpherePoint::project(pre.apply_inverse(&delta::<f64>(&lat, 0)).unwrap());
        let h2 = mgd_step(&prob, &h, 0.1).unwrap();
        let drift = scalar::norm(&scalar::sub(h.as_slice(), h2.as_slice()));
        assert!(drift < 1e-9, "drift {drift}");
    }

    #[test]
    fn steps_stay_on_the_sphere() {
        let prob = toy_problem(16, 4, 0.25, 3);
        let mut h = random_sphere_init::<f64>(prob.lattice(), 0).unwrap();
        for _ in 0..10 {
            h = mgd_step(&prob, &h, 0.1).unwrap();
            assert!((scalar::norm(h.as_slice()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn descent_at_the_guaranteed_step_size() {
        // gamma = 1/(128 n³) decreases L by at least (0.0038/n³)·‖rgrad‖²
        let n = 8;
        let gamma = 1.0 / (128.0 * (n as f64).powi(3));
        let rate = 0.0038 / (n as f64).powi(3);
        for seed in 0..5 {
            let prob = toy_problem(n, 4 * n, 0.2, seed);
            let mut h = random_sphere_init::<f64>(prob.lattice(), seed).unwrap();
            for _ in 0..10 {
                let ev = prob.eval(&h).unwrap();
                let h2 = retract_step(&ev, gamma);
                let v2 = prob.objective(h2.as_slice()).unwrap();
                assert!(
                    v2 - ev.value <= -rate * ev.rgrad_norm * ev.rgrad_norm + 1e-12,
                    "decrease {} vs required {}",
                    v2 - ev.value,
                    -rate * ev.rgrad_norm * ev.rgrad_norm
                );
                h = h2;
            }
        }
    }

    #[test]
    fn zero_iterations_returns_start() {
        let prob = toy_problem(8, 8, 0.3, 1);
        let h0 = random_sphere_init::<f64>(prob.lattice(), 5).unwrap();
        let cfg = OptimizerConfig::mgd(0.1, 0);
        let (h, trace) = run(&prob, h0.clone(), &cfg, None).unwrap();
        assert_eq!(h.as_slice(), h0.as_slice());
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].t, 0);
    }

    #[test]
    fn pmgd_with_zero_tolerance_matches_mgd() {
        let prob = toy_problem(12, 4, 0.25, 9);
        let h0 = random_sphere_init::<f64>(prob.lattice(), 2).unwrap();
        let mgd = OptimizerConfig::mgd(0.1, 25);
        let pmgd = OptimizerConfig::pmgd(0.1, 25, 0.2, 5, 0.0, 7);
        let (ha, ta) = run(&prob, h0.clone(), &mgd, None).unwrap();
        let (hb, tb) = run(&prob, h0, &pmgd, None).unwrap();
        assert_eq!(ha.as_slice(), hb.as_slice());
        assert_eq!(ta.records, tb.records);
    }

    #[test]
    fn trace_has_stride_plus_final() {
        let prob = toy_problem(8, 8, 0.3, 4);
        let h0 = random_sphere_init::<f64>(prob.lattice(), 1).unwrap();
        let mut cfg = OptimizerConfig::mgd(0.05, 10);
        cfg.record_every = 4;
        let (_, trace) = run(&prob, h0, &cfg, None).unwrap();
        let ts: Vec<usize> = trace.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 4, 8, 10]);
    }

    #[test]
    fn runs_are_deterministic() {
        let prob = toy_problem(12, 4, 0.2, 8);
        let h0 = random_sphere_init::<f64>(prob.lattice(), 3).unwrap();
        let cfg = OptimizerConfig::pmgd(0.1, 30, 0.2, 5, 0.5, 11);
        let (ha, ta) = run(&prob, h0.clone(), &cfg, None).unwrap();
        let (hb, tb) = run(&prob, h0, &cfg, None).unwrap();
        assert_eq!(ha.as_slice(), hb.as_slice());
        assert_eq!(ta.records, tb.records);
    }

    #[test]
    fn perturbation_count_is_bounded() {
        // force frequent triggers with a huge tolerance
        let prob = toy_problem(10, 3, 0.3, 6);
        let h0 = random_sphere_init::<f64>(prob.lattice(), 4).unwrap();
        let interval = 3usize;
        let iters = 40usize;
        let cfg = OptimizerConfig::pmgd(0.05, iters, 0.1, interval, 1e9, 13);
        let (_, trace) = run(&prob, h0, &cfg, None).unwrap();
        let bound = iters.div_ceil(interval);
        assert!(
            trace.perturbation_count() <= bound,
            "{} perturbations, bound {bound}",
            trace.perturbation_count()
        );
        assert!(trace.perturbation_count() > 0);
    }

    #[test]
    fn random_init_properties() {
        let lat = Lattice::line(16).unwrap();
        let a = random_sphere_init::<f64>(&lat, 0).unwrap();
        let b = random_sphere_init::<f64>(&lat, 1).unwrap();
        assert!((scalar::norm(a.as_slice()) - 1.0).abs() < 1e-12);
        assert_ne!(a.as_slice(), b.as_slice());

        // the empirical mean over many draws shrinks like 1/sqrt(k)
        let mut mean = vec![0.0; 16];
        let draws = 100_000u64;
        for seed in 0..draws {
            let p = random_sphere_init::<f64>(&lat, seed).unwrap();
            for (m, v) in mean.iter_mut().zip(p.as_slice()) {
                *m += v / draws as f64;
            }
        }
        let norm = scalar::norm(&mean);
        assert!(norm < 0.02, "mean norm {norm}");
    }

    #[test]
    fn tangent_perturbation_geometry() {
        let lat = Lattice::line(10).unwrap();
        let h = random_sphere_init::<f64>(&lat, 7).unwrap();
        let mut rng = crate::rng::rng(17);
        let z = tangent_perturbation(&h, 0.3, &mut rng).unwrap();
        assert_relative_eq!(scalar::norm(&z), 0.3, max_relative = 1e-12);
        assert!(scalar::dot_re(h.as_slice(), &z).abs() < 1e-12);
        let moved = perturbed_point(&h, &z);
        assert!((scalar::norm(moved.as_slice()) - 1.0).abs() < 1e-12);
        assert!(tangent_perturbation(&h, 1.0, &mut rng).is_err());
    }

    #[test]
    fn tangent_perturbation_is_isotropic() {
        let lat = Lattice::line(8).unwrap();
        let h = random_sphere_init::<f64>(&lat, 2).unwrap();
        let mut rng = crate::rng::rng(5);
        let radius = 0.5;
        let draws = 100_000;
        let mut cov = vec![vec![0.0_f64; 8]; 8];
        for _ in 0..draws {
            let z = tangent_perturbation(&h, radius, &mut rng).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    cov[i][j] += z[i] * z[j] / draws as f64;
                }
            }
        }
        // covariance of the uniform tangent sphere is radius²/(n-1)·P
        let scale = radius * radius / 7.0;
        for i in 0..8 {
            for j in 0..8 {
                let p = (if i == j { 1.0 } else { 0.0 }) - h.as_slice()[i] * h.as_slice()[j];
                let want = scale * p;
                assert!(
                    (cov[i][j] - want).abs() < 0.03 * scale,
                    "cov[{i}][{j}] = {} want {want}",
                    cov[i][j]
                );
            }
        }
    }

    #[test]
    fn schedule_formulas() {
        let sched = theoretical_schedule(8, 0.1, 5e-4, 700.0, 1_000_000, 0).unwrap();
        assert_relative_eq!(sched.config.step_size, 1.0 / 65536.0, max_relative = 1e-15);
        let rho: f64 = 5e-4;
        assert_relative_eq!(
            sched.gap_tolerance,
            0.1 * 0.7 * rho * rho / 16.0,
            max_relative = 1e-12
        );
        // interval·gamma·theta(1-3theta) = xi·ln(n)/3200
        let lhs = sched.config.perturb_interval as f64 * sched.config.step_size * 0.1 * 0.7;
        let rhs = 700.0 * (8.0_f64).ln() / 3200.0;
        // the interval is rounded up to an integer iteration count
        assert!((lhs - rhs).abs() / rhs < 1e-3, "{lhs} vs {rhs}");
        assert!(sched.capped);
        assert_eq!(sched.config.iters, 1_000_000);

        assert!(theoretical_schedule(8, 1.0 / 3.0, 5e-4, 700.0, 10, 0).is_err());
        assert!(theoretical_schedule(8, 0.1, 1e-2, 700.0, 10, 0).is_err());
    }
}
