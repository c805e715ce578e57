//! Ground-truth and observation generators for every experiment regime:
//! Bernoulli-Rademacher channels, Gaussian and condition-number-controlled
//! signals, jointly sparse complex channels, additive noise, and the
//! zero-padding embedding that turns linear convolution into circular.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fourier::{circ_conv, dft, idft_real, Lattice, Spectrum};
use crate::rng::rng_from;
use crate::scalar::Scalar;

/// Relative floor on the signal spectrum for the invertibility requirement:
/// generation rejects f with min|Ff| <= 1e-8 · max|Ff| and redraws.
pub const SPECTRUM_FLOOR_REL: f64 = 1e-8;

// Seed-stream ids, so the sub-generators of one instance are independent.
const STREAM_SIGNAL: u64 = 1;
const STREAM_CHANNEL: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_SUPPORT: u64 = 4;

#[derive(Debug, Clone)]
pub struct GroundTruth<S: Scalar> {
    pub f: Vec<S>,
    pub channels: Vec<Vec<S>>,
    pub lat: Lattice,
    pub theta: f64,
    pub seed: u64,
    /// Realized max|Ff| / min|Ff| when built by the conditioned generator.
    pub realized_kappa: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Observations<S: Scalar> {
    pub y: Vec<Vec<S>>,
    pub lat: Lattice,
    /// Sparsity parameter used when building the preconditioner.
    pub theta_hint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec { sigma: 0.0 }
    }

    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::invalid("sigma", format!("need sigma >= 0, got {sigma}")));
        }
        Ok(NoiseSpec { sigma })
    }

    /// Noise level for a target SNR regime: sigma = level · sqrt(n·theta),
    /// with level 0.01 for ~40 dB and 0.1 for ~20 dB.
    pub fn relative(level: f64, n: usize, theta: f64) -> Self {
        NoiseSpec {
            sigma: level * (n as f64 * theta).sqrt(),
        }
    }
}

fn spectrum_extremes(s: &Spectrum) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = 0.0_f64;
    for v in &s.values {
        let m = v.norm();
        min = min.min(m);
        max = max.max(m);
    }
    (min, max)
}

/// True when the DFT of `f` clears the invertibility floor.
pub fn passes_spectrum_floor<S: Scalar>(f: &[S], lat: &Lattice) -> Result<bool> {
    let s = dft(f, lat)?;
    let (min, max) = spectrum_extremes(&s);
    Ok(min > SPECTRUM_FLOOR_REL * max)
}

/// i.i.d. Bernoulli(theta)-Rademacher channels: +1 w.p. theta/2, -1 w.p.
/// theta/2, 0 otherwise. Channel i draws from its own sub-stream of `seed`,
/// so parallel generation cannot change the result.
pub fn gen_bernoulli_rademacher_channels(
    n: usize,
    num_channels: usize,
    theta: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(
            "theta",
            format!("need 0 <= theta <= 1, got {theta}"),
        ));
    }
    let mut channels = Vec::with_capacity(num_channels);
    for i in 0..num_channels {
        let mut r = rng_from(&[seed, STREAM_CHANNEL, i as u64]);
        let ch: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = r.random();
                if u < theta / 2.0 {
                    1.0
                } else if u < theta {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        channels.push(ch);
    }
    Ok(channels)
}

/// Standard normal signal, redrawn (with the sub-stream advanced) until the
/// spectrum floor holds. A Gaussian draw fails the floor only with
/// negligible probability, but determinism requires a fixed policy.
pub fn gen_gaussian_signal(lat: &Lattice, seed: u64) -> Vec<f64> {
    let n = lat.n();
    for attempt in 0..64 {
        let mut r = rng_from(&[seed, STREAM_SIGNAL, attempt]);
        let f: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        if passes_spectrum_floor(&f, lat).expect("lattice length") {
            return f;
        }
    }
    unreachable!("64 consecutive Gaussian draws failed the spectrum floor");
}

/// Real signal with DFT magnitudes drawn uniformly from [1, kappa] and
/// uniform phases, conjugate-symmetric by construction so the time-domain
/// signal is real. The realized condition number is at most kappa.
pub fn gen_conditioned_signal(lat: &Lattice, kappa: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if !(kappa >= 1.0) {
        return Err(Error::invalid("kappa", format!("need kappa >= 1, got {kappa}")));
    }
    if !lat.is_1d() {
        return Err(Error::invalid("lattice", "conditioned generator is 1-D only"));
    }
    let n = lat.n();
    let mut r = rng_from(&[seed, STREAM_SIGNAL]);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let gain = |r: &mut rand_chacha::ChaCha8Rng| 1.0 + (kappa - 1.0) * r.random::<f64>();
    // self-conjugate bins carry phase 0
    spec[0] = Complex64::new(gain(&mut r), 0.0);
    if n % 2 == 0 {
        spec[n / 2] = Complex64::new(gain(&mut r), 0.0);
    }
    for j in 1..n.div_ceil(2) {
        let g = gain(&mut r);
        let phase = 2.0 * std::f64::consts::PI * r.random::<f64>();
        let v = Complex64::from_polar(g, phase);
        spec[j] = v;
        spec[n - j] = v.conj();
    }
    let f = idft_real(&Spectrum {
        values: spec.clone(),
        lat: lat.clone(),
    })?;
    let (min, max) = spectrum_extremes(&Spectrum {
        values: spec,
        lat: lat.clone(),
    });
    Ok((f, max / min))
}

/// Complex channels sharing one uniformly drawn support of size `s`, with
/// CN(0,1) nonzeros (real and imaginary parts N(0, 1/2)).
pub fn gen_joint_sparse_complex(
    n: usize,
    num_channels: usize,
    s: usize,
    seed: u64,
) -> Result<Vec<Vec<Complex64>>> {
    if s < 1 || s > n {
        return Err(Error::invalid("s", format!("need 1 <= s <= n = {n}, got {s}")));
    }
    let mut r = rng_from(&[seed, STREAM_SUPPORT]);
    let mut indices: Vec<usize> = (0..n).collect();
    // partial Fisher-Yates: the first s entries become the joint support
    for k in 0..s {
        let j = k + r.random_range(0..n - k);
        indices.swap(k, j);
    }
    let support = &indices[..s];

    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut channels = Vec::with_capacity(num_channels);
    for i in 0..num_channels {
        let mut cr = rng_from(&[seed, STREAM_CHANNEL, i as u64]);
        let mut ch = vec![Complex64::new(0.0, 0.0); n];
        for &j in support {
            let re: f64 = StandardNormal.sample(&mut cr);
            let im: f64 = StandardNormal.sample(&mut cr);
            ch[j] = Complex64::new(re * scale, im * scale);
        }
        channels.push(ch);
    }
    Ok(channels)
}

/// Real channels with per-channel uniform supports of size `s` and N(0,1)
/// nonzeros, as used by the linear-convolution experiments.
pub fn gen_sparse_gaussian_channels(
    n: usize,
    num_channels: usize,
    s: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if s < 1 || s > n {
        return Err(Error::invalid("s", format!("need 1 <= s <= n = {n}, got {s}")));
    }
    let mut channels = Vec::with_capacity(num_channels);
    for i in 0..num_channels {
        let mut r = rng_from(&[seed, STREAM_CHANNEL, i as u64]);
        let mut indices: Vec<usize> = (0..n).collect();
        for k in 0..s {
            let j = k + r.random_range(0..n - k);
            indices.swap(k, j);
        }
        let mut ch = vec![0.0; n];
        for &j in &indices[..s] {
            ch[j] = StandardNormal.sample(&mut r);
        }
        channels.push(ch);
    }
    Ok(channels)
}

impl<S: Scalar> GroundTruth<S> {
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }
}

impl GroundTruth<f64> {
    /// Gaussian signal with Bernoulli-Rademacher channels, the baseline
    /// synthetic regime.
    pub fn gaussian_bernoulli(
        lat: &Lattice,
        num_channels: usize,
        theta: f64,
        seed: u64,
    ) -> Result<Self> {
        let f = gen_gaussian_signal(lat, seed);
        let channels = gen_bernoulli_rademacher_channels(lat.n(), num_channels, theta, seed)?;
        Ok(GroundTruth {
            f,
            channels,
            lat: lat.clone(),
            theta,
            seed,
            realized_kappa: None,
        })
    }

    /// Conditioned signal (DFT gains in [1, kappa]) with Bernoulli-Rademacher
    /// channels.
    pub fn conditioned_bernoulli(
        lat: &Lattice,
        num_channels: usize,
        theta: f64,
        kappa: f64,
        seed: u64,
    ) -> Result<Self> {
        let (f, realized) = gen_conditioned_signal(lat, kappa, seed)?;
        let channels = gen_bernoulli_rademacher_channels(lat.n(), num_channels, theta, seed)?;
        Ok(GroundTruth {
            f,
            channels,
            lat: lat.clone(),
            theta,
            seed,
            realized_kappa: Some(realized),
        })
    }

    /// Caller-supplied signal (e.g. an image) with Bernoulli-Rademacher
    /// channels.
    pub fn with_signal(
        f: Vec<f64>,
        lat: &Lattice,
        num_channels: usize,
        theta: f64,
        seed: u64,
    ) -> Result<Self> {
        lat.check_len(f.len())?;
        if !passes_spectrum_floor(&f, lat)? {
            return Err(Error::invalid(
                "f",
                "signal spectrum has a near-zero bin; circular convolution with it is not invertible",
            ));
        }
        let channels = gen_bernoulli_rademacher_channels(lat.n(), num_channels, theta, seed)?;
        Ok(GroundTruth {
            f,
            channels,
            lat: lat.clone(),
            theta,
            seed,
            realized_kappa: None,
        })
    }
}

impl GroundTruth<Complex64> {
    /// CN(0, I) signal with jointly s-sparse complex Gaussian channels.
    pub fn complex_joint_sparse(
        lat: &Lattice,
        num_channels: usize,
        s: usize,
        seed: u64,
    ) -> Result<Self> {
        let n = lat.n();
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let f = {
            let mut attempt = 0u64;
            loop {
                let mut r = rng_from(&[seed, STREAM_SIGNAL, attempt]);
                let f: Vec<Complex64> = (0..n)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut r);
                        let im: f64 = StandardNormal.sample(&mut r);
                        Complex64::new(re * scale, im * scale)
                    })
                    .collect();
                if passes_spectrum_floor(&f, lat)? {
                    break f;
                }
                attempt += 1;
            }
        };
        let channels = gen_joint_sparse_complex(n, num_channels, s, seed)?;
        Ok(GroundTruth {
            f,
            channels,
            lat: lat.clone(),
            theta: s as f64 / n as f64,
            seed,
            realized_kappa: None,
        })
    }
}

/// Zero-pads length-m channels and a length-(n-m+1) signal to length n, so
/// the circular convolution of the padded pair equals the linear convolution
/// of the originals.
pub fn embed_linear_conv(
    channels_short: &[Vec<f64>],
    f_short: &[f64],
    n: usize,
    theta: f64,
    seed: u64,
) -> Result<GroundTruth<f64>> {
    let m = channels_short
        .first()
        .map(|c| c.len())
        .ok_or_else(|| Error::invalid("channels", "need at least one channel"))?;
    if m > n {
        return Err(Error::invalid("m", format!("channel length {m} exceeds n = {n}")));
    }
    if f_short.len() != n - m + 1 {
        return Err(Error::invalid(
            "f",
            format!("need signal length n - m + 1 = {}, got {}", n - m + 1, f_short.len()),
        ));
    }
    if channels_short.iter().any(|c| c.len() != m) {
        return Err(Error::invalid("channels", "all channels must share one length"));
    }
    let lat = Lattice::line(n)?;
    let pad = |v: &[f64]| {
        let mut out = vec![0.0; n];
        out[..v.len()].copy_from_slice(v);
        out
    };
    let channels: Vec<Vec<f64>> = channels_short.iter().map(|c| pad(c)).collect();
    Ok(GroundTruth {
        f: pad(f_short),
        channels,
        lat,
        theta,
        seed,
        realized_kappa: None,
    })
}

/// Forms y_i = x_i ⊛ f + sigma·eps_i with unit-variance noise drawn from a
/// per-channel sub-stream of `noise_seed`.
pub fn observe<S: Scalar>(
    gt: &GroundTruth<S>,
    noise: &NoiseSpec,
    noise_seed: u64,
) -> Result<Observations<S>> {
    let mut y = Vec::with_capacity(gt.channels.len());
    for (i, x) in gt.channels.iter().enumerate() {
        let mut yi = circ_conv(x, &gt.f, &gt.lat)?;
        if noise.sigma > 0.0 {
            let mut r = rng_from(&[noise_seed, STREAM_NOISE, i as u64]);
            for v in &mut yi {
                *v = *v + S::sample_noise_unit(&mut r).scale(noise.sigma);
            }
        }
        y.push(yi);
    }
    Ok(Observations {
        y,
        lat: gt.lat.clone(),
        theta_hint: gt.theta,
    })
}

/// Fallback sparsity estimate when theta is unknown: the fraction of
/// observation entries with modulus above 10% of the per-channel maximum.
pub fn estimate_theta<S: Scalar>(obs: &[Vec<S>]) -> f64 {
    let mut above = 0usize;
    let mut total = 0usize;
    for y in obs {
        let max = y.iter().map(|v| v.sq_modulus()).fold(0.0, f64::max).sqrt();
        if max == 0.0 {
            continue;
        }
        above += y
            .iter()
            .filter(|v| v.sq_modulus().sqrt() > 0.1 * max)
            .count();
        total += y.len();
    }
    if total == 0 {
        0.0
    } else {
        above as f64 / total as f64
    }
}
