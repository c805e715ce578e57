//! Fourier-diagonal whitening of the observations.
//!
//! The average Gram of the observation circulants is itself circulant, so
//! its inverse square root is a per-frequency scalar power: the operator is
//! held as one positive multiplier per frequency bin, built in O(N·n log n)
//! and applied in O(n log n). The dense matrix route exists only as a test
//! oracle.

use crate::error::{Error, Result};
use crate::fourier::{dft, idft_to, Lattice};
use crate::scalar::Scalar;
use crate::synth::Observations;

#[derive(Debug, Clone)]
pub struct Preconditioner {
    multipliers: Vec<f64>,
    theta: f64,
    lat: Lattice,
}

/// multiplier_k = ( (1/(theta·n·N)) Σ_i |dft(y_i)_k|² )^(-1/2)
pub fn build_preconditioner<S: Scalar>(obs: &Observations<S>, theta: f64) -> Result<Preconditioner> {
    if !(theta > 0.0) {
        return Err(Error::invalid("theta", format!("need theta > 0, got {theta}")));
    }
    if obs.y.is_empty() {
        return Err(Error::invalid("observations", "need at least one channel"));
    }
    let lat = &obs.lat;
    let n = lat.n();
    let mut energy = vec![0.0_f64; n];
    for y in &obs.y {
        let s = dft(y, lat)?;
        for (e, v) in energy.iter_mut().zip(&s.values) {
            *e += v.norm_sqr();
        }
    }
    let scale = 1.0 / (theta * n as f64 * obs.y.len() as f64);
    let mut multipliers = Vec::with_capacity(n);
    for (bin, e) in energy.iter().enumerate() {
        let gram = e * scale;
        let m = gram.powf(-0.5);
        if !(gram > 0.0) || !m.is_finite() {
            return Err(Error::RankDeficient { bin });
        }
        multipliers.push(m);
    }
    Ok(Preconditioner {
        multipliers,
        theta,
        lat: lat.clone(),
    })
}

impl Preconditioner {
    /// Identity operator; useful for working on the unpreconditioned
    /// objective (e.g. the expected-landscape Monte-Carlo checks).
    pub fn identity(lat: &Lattice) -> Self {
        Preconditioner {
            multipliers: vec![1.0; lat.n()],
            theta: 1.0,
            lat: lat.clone(),
        }
    }

    /// Test-support constructor; multipliers must be strictly positive.
    pub fn from_multipliers(multipliers: Vec<f64>, theta: f64, lat: &Lattice) -> Result<Self> {
        lat.check_len(multipliers.len())?;
        if let Some(bin) = multipliers.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::RankDeficient { bin });
        }
        Ok(Preconditioner {
            multipliers,
            theta,
            lat: lat.clone(),
        })
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    /// R h = idft(multipliers ⊙ dft(h)). Self-adjoint since the multipliers
    /// are real.
    pub fn apply<S: Scalar>(&self, h: &[S]) -> Result<Vec<S>> {
        self.lat.check_len(h.len())?;
        let mut s = dft(h, &self.lat)?;
        for (v, m) in s.values.iter_mut().zip(&self.multipliers) {
            *v *= *m;
        }
        Ok(idft_to::<S>(&s))
    }

    /// R^{-1} h, dividing by the multipliers instead.
    pub fn apply_inverse<S: Scalar>(&self, h: &[S]) -> Result<Vec<S>> {
        self.lat.check_len(h.len())?;
        let mut s = dft(h, &self.lat)?;
        for (v, m) in s.values.iter_mut().zip(&self.multipliers) {
            *v /= *m;
        }
        Ok(idft_to::<S>(&s))
    }
}

/// Construction diagnostic: max_k |multiplier_k² · (1/(theta·n·N)) Σ_i
/// |dft(y_i)_k|² - 1|, which is zero up to round-off for a preconditioner
/// built from the same observations.
pub fn precond_gram_residual<S: Scalar>(
    p: &Preconditioner,
    obs: &Observations<S>,
    theta: f64,
) -> Result<f64> {
    p.lat.check_same(&obs.lat)?;
    let n = p.lat.n();
    let mut energy = vec![0.0_f64; n];
    for y in &obs.y {
        let s = dft(y, &p.lat)?;
        for (e, v) in energy.iter_mut().zip(&s.values) {
            *e += v.norm_sqr();
        }
    }
    let scale = 1.0 / (theta * n as f64 * obs.y.len() as f64);
    let mut worst = 0.0_f64;
    for (m, e) in p.multipliers.iter().zip(&energy) {
        worst = worst.max((m * m * e * scale - 1.0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::delta;
    use crate::scalar::dot_re;
    use crate::synth::{gen_bernoulli_rademacher_channels, GroundTruth, NoiseSpec};
    use approx::assert_relative_eq;

    fn random_obs(n: usize, channels: usize, seed: u64) -> Observations<f64> {
        let lat = Lattice::line(n).unwrap();
        let gt = GroundTruth::gaussian_bernoulli(&lat, channels, 0.4, seed).unwrap();
        crate::synth::observe(&gt, &NoiseSpec::none(), seed).unwrap()
    }

    #[test]
    fn unit_gram_gives_identity() {
        // y = e_1 on a single channel: |dft(y)_k|² = 1 for all k, so theta =
        // 1/n makes the normalized Gram the identity.
        let lat = Lattice::line(8).unwrap();
        let obs = Observations {
            y: vec![delta::<f64>(&lat, 0)],
            lat: lat.clone(),
            theta_hint: 0.125,
        };
        let p = build_preconditioner(&obs, 1.0 / 8.0).unwrap();
        for m in p.multipliers() {
            assert_relative_eq!(*m, 1.0, max_relative = 1e-12);
        }
        let x: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let rx = p.apply(&x).unwrap();
        for (a, b) in rx.iter().zip(&x) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn law_of_large_numbers_identity_limit() {
        // f = e_1 means y_i = x_i; the Gram over many Bernoulli-Rademacher
        // channels concentrates at theta·n·I, so R tends to the identity.
        let n = 16;
        let lat = Lattice::line(n).unwrap();
        let y = gen_bernoulli_rademacher_channels(n, 100_000, 0.1, 42).unwrap();
        let obs = Observations {
            y,
            lat,
            theta_hint: 0.1,
        };
        let p = build_preconditioner(&obs, 0.1).unwrap();
        let dev = p
            .multipliers()
            .iter()
            .map(|m| (m - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(dev < 0.02, "max deviation {dev}");
    }

    #[test]
    fn apply_twice_composes_multipliers() {
        let obs = random_obs(12, 3, 5);
        let p = build_preconditioner(&obs, 0.4).unwrap();
        let x: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let twice = p.apply(&p.apply(&x).unwrap()).unwrap();
        let squared = Preconditioner::from_multipliers(
            p.multipliers().iter().map(|m| m * m).collect(),
            p.theta(),
            p.lattice(),
        )
        .unwrap();
        let direct = squared.apply(&x).unwrap();
        for (a, b) in twice.iter().zip(&direct) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn self_adjointness() {
        let obs = random_obs(16, 2, 8);
        let p = build_preconditioner(&obs, 0.4).unwrap();
        let mut r = crate::rng::rng(3);
        use rand::Rng;
        for _ in 0..10 {
            let a: Vec<f64> = (0..16).map(|_| r.random::<f64>() - 0.5).collect();
            let b: Vec<f64> = (0..16).map(|_| r.random::<f64>() - 0.5).collect();
            let lhs = dot_re(&p.apply(&a).unwrap(), &b);
            let rhs = dot_re(&a, &p.apply(&b).unwrap());
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn gram_residual_is_tiny_and_detects_corruption() {
        let obs = random_obs(8, 3, 13);
        let p = build_preconditioner(&obs, 0.4).unwrap();
        let res = precond_gram_residual(&p, &obs, 0.4).unwrap();
        assert!(res < 1e-12, "residual {res}");

        let corrupted = Preconditioner::from_multipliers(
            p.multipliers().iter().map(|m| 2.0 * m).collect(),
            p.theta(),
            p.lattice(),
        )
        .unwrap();
        let res2 = precond_gram_residual(&corrupted, &obs, 0.4).unwrap();
        assert_relative_eq!(res2, 3.0, max_relative = 1e-9);
    }

    #[test]
    fn zero_energy_bin_is_rank_deficient() {
        let lat = Lattice::line(4).unwrap();
        let obs = Observations {
            y: vec![vec![0.0; 4]],
            lat,
            theta_hint: 0.5,
        };
        match build_preconditioner(&obs, 0.5) {
            Err(Error::RankDeficient { .. }) => {}
            other => panic!("expected rank-deficiency, got {other:?}"),
        }
    }
}
