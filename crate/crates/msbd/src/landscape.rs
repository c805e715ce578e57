//! Closed-form expected landscape of the unpreconditioned objective under
//! the Bernoulli-Rademacher channel model, and the classification of the
//! sphere into strongly-convex neighborhoods of the signed 1-sparse minima,
//! strict-saddle neighborhoods, and the large-gradient remainder.
//!
//! With a = ‖h‖₄⁴ and the sparsity coefficient nθ(1-3θ), the expected
//! Riemannian gradient and Hessian on the sphere are
//!
//!   E rgrad(h) = nθ(1-3θ)·(a·h - h^{⊙3}),
//!   E rhess(h) = nθ(1-3θ)·(a·I + 2a·hh^T - 3·diag(h^{⊙2})),
//!
//! where the Hessian expression is the paper-form quadratic form valid on
//! tangent vectors. Stationary points have all nonzero entries of equal
//! magnitude ±1/sqrt(r); those with r = 1 are minima (tangent curvature
//! nθ(1-3θ)), those with r > 1 are strict saddles (minimum tangent
//! curvature -2nθ(1-3θ)/r). Dense matrices are allowed in this module only,
//! capped at n <= 64.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fourier::{dft, idft_to, Lattice, Spectrum};
use crate::rng::rng_from;
use crate::scalar;

/// Dense-matrix cap for this module.
pub const DENSE_CAP: usize = 64;

/// c(n, θ, ρ) = θ(1-3θ)ρ²/(2n), the gradient/curvature gap of the
/// three-region partition.
pub fn gap_constant(n: usize, theta: f64, rho: f64) -> f64 {
    theta * (1.0 - 3.0 * theta) * rho * rho / (2.0 * n as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct LandscapeParams {
    pub n: usize,
    pub theta: f64,
    pub rho: f64,
    /// True when rho sits outside the guaranteed range (visualization
    /// sweeps); bounds derived from the theory are not asserted there.
    pub exploratory: bool,
}

impl LandscapeParams {
    pub fn new(n: usize, theta: f64, rho: f64) -> Result<Self> {
        if n < 2 || n > DENSE_CAP {
            return Err(Error::invalid("n", format!("need 2 <= n <= {DENSE_CAP}, got {n}")));
        }
        if !(theta > 0.0 && theta < 1.0 / 3.0) {
            return Err(Error::invalid(
                "theta",
                format!("need 0 < theta < 1/3, got {theta}"),
            ));
        }
        if !(rho > 0.0 && rho < 1e-3) {
            return Err(Error::invalid(
                "rho",
                format!("need 0 < rho < 1e-3, got {rho} (use exploratory mode above)"),
            ));
        }
        Ok(LandscapeParams {
            n,
            theta,
            rho,
            exploratory: false,
        })
    }

    /// Relaxed-rho constructor for visualization sweeps (rho up to 0.05).
    pub fn exploratory(n: usize, theta: f64, rho: f64) -> Result<Self> {
        if n < 2 || n > DENSE_CAP {
            return Err(Error::invalid("n", format!("need 2 <= n <= {DENSE_CAP}, got {n}")));
        }
        if !(rho > 0.0 && rho <= 0.05) {
            return Err(Error::invalid("rho", format!("need 0 < rho <= 0.05, got {rho}")));
        }
        if !(theta > 0.0 && theta < 1.0 / 3.0) {
            return Err(Error::invalid("theta", format!("need 0 < theta < 1/3, got {theta}")));
        }
        Ok(LandscapeParams {
            n,
            theta,
            rho,
            exploratory: true,
        })
    }

    pub fn gap(&self) -> f64 {
        gap_constant(self.n, self.theta, self.rho)
    }

    fn coefficient(&self) -> f64 {
        self.n as f64 * self.theta * (1.0 - 3.0 * self.theta)
    }
}

fn check_unit(h: &[f64]) -> Result<()> {
    let dev = (scalar::norm(h) - 1.0).abs();
    if !(dev <= 1e-9) {
        return Err(Error::NotUnitNorm { deviation: dev });
    }
    Ok(())
}

/// E rgrad(h) = nθ(1-3θ)·(‖h‖₄⁴·h - h^{⊙3}).
pub fn expected_rgrad(h: &[f64], n: usize, theta: f64) -> Vec<f64> {
    let coeff = n as f64 * theta * (1.0 - 3.0 * theta);
    let a: f64 = h.iter().map(|v| v * v * v * v).sum();
    h.iter().map(|&v| coeff * (a * v - v * v * v)).collect()
}

/// Closed-form norm of the expected Riemannian gradient:
/// nθ(1-3θ)·sqrt(‖h‖₆⁶ - ‖h‖₄⁸).
pub fn expected_rgrad_norm(h: &[f64], n: usize, theta: f64) -> f64 {
    let coeff = n as f64 * theta * (1.0 - 3.0 * theta);
    let p6: f64 = h.iter().map(|v| v.powi(6)).sum();
    let p4: f64 = h.iter().map(|v| v.powi(4)).sum();
    coeff * (p6 - p4 * p4).max(0.0).sqrt()
}

/// Unprojected expected gradient, -nθ(1-3θ)·h^{⊙3} - 3nθ²·h.
pub fn expected_euclidean_grad(h: &[f64], n: usize, theta: f64) -> Vec<f64> {
    let nf = n as f64;
    let c1 = nf * theta * (1.0 - 3.0 * theta);
    let c2 = 3.0 * nf * theta * theta;
    h.iter().map(|&v| -c1 * v * v * v - c2 * v).collect()
}

/// E rhess(h) = nθ(1-3θ)·(a·I + 2a·hh^T - 3·diag(h^{⊙2})); a quadratic form
/// for tangent vectors. Dense, for small n only.
pub fn expected_rhess(h: &[f64], n: usize, theta: f64) -> DMatrix<f64> {
    assert!(n <= DENSE_CAP, "dense landscape matrices are capped at n = {DENSE_CAP}");
    let coeff = n as f64 * theta * (1.0 - 3.0 * theta);
    let a: f64 = h.iter().map(|v| v * v * v * v).sum();
    let dim = h.len();
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut v = 2.0 * a * h[i] * h[j];
            if i == j {
                v += a - 3.0 * h[i] * h[i];
            }
            m[(i, j)] = coeff * v;
        }
    }
    m
}

/// Orthonormal basis of the tangent space at `h` (columns), by the
/// Householder reflection that maps e_1 to h.
pub fn tangent_basis(h: &[f64]) -> DMatrix<f64> {
    let n = h.len();
    let mut u: Vec<f64> = h.to_vec();
    u[0] -= 1.0;
    let un = scalar::norm(&u);
    let mut b = DMatrix::zeros(n, n - 1);
    if un < 1e-12 {
        for k in 1..n {
            b[(k, k - 1)] = 1.0;
        }
        return b;
    }
    let scale = 2.0 / (un * un);
    for col in 1..n {
        for row in 0..n {
            let id = if row == col { 1.0 } else { 0.0 };
            b[(row, col - 1)] = id - scale * u[row] * u[col];
        }
    }
    b
}

/// Smallest eigenvalue (and its unit eigenvector in ambient coordinates) of
/// a symmetric quadratic form restricted to the tangent space at `h`.
pub fn min_tangent_eig(m: &DMatrix<f64>, h: &[f64]) -> (f64, Vec<f64>) {
    let b = tangent_basis(h);
    let mut reduced = b.transpose() * m * &b;
    // symmetrize against round-off
    let rt = reduced.transpose();
    reduced = (reduced + rt) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let mut best = 0usize;
    for (k, v) in eig.eigenvalues.iter().enumerate() {
        if *v < eig.eigenvalues[best] {
            best = k;
        }
    }
    let dir = &b * eig.eigenvectors.column(best);
    (eig.eigenvalues[best], dir.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Region {
    /// (rho,1)-neighborhood of a signed 1-sparse stationary point: strongly
    /// convex, contains the minima.
    H1,
    /// (rho,r)-neighborhood of an r-sparse stationary point, r > 1: strict
    /// saddle territory with guaranteed negative curvature.
    H2 { r: usize },
    /// Everything else: the expected gradient is bounded away from zero.
    H3,
}

/// Region of a point already expressed in the rotated frame where the
/// ground-truth filter is a delta (i.e. tested directly against the
/// stationary patterns). Membership in the (rho,r)-neighborhood of the
/// nearest r-sparse pattern is tested for each r; the top-r entries of
/// h^{⊙2} are the only candidate support once rho < 1/2.
pub fn classify_pattern(h: &[f64], params: &LandscapeParams) -> Result<Region> {
    check_unit(h)?;
    let n = h.len();
    let mut q: Vec<f64> = h.iter().map(|v| v * v).collect();
    q.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // once rho < 1/2, only the top-r squared entries can form a valid support
    for r in 1..=n {
        let rf = r as f64;
        let tol = params.rho / rf;
        let mut ok = true;
        for (k, &qk) in q.iter().enumerate() {
            let target = if k < r { 1.0 / rf } else { 0.0 };
            if (qk - target).abs() > tol {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(if r == 1 { Region::H1 } else { Region::H2 { r } });
        }
    }
    Ok(Region::H3)
}

/// Region of `h` for a general invertible ground-truth filter: rotate by
/// C_f (C_f^T C_f)^{-1/2} — per frequency, multiplication by the unit-
/// modulus dft(f)/|dft(f)| — and classify the rotated point.
pub fn classify_region(
    h: &[f64],
    f: &[f64],
    lat: &Lattice,
    params: &LandscapeParams,
) -> Result<Region> {
    lat.check_len(h.len())?;
    lat.check_len(f.len())?;
    let rotated = rotate_to_pattern_frame(h, f, lat)?;
    classify_pattern(&rotated, params)
}

/// h'' = C_f (C_f^T C_f)^{-1/2} h, the orthogonal change of frame that turns
/// the preconditioned landscape into the pattern landscape.
pub fn rotate_to_pattern_frame(h: &[f64], f: &[f64], lat: &Lattice) -> Result<Vec<f64>> {
    let fs = dft(f, lat)?;
    let mut hs = dft(h, lat)?;
    let mut max = 0.0_f64;
    for v in &fs.values {
        max = max.max(v.norm());
    }
    for (bin, (hv, fv)) in hs.values.iter_mut().zip(&fs.values).enumerate() {
        let m = fv.norm();
        if m <= crate::synth::SPECTRUM_FLOOR_REL * max {
            return Err(Error::NonInvertibleIterate {
                bin,
                magnitude: m,
                floor: crate::synth::SPECTRUM_FLOOR_REL * max,
            });
        }
        *hv *= fv / m;
    }
    Ok(idft_to::<f64>(&Spectrum {
        values: hs.values,
        lat: lat.clone(),
    }))
}

#[derive(Debug, Clone)]
pub struct StationaryPoint {
    pub support: Vec<usize>,
    pub signs: Vec<i8>,
    pub point: Vec<f64>,
}

impl StationaryPoint {
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }
}

/// All sign/support stationary patterns of the expected landscape with up to
/// `max_r` nonzero entries. Exhaustive; the count Σ_r C(n,r)·2^r is checked
/// against a budget before any allocation.
pub fn enumerate_stationary_points(n: usize, max_r: usize) -> Result<Vec<StationaryPoint>> {
    const CAP: u128 = 4_000_000;
    if n < 2 || n > 12 {
        return Err(Error::invalid("n", format!("need 2 <= n <= 12 for enumeration, got {n}")));
    }
    let max_r = max_r.min(n);
    let mut count: u128 = 0;
    for r in 1..=max_r {
        count += binomial(n, r) * (1u128 << r);
    }
    if count > CAP {
        return Err(Error::BudgetExceeded { count, cap: CAP });
    }

    let mut out = Vec::with_capacity(count as usize);
    for r in 1..=max_r {
        let amp = 1.0 / (r as f64).sqrt();
        let mut support: Vec<usize> = (0..r).collect();
        loop {
            for mask in 0u32..(1u32 << r) {
                let mut point = vec![0.0; n];
                let mut signs = Vec::with_capacity(r);
                for (bit, &idx) in support.iter().enumerate() {
                    let s: i8 = if mask & (1 << bit) != 0 { -1 } else { 1 };
                    signs.push(s);
                    point[idx] = s as f64 * amp;
                }
                let g = expected_rgrad(&point, n, 0.1);
                let gn = scalar::norm(&g);
                assert!(gn < 1e-12, "enumerated point is not stationary: ‖g‖ = {gn}");
                out.push(StationaryPoint {
                    support: support.clone(),
                    signs,
                    point,
                });
            }
            if !next_combination(&mut support, n) {
                break;
            }
        }
    }
    Ok(out)
}

fn binomial(n: usize, r: usize) -> u128 {
    let mut acc: u128 = 1;
    for k in 0..r {
        acc = acc * (n - k) as u128 / (k + 1) as u128;
    }
    acc
}

/// Advances a sorted index combination in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let r = c.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if c[i] < n - r + i {
            c[i] += 1;
            for j in i + 1..r {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Default)]
pub struct PartitionReport {
    pub samples: usize,
    pub h1_count: usize,
    pub h2_count: usize,
    pub h3_count: usize,
    pub violations: usize,
    /// Worst (smallest) margin by which each region cleared its bound.
    pub h1_min_margin: f64,
    pub h2_min_margin: f64,
    pub h3_min_margin: f64,
}

/// Checks the region bounds of the expected landscape on the given sphere
/// samples (pattern frame, f = delta):
///   H1: min tangent curvature >= nθ(1-3θ)(1 - 24·sqrt(rho))
///   H2: min tangent curvature <= -nθ(1-3θ)(2 - 24·sqrt(rho))/r
///   H3: ‖E rgrad‖ >= θ(1-3θ)ρ²/n
pub fn verify_partition_bounds(
    samples: &[Vec<f64>],
    params: &LandscapeParams,
) -> Result<PartitionReport> {
    let n = params.n;
    let coeff = params.coefficient();
    let sq = params.rho.sqrt();
    let h3_bound = params.theta * (1.0 - 3.0 * params.theta) * params.rho * params.rho / n as f64;

    let mut report = PartitionReport {
        h1_min_margin: f64::INFINITY,
        h2_min_margin: f64::INFINITY,
        h3_min_margin: f64::INFINITY,
        ..Default::default()
    };
    for h in samples {
        if h.len() != n {
            return Err(Error::invalid("samples", "sample dimension mismatch"));
        }
        report.samples += 1;
        match classify_pattern(h, params)? {
            Region::H1 => {
                report.h1_count += 1;
                let (lambda, _) = min_tangent_eig(&expected_rhess(h, n, params.theta), h);
                let bound = coeff * (1.0 - 24.0 * sq);
                let margin = lambda - bound;
                report.h1_min_margin = report.h1_min_margin.min(margin);
                if margin < 0.0 {
                    report.violations += 1;
                }
            }
            Region::H2 { r } => {
                report.h2_count += 1;
                let (lambda, _) = min_tangent_eig(&expected_rhess(h, n, params.theta), h);
                let bound = -coeff * (2.0 - 24.0 * sq) / r as f64;
                let margin = bound - lambda;
                report.h2_min_margin = report.h2_min_margin.min(margin);
                if margin < 0.0 {
                    report.violations += 1;
                }
            }
            Region::H3 => {
                report.h3_count += 1;
                let gn = expected_rgrad_norm(h, n, params.theta);
                let margin = gn - h3_bound;
                report.h3_min_margin = report.h3_min_margin.min(margin);
                if margin < 0.0 {
                    report.violations += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Region-sweep export for external reproduction of the sphere plots:
/// one row per sample, `h_0,…,h_{n-1},label,min_curvature,grad_norm`.
pub fn region_sweep_csv(samples: &[Vec<f64>], params: &LandscapeParams) -> Result<String> {
    let n = params.n;
    let mut out = String::new();
    for k in 0..n {
        out.push_str(&format!("h_{k},"));
    }
    out.push_str("label,min_curvature,grad_norm\n");
    for h in samples {
        if h.len() != n {
            return Err(Error::invalid("samples", "sample dimension mismatch"));
        }
        let label = match classify_pattern(h, params)? {
            Region::H1 => "H1".to_string(),
            Region::H2 { r } => format!("H2r{r}"),
            Region::H3 => "H3".to_string(),
        };
        let (curv, _) = min_tangent_eig(&expected_rhess(h, n, params.theta), h);
        let grad = expected_rgrad_norm(h, n, params.theta);
        for v in h {
            out.push_str(&format!("{v:.17e},"));
        }
        out.push_str(&format!("{label},{curv:.17e},{grad:.17e}\n"));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub channels: usize,
    /// ‖mean sample rgrad - E rgrad‖ / ‖E rgrad‖.
    pub gradient_rel_deviation: f64,
    /// Tangent-restricted spectral deviation of the mean sample Riemannian
    /// Hessian from the closed form, relative.
    pub hessian_rel_deviation: f64,
    /// ‖mean unprojected gradient - closed form‖ / ‖closed form‖.
    pub euclidean_grad_rel_deviation: f64,
    /// Norm of the mean Riemannian gradient (for the degenerate θ = 1/3
    /// check) and its standard error.
    pub rgrad_mean_norm: f64,
    pub rgrad_standard_error: f64,
}

/// Reference iterate on S^7 with a large closed-form gradient norm relative
/// to the sampling noise of the Monte-Carlo estimator. Relative-deviation
/// checks are meaningless near stationary points, where the closed-form
/// denominator vanishes.
pub fn high_signal_iterate() -> Vec<f64> {
    let raw = [-0.157, -0.889, 0.181, -0.182, -0.200, 0.133, 0.145, 0.202];
    let n = scalar::norm(&raw);
    raw.iter().map(|v| v / n).collect()
}

/// Draws Bernoulli-Rademacher channels with f = delta, averages the sample
/// Riemannian gradients and Hessians of the unpreconditioned objective at
/// `h`, and reports deviations from the closed forms. Dense and small-n.
pub fn monte_carlo_expectation_check(
    h: &[f64],
    n: usize,
    theta: f64,
    num_channels: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    check_unit(h)?;
    if h.len() != n || n > DENSE_CAP {
        return Err(Error::invalid("n", "dimension mismatch or above dense cap"));
    }
    let mut grad_sum = vec![0.0_f64; n];
    let mut grad_sq_sum = vec![0.0_f64; n];
    let mut hess_sum = DMatrix::<f64>::zeros(n, n);

    // per-channel: v = C_x h, grad = C_x^T(-v^3), hess = C_x^T diag(-3v²) C_x
    let mut cx = DMatrix::<f64>::zeros(n, n);
    for i in 0..num_channels {
        let mut rng = rng_from(&[seed, 2, i as u64]);
        use rand::Rng;
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                if u < theta / 2.0 {
                    1.0
                } else if u < theta {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        for col in 0..n {
            for row in 0..n {
                cx[(row, col)] = x[(row + n - col) % n];
            }
        }
        let hv = DVector::from_column_slice(h);
        let v = &cx * &hv;
        let w = DVector::from_iterator(n, v.iter().map(|&t| -t * t * t));
        let g = cx.transpose() * w;
        for k in 0..n {
            grad_sum[k] += g[k];
            grad_sq_sum[k] += g[k] * g[k];
        }
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            v.iter().map(|&t| -3.0 * t * t),
        ));
        hess_sum += cx.transpose() * d * &cx;
    }

    let k = num_channels as f64;
    let grad_mean: Vec<f64> = grad_sum.iter().map(|g| g / k).collect();
    let hess_mean = hess_sum / k;

    // Riemannian projections of the means
    let rgrad_mean = scalar::project_tangent(h, &grad_mean);
    let expected = expected_rgrad(h, n, theta);
    let expected_norm = scalar::norm(&expected);
    let gradient_rel_deviation = if expected_norm > 0.0 {
        scalar::norm(&scalar::sub(&rgrad_mean, &expected)) / expected_norm
    } else {
        scalar::norm(&rgrad_mean)
    };

    let expected_euc = expected_euclidean_grad(h, n, theta);
    let euclidean_grad_rel_deviation = scalar::norm(&scalar::sub(&grad_mean, &expected_euc))
        / scalar::norm(&expected_euc);

    // mean sample Riemannian Hessian: P H P - <grad, h>·P
    let hv = DVector::from_column_slice(h);
    let proj = DMatrix::<f64>::identity(n, n) - &hv * hv.transpose();
    let gdh: f64 = scalar::dot_re(&grad_mean, h);
    let rhess_mean = &proj * hess_mean * &proj - proj.clone() * gdh;

    // compare quadratic forms on the tangent space, where both agree in
    // expectation
    let b = tangent_basis(h);
    let reduced_mc = b.transpose() * rhess_mean * &b;
    let reduced_cf = b.transpose() * expected_rhess(h, n, theta) * &b;
    let diff = &reduced_mc - &reduced_cf;
    let spectral = |m: &DMatrix<f64>| -> f64 {
        let sym = (m + m.transpose()) * 0.5;
        SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    };
    let hessian_rel_deviation = spectral(&diff) / spectral(&reduced_cf).max(1e-300);

    // standard error of the mean gradient norm (componentwise variances)
    let var_sum: f64 = grad_sq_sum
        .iter()
        .zip(&grad_sum)
        .map(|(sq, s)| (sq / k - (s / k) * (s / k)).max(0.0))
        .sum();
    let rgrad_standard_error = (var_sum / k).sqrt();

    Ok(MonteCarloReport {
        channels: num_channels,
        gradient_rel_deviation,
        hessian_rel_deviation,
        euclidean_grad_rel_deviation,
        rgrad_mean_norm: scalar::norm(&rgrad_mean),
        rgrad_standard_error,
    })
}
