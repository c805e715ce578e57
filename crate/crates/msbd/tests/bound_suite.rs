//! Spectral and Lipschitz bounds of the objective on Bernoulli-Rademacher
//! data: the objective lies in [-4n³, 0], the gradient norm below 16n³,
//! Riemannian-Hessian Rayleigh quotients within 64n³, and the Riemannian
//! gradient is 64n³-Lipschitz. The bounds presume the whitened channel
//! operator stays below norm 2, which holds at N >= 4n on every seed
//! sampled here.

use msbd::fourier::Lattice;
use msbd::objective::Problem;
use msbd::optimize::random_sphere_init;
use msbd::precond::build_preconditioner;
use msbd::scalar::{self, Scalar};
use msbd::synth::{observe, GroundTruth, NoiseSpec};

fn problem(n: usize, channels: usize, theta: f64, seed: u64) -> Problem<f64> {
    let lat = Lattice::line(n).unwrap();
    let gt = GroundTruth::gaussian_bernoulli(&lat, channels, theta, seed).unwrap();
    let obs = observe(&gt, &NoiseSpec::none(), seed).unwrap();
    let pre = build_preconditioner(&obs, theta).unwrap();
    Problem::new(&obs, &pre).unwrap()
}

#[test]
fn objective_gradient_and_curvature_bounds() {
    let n = 8usize;
    let cube = (n as f64).powi(3);
    for seed in 0..10 {
        let prob = problem(n, 4 * n, 0.2, seed);
        for hseed in 0..10 {
            let h = random_sphere_init::<f64>(prob.lattice(), hseed).unwrap();
            let ev = prob.eval(&h).unwrap();
            assert!(ev.value <= 0.0, "L > 0: {}", ev.value);
            assert!(ev.value >= -4.0 * cube, "L below -4n³: {}", ev.value);

            // unprojected gradient = rgrad + <grad,h>·h
            let grad = scalar::axpy(&ev.rgrad, ev.grad_dot_h, h.as_slice());
            assert!(
                scalar::norm(&grad) <= 16.0 * cube,
                "gradient norm {} above 16n³",
                scalar::norm(&grad)
            );

            let mut rng = msbd::rng::rng(hseed ^ 0xABCD);
            for _ in 0..5 {
                let z: Vec<f64> = (0..n).map(|_| f64::sample_standard(&mut rng)).collect();
                let z = scalar::project_tangent(h.as_slice(), &z);
                let z = scalar::scale(&z, 1.0 / scalar::norm(&z));
                let hz = prob.hvp(&ev, &z).unwrap();
                let rayleigh = scalar::dot_re(&z, &hz);
                assert!(
                    rayleigh.abs() <= 64.0 * cube,
                    "Rayleigh quotient {rayleigh} above 64n³"
                );
            }
        }
    }
}

#[test]
fn riemannian_gradient_is_lipschitz() {
    let n = 8usize;
    let bound = 64.0 * (n as f64).powi(3);
    let prob = problem(n, 4 * n, 0.2, 3);
    for pair in 0..100u64 {
        let a = random_sphere_init::<f64>(prob.lattice(), 2 * pair).unwrap();
        let b = random_sphere_init::<f64>(prob.lattice(), 2 * pair + 1).unwrap();
        let ga = prob.eval(&a).unwrap().rgrad;
        let gb = prob.eval(&b).unwrap().rgrad;
        let num = scalar::norm(&scalar::sub(&ga, &gb));
        let den = scalar::norm(&scalar::sub(a.as_slice(), b.as_slice()));
        assert!(num <= bound * den, "Lipschitz ratio {} above 64n³", num / den);
    }
}
