//! Dense brute-force reference implementations for the test suites: direct
//! O(n²) DFT summation, explicit circulant matrices, the eigendecomposition
//! route to the preconditioner, and fully dense objective derivatives.
//!
//! Everything here deliberately avoids the FFT pipeline it is used to check.
//! Real field only; small n.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::fourier::Lattice;

/// Direct-summation DFT honoring the lattice shape.
pub fn direct_dft(x: &[Complex64], lat: &Lattice) -> Vec<Complex64> {
    let tau = -2.0 * std::f64::consts::PI;
    match lat.dims() {
        [n] => {
            let n = *n;
            (0..n)
                .map(|k| {
                    (0..n)
                        .map(|j| x[j] * Complex64::from_polar(1.0, tau * (j * k) as f64 / n as f64))
                        .sum()
                })
                .collect()
        }
        [rows, cols] => {
            let (r, c) = (*rows, *cols);
            let mut out = Vec::with_capacity(r * c);
            for k0 in 0..r {
                for k1 in 0..c {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j0 in 0..r {
                        for j1 in 0..c {
                            let phase = tau
                                * ((j0 * k0) as f64 / r as f64 + (j1 * k1) as f64 / c as f64);
                            acc += x[j0 * c + j1] * Complex64::from_polar(1.0, phase);
                        }
                    }
                    out.push(acc);
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

/// Wrapped difference of two flat indices, per axis.
fn wrap_sub(lat: &Lattice, a: usize, b: usize) -> usize {
    match lat.dims() {
        [n] => (a + n - b) % n,
        [rows, cols] => {
            let (ar, ac) = (a / cols, a % cols);
            let (br, bc) = (b / cols, b % cols);
            ((ar + rows - br) % rows) * cols + (ac + cols - bc) % cols
        }
        _ => unreachable!(),
    }
}

/// Explicit (multilevel) circulant matrix with first column `x`:
/// entry (j, k) = x[j - k mod dims].
pub fn dense_circulant(x: &[f64], lat: &Lattice) -> DMatrix<f64> {
    let n = lat.n();
    DMatrix::from_fn(n, n, |j, k| x[wrap_sub(lat, j, k)])
}

/// Dense circular convolution through the explicit circulant matrix.
pub fn dense_circ_conv(x: &[f64], h: &[f64], lat: &Lattice) -> Vec<f64> {
    let m = dense_circulant(x, lat);
    let v = &m * DVector::from_column_slice(h);
    v.iter().copied().collect()
}

/// Inverse matrix square root of a symmetric positive definite matrix via
/// eigendecomposition.
pub fn inverse_sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, v) in eig.eigenvalues.iter().enumerate() {
        assert!(*v > 0.0, "matrix is not positive definite (eigenvalue {v})");
        d[(k, k)] = v.powf(-0.5);
    }
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Dense preconditioner: ((1/(theta·n·N)) Σ C_{y_i}^T C_{y_i})^{-1/2}.
pub fn dense_preconditioner(ys: &[Vec<f64>], theta: f64, lat: &Lattice) -> DMatrix<f64> {
    let n = lat.n();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for y in ys {
        let c = dense_circulant(y, lat);
        gram += c.transpose() * c;
    }
    gram /= theta * n as f64 * ys.len() as f64;
    inverse_sqrt_spd(&gram)
}

/// Dense evaluation of the objective, Euclidean gradient, and the full
/// Riemannian Hessian, all from explicit matrices.
pub struct DenseEval {
    pub value: f64,
    pub euclidean_grad: DVector<f64>,
    pub rgrad: DVector<f64>,
    pub rhess: DMatrix<f64>,
}

pub fn dense_eval(ys: &[Vec<f64>], r: &DMatrix<f64>, h: &[f64], lat: &Lattice) -> DenseEval {
    let n = lat.n();
    let hv = DVector::from_column_slice(h);
    let channels = ys.len() as f64;

    let mut value = 0.0;
    let mut grad = DVector::<f64>::zeros(n);
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for y in ys {
        let cy = dense_circulant(y, lat);
        let a = &cy * r; // C_y R
        let v = &a * &hv;
        value += -0.25 * v.iter().map(|t| t * t * t * t).sum::<f64>();
        let w = DVector::from_iterator(n, v.iter().map(|&t| -t * t * t));
        grad += a.transpose() * w;
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            v.iter().map(|&t| -3.0 * t * t),
        ));
        hess += a.transpose() * d * a;
    }
    value /= channels;
    grad /= channels;
    hess /= channels;

    let proj = DMatrix::<f64>::identity(n, n) - &hv * hv.transpose();
    let rgrad = &proj * &grad;
    let gdh = grad.dot(&hv);
    let rhess = &proj * hess * &proj - proj * gdh;
    DenseEval {
        value,
        euclidean_grad: grad,
        rgrad,
        rhess,
    }
}

/// Smallest tangent-restricted eigenvalue of a dense symmetric form; re-uses
/// the landscape module's basis construction.
pub fn dense_min_tangent_eig(m: &DMatrix<f64>, h: &[f64]) -> (f64, Vec<f64>) {
    crate::landscape::min_tangent_eig(m, h)
}
