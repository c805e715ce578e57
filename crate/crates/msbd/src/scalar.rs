//! Field abstraction over the real and complex sample types.
//!
//! The complex formulation treats `C^n` as `R^{2n}`: the quartic penalty,
//! its gradient and curvature kernels act on real and imaginary parts
//! separately, and the sphere geometry uses the real inner product
//! `Re<a, b>`. With a zero imaginary part every operation reduces exactly to
//! its real-field counterpart, which the tests rely on.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Field::Real => write!(f, "real"),
            Field::Complex => write!(f, "complex"),
        }
    }
}

pub trait Scalar:
    Copy
    + Clone
    + PartialEq
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Neg<Output = Self>
{
    const FIELD: Field;

    fn zero() -> Self;
    fn from_re(re: f64) -> Self;
    /// Conversion at the inverse-FFT boundary. For the real field this takes
    /// the real part; callers are responsible for the imaginary residual.
    fn from_complex(z: Complex64) -> Self;
    fn to_complex(self) -> Complex64;
    fn re(self) -> f64;
    fn scale(self, a: f64) -> Self;
    /// Squared modulus |v|² = re² + im².
    fn sq_modulus(self) -> f64;
    /// Quartic penalty density: re⁴ + im⁴.
    fn quartic(self) -> f64;
    /// Componentwise cube, re³ + i·im³ (the negated penalty gradient kernel).
    fn cubed_parts(self) -> Self;
    /// Curvature kernel: re(v)²·re(u) + i·im(v)²·im(u).
    fn curv_parts(self, u: Self) -> Self;
    /// Real inner-product kernel Re(conj(a)·b).
    fn dot_re(a: Self, b: Self) -> f64;
    /// Standard-normal draw per real degree of freedom (used for sphere
    /// initialization, where the overall scale cancels).
    fn sample_standard<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Unit-variance noise draw: N(0,1) for real, CN(0,1) for complex.
    fn sample_noise_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    const FIELD: Field = Field::Real;

    fn zero() -> Self {
        0.0
    }
    fn from_re(re: f64) -> Self {
        re
    }
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn re(self) -> f64 {
        self
    }
    fn scale(self, a: f64) -> Self {
        self * a
    }
    fn sq_modulus(self) -> f64 {
        self * self
    }
    fn quartic(self) -> f64 {
        let s = self * self;
        s * s
    }
    fn cubed_parts(self) -> Self {
        self * self * self
    }
    fn curv_parts(self, u: Self) -> Self {
        self * self * u
    }
    fn dot_re(a: Self, b: Self) -> f64 {
        a * b
    }
    fn sample_standard<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
    fn sample_noise_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for Complex64 {
    const FIELD: Field = Field::Complex;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_re(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }
    fn from_complex(z: Complex64) -> Self {
        z
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn re(self) -> f64 {
        self.re
    }
    fn scale(self, a: f64) -> Self {
        Complex64::new(self.re * a, self.im * a)
    }
    fn sq_modulus(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    fn quartic(self) -> f64 {
        let r = self.re * self.re;
        let i = self.im * self.im;
        r * r + i * i
    }
    fn cubed_parts(self) -> Self {
        Complex64::new(self.re * self.re * self.re, self.im * self.im * self.im)
    }
    fn curv_parts(self, u: Self) -> Self {
        Complex64::new(self.re * self.re * u.re, self.im * self.im * u.im)
    }
    fn dot_re(a: Self, b: Self) -> f64 {
        a.re * b.re + a.im * b.im
    }
    fn sample_standard<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    }
    fn sample_noise_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im).scale(std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// Re Σ conj(a_j)·b_j.
pub fn dot_re<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| S::dot_re(x, y)).sum()
}

/// Euclidean norm, treating complex entries as pairs of reals.
pub fn norm<S: Scalar>(a: &[S]) -> f64 {
    a.iter().map(|&x| x.sq_modulus()).sum::<f64>().sqrt()
}

pub fn norm_inf<S: Scalar>(a: &[S]) -> f64 {
    a.iter()
        .map(|&x| x.sq_modulus().sqrt())
        .fold(0.0, f64::max)
}

/// out = a + s·b
pub fn axpy<S: Scalar>(a: &[S], s: f64, b: &[S]) -> Vec<S> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x + y.scale(s)).collect()
}

pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<S: Scalar>(a: &[S], s: f64) -> Vec<S> {
    a.iter().map(|&x| x.scale(s)).collect()
}

/// Projection onto the tangent space of the sphere at `h`: z - Re<h,z>·h.
pub fn project_tangent<S: Scalar>(h: &[S], z: &[S]) -> Vec<S> {
    let c = dot_re(h, z);
    axpy(z, -c, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_kernels_reduce_to_real() {
        let v = Complex64::new(-1.7, 0.0);
        let u = Complex64::new(0.3, 0.0);
        assert_eq!(v.quartic(), (-1.7f64).quartic());
        assert_eq!(v.cubed_parts().re, (-1.7f64).cubed_parts());
        assert_eq!(v.curv_parts(u).re, (-1.7f64).curv_parts(0.3));
        assert_eq!(Complex64::dot_re(v, u), f64::dot_re(-1.7, 0.3));
    }

    #[test]
    fn tangent_projection_is_orthogonal() {
        let h = vec![0.6, 0.8];
        let z = vec![1.0, -2.0];
        let p = project_tangent(&h, &z);
        assert!(dot_re(&h, &p).abs() < 1e-15);
    }
}
