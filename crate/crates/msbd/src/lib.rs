//! Multichannel sparse blind deconvolution (MSBD) on the unit sphere.
//!
//! Given N circular convolutions `y_i = x_i ⊛ f` of an unknown invertible
//! signal `f` with unknown sparse channels `x_i`, this crate recovers both by
//! minimizing a negative-ℓ4 objective over the sphere with (perturbed)
//! manifold gradient descent. The observations are whitened per frequency by
//! a circulant preconditioner so that local minima of the objective line up
//! with signed circular shifts of the inverse filter.
//!
//! Layout:
//! - [`fourier`]: DFT, circular convolution and circulant algebra on 1-D/2-D lattices
//! - [`synth`]: ground-truth and observation generators for every experiment regime
//! - [`precond`]: the Fourier-diagonal whitening operator
//! - [`objective`]: objective value, Riemannian gradient, Hessian-vector products
//! - [`optimize`]: manifold gradient descent and its perturbed variant
//! - [`recovery`]: signal/channel reconstruction, alignment and success metrics
//! - [`landscape`]: closed-form expected landscape and region classification
//! - [`io`]: instance/trace/grid serialization (MSBD1 container, CSV, PGM)

pub mod error;
pub mod fourier;
pub mod io;
pub mod landscape;
pub mod objective;
pub mod optimize;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod precond;
pub mod recovery;
pub mod rng;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use fourier::{Lattice, Spectrum};
pub use scalar::{Field, Scalar};
