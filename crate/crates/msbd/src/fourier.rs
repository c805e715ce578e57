//! Circular-convolution and circulant-matrix algebra over 1-D and 2-D
//! lattices via the DFT.
//!
//! Conventions, fixed here for the whole crate:
//! - indices are 0-based everywhere; a circular shift by `j` maps entry `k`
//!   to entry `(k + j) mod n`, i.e. `shift(x, j)[k] = x[(k - j) mod n]`
//! - forward DFT is unnormalized, the inverse carries the `1/n` factor, so
//!   `dft(circ_conv(x, h)) = dft(x) ⊙ dft(h)` without extra constants
//! - 2-D arrays are row-major over `dims = [rows, cols]`, and the 2-D DFT is
//!   the separable row/column transform
//!
//! Transforms run through `rustfft` (mixed radix, arbitrary lengths); plans
//! are cached per thread so concurrent callers never share mutable state.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Signal domain: 1-D of length n, or a 2-D rows×cols grid.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Lattice {
    dims: Vec<usize>,
}

impl Lattice {
    pub fn line(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("need n >= 2, got {n}")));
        }
        Ok(Lattice { dims: vec![n] })
    }

    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows < 1 || cols < 1 || rows * cols < 2 {
            return Err(Error::invalid(
                "dims",
                format!("need rows, cols >= 1 and rows*cols >= 2, got {rows}x{cols}"),
            ));
        }
        Ok(Lattice {
            dims: vec![rows, cols],
        })
    }

    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        match dims {
            [n] => Lattice::line(*n),
            [r, c] => Lattice::grid(*r, *c),
            _ => Err(Error::invalid(
                "dims",
                format!("only 1-D and 2-D lattices are supported, got {} dims", dims.len()),
            )),
        }
    }

    /// Total number of samples.
    pub fn n(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn is_1d(&self) -> bool {
        self.dims.len() == 1
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::invalid(
                "array",
                format!("length {len} does not match lattice {self}"),
            ));
        }
        Ok(())
    }

    pub fn check_same(&self, other: &Lattice) -> Result<()> {
        if self != other {
            return Err(Error::LatticeMismatch(self.clone(), other.clone()));
        }
        Ok(())
    }

    /// Per-axis offsets of the flat index `j`, so that a delta at flat
    /// position `j` convolves as a shift by these offsets.
    pub fn offsets_of_flat(&self, j: usize) -> Vec<i64> {
        match self.dims[..] {
            [_] => vec![j as i64],
            [_, c] => vec![(j / c) as i64, (j % c) as i64],
            _ => unreachable!(),
        }
    }
}

impl std::fmt::Display for Lattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// DFT coefficients of an array over its lattice.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<Complex64>,
    pub lat: Lattice,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// In-place transform of a row-major buffer along every lattice axis.
/// The inverse direction is unnormalized here; callers divide by n.
fn transform_in_place(buf: &mut [Complex64], lat: &Lattice, forward: bool) {
    match lat.dims[..] {
        [n] => plan(n, forward).process(buf),
        [rows, cols] => {
            let row_fft = plan(cols, forward);
            for r in 0..rows {
                row_fft.process(&mut buf[r * cols..(r + 1) * cols]);
            }
            let col_fft = plan(rows, forward);
            let mut col = vec![Complex64::new(0.0, 0.0); rows];
            for c in 0..cols {
                for r in 0..rows {
                    col[r] = buf[r * cols + c];
                }
                col_fft.process(&mut col);
                for r in 0..rows {
                    buf[r * cols + c] = col[r];
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Unnormalized forward DFT.
pub fn dft<S: Scalar>(x: &[S], lat: &Lattice) -> Result<Spectrum> {
    lat.check_len(x.len())?;
    let mut values: Vec<Complex64> = x.iter().map(|&v| v.to_complex()).collect();
    transform_in_place(&mut values, lat, true);
    Ok(Spectrum {
        values,
        lat: lat.clone(),
    })
}

/// Inverse DFT with 1/n normalization.
pub fn idft(s: &Spectrum) -> Vec<Complex64> {
    let mut buf = s.values.clone();
    transform_in_place(&mut buf, &s.lat, false);
    let scale = 1.0 / s.lat.n() as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Inverse DFT of a (conjugate-symmetric) spectrum, with an explicit check
/// that the imaginary residual is below 1e-9·‖s‖.
pub fn idft_real(s: &Spectrum) -> Result<Vec<f64>> {
    let full = idft(s);
    let imag_norm = full.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    let spec_norm = s.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let bound = 1e-9 * spec_norm;
    if imag_norm > bound {
        return Err(Error::ImaginaryResidual {
            residual: imag_norm,
            bound,
        });
    }
    Ok(full.into_iter().map(|v| v.re).collect())
}

/// Inverse DFT converted back to the pipeline's sample type. The real field
/// drops the imaginary part, which is structurally negligible whenever every
/// spectral factor came from real data.
pub(crate) fn idft_to<S: Scalar>(s: &Spectrum) -> Vec<S> {
    let full = idft(s);
    #[cfg(debug_assertions)]
    if S::FIELD == crate::scalar::Field::Real {
        let imag: f64 = full.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
        let total: f64 = full.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        debug_assert!(
            imag <= 1e-7 * total.max(1e-300),
            "imaginary residual {imag:.3e} on a real pipeline (norm {total:.3e})"
        );
    }
    full.into_iter().map(S::from_complex).collect()
}

/// Circular convolution `x ⊛ h`, computed via the FFT.
pub fn circ_conv<S: Scalar>(x: &[S], h: &[S], lat: &Lattice) -> Result<Vec<S>> {
    lat.check_len(x.len())?;
    lat.check_len(h.len())?;
    let mut xs = dft(x, lat)?;
    let hs = dft(h, lat)?;
    for (a, b) in xs.values.iter_mut().zip(&hs.values) {
        *a *= *b;
    }
    Ok(idft_to::<S>(&xs))
}

/// Applies the circulant matrix of `x`: `C_x h`, or its adjoint `C_x^T h`
/// (`C_x^H h` over the complex field). The adjoint conjugates `dft(x)`.
pub fn circulant_apply<S: Scalar>(x: &[S], h: &[S], lat: &Lattice, adjoint: bool) -> Result<Vec<S>> {
    lat.check_len(x.len())?;
    lat.check_len(h.len())?;
    let xs = dft(x, lat)?;
    let mut hs = dft(h, lat)?;
    if adjoint {
        for (a, b) in hs.values.iter_mut().zip(&xs.values) {
            *a *= b.conj();
        }
    } else {
        for (a, b) in hs.values.iter_mut().zip(&xs.values) {
            *a *= *b;
        }
    }
    Ok(idft_to::<S>(&hs))
}

/// Circular shift by per-axis offsets: `out[k] = x[k - offset]` with indices
/// wrapped per axis. A 1-D shift by `j` equals convolution with a delta at
/// position `j`.
pub fn circ_shift<S: Scalar>(x: &[S], lat: &Lattice, offsets: &[i64]) -> Result<Vec<S>> {
    lat.check_len(x.len())?;
    if offsets.len() != lat.dims.len() {
        return Err(Error::invalid(
            "offsets",
            format!(
                "expected {} per-axis offsets for lattice {lat}, got {}",
                lat.dims.len(),
                offsets.len()
            ),
        ));
    }
    let wrap = |k: i64, d: usize| -> usize {
        let d = d as i64;
        (((k % d) + d) % d) as usize
    };
    let mut out = vec![S::zero(); x.len()];
    match lat.dims[..] {
        [n] => {
            for (k, slot) in out.iter_mut().enumerate() {
                *slot = x[wrap(k as i64 - offsets[0], n)];
            }
        }
        [rows, cols] => {
            for r in 0..rows {
                let sr = wrap(r as i64 - offsets[0], rows);
                for c in 0..cols {
                    let sc = wrap(c as i64 - offsets[1], cols);
                    out[r * cols + c] = x[sr * cols + sc];
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}

/// Circular shift by the multi-index of a flat lattice position, the shift a
/// delta at that position realizes under convolution.
pub fn circ_shift_flat<S: Scalar>(x: &[S], lat: &Lattice, j: i64) -> Result<Vec<S>> {
    let n = lat.n() as i64;
    let j = ((j % n) + n) % n;
    let offsets = lat.offsets_of_flat(j as usize);
    circ_shift(x, lat, &offsets)
}

/// Unit vector with a one at flat position `j`.
pub fn delta<S: Scalar>(lat: &Lattice, j: usize) -> Vec<S> {
    let mut e = vec![S::zero(); lat.n()];
    e[j] = S::from_re(1.0);
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lat(n: usize) -> Lattice {
        Lattice::line(n).unwrap()
    }

    #[test]
    fn delta_transforms_to_constant() {
        let l = lat(5);
        let s = dft::<f64>(&delta(&l, 0), &l).unwrap();
        for v in &s.values {
            assert_relative_eq!(v.re, 1.0, max_relative = 1e-12);
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_transforms_to_dc() {
        let l = lat(4);
        let s = dft::<f64>(&[1.0; 4], &l).unwrap();
        assert_relative_eq!(s.values[0].re, 4.0, max_relative = 1e-12);
        for v in &s.values[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn idft_of_ones_is_delta() {
        let l = lat(6);
        let s = Spectrum {
            values: vec![Complex64::new(1.0, 0.0); 6],
            lat: l.clone(),
        };
        let x = idft_real(&s).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-12);
        for v in &x[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn conv_identity_element() {
        let l = lat(7);
        let x: Vec<f64> = (0..7).map(|i| (i as f64).sin() + 0.3).collect();
        let out = circ_conv(&x, &delta(&l, 0), &l).unwrap();
        for (a, b) in out.iter().zip(&x) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn shift_composition_via_deltas() {
        // delta_1 ⊛ delta_1 = delta_2 on n = 4
        let l = lat(4);
        let out = circ_conv::<f64>(&delta(&l, 1), &delta(&l, 1), &l).unwrap();
        for (k, v) in out.iter().enumerate() {
            let want = if k == 2 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "slot {k}: {v}");
        }
    }

    #[test]
    fn adjoint_with_delta_reverses() {
        // first row of a circulant is the time-reversed first column
        let l = lat(5);
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let out = circulant_apply(&x, &delta(&l, 0), &l, true).unwrap();
        let want = [1.0, 5.0, 4.0, 3.0, 2.0];
        for (a, b) in out.iter().zip(&want) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn plain_apply_equals_conv() {
        let l = lat(6);
        let x: Vec<f64> = (0..6).map(|i| (i as f64) * 0.7 - 2.0).collect();
        let h: Vec<f64> = (0..6).map(|i| ((i * i) as f64).cos()).collect();
        let a = circulant_apply(&x, &h, &l, false).unwrap();
        let b = circ_conv(&x, &h, &l).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_relative_eq!(u, v, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn shift_basics() {
        let l = lat(4);
        let x = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(circ_shift(&x, &l, &[0]).unwrap(), x);
        let e2 = circ_shift::<f64>(&delta(&l, 0), &l, &[1]).unwrap();
        assert_eq!(e2, delta::<f64>(&l, 1));
    }

    #[test]
    fn shift_matches_delta_convolution() {
        let l = lat(9);
        let x: Vec<f64> = (0..9).map(|i| (i as f64).exp().fract()).collect();
        for j in 0..9 {
            let a = circ_shift_flat(&x, &l, j as i64).unwrap();
            let b = circ_conv(&x, &delta(&l, j), &l).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert_relative_eq!(u, v, max_relative = 1e-10, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn lattice_mismatch_is_rejected() {
        let l4 = lat(4);
        let x = vec![0.0_f64; 5];
        assert!(dft(&x, &l4).is_err());
        let y = vec![0.0_f64; 4];
        assert!(circ_conv(&x, &y, &l4).is_err());
    }

    #[test]
    fn grid_shift_per_axis() {
        let l = Lattice::grid(2, 3).unwrap();
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let s = circ_shift(&x, &l, &[1, 2]).unwrap();
        // row r, col c takes from row r-1, col c-2 (wrapped)
        assert_eq!(s, vec![5.0, 6.0, 4.0, 2.0, 3.0, 1.0]);
    }
}
