//! Tube-wise DFT and the Fourier-domain t-product.
//!
//! The transform is the unnormalized DFT `sqrt(n) * F_n` applied to every tube
//! fiber, with `F_n` the unitary DFT matrix (kernel `exp(-2 pi i jk / n)`). The
//! inverse divides by `n`. Arbitrary lengths are supported; the planner picks
//! mixed-radix, Rader or Bluestein as appropriate, and `n = 1` is the identity.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::TensorError;
use crate::tensor::{require_tprod_dims, Tensor3};

/// Relative bound on the imaginary residue left after an inverse transform.
pub const IMAG_RTOL: f64 = 1e-10;

/// Fraction of the operand scale admitted as an absolute residue floor, so that
/// products which cancel to (near) zero do not trip the relative check.
const IMAG_SCALE_FLOOR: f64 = 1e-4;

const POWER_ITER_RTOL: f64 = 1e-10;
const POWER_ITER_MAX: usize = 20_000;

/// Forward/inverse DFT plans for one tube length, applied to contiguous runs
/// of tubes.
#[derive(Clone)]
pub struct TubeFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for TubeFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TubeFft").field("n", &self.n).finish()
    }
}

impl TubeFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform of every length-`n` chunk of `buf`.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len() % self.n, 0);
        if self.n > 1 && !buf.is_empty() {
            self.forward.process_with_scratch(buf, &mut self.scratch);
        }
    }

    /// In-place inverse transform (including the `1/n` factor) of every chunk.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len() % self.n, 0);
        if self.n > 1 && !buf.is_empty() {
            self.inverse.process_with_scratch(buf, &mut self.scratch);
            let s = 1.0 / self.n as f64;
            for v in buf.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Transforms real tubes `src` into `dst` (resized to match).
    pub fn forward_real(&mut self, src: &[f64], dst: &mut Vec<Complex64>) {
        dst.clear();
        dst.extend(src.iter().map(|&v| Complex64::new(v, 0.0)));
        self.forward(dst);
    }
}

/// Tube-wise DFT of a real tensor, with cached squared norms of each Fourier
/// frontal slice.
#[derive(Clone, Debug)]
pub struct FourierTensor3 {
    dims: (usize, usize, usize),
    data: Vec<Complex64>,
    slice_sq_norms: Vec<f64>,
}

impl FourierTensor3 {
    pub(crate) fn from_parts(dims: (usize, usize, usize), data: Vec<Complex64>) -> Self {
        let n = dims.2;
        let mut slice_sq_norms = vec![0.0; n];
        for tube in data.chunks_exact(n) {
            for (acc, v) in slice_sq_norms.iter_mut().zip(tube) {
                *acc += v.norm_sqr();
            }
        }
        Self {
            dims,
            data,
            slice_sq_norms,
        }
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `||A_hat_k||_F^2` for each Fourier frontal slice `k`.
    pub fn slice_sq_norms(&self) -> &[f64] {
        &self.slice_sq_norms
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> Complex64 {
        let (_, l, n) = self.dims;
        self.data[(i * l + j) * n + k]
    }

    /// Contiguous data of Fourier row slice `i` (`l * n` values).
    #[inline]
    pub fn row_slice_data(&self, i: usize) -> &[Complex64] {
        let (_, l, n) = self.dims;
        &self.data[i * l * n..(i + 1) * l * n]
    }

    /// `||(A_hat_{i::})_k||_F^2` for each frequency `k` of row slice `i`.
    pub fn row_slice_sq_norms(&self, i: usize) -> Vec<f64> {
        let n = self.dims.2;
        let mut out = vec![0.0; n];
        for tube in self.row_slice_data(i).chunks_exact(n) {
            for (acc, v) in out.iter_mut().zip(tube) {
                *acc += v.norm_sqr();
            }
        }
        out
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.slice_sq_norms.iter().sum()
    }

    /// Fourier frontal slice `k` as a row-major `m x l` buffer.
    pub fn frontal_slice(&self, k: usize) -> Vec<Complex64> {
        let (m, l, _) = self.dims;
        let mut out = Vec::with_capacity(m * l);
        for i in 0..m {
            for j in 0..l {
                out.push(self.at(i, j, k));
            }
        }
        out
    }

    /// Spectral norm of Fourier frontal slice `k`.
    pub fn slice_spectral_norm(&self, k: usize) -> f64 {
        let (m, l, _) = self.dims;
        spectral_norm(&self.frontal_slice(k), m, l)
    }
}

pub fn dft_tubes(t: &Tensor3) -> FourierTensor3 {
    let mut fft = TubeFft::new(t.dims().2);
    dft_tubes_with(&mut fft, t)
}

pub fn dft_tubes_with(fft: &mut TubeFft, t: &Tensor3) -> FourierTensor3 {
    let mut data = Vec::with_capacity(t.len());
    fft.forward_real(t.as_slice(), &mut data);
    FourierTensor3::from_parts(t.dims(), data)
}

pub fn idft_tubes(f: &FourierTensor3) -> Result<Tensor3, TensorError> {
    let mut fft = TubeFft::new(f.dims.2);
    let mut buf = f.data.clone();
    fft.inverse(&mut buf);
    let scale = (f.frob_norm_sq() / f.dims.2 as f64).sqrt();
    let data = real_part_checked(&buf, scale)?;
    let (m, l, n) = f.dims;
    Tensor3::from_vec(m, l, n, data)
}

/// Drops the imaginary part after verifying it is numerically negligible
/// relative to the result (with an absolute floor tied to `operand_scale`).
pub fn real_part_checked(buf: &[Complex64], operand_scale: f64) -> Result<Vec<f64>, TensorError> {
    let mut re_sq = 0.0;
    let mut im_sq = 0.0;
    let out = buf
        .iter()
        .map(|v| {
            re_sq += v.re * v.re;
            im_sq += v.im * v.im;
            v.re
        })
        .collect();
    let residue = im_sq.sqrt();
    let tolerance = IMAG_RTOL * (re_sq.sqrt() + IMAG_SCALE_FLOOR * operand_scale);
    if residue > tolerance {
        return Err(TensorError::ImaginaryResidue { residue, tolerance });
    }
    Ok(out)
}

/// Slice-wise products `C_hat_k = A_hat_k X_hat_k` in tube-contiguous layout.
///
/// `a` is `m x l x n`, `x` is `l x p x n`; the result is `m x p x n`.
pub(crate) fn fourier_product(
    a: &[Complex64],
    (m, l, n): (usize, usize, usize),
    x: &[Complex64],
    p: usize,
    out: &mut Vec<Complex64>,
) {
    out.clear();
    out.resize(m * p * n, Complex64::default());
    for i in 0..m {
        let out_row = &mut out[i * p * n..(i + 1) * p * n];
        for c in 0..l {
            let a_tube = &a[(i * l + c) * n..(i * l + c + 1) * n];
            let x_row = &x[c * p * n..(c + 1) * p * n];
            for (out_tube, x_tube) in out_row.chunks_exact_mut(n).zip(x_row.chunks_exact(n)) {
                for ((o, &av), &xv) in out_tube.iter_mut().zip(a_tube).zip(x_tube) {
                    *o += av * xv;
                }
            }
        }
    }
}

/// t-product through the Fourier domain, given the precomputed transform of `a`.
pub fn tprod_fft(a_hat: &FourierTensor3, x: &Tensor3) -> Result<Tensor3, TensorError> {
    let mut fft = TubeFft::new(a_hat.dims.2);
    tprod_fft_with(&mut fft, a_hat, x)
}

pub fn tprod_fft_with(fft: &mut TubeFft, a_hat: &FourierTensor3, x: &Tensor3) -> Result<Tensor3, TensorError> {
    let (m, l, n) = a_hat.dims;
    require_tprod_dims(a_hat.dims, x.dims())?;
    let p = x.dims().1;
    let mut x_hat = Vec::with_capacity(x.len());
    fft.forward_real(x.as_slice(), &mut x_hat);
    let mut prod = Vec::new();
    fourier_product(&a_hat.data, (m, l, n), &x_hat, p, &mut prod);
    fft.inverse(&mut prod);
    let scale = (a_hat.frob_norm_sq() / n as f64).sqrt() * x.frob_norm_sq().sqrt();
    let data = real_part_checked(&prod, scale)?;
    Tensor3::from_vec(m, p, n, data)
}

/// Largest singular value of a row-major `rows x cols` complex matrix by power
/// iteration on `M^H M`, stopped at relative change `1e-10` of the estimate.
///
/// Single-row or single-column inputs return the vector 2-norm directly.
pub fn spectral_norm(mat: &[Complex64], rows: usize, cols: usize) -> f64 {
    debug_assert_eq!(mat.len(), rows * cols);
    if rows == 1 || cols == 1 {
        return mat.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5eed);
    let mut v: Vec<Complex64> = (0..cols)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut mv = vec![Complex64::default(); rows];
    let mut sigma_sq = 0.0;
    for _ in 0..POWER_ITER_MAX {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|z| *z /= norm);
        for (r, out) in mv.iter_mut().enumerate() {
            *out = mat[r * cols..(r + 1) * cols].iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let next = mv.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for (c, out) in v.iter_mut().enumerate() {
            *out = (0..rows).map(|r| mat[r * cols + c].conj() * mv[r]).sum();
        }
        let converged = (next - sigma_sq).abs() <= POWER_ITER_RTOL * next;
        sigma_sq = next;
        if converged {
            break;
        }
    }
    sigma_sq.sqrt()
}
