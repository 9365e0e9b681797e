//! Dense third-order tensors and the t-SVD machinery built on a DFT along
//! the third mode.
//!
//! A [`Tensor3`] of shape `n1 x n2 x n3` is viewed as `n3` frontal slices of
//! size `n1 x n2`. Transforming every mode-3 tube with a DFT yields
//! [`SpectralSlices`]; the t-SVD, the tensor nuclear norm and its proximal
//! operator are all computed slice-by-slice in that domain.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Tolerance on conjugate symmetry (relative to the largest magnitude) when
/// mapping spectral slices back to a real tensor.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Dense real tensor with dims `(n1, n2, n3)`. Frontal slice `k` is the
/// `n1 x n2` matrix `t[(.., .., k)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    // slice-major, column-major within a slice
    data: Vec<f64>,
}

impl Tensor3 {
    /// # Panics
    /// If any dimension is zero.
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        assert!(n1 > 0 && n2 > 0 && n3 > 0, "tensor dims must be positive");
        Tensor3 {
            n1,
            n2,
            n3,
            data: vec![0.0; n1 * n2 * n3],
        }
    }

    pub fn from_fn(
        n1: usize,
        n2: usize,
        n3: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Tensor3::zeros(n1, n2, n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    t[(i, j, k)] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Builds a tensor from its frontal slices, which must all share one shape.
    pub fn from_frontal_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidArgument("no frontal slices given".into()))?;
        let (n1, n2) = first.shape();
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidArgument("empty frontal slice".into()));
        }
        let mut data = Vec::with_capacity(n1 * n2 * slices.len());
        for s in slices {
            if s.shape() != (n1, n2) {
                return Err(Error::dims(
                    "frontal slices",
                    format!("{n1}x{n2}"),
                    format!("{}x{}", s.nrows(), s.ncols()),
                ));
            }
            data.extend_from_slice(s.as_slice());
        }
        let t = Tensor3 {
            n1,
            n2,
            n3: slices.len(),
            data,
        };
        t.check_finite()?;
        Ok(t)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frontal_slice(&self, k: usize) -> DMatrix<f64> {
        let len = self.n1 * self.n2;
        DMatrix::from_column_slice(self.n1, self.n2, &self.data[k * len..(k + 1) * len])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn inner(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "tensor contains non-finite values".into(),
            ))
        }
    }

    fn zip_with(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Tensor3 {
        assert_eq!(self.dims(), other.dims(), "tensor dims differ");
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.n1 && j < self.n2 && k < self.n3);
        k * self.n1 * self.n2 + j * self.n1 + i
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, k)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}

impl Add for &Tensor3 {
    type Output = Tensor3;
    fn add(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;
    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Tensor3 {
    type Output = Tensor3;
    fn mul(self, c: f64) -> Tensor3 {
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }
}

/// Mode-3 DFT of a tensor: `n3` complex `n1 x n2` slices.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSlices {
    dims: (usize, usize, usize),
    slices: Vec<DMatrix<Complex64>>,
}

impl SpectralSlices {
    pub fn new(slices: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidArgument("no spectral slices given".into()))?;
        let (n1, n2) = first.shape();
        if let Some(bad) = slices.iter().find(|s| s.shape() != (n1, n2)) {
            return Err(Error::dims(
                "spectral slices",
                format!("{n1}x{n2}"),
                format!("{}x{}", bad.nrows(), bad.ncols()),
            ));
        }
        Ok(SpectralSlices {
            dims: (n1, n2, slices.len()),
            slices,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn slices(&self) -> &[DMatrix<Complex64>] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &DMatrix<Complex64> {
        &self.slices[k]
    }

    /// Largest deviation between slice `k` and the conjugate of slice `(n3 - k) mod n3`,
    /// together with the slice where it occurs.
    pub fn symmetry_violation(&self) -> (usize, f64) {
        let n3 = self.dims.2;
        let mut worst = (0, 0.0);
        for k in 0..n3 {
            let mirror = &self.slices[(n3 - k) % n3];
            let dev = self.slices[k]
                .iter()
                .zip(mirror.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b.conj()).norm()));
            if dev > worst.1 {
                worst = (k, dev);
            }
        }
        worst
    }

    fn max_norm(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// DFT of every mode-3 tube: slice `k` is `sum_m t[.., .., m] * exp(-2 pi i k m / n3)`.
pub fn dft_mode3(t: &Tensor3) -> SpectralSlices {
    let (n1, n2, n3) = t.dims();
    let plane = n1 * n2;
    // tube-contiguous buffer so one `process` call covers every tube
    let mut buf: Vec<Complex64> = vec![Complex64::default(); plane * n3];
    for p in 0..plane {
        for k in 0..n3 {
            buf[p * n3 + k] = Complex64::new(t.data[k * plane + p], 0.0);
        }
    }
    FftPlanner::new().plan_fft_forward(n3).process(&mut buf);
    let slices = (0..n3)
        .map(|k| DMatrix::from_fn(n1, n2, |i, j| buf[(j * n1 + i) * n3 + k]))
        .collect();
    SpectralSlices {
        dims: (n1, n2, n3),
        slices,
    }
}

/// Inverse of [`dft_mode3`]. The slices must be conjugate-symmetric (as produced
/// from a real tensor) up to [`SYMMETRY_TOL`]; the imaginary residue is dropped.
pub fn idft_mode3(s: &SpectralSlices) -> Result<Tensor3> {
    let (n1, n2, n3) = s.dims();
    let scale = s.max_norm().max(1.0);
    let (slice, violation) = s.symmetry_violation();
    if violation > SYMMETRY_TOL * scale {
        return Err(Error::SpectralSymmetry { slice, violation });
    }
    let plane = n1 * n2;
    let mut buf: Vec<Complex64> = vec![Complex64::default(); plane * n3];
    for (k, m) in s.slices.iter().enumerate() {
        for (p, z) in m.iter().enumerate() {
            buf[p * n3 + k] = *z;
        }
    }
    FftPlanner::new().plan_fft_inverse(n3).process(&mut buf);
    let inv = 1.0 / n3 as f64;
    let mut out = Tensor3::zeros(n1, n2, n3);
    for p in 0..plane {
        for k in 0..n3 {
            out.data[k * plane + p] = buf[p * n3 + k].re * inv;
        }
    }
    Ok(out)
}

/// Thin SVD of one complex slice with a fixed phase convention: the first
/// nonzero entry of every left singular vector is real and nonnegative.
#[derive(Debug, Clone)]
pub struct SliceSvd {
    pub u: DMatrix<Complex64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<Complex64>,
}

impl SliceSvd {
    pub fn compute(m: &DMatrix<Complex64>, slice: usize) -> Result<Self> {
        let (r, c) = m.shape();
        let svd = faer::Mat::<Complex64>::from_fn(r, c, |i, j| m[(i, j)])
            .thin_svd()
            .map_err(|_| Error::Numerical {
                context: "complex slice SVD did not converge",
                index: Some(slice),
            })?;
        let p = r.min(c);
        let (fu, fv) = (svd.U(), svd.V());
        let mut u = DMatrix::from_fn(r, p, |i, j| fu[(i, j)]);
        let mut v = DMatrix::from_fn(c, p, |i, j| fv[(i, j)]);
        let s = svd.S().column_vector();
        let singular_values = DVector::from_fn(p, |i, _| s[i].re);
        for c in 0..u.ncols() {
            let lead = u.column(c).iter().copied().find(|z| z.norm() > 1e-12);
            if let Some(z) = lead {
                let phase = (z / z.norm()).conj();
                for x in u.column_mut(c).iter_mut() {
                    *x *= phase;
                }
                for x in v.column_mut(c).iter_mut() {
                    *x *= phase;
                }
            }
        }
        Ok(SliceSvd {
            u,
            singular_values,
            v,
        })
    }

    /// `U diag(g(s)) V^H` for a map `g` applied to the singular values.
    pub fn recompose_with(&self, g: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
        let mut us = self.u.clone();
        for (c, &s) in self.singular_values.iter().enumerate() {
            let w = g(s);
            for x in us.column_mut(c).iter_mut() {
                *x *= w;
            }
        }
        us * self.v.adjoint()
    }
}

/// t-SVD factors held in the spectral domain, one thin SVD per Fourier slice.
///
/// `u[k]` is `n1 x p`, `v[k]` is `n2 x p` with `p = min(n1, n2)`; the full
/// f-diagonal `S` slice is available through [`TsvdFactors::s_slice`].
#[derive(Debug, Clone)]
pub struct TsvdFactors {
    dims: (usize, usize, usize),
    slices: Vec<SliceSvd>,
}

impl TsvdFactors {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn u(&self, k: usize) -> &DMatrix<Complex64> {
        &self.slices[k].u
    }

    pub fn v(&self, k: usize) -> &DMatrix<Complex64> {
        &self.slices[k].v
    }

    pub fn singular_values(&self, k: usize) -> &DVector<f64> {
        &self.slices[k].singular_values
    }

    pub fn s_slice(&self, k: usize) -> DMatrix<f64> {
        let (n1, n2, _) = self.dims;
        let mut s = DMatrix::zeros(n1, n2);
        for (i, &x) in self.slices[k].singular_values.iter().enumerate() {
            s[(i, i)] = x;
        }
        s
    }

    /// `U_f S_f V_f^H` for slice `k`.
    pub fn reconstruct_slice(&self, k: usize) -> DMatrix<Complex64> {
        self.slices[k].recompose_with(|s| s)
    }
}

fn slice_svds(spec: &SpectralSlices, indices: std::ops::Range<usize>) -> Result<Vec<SliceSvd>> {
    indices
        .into_par_iter()
        .map(|k| SliceSvd::compute(spec.slice(k), k))
        .collect()
}

pub fn tsvd(t: &Tensor3) -> Result<TsvdFactors> {
    let spec = dft_mode3(t);
    let slices = slice_svds(&spec, 0..t.n3)?;
    Ok(TsvdFactors {
        dims: t.dims(),
        slices,
    })
}

/// Tensor nuclear norm: the sum of the singular values of every Fourier slice.
pub fn tnn(t: &Tensor3) -> Result<f64> {
    let factors = tsvd(t)?;
    Ok(factors.slices.iter().map(|s| s.singular_values.sum()).sum())
}

/// Proximal operator of the tensor nuclear norm: per Fourier slice, each
/// singular value `s` is scaled by `(1 - threshold / s)_+`.
///
/// With `threshold = n3 / rho` the result minimizes
/// `||G||_tnn + rho/2 ||G - F||_F^2`.
pub fn tnn_prox(f: &Tensor3, threshold: f64) -> Result<Tensor3> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "prox threshold must be positive, got {threshold}"
        )));
    }
    let n3 = f.n3;
    let spec = dft_mode3(f);
    // slices above n3/2 are conjugates of the lower half
    let half = n3 / 2 + 1;
    let svds = slice_svds(&spec, 0..half)?;
    let shrink = |s: f64| {
        if s > threshold {
            1.0 - threshold / s
        } else {
            0.0
        }
    };
    let mut out: Vec<DMatrix<Complex64>> = svds
        .par_iter()
        .map(|svd| svd.recompose_with(|s| s * shrink(s)))
        .collect();
    for k in half..n3 {
        let mirror = out[n3 - k].map(|z| z.conj());
        out.push(mirror);
    }
    idft_mode3(&SpectralSlices {
        dims: f.dims(),
        slices: out,
    })
}

/// Stacks `V` square `N x N` matrices into the rotated `N x V x N` tensor with
/// `t[(i, v, j)] = views[v][(i, j)]`.
pub fn rotate(views: &[DMatrix<f64>]) -> Result<Tensor3> {
    let first = views
        .first()
        .ok_or_else(|| Error::InvalidArgument("rotate needs at least one view".into()))?;
    let n = first.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty view matrix".into()));
    }
    for z in views {
        if z.shape() != (n, n) {
            return Err(Error::dims(
                "rotate",
                format!("{n}x{n}"),
                format!("{}x{}", z.nrows(), z.ncols()),
            ));
        }
    }
    let v_count = views.len();
    let mut t = Tensor3::zeros(n, v_count, n);
    for (v, z) in views.iter().enumerate() {
        for j in 0..n {
            for i in 0..n {
                t[(i, v, j)] = z[(i, j)];
            }
        }
    }
    Ok(t)
}

/// Exact inverse of [`rotate`].
pub fn unrotate(t: &Tensor3) -> Result<Vec<DMatrix<f64>>> {
    let (n1, v_count, n3) = t.dims();
    if n1 != n3 {
        return Err(Error::dims(
            "unrotate",
            "n1 == n3",
            format!("{n1}x{v_count}x{n3}"),
        ));
    }
    Ok((0..v_count)
        .map(|v| DMatrix::from_fn(n1, n1, |i, j| t[(i, v, j)]))
        .collect())
}
