//! Dense complex matrix kernel.
//!
//! All composite indices are big-endian: for a shape `[d0, d1, ..., dn]` the
//! leftmost factor is the most significant digit of a row (or column) index,
//! and matrices are stored row-major.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Square dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::ShapeMismatch { expected: dim * dim, found: entries.len() });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// `|a><b|` on a space of dimension `dim`.
    pub fn ket_bra(dim: usize, a: usize, b: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(a, b)] = ONE;
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|z| z * s).collect() }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|z| z * s).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.entries[k * n..(k + 1) * n];
                let dst = &mut out.entries[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `trace(self * rhs)` without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> C64 {
        assert_eq!(self.dim, rhs.dim, "trace_product dimension mismatch");
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.entries[i * n + j] * rhs.entries[j * n + i];
            }
        }
        acc
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "frobenius_distance dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entry of `|M - M^dagger|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Scale-aware Hermiticity tolerance, `1e-12 * (1 + ||M||_F)`.
    pub fn hermitian_tolerance(&self) -> f64 {
        HERMITIAN_RTOL * (1.0 + self.frobenius_norm())
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let deviation = self.hermitian_deviation();
        let tolerance = self.hermitian_tolerance();
        if deviation > tolerance || deviation.is_nan() {
            return Err(Error::NonHermitian { deviation, tolerance });
        }
        Ok(())
    }

    /// `(M + M^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        CMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        CMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

pub const HERMITIAN_RTOL: f64 = 1e-12;

/// Tensor-factor dimensions of a composite space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsystemShape {
    dims: Vec<usize>,
}

impl SubsystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidDimension(format!("subsystem {pos} has dimension 0")));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-index stride of every factor.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Shape after [`permute_subsystems`] with the same `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.dims.len())?;
        let mut dims = vec![0; self.dims.len()];
        for (k, &p) in perm.iter().enumerate() {
            dims[p] = self.dims[k];
        }
        Ok(Self { dims })
    }

    fn check_matrix(&self, m: &CMatrix) -> Result<()> {
        if self.total() != m.dim() {
            return Err(Error::ShapeMismatch { expected: self.total(), found: m.dim() });
        }
        Ok(())
    }
}

/// Offsets `sum_k idx_k * strides[k]` over all multi-indices of `dims`, in
/// big-endian enumeration order.
pub(crate) fn offsets(dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for (&d, &s) in dims.iter().zip(strides) {
        let mut next = Vec::with_capacity(out.len() * d);
        for &base in &out {
            for i in 0..d {
                next.push(base + i * s);
            }
        }
        out = next;
    }
    out
}

pub(crate) fn check_permutation(perm: &[usize], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    let ok = perm.len() == len
        && perm.iter().all(|&p| p < len && !std::mem::replace(&mut seen[p], true));
    if ok {
        Ok(())
    } else {
        Err(Error::NotAPermutation { perm: perm.to_vec(), len })
    }
}

pub(crate) fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

/// Kronecker product.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (da, db) = (a.dim(), b.dim());
    let n = da * db;
    let mut out = CMatrix::zeros(n);
    for i in 0..da {
        for j in 0..da {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k, j * db + l)] = x * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a sequence of matrices, left to right.
pub fn tensor_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::identity(1), |acc, f| tensor(&acc, f))
}

/// Traces out the factors listed in `discard`.
pub fn partial_trace(m: &CMatrix, shape: &SubsystemShape, discard: &[usize]) -> Result<CMatrix> {
    shape.check_matrix(m)?;
    let n = shape.len();
    let mut traced = vec![false; n];
    for &k in discard {
        if k >= n {
            return Err(Error::SubsystemOutOfRange { index: k, len: n });
        }
        traced[k] = true;
    }
    let strides = shape.strides();
    let (mut keep_dims, mut keep_strides) = (Vec::new(), Vec::new());
    let (mut tr_dims, mut tr_strides) = (Vec::new(), Vec::new());
    for k in 0..n {
        if traced[k] {
            tr_dims.push(shape.dims[k]);
            tr_strides.push(strides[k]);
        } else {
            keep_dims.push(shape.dims[k]);
            keep_strides.push(strides[k]);
        }
    }
    let kept = offsets(&keep_dims, &keep_strides);
    let summed = offsets(&tr_dims, &tr_strides);
    let mut out = CMatrix::zeros(kept.len());
    for (a, &ra) in kept.iter().enumerate() {
        for (b, &cb) in kept.iter().enumerate() {
            out[(a, b)] = summed.iter().map(|&t| m[(ra + t, cb + t)]).sum();
        }
    }
    Ok(out)
}

/// Reorders tensor factors: factor `k` of `m` becomes factor `perm[k]` of the
/// result. The result lives on `shape.permuted(perm)`.
pub fn permute_subsystems(m: &CMatrix, shape: &SubsystemShape, perm: &[usize]) -> Result<CMatrix> {
    shape.check_matrix(m)?;
    let new_shape = shape.permuted(perm)?;
    let old_strides = shape.strides();
    let inv = invert_permutation(perm);
    // New factor j is old factor inv[j].
    let strides_in_new_order: Vec<usize> = inv.iter().map(|&k| old_strides[k]).collect();
    let map = offsets(new_shape.dims(), &strides_in_new_order);
    Ok(CMatrix::from_fn(m.dim(), |i, j| m[(map[i], map[j])]))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
///
/// The matrix is first split into the blocks of its sparsity graph, which
/// keeps structured operators (products of classical processes, say) cheap.
/// Each block goes to nalgebra's Hermitian solver; if that breaks down, a
/// cyclic Jacobi sweep on the real symmetric embedding takes over.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    m.check_hermitian()?;
    let h = m.hermitian_part();
    let mut ev = Vec::with_capacity(h.dim);
    for block in sparsity_blocks(&h) {
        let sub = CMatrix::from_fn(block.len(), |i, j| h[(block[i], block[j])]);
        ev.extend(block_eigenvalues(&sub)?);
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Index sets of the connected components of the nonzero pattern of `h`.
fn sparsity_blocks(h: &CMatrix) -> Vec<Vec<usize>> {
    let n = h.dim;
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if h[(i, j)] != ZERO {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

fn block_eigenvalues(h: &CMatrix) -> Result<Vec<f64>> {
    if h.dim == 1 {
        return Ok(vec![h[(0, 0)].re]);
    }
    let ev: Vec<f64> = h.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    if ev.iter().all(|x| x.is_finite()) {
        return Ok(ev);
    }
    let n = h.dim;
    let mut embedded: Vec<f64> = (0..4 * n * n)
        .map(|k| {
            let (i, j) = (k / (2 * n), k % (2 * n));
            let z = h[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        })
        .collect();
    let mut doubled = jacobi_eigenvalues(&mut embedded, 2 * n).ok_or(Error::EigenFailure)?;
    // Every eigenvalue of the embedding appears twice.
    doubled.sort_by(f64::total_cmp);
    Ok(doubled.into_iter().step_by(2).collect())
}

/// Cyclic Jacobi on a dense real symmetric `n x n` matrix (row-major,
/// overwritten). Returns the diagonal once the off-diagonal mass is
/// negligible.
fn jacobi_eigenvalues(a: &mut [f64], n: usize) -> Option<Vec<f64>> {
    const MAX_SWEEPS: usize = 100;
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        if off <= f64::EPSILON.powi(2) * total {
            return Some((0..n).map(|i| a[i * n + i]).collect());
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    None
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    eigenvalues(m)?.first().copied().ok_or(Error::EigenFailure)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample(dim: usize, salt: f64) -> CMatrix {
        CMatrix::from_fn(dim, |i, j| {
            let x = (i * dim + j) as f64 + salt;
            c((x * 0.731).sin(), (x * 1.37).cos())
        })
    }

    fn reference_kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
        let (da, db) = (a.dim(), b.dim());
        let mut out = CMatrix::zeros(da * db);
        for i in 0..da {
            for j in 0..da {
                for k in 0..db {
                    for l in 0..db {
                        out[(i * db + k, j * db + l)] = a[(i, j)] * b[(k, l)];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let i2 = CMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2), CMatrix::identity(4));
    }

    #[test]
    fn tensor_of_sigma_z() {
        let z = CMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert_eq!(tensor(&z, &z), CMatrix::from_real_diagonal(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn tensor_matches_loop_reference() {
        let a = sample(2, 0.3);
        let b = sample(3, 1.9);
        assert!(tensor(&a, &b).max_abs_diff(&reference_kron(&a, &b)) == 0.0);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = sample(2, 0.1);
        let b = sample(3, 0.2);
        let shape = SubsystemShape::new(vec![2, 3]).unwrap();
        let out = partial_trace(&tensor(&a, &b), &shape, &[1]).unwrap();
        assert!(out.max_abs_diff(&a.scale_complex(b.trace())) < 1e-14);
        let out = partial_trace(&tensor(&a, &b), &shape, &[0]).unwrap();
        assert!(out.max_abs_diff(&b.scale_complex(a.trace())) < 1e-14);
    }

    #[test]
    fn partial_trace_of_nothing_is_identity_map() {
        let m = sample(6, 0.5);
        let shape = SubsystemShape::new(vec![2, 3]).unwrap();
        assert_eq!(partial_trace(&m, &shape, &[]).unwrap(), m);
    }

    #[test]
    fn partial_trace_rejects_bad_index() {
        let m = sample(4, 0.5);
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        assert_eq!(
            partial_trace(&m, &shape, &[2]),
            Err(Error::SubsystemOutOfRange { index: 2, len: 2 })
        );
        let wrong = SubsystemShape::new(vec![2, 3]).unwrap();
        assert!(matches!(partial_trace(&m, &wrong, &[0]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn maximally_correlated_marginal_is_maximally_mixed() {
        // (|00><00| + |11><11|) / 2, reduced by a direct index sum.
        let mut rho = CMatrix::zeros(4);
        rho[(0, 0)] = c(0.5, 0.0);
        rho[(3, 3)] = c(0.5, 0.0);
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        let out = partial_trace(&rho, &shape, &[1]).unwrap();
        assert_eq!(out, CMatrix::identity(2).scale(0.5));
    }

    #[test]
    fn swap_permutation_swaps_tensor_factors() {
        let a = sample(2, 0.4);
        let b = sample(3, 0.8);
        let shape = SubsystemShape::new(vec![2, 3]).unwrap();
        let out = permute_subsystems(&tensor(&a, &b), &shape, &[1, 0]).unwrap();
        assert_eq!(shape.permuted(&[1, 0]).unwrap().dims(), &[3, 2]);
        assert!(out.max_abs_diff(&tensor(&b, &a)) == 0.0);
    }

    #[test]
    fn permutation_places_factor_k_at_perm_k() {
        let (a, b, cc) = (sample(2, 0.1), sample(3, 0.2), sample(2, 0.3));
        let m = tensor_all([&a, &b, &cc]);
        let shape = SubsystemShape::new(vec![2, 3, 2]).unwrap();
        // a -> slot 2, b -> slot 0, c -> slot 1
        let out = permute_subsystems(&m, &shape, &[2, 0, 1]).unwrap();
        assert!(out.max_abs_diff(&tensor_all([&b, &cc, &a])) < 1e-15);
    }

    #[test]
    fn identity_permutation_is_noop() {
        let m = sample(12, 0.9);
        let shape = SubsystemShape::new(vec![2, 3, 2]).unwrap();
        assert_eq!(permute_subsystems(&m, &shape, &[0, 1, 2]).unwrap(), m);
    }

    #[test]
    fn permutation_rejects_non_bijection() {
        let m = sample(4, 0.9);
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        assert!(matches!(
            permute_subsystems(&m, &shape, &[0, 0]),
            Err(Error::NotAPermutation { .. })
        ));
        assert!(matches!(
            permute_subsystems(&m, &shape, &[0]),
            Err(Error::NotAPermutation { .. })
        ));
    }

    #[test]
    fn min_eigenvalue_simple_cases() {
        assert!((min_eigenvalue(&CMatrix::identity(4)).unwrap() - 1.0).abs() < 1e-14);
        let z = CMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert!((min_eigenvalue(&z).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_eigenvalue_rejects_non_hermitian() {
        let mut m = CMatrix::identity(2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(min_eigenvalue(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn min_eigenvalue_accepts_rounding_noise() {
        let mut m = CMatrix::identity(3);
        m[(0, 1)] = c(0.5, 0.25);
        m[(1, 0)] = c(0.5, -0.25 + 1e-14);
        assert!(min_eigenvalue(&m).is_ok());
    }

    #[test]
    fn shape_rejects_zero_dims() {
        assert!(SubsystemShape::new(vec![2, 0]).is_err());
        assert_eq!(SubsystemShape::new(vec![2, 3, 4]).unwrap().strides(), vec![12, 4, 1]);
    }

    #[test]
    fn jacobi_matches_nalgebra() {
        let h = sample(7, 0.3).hermitian_part();
        let want = eigenvalues(&h).unwrap();
        let n = 7;
        let mut embedded: Vec<f64> = (0..4 * n * n)
            .map(|k| {
                let (i, j) = (k / (2 * n), k % (2 * n));
                let z = h[(i % n, j % n)];
                match (i < n, j < n) {
                    (true, true) | (false, false) => z.re,
                    (true, false) => -z.im,
                    (false, true) => z.im,
                }
            })
            .collect();
        let mut got = jacobi_eigenvalues(&mut embedded, 2 * n).unwrap();
        got.sort_by(f64::total_cmp);
        for (k, w) in want.iter().enumerate() {
            assert!((got[2 * k] - w).abs() < 1e-12 && (got[2 * k + 1] - w).abs() < 1e-12);
        }
    }

    #[test]
    fn block_split_keeps_the_spectrum() {
        let a = sample(3, 0.1).hermitian_part();
        let b = sample(2, 0.9).hermitian_part();
        // Interleave the two blocks so the split has to find them.
        let idx_a = [0, 2, 4];
        let idx_b = [1, 3];
        let mut m = CMatrix::zeros(5);
        for (i, &r) in idx_a.iter().enumerate() {
            for (j, &c) in idx_a.iter().enumerate() {
                m[(r, c)] = a[(i, j)];
            }
        }
        for (i, &r) in idx_b.iter().enumerate() {
            for (j, &c) in idx_b.iter().enumerate() {
                m[(r, c)] = b[(i, j)];
            }
        }
        assert_eq!(sparsity_blocks(&m), vec![vec![0, 2, 4], vec![1, 3]]);
        let mut want = eigenvalues(&a).unwrap();
        want.extend(eigenvalues(&b).unwrap());
        want.sort_by(f64::total_cmp);
        for (x, y) in eigenvalues(&m).unwrap().iter().zip(&want) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn permutation_like_operator() {
        // 0.25 * (swap of two 16-dimensional factors (x) identity) has
        // eigenvalues +-0.25 and is the kind of input that stalls a plain
        // shifted QR.
        let d = 4;
        let m = CMatrix::from_fn(d * d, |i, j| {
            let (a, b) = (i / d, i % d);
            if j == b * d + a {
                c(0.25, 0.0)
            } else {
                ZERO
            }
        });
        let ev = eigenvalues(&m).unwrap();
        assert_eq!(ev.len(), 16);
        assert!(ev.iter().all(|x| (x.abs() - 0.25).abs() < 1e-14));
        assert_eq!(ev.iter().filter(|&&x| x < 0.0).count(), 6);
    }
}
