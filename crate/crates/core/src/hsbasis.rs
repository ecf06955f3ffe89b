//! Hilbert–Schmidt operator basis and tensor-product term expansions.
//!
//! Each subsystem of dimension `d` uses a generalized Gell-Mann basis of `d^2`
//! Hermitian operators: the identity first, then the symmetric (X-like)
//! operators ordered by `(row, col)`, the antisymmetric (Y-like) operators in
//! the same order and finally the diagonal (Z-like) ones. Every operator is
//! scaled so that `trace(s_i s_j) = d * delta_ij`; for `d = 2` the basis is
//! exactly `{I, X, Y, Z}`.
//!
//! An operator `M` on a composite space of total dimension `D` expands as
//! `M = sum_I w_I s_I` with real `w_I = trace(M s_I) / D` when `M` is
//! Hermitian.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{offsets, CMatrix, SubsystemShape, ZERO};

/// The `d^2` basis operators of one subsystem, identity first.
#[derive(Debug, Clone, PartialEq)]
pub struct HSBasis {
    dim: usize,
    ops: Vec<CMatrix>,
}

impl HSBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn op(&self, index: usize) -> &CMatrix {
        &self.ops[index]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Builds the generalized Gell-Mann basis for dimension `d`.
pub fn make_basis(d: usize) -> Result<HSBasis> {
    if d == 0 {
        return Err(Error::InvalidDimension("basis dimension must be at least 1".into()));
    }
    let scale = (d as f64 / 2.0).sqrt();
    let mut ops = Vec::with_capacity(d * d);
    ops.push(CMatrix::identity(d));
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMatrix::zeros(d);
            m[(j, k)] = C64::new(scale, 0.0);
            m[(k, j)] = C64::new(scale, 0.0);
            ops.push(m);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = CMatrix::zeros(d);
            m[(j, k)] = C64::new(0.0, -scale);
            m[(k, j)] = C64::new(0.0, scale);
            ops.push(m);
        }
    }
    for l in 1..d {
        let norm = scale * (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut diag = vec![0.0; d];
        for x in diag.iter_mut().take(l) {
            *x = norm;
        }
        diag[l] = -(l as f64) * norm;
        ops.push(CMatrix::from_real_diagonal(&diag));
    }
    Ok(HSBasis { dim: d, ops })
}

/// Shared, lazily built basis for dimension `d`.
pub fn basis(d: usize) -> Result<Arc<HSBasis>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<HSBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(b) = cache.read().expect("basis cache poisoned").get(&d) {
        return Ok(Arc::clone(b));
    }
    let built = Arc::new(make_basis(d)?);
    let mut guard = cache.write().expect("basis cache poisoned");
    Ok(Arc::clone(guard.entry(d).or_insert(built)))
}

/// One tensor-product basis term: a basis index per subsystem and a real
/// coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HSTerm {
    pub indices: Vec<usize>,
    pub coeff: f64,
}

impl HSTerm {
    pub fn new(indices: Vec<usize>, coeff: f64) -> Self {
        Self { indices, coeff }
    }

    pub fn is_trivial(&self) -> bool {
        self.indices.iter().all(|&i| i == 0)
    }

    /// The product operator `s_{i1} (x) s_{i2} (x) ...` (without coefficient).
    pub fn operator(&self, shape: &SubsystemShape) -> Result<CMatrix> {
        check_indices(&self.indices, shape)?;
        let mut out = CMatrix::identity(1);
        for (&i, &d) in self.indices.iter().zip(shape.dims()) {
            out = crate::linalg::tensor(&out, basis(d)?.op(i));
        }
        Ok(out)
    }
}

/// Threshold below which expansion coefficients are treated as structural
/// zeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TermTolerance {
    /// `factor * max(1, max_I |w_I|)`.
    Relative(f64),
    Absolute(f64),
}

impl Default for TermTolerance {
    fn default() -> Self {
        TermTolerance::Relative(1e-9)
    }
}

impl TermTolerance {
    pub fn threshold(&self, coeffs: &[f64]) -> f64 {
        match *self {
            TermTolerance::Relative(f) => {
                let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                f * max.max(1.0)
            }
            TermTolerance::Absolute(t) => t,
        }
    }
}

fn check_indices(indices: &[usize], shape: &SubsystemShape) -> Result<()> {
    if indices.len() != shape.len() {
        return Err(Error::TermLength { expected: shape.len(), found: indices.len() });
    }
    for (k, (&i, &d)) in indices.iter().zip(shape.dims()).enumerate() {
        if i >= d * d {
            return Err(Error::BasisIndexOutOfRange { subsystem: k, index: i, dim: d });
        }
    }
    Ok(())
}

/// Flat positions of `m`'s entries in the interleaved `(r1, c1, r2, c2, ...)`
/// order, so that each subsystem occupies one contiguous axis of size `d^2`.
fn interleave_map(shape: &SubsystemShape) -> Vec<usize> {
    let total = shape.total();
    let strides = shape.strides();
    let mut dims = Vec::with_capacity(2 * shape.len());
    let mut flat_strides = Vec::with_capacity(2 * shape.len());
    for (&d, &s) in shape.dims().iter().zip(&strides) {
        dims.extend([d, d]);
        flat_strides.extend([s * total, s]);
    }
    offsets(&dims, &flat_strides)
}

/// Applies `map` (an `n x n` row-major matrix) along one axis of a tensor.
fn apply_along_axis(data: &mut [C64], axis_dims: &[usize], axis: usize, map: &[C64]) {
    let n = axis_dims[axis];
    let inner: usize = axis_dims[axis + 1..].iter().product();
    let outer: usize = axis_dims[..axis].iter().product();
    let mut column = vec![ZERO; n];
    for o in 0..outer {
        for r in 0..inner {
            let base = o * n * inner + r;
            for (j, slot) in column.iter_mut().enumerate() {
                *slot = data[base + j * inner];
            }
            for i in 0..n {
                let row = &map[i * n..(i + 1) * n];
                data[base + i * inner] = row.iter().zip(&column).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// `analysis[i, r*d + c] = s_i[c, r]`, so that applying it yields `trace(M s_i)`.
fn analysis_map(b: &HSBasis) -> Vec<C64> {
    let d = b.dim();
    let n = d * d;
    let mut out = vec![ZERO; n * n];
    for (i, op) in b.ops().iter().enumerate() {
        for r in 0..d {
            for c in 0..d {
                out[i * n + r * d + c] = op[(c, r)];
            }
        }
    }
    out
}

/// `synthesis[r*d + c, i] = s_i[r, c]`.
fn synthesis_map(b: &HSBasis) -> Vec<C64> {
    let d = b.dim();
    let n = d * d;
    let mut out = vec![ZERO; n * n];
    for (i, op) in b.ops().iter().enumerate() {
        for r in 0..d {
            for c in 0..d {
                out[(r * d + c) * n + i] = op[(r, c)];
            }
        }
    }
    out
}

fn axis_dims(shape: &SubsystemShape) -> Vec<usize> {
    shape.dims().iter().map(|d| d * d).collect()
}

/// Complex expansion coefficients `trace(m s_I) / D` for every multi-index,
/// flattened big-endian over per-subsystem indices.
pub fn complex_coefficients(m: &CMatrix, shape: &SubsystemShape) -> Result<Vec<C64>> {
    if shape.total() != m.dim() {
        return Err(Error::ShapeMismatch { expected: shape.total(), found: m.dim() });
    }
    let map = interleave_map(shape);
    let mut data: Vec<C64> = map.iter().map(|&p| m.entries()[p]).collect();
    let dims = axis_dims(shape);
    for (axis, &d) in shape.dims().iter().enumerate() {
        apply_along_axis(&mut data, &dims, axis, &analysis_map(&*basis(d)?));
    }
    let inv_total = 1.0 / shape.total() as f64;
    data.iter_mut().for_each(|z| *z *= inv_total);
    Ok(data)
}

/// Real expansion coefficients of a Hermitian operator, one per multi-index.
pub fn coefficients(m: &CMatrix, shape: &SubsystemShape) -> Result<Vec<f64>> {
    m.check_hermitian()?;
    Ok(complex_coefficients(m, shape)?.into_iter().map(|z| z.re).collect())
}

/// Converts a flat coefficient position into per-subsystem basis indices.
pub fn unravel(mut flat: usize, shape: &SubsystemShape) -> Vec<usize> {
    let mut indices = vec![0; shape.len()];
    for (slot, &d) in indices.iter_mut().zip(shape.dims()).rev() {
        let n = d * d;
        *slot = flat % n;
        flat /= n;
    }
    indices
}

fn ravel(indices: &[usize], shape: &SubsystemShape) -> usize {
    indices
        .iter()
        .zip(shape.dims())
        .fold(0, |acc, (&i, &d)| acc * d * d + i)
}

/// Expands a Hermitian operator and keeps the terms with `|w_I| > threshold`,
/// in ascending multi-index order.
pub fn decompose(m: &CMatrix, shape: &SubsystemShape, tol: TermTolerance) -> Result<Vec<HSTerm>> {
    let coeffs = coefficients(m, shape)?;
    let threshold = tol.threshold(&coeffs);
    Ok(coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > threshold)
        .map(|(flat, &c)| HSTerm::new(unravel(flat, shape), c))
        .collect())
}

/// `sum_I coeff_I s_I`. Repeated multi-indices accumulate.
pub fn reconstruct(terms: &[HSTerm], shape: &SubsystemShape) -> Result<CMatrix> {
    let dims = axis_dims(shape);
    let mut data = vec![ZERO; dims.iter().product()];
    for t in terms {
        check_indices(&t.indices, shape)?;
        data[ravel(&t.indices, shape)] += C64::new(t.coeff, 0.0);
    }
    for (axis, &d) in shape.dims().iter().enumerate() {
        apply_along_axis(&mut data, &dims, axis, &synthesis_map(&*basis(d)?));
    }
    let mut entries = vec![ZERO; data.len()];
    for (q, &p) in interleave_map(shape).iter().enumerate() {
        entries[p] = data[q];
    }
    CMatrix::from_entries(shape.total(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tensor;

    fn pauli() -> [CMatrix; 4] {
        let c = |re: f64, im: f64| C64::new(re, im);
        let x = CMatrix::from_entries(2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap();
        let y = CMatrix::from_entries(2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap();
        let z = CMatrix::from_real_diagonal(&[1.0, -1.0]);
        [CMatrix::identity(2), x, y, z]
    }

    fn gram(b: &HSBasis) -> Vec<Vec<C64>> {
        b.ops()
            .iter()
            .map(|a| b.ops().iter().map(|c| a.trace_product(c)).collect())
            .collect()
    }

    #[test]
    fn qubit_basis_is_pauli() {
        let b = make_basis(2).unwrap();
        for (got, want) in b.ops().iter().zip(pauli().iter()) {
            assert_eq!(got, want);
        }
    }

    #[test]
    fn qutrit_gram_matrix_is_three_identity() {
        let b = make_basis(3).unwrap();
        assert_eq!(b.len(), 9);
        let g = gram(&b);
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 3.0 } else { 0.0 };
                assert!((v - C64::new(want, 0.0)).norm() < 1e-12, "G[{i}][{j}] = {v}");
            }
        }
    }

    #[test]
    fn bases_are_hermitian_and_traceless() {
        for d in 1..=5 {
            let b = make_basis(d).unwrap();
            assert_eq!(b.op(0), &CMatrix::identity(d));
            for op in &b.ops()[1..] {
                assert_eq!(op.hermitian_deviation(), 0.0);
                assert!(op.trace().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn trivial_dimension() {
        let b = make_basis(1).unwrap();
        assert_eq!(b.ops(), &[CMatrix::identity(1)]);
        assert!(make_basis(0).is_err());
    }

    #[test]
    fn identity_has_single_trivial_term() {
        let shape = SubsystemShape::new(vec![2, 3]).unwrap();
        let terms = decompose(&CMatrix::identity(6), &shape, TermTolerance::default()).unwrap();
        assert_eq!(terms, vec![HSTerm::new(vec![0, 0], 1.0)]);
    }

    #[test]
    fn classical_correlation_terms() {
        let z = &pauli()[3];
        let rho = (&CMatrix::identity(4) + &tensor(z, z)).scale(0.25);
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        let terms = decompose(&rho, &shape, TermTolerance::default()).unwrap();
        assert_eq!(terms, vec![HSTerm::new(vec![0, 0], 0.25), HSTerm::new(vec![3, 3], 0.25)]);
    }

    #[test]
    fn empty_and_identity_reconstruction() {
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        assert_eq!(reconstruct(&[], &shape).unwrap(), CMatrix::zeros(4));
        let m = reconstruct(&[HSTerm::new(vec![0, 0], 2.5)], &shape).unwrap();
        assert_eq!(m, CMatrix::identity(4).scale(2.5));
    }

    #[test]
    fn reconstruct_rejects_bad_terms() {
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        assert!(matches!(
            reconstruct(&[HSTerm::new(vec![0, 4], 1.0)], &shape),
            Err(Error::BasisIndexOutOfRange { subsystem: 1, index: 4, dim: 2 })
        ));
        assert!(matches!(
            reconstruct(&[HSTerm::new(vec![0], 1.0)], &shape),
            Err(Error::TermLength { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn decompose_rejects_non_hermitian_and_bad_shape() {
        let mut m = CMatrix::identity(4);
        m[(0, 1)] = C64::new(1.0, 0.0);
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        assert!(matches!(decompose(&m, &shape, TermTolerance::default()), Err(Error::NonHermitian { .. })));
        let bad = SubsystemShape::new(vec![2, 3]).unwrap();
        assert!(matches!(
            decompose(&CMatrix::identity(4), &bad, TermTolerance::default()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn term_operator_matches_explicit_tensor() {
        let shape = SubsystemShape::new(vec![2, 2]).unwrap();
        let p = pauli();
        let op = HSTerm::new(vec![1, 3], 1.0).operator(&shape).unwrap();
        assert_eq!(op, tensor(&p[1], &p[3]));
    }

    #[test]
    fn cached_basis_matches_fresh() {
        assert_eq!(*basis(4).unwrap(), make_basis(4).unwrap());
    }
}
