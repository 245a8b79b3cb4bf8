//! Dense complex linear algebra for small qudit registers.
//!
//! Matrices are stored row-major. Every routine here is a pure function of
//! its inputs; the only randomness (Haar sampling) comes from an explicit
//! RNG argument.
//!
//! Subsystem indexing is big-endian throughout: for dimensions
//! `[d0, d1, ..., dk]` the flat index of digits `(i0, i1, ..., ik)` is
//! `i0 * (d1*...*dk) + ... + ik`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::states::StateVector;

/// Complex amplitude type used everywhere in the crate.
pub type C64 = Complex64;

/// Tolerance for unitarity and hermiticity gates.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance for decompositions (eigen, reconstruction).
pub const DECOMP_TOL: f64 = 1e-9;
/// Tolerance for exact algebraic identities.
pub const EXACT_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// `zeta^k` for `zeta = exp(2 pi i / d)`, with `k` reduced modulo `d` first so
/// large exponents do not lose precision.
pub fn root_of_unity(d: usize, k: i64) -> C64 {
    let r = k.rem_euclid(d as i64) as f64;
    C64::from_polar(1.0, 2.0 * PI * r / d as f64)
}

/// Subsystem dimensions of a tensor-product space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DimensionSpec(Vec<usize>);

impl DimensionSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument("empty dimension list".into()));
        }
        if let Some(&bad) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidArgument(format!(
                "subsystem dimension {bad} is below 2"
            )));
        }
        Ok(Self(dims))
    }

    /// `n` copies of the same level `d`.
    pub fn uniform(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![d; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Product of all subsystem dimensions.
    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    /// Dimensions with `other` appended.
    pub fn concat(&self, other: &DimensionSpec) -> DimensionSpec {
        let mut dims = self.0.clone();
        dims.extend_from_slice(&other.0);
        DimensionSpec(dims)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for i in (0..self.0.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.0[i + 1];
        }
        strides
    }

    /// Big-endian digits of a flat index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.0.len()];
        for (slot, &d) in out.iter_mut().zip(&self.0).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn flat_index(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                actual: digits.len(),
            });
        }
        let mut index = 0;
        for (&digit, &d) in digits.iter().zip(&self.0) {
            if digit >= d {
                return Err(Error::IndexOutOfRange { index: digit, limit: d });
            }
            index = index * d + digit;
        }
        Ok(index)
    }

    /// Validates a set of subsystem indices: in range and without repeats.
    pub(crate) fn check_sites(&self, sites: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.0.len()];
        for &s in sites {
            if s >= self.0.len() {
                return Err(Error::BadIndexSet(format!(
                    "subsystem {s} out of range for {} subsystems",
                    self.0.len()
                )));
            }
            if seen[s] {
                return Err(Error::BadIndexSet(format!("subsystem {s} repeated")));
            }
            seen[s] = true;
        }
        Ok(())
    }

    /// Flat-index offsets contributed by every joint value of `sites`, the
    /// first listed site being the most significant digit.
    pub(crate) fn site_offsets(&self, sites: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &s in sites {
            let mut next = Vec::with_capacity(offsets.len() * self.0[s]);
            for &base in &offsets {
                for digit in 0..self.0[s] {
                    next.push(base + digit * strides[s]);
                }
            }
            offsets = next;
        }
        offsets
    }

    /// Subsystems not listed in `sites`, ascending.
    pub(crate) fn complement(&self, sites: &[usize]) -> Vec<usize> {
        (0..self.0.len()).filter(|i| !sites.contains(i)).collect()
    }

    pub(crate) fn local_dim(&self, sites: &[usize]) -> usize {
        sites.iter().map(|&s| self.0[s]).product()
    }
}

impl fmt::Display for DimensionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("matrix entry is not finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, actual: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Rank-one projector `|v><v|`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        Self::from_fn(self.rows, end - start, |r, c| self[(r, start + c)])
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise max-norm distance; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |h - h^dagger|`, infinite for non-square input.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                dev = dev.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        dev
    }

    /// `max |u^dagger u - I|`, infinite for non-square input.
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&dagger(self) * self).max_abs_diff(&Self::identity(self.rows))
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        (self * self).trace().re
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Matrix product. Panics on inner-dimension mismatch.
impl Mul for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (p, q) = (b.rows, b.cols);
    DenseMatrix::from_fn(a.rows * p, a.cols * q, |r, c| a[(r / p, c / q)] * b[(r % p, c % q)])
}

/// `m ⊗ m ⊗ ... ⊗ m` with `n` factors; `n = 0` gives the 1x1 identity.
pub fn kron_power(m: &DenseMatrix, n: usize) -> DenseMatrix {
    (0..n).fold(DenseMatrix::identity(1), |acc, _| kron(&acc, m))
}

/// Conjugate transpose.
pub fn dagger(a: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.cols, a.rows, |r, c| a[(c, r)].conj())
}

/// Applies `u` to the whole register of `psi`.
pub fn apply(u: &DenseMatrix, psi: &StateVector) -> Result<StateVector> {
    if !u.is_square() {
        return Err(Error::NotSquare { rows: u.rows, cols: u.cols });
    }
    if u.rows != psi.len() {
        return Err(Error::DimensionMismatch { expected: psi.len(), actual: u.rows });
    }
    Ok(StateVector::from_parts_unchecked(psi.dims().clone(), u.mul_vec(psi.amplitudes())))
}

/// Reduced density matrix of `rho` on the subsystems in `keep`.
///
/// `keep` is treated as a set; the result is ordered by ascending subsystem
/// index. An empty set traces everything out and returns the 1x1 trace.
pub fn partial_trace(rho: &DenseMatrix, dims: &DimensionSpec, keep: &[usize]) -> Result<DenseMatrix> {
    if !rho.is_square() {
        return Err(Error::NotSquare { rows: rho.rows, cols: rho.cols });
    }
    if rho.rows != dims.total() {
        return Err(Error::DimensionMismatch { expected: dims.total(), actual: rho.rows });
    }
    dims.check_sites(keep)?;
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let kept = dims.site_offsets(&keep);
    let traced = dims.site_offsets(&dims.complement(&keep));
    Ok(DenseMatrix::from_fn(kept.len(), kept.len(), |a, b| {
        traced.iter().map(|&t| rho[(kept[a] + t, kept[b] + t)]).sum()
    }))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: DenseMatrix,
}

impl HermitianEigen {
    /// `V diag(f(lambda)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> C64) -> DenseMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let fl: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        DenseMatrix::from_fn(n, n, |r, c| (0..n).map(|k| v[(r, k)] * fl[k] * v[(c, k)].conj()).sum())
    }
}

pub fn hermitian_eigs(h: &DenseMatrix) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::NotSquare { rows: h.rows, cols: h.cols });
    }
    let deviation = h.hermiticity_deviation();
    if deviation > UNITARY_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.rows;
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = DenseMatrix::from_fn(n, n, |r, c| (h[(r, c)] + h[(c, r)].conj()) * 0.5);
    let eig = sym.to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Von Neumann entropy in bits.
pub fn vn_entropy(rho: &DenseMatrix) -> Result<f64> {
    let eig = hermitian_eigs(rho)?;
    let trace: f64 = eig.values.iter().sum();
    if (trace - 1.0).abs() > DECOMP_TOL {
        return Err(Error::BadTrace { trace });
    }
    if let Some(&low) = eig.values.first() {
        if low < -DECOMP_TOL {
            return Err(Error::NegativeEigenvalue { value: low });
        }
    }
    Ok(eig.values.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.log2()).sum())
}

/// `exp(i h)` for Hermitian `h`.
pub fn expm_hermitian(h: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(hermitian_eigs(h)?.map_spectrum(|l| C64::from_polar(1.0, l)))
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal pushed back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DenseMatrix {
    assert!(dim >= 1, "haar_unitary needs dim >= 1");
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let qr = ginibre.qr();
    let q = qr.q();
    let r = qr.r();
    DenseMatrix::from_fn(dim, dim, |row, col| {
        let rd = r[(col, col)];
        let phase = if rd.norm() > 0.0 { rd / rd.norm() } else { ONE };
        q[(row, col)] * phase
    })
}

/// Determinant by LU factorisation with partial pivoting.
pub fn det(m: &DenseMatrix) -> Result<C64> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows, cols: m.cols });
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut det = ONE;
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
            .expect("non-empty pivot range");
        if a[(pivot, k)] == ZERO {
            return Ok(ZERO);
        }
        if pivot != k {
            for c in 0..n {
                let tmp = a[(k, c)];
                a[(k, c)] = a[(pivot, c)];
                a[(pivot, c)] = tmp;
            }
            det = -det;
        }
        let p = a[(k, k)];
        det *= p;
        for i in k + 1..n {
            let factor = a[(i, k)] / p;
            if factor == ZERO {
                continue;
            }
            for c in k..n {
                let upd = factor * a[(k, c)];
                a[(i, c)] -= upd;
            }
        }
    }
    Ok(det)
}

/// Singular values, descending.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol * sigma_max`.
pub fn rank(m: &DenseMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&max) = sv.first() else { return 0 };
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Orthonormal basis of the numerical kernel of `m`: right singular vectors
/// whose singular value is at most `tol * sigma_max` (missing singular
/// values of a wide matrix count as zero). Its size is `cols - rank(m, tol)`.
pub fn nullspace(m: &DenseMatrix, tol: f64) -> Vec<Vec<C64>> {
    let n = m.cols;
    if n == 0 {
        return Vec::new();
    }
    if m.rows == 0 || m.max_abs() == 0.0 {
        return (0..n).map(|i| DenseMatrix::identity(n).column(i)).collect();
    }
    // Pad a wide matrix with zero rows so the SVD yields a full V.
    let padded = if m.rows < n {
        let mut p = DenseMatrix::zeros(n, n);
        p.data[..m.data.len()].copy_from_slice(&m.data);
        p
    } else {
        m.clone()
    };
    let svd = padded.to_nalgebra().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    (0..sv.len())
        .filter(|&i| sv[i] <= tol * max)
        .map(|i| (0..n).map(|c| v_t[(i, c)].conj()).collect())
        .collect()
}

/// Euclidean norm of a complex vector.
pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<a|b>` (conjugate-linear in `a`).
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
