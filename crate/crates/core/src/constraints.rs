//! Linear systems over the d-th roots of unity that encode "no detection".
//!
//! Row `t` (`t = 1..d-1`) of `A` is `(ζ^{s·t·m})_{m=0..d-1}` with `s = ±1`;
//! `B` is `A` without its first column. A vector solves `A x = 0` exactly
//! when all its entries are equal, which is why an undetectable attack must
//! leave the same ancilla state behind for every message value.
//!
//! The raw conditions come in `d(d-1)` rows, one for each pair of prepared
//! value `k` and wrong outcome `k'` in the Fourier basis. Projecting
//! `U F|k>` onto `F|k'>` for a diagonal attack gives
//! `(1/d) Σ_m ζ^{(k-k')m} e_{m,m}`, so each raw row is `ζ^{c·m}` with
//! `c = k - k' ≢ 0 (mod d)`: a repeat of row `c mod d` of `A` (or, with the
//! opposite sign, row `d - c`). [`stacked_system`] builds the raw rows so
//! that the reduction can be checked.

use serde::{Deserialize, Serialize};

use crate::attack::AttackDecomposition;
use crate::error::{Error, Result};
use crate::linalg::{self, root_of_unity, DenseMatrix, C64, ONE};
use crate::states::StateVector;
use crate::{DimensionSpec, Sign};

/// Relative singular-value cutoff for rank and kernel.
pub const RANK_TOL: f64 = 1e-10;
/// Allowed deviation of the unit kernel vector from all-ones / √d.
pub const KERNEL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSystem {
    d: usize,
    sign: Sign,
    a: DenseMatrix,
    b: DenseMatrix,
}

impl ConstraintSystem {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }
}

/// Which closed form of `det(B)` to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetConvention {
    /// `ζ^{s·d(d-1)/2} ∏_{1≤j<i≤d-1} (ζ^i - ζ^j)`, positive nodes for both signs.
    PositiveNodes,
    /// `ζ^{s·d(d-1)/2} ∏_{1≤j<i≤d-1} (ζ^{s·i} - ζ^{s·j})`, the nodes of the columns.
    SignedNodes,
}

fn check_level(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("level must be at least 2, got {d}")));
    }
    Ok(())
}

pub fn build_system(d: usize, sign: Sign) -> Result<ConstraintSystem> {
    check_level(d)?;
    let s = sign.exponent();
    let a = DenseMatrix::from_fn(d - 1, d, |r, m| root_of_unity(d, s * (r as i64 + 1) * m as i64));
    let b = a.columns(1, d);
    Ok(ConstraintSystem { d, sign, a, b })
}

/// All `d(d-1)` raw rows `ζ^{s·(k-k')·m}`, ordered by `k` then `k' ≠ k`.
pub fn stacked_system(d: usize, sign: Sign) -> Result<DenseMatrix> {
    check_level(d)?;
    let s = sign.exponent();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|k| (0..d).filter(move |&kp| kp != k).map(move |kp| (k, kp)))
        .collect();
    Ok(DenseMatrix::from_fn(pairs.len(), d, |r, m| {
        let (k, kp) = pairs[r];
        root_of_unity(d, s * (k as i64 - kp as i64) * m as i64)
    }))
}

pub fn det_b_numeric(sys: &ConstraintSystem) -> C64 {
    linalg::det(&sys.b).expect("B is square")
}

pub fn det_b_closed_form(d: usize, sign: Sign, convention: DetConvention) -> Result<C64> {
    check_level(d)?;
    let s = sign.exponent();
    let node = match convention {
        DetConvention::PositiveNodes => 1,
        DetConvention::SignedNodes => s,
    };
    let d_i = d as i64;
    let mut det = root_of_unity(d, s * d_i * (d_i - 1) / 2);
    for i in 1..d_i {
        for j in 1..i {
            det *= root_of_unity(d, node * i) - root_of_unity(d, node * j);
        }
    }
    Ok(det)
}

pub fn verify_rank(sys: &ConstraintSystem) -> usize {
    linalg::rank(&sys.a, RANK_TOL)
}

pub fn rank_b(sys: &ConstraintSystem) -> usize {
    linalg::rank(&sys.b, RANK_TOL)
}

/// Unit kernel vector of `A`, phased so its first entry is real and
/// positive. Fails unless the kernel is one-dimensional and the vector is
/// all-ones / √d.
pub fn kernel_vector(sys: &ConstraintSystem) -> Result<StateVector> {
    let kernel = linalg::nullspace(&sys.a, RANK_TOL);
    if kernel.len() != 1 {
        return Err(Error::KernelDimension(kernel.len()));
    }
    let v = &kernel[0];
    let phase = if v[0].norm() > 0.0 { v[0].conj() / v[0].norm() } else { ONE };
    let v: Vec<C64> = v.iter().map(|z| z * phase).collect();
    let dev = all_ones_deviation(&v);
    if dev > KERNEL_TOL {
        return Err(Error::InvalidArgument(format!(
            "kernel vector deviates from all-ones by {dev:e}"
        )));
    }
    StateVector::new(DimensionSpec::uniform(sys.d, 1)?, v)
}

/// Max entrywise distance of a unit vector from all-ones / √d after removing
/// the phase of its first entry.
pub fn all_ones_deviation(v: &[C64]) -> f64 {
    let n = v.len();
    let norm = linalg::norm(v);
    if n == 0 || norm == 0.0 {
        return f64::INFINITY;
    }
    let phase = if v[0].norm() > 0.0 { v[0].conj() / v[0].norm() } else { ONE };
    let target = 1.0 / (n as f64).sqrt();
    v.iter().map(|z| (z * phase / norm - target).norm()).fold(0.0, f64::max)
}

/// `max_t ||Σ_m a[t][m] x_m||` where each `x_m` is a vector (an ancilla
/// state); scalar entries are length-1 vectors.
pub fn residual(sys: &ConstraintSystem, x: &[Vec<C64>]) -> Result<f64> {
    if x.len() != sys.d {
        return Err(Error::DimensionMismatch { expected: sys.d, actual: x.len() });
    }
    let width = x[0].len();
    if let Some(bad) = x.iter().find(|v| v.len() != width) {
        return Err(Error::DimensionMismatch { expected: width, actual: bad.len() });
    }
    Ok((0..sys.a.rows())
        .map(|t| {
            let mut acc = vec![C64::new(0.0, 0.0); width];
            for (coef, xm) in sys.a.row(t).iter().zip(x) {
                for (a, v) in acc.iter_mut().zip(xm) {
                    *a += coef * v;
                }
            }
            linalg::norm(&acc)
        })
        .fold(0.0, f64::max))
}

pub fn residual_scalar(sys: &ConstraintSystem, x: &[C64]) -> Result<f64> {
    let wrapped: Vec<Vec<C64>> = x.iter().map(|&z| vec![z]).collect();
    residual(sys, &wrapped)
}

/// Undetectability read off the linear systems: the diagonal pieces
/// `e_{m,m}` solve `A x = 0` and every off-diagonal piece vanishes.
pub fn decomposition_satisfies(sys: &ConstraintSystem, dec: &AttackDecomposition, tol: f64) -> Result<bool> {
    Ok(residual(sys, &dec.diagonal())? <= tol && dec.max_off_diagonal() <= tol)
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

/// Summary of one system: ranks, the three determinants, and the kernel check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub d: usize,
    pub sign: i64,
    pub rank_a: usize,
    pub rank_b: usize,
    pub det_numeric: [f64; 2],
    pub det_closed_corrected: [f64; 2],
    pub det_closed_printed: [f64; 2],
    pub kernel_is_all_ones: bool,
    pub max_residual_all_ones: f64,
}

pub fn analyze(d: usize, sign: Sign) -> Result<ConstraintReport> {
    let sys = build_system(d, sign)?;
    let ones = vec![ONE; d];
    Ok(ConstraintReport {
        d,
        sign: sign.exponent(),
        rank_a: verify_rank(&sys),
        rank_b: rank_b(&sys),
        det_numeric: pair(det_b_numeric(&sys)),
        det_closed_corrected: pair(det_b_closed_form(d, sign, DetConvention::SignedNodes)?),
        det_closed_printed: pair(det_b_closed_form(d, sign, DetConvention::PositiveNodes)?),
        kernel_is_all_ones: kernel_vector(&sys).is_ok(),
        max_residual_all_ones: residual_scalar(&sys, &ones)?,
    })
}
