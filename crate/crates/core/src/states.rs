//! State vectors and the constructors for the carrier and decoy states:
//! computational and Fourier bases, Bell pairs, d-level GHZ states and
//! their Fourier transform, plus measurement statistics.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, root_of_unity, DenseMatrix, DimensionSpec, C64, ONE, ZERO};
use crate::Sign;

/// Default bound on the number of amplitudes in a constructed register.
pub const DEFAULT_SIZE_CAP: usize = 1 << 20;

/// Environment variable that overrides [`DEFAULT_SIZE_CAP`].
pub const SIZE_CAP_ENV: &str = "EMGUARD_SIZE_CAP";

const NORM_TOL: f64 = 1e-10;

/// Current amplitude-count cap, honouring `EMGUARD_SIZE_CAP` when it parses.
pub fn size_cap() -> usize {
    std::env::var(SIZE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_SIZE_CAP)
}

pub(crate) fn check_size(len: usize) -> Result<()> {
    let cap = size_cap();
    if len > cap {
        return Err(Error::SizeCapExceeded { len, cap });
    }
    Ok(())
}

/// `d^n`, or `None` on overflow.
pub(crate) fn checked_pow(d: usize, n: usize) -> Option<usize> {
    (0..n).try_fold(1usize, |acc, _| acc.checked_mul(d))
}

/// Pure state on a tensor-product register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: DimensionSpec,
    amps: Vec<C64>,
}

impl StateVector {
    /// Normalized state; the 2-norm must be 1 within 1e-10.
    pub fn new(dims: DimensionSpec, amps: Vec<C64>) -> Result<Self> {
        let psi = Self::unnormalized(dims, amps)?;
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(psi)
    }

    /// State without the normalization check (e.g. conditional slices).
    pub fn unnormalized(dims: DimensionSpec, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != dims.total() {
            return Err(Error::DimensionMismatch { expected: dims.total(), actual: amps.len() });
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("amplitude is not finite".into()));
        }
        Ok(Self { dims, amps })
    }

    pub(crate) fn from_parts_unchecked(dims: DimensionSpec, amps: Vec<C64>) -> Self {
        debug_assert_eq!(dims.total(), amps.len());
        Self { dims, amps }
    }

    /// Computational basis vector with flat index `index`.
    pub fn basis(dims: &DimensionSpec, index: usize) -> Result<Self> {
        let total = dims.total();
        if index >= total {
            return Err(Error::IndexOutOfRange { index, limit: total });
        }
        let mut amps = vec![ZERO; total];
        amps[index] = ONE;
        Ok(Self { dims: dims.clone(), amps })
    }

    pub fn dims(&self) -> &DimensionSpec {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        linalg::inner(&self.amps, &other.amps)
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        if self.dims != other.dims {
            return f64::INFINITY;
        }
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `self ⊗ other`, subsystems of `other` appended after ours.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let len = self.len().checked_mul(other.len()).ok_or(Error::SizeCapExceeded {
            len: usize::MAX,
            cap: size_cap(),
        })?;
        check_size(len)?;
        let mut amps = Vec::with_capacity(len);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { dims: self.dims.concat(&other.dims), amps })
    }

    /// Applies `u` to the listed subsystems; the first listed subsystem is
    /// the most significant digit of `u`'s index.
    pub fn apply_on(&self, sites: &[usize], u: &DenseMatrix) -> Result<StateVector> {
        self.dims.check_sites(sites)?;
        let local = self.dims.local_dim(sites);
        if !u.is_square() {
            return Err(Error::NotSquare { rows: u.rows(), cols: u.cols() });
        }
        if u.rows() != local {
            return Err(Error::DimensionMismatch { expected: local, actual: u.rows() });
        }
        let local_offsets = self.dims.site_offsets(sites);
        let rest_offsets = self.dims.site_offsets(&self.dims.complement(sites));
        let mut out = vec![ZERO; self.amps.len()];
        let mut gathered = vec![ZERO; local];
        for &base in &rest_offsets {
            for (g, &off) in gathered.iter_mut().zip(&local_offsets) {
                *g = self.amps[base + off];
            }
            for (r, &off) in local_offsets.iter().enumerate() {
                out[base + off] = u.row(r).iter().zip(&gathered).map(|(a, b)| a * b).sum();
            }
        }
        Ok(Self { dims: self.dims.clone(), amps: out })
    }

    /// `|psi><psi|`.
    pub fn density(&self) -> DenseMatrix {
        DenseMatrix::outer(&self.amps)
    }

    /// Reduced density matrix on `keep` (ascending subsystem order), computed
    /// directly from the amplitudes.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DenseMatrix> {
        self.dims.check_sites(keep)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let kept = self.dims.site_offsets(&keep);
        let traced = self.dims.site_offsets(&self.dims.complement(&keep));
        Ok(DenseMatrix::from_fn(kept.len(), kept.len(), |a, b| {
            traced
                .iter()
                .map(|&t| self.amps[kept[a] + t] * self.amps[kept[b] + t].conj())
                .sum()
        }))
    }

    /// Computational-basis probabilities of the listed subsystems (first
    /// listed = most significant), marginalising the rest.
    pub fn marginal(&self, sites: &[usize]) -> Result<Vec<f64>> {
        self.dims.check_sites(sites)?;
        let local = self.dims.site_offsets(sites);
        let rest = self.dims.site_offsets(&self.dims.complement(sites));
        Ok(local
            .iter()
            .map(|&off| rest.iter().map(|&r| self.amps[off + r].norm_sqr()).sum())
            .collect())
    }

    /// Amplitudes of the trailing subsystems conditioned on the leading
    /// subsystems taking flat value `prefix` (unnormalized slice).
    pub fn slice_leading(&self, n_leading: usize, prefix: usize) -> Result<Vec<C64>> {
        if n_leading > self.dims.len() {
            return Err(Error::BadIndexSet(format!("{n_leading} leading subsystems")));
        }
        let tail: usize = self.dims.dims()[n_leading..].iter().product();
        let head = self.amps.len() / tail;
        if prefix >= head {
            return Err(Error::IndexOutOfRange { index: prefix, limit: head });
        }
        Ok(self.amps[prefix * tail..(prefix + 1) * tail].to_vec())
    }
}

/// Probabilities over computational-basis strings of a register.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    dims: DimensionSpec,
    probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn dims(&self) -> &DimensionSpec {
        &self.dims
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, digits: &[usize]) -> Result<f64> {
        Ok(self.probabilities[self.dims.flat_index(digits)?])
    }

    /// Draws a flat index by inverse-CDF sampling.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.probabilities, rng)
    }
}

/// Inverse-CDF draw from a finite distribution.
pub(crate) fn sample_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let total: f64 = probabilities.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// `|k>` in a single `d`-level system.
pub fn basis_state(d: usize, k: usize) -> Result<StateVector> {
    if k >= d {
        return Err(Error::IndexOutOfRange { index: k, limit: d });
    }
    StateVector::basis(&DimensionSpec::uniform(d, 1)?, k)
}

/// Quantum Fourier transform: `F[r][k] = zeta^(k r) / sqrt(d)`.
pub fn qft_matrix(d: usize) -> Result<DenseMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("QFT needs d >= 2, got {d}")));
    }
    let s = 1.0 / (d as f64).sqrt();
    Ok(DenseMatrix::from_fn(d, d, |r, k| root_of_unity(d, (r * k) as i64) * s))
}

/// `F|k>`.
pub fn fourier_state(d: usize, k: usize) -> Result<StateVector> {
    let f = qft_matrix(d)?;
    linalg::apply(&f, &basis_state(d, k)?)
}

/// `(|0 b> ± |1 b̄>) / sqrt(2)`.
pub fn bell_state(b: u8, sign: Sign) -> Result<StateVector> {
    if b > 1 {
        return Err(Error::InvalidArgument(format!("bit must be 0 or 1, got {b}")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let b = b as usize;
    let mut amps = vec![ZERO; 4];
    amps[b] = C64::new(s, 0.0);
    amps[2 + (1 - b)] = C64::new(sign.value() * s, 0.0);
    StateVector::new(DimensionSpec::uniform(2, 2)?, amps)
}

fn ghz_dims(d: usize, n: usize) -> Result<DimensionSpec> {
    if d < 2 || n < 2 {
        return Err(Error::InvalidArgument(format!("GHZ needs d >= 2 and n >= 2, got d={d}, n={n}")));
    }
    let len = checked_pow(d, n).ok_or(Error::SizeCapExceeded { len: usize::MAX, cap: size_cap() })?;
    check_size(len)?;
    DimensionSpec::uniform(d, n)
}

/// Flat index of the constant string `j, j, ..., j` over `n` sites of level `d`.
pub fn constant_string_index(d: usize, n: usize, j: usize) -> usize {
    (0..n).fold(0, |acc, _| acc * d + j)
}

/// `(1/sqrt d) sum_j |j, j, ..., j>` on `n` qudits.
pub fn ghz_state(d: usize, n: usize) -> Result<StateVector> {
    let dims = ghz_dims(d, n)?;
    let mut amps = vec![ZERO; dims.total()];
    let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    for j in 0..d {
        amps[constant_string_index(d, n, j)] = a;
    }
    StateVector::new(dims, amps)
}

/// `F^{⊗n}` applied site by site to the GHZ state.
pub fn ghz_fourier(d: usize, n: usize) -> Result<StateVector> {
    let f = qft_matrix(d)?;
    let mut psi = ghz_state(d, n)?;
    for site in 0..n {
        psi = psi.apply_on(&[site], &f)?;
    }
    Ok(psi)
}

/// Squared amplitudes per computational-basis string.
pub fn outcome_distribution(psi: &StateVector) -> Result<OutcomeDistribution> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm });
    }
    Ok(OutcomeDistribution {
        dims: psi.dims().clone(),
        probabilities: psi.amplitudes().iter().map(|z| z.norm_sqr()).collect(),
    })
}

/// Samples one computational-basis string (big-endian digits).
pub fn sample_outcome<R: Rng + ?Sized>(psi: &StateVector, rng: &mut R) -> Result<Vec<usize>> {
    let dist = outcome_distribution(psi)?;
    Ok(psi.dims().digits(dist.sample_index(rng)))
}
