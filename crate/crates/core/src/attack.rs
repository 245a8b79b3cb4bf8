//! Eve's entanglement-measurement attack.
//!
//! An attack is a unitary `U` on `system ⊗ ancilla` (system digit most
//! significant) together with the ancilla's initial state `|ε>`. Its action
//! on a computational basis input splits as
//!
//! ```text
//! U |l>|ε> = Σ_m |m> ⊗ e_{l,m}
//! ```
//!
//! where `e_{l,m}` is an unnormalized ancilla vector (the product of a
//! coefficient and a normalized ancilla state, stored fused so no phase or
//! magnitude gauge has to be picked). An attack escapes both decoy bases
//! exactly when every off-diagonal `e_{l,m}` vanishes and all diagonal
//! vectors coincide.
//!
//! Carrier-state helpers order wires as all carrier subsystems first, then
//! the ancillas in particle order.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, expm_hermitian, hermitian_eigs, DenseMatrix, DimensionSpec, C64, ONE, ZERO};
use crate::states::{self, StateVector};
use crate::Sign;

/// Default tolerance of [`is_undetectable`].
pub const UNDETECTABLE_TOL: f64 = 1e-8;

/// Eve's unitary on `system ⊗ ancilla` plus the ancilla's initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackUnitary {
    d_sys: usize,
    d_anc: usize,
    u: DenseMatrix,
    anc_init: StateVector,
}

impl AttackUnitary {
    pub fn new(d_sys: usize, d_anc: usize, u: DenseMatrix, anc_init: StateVector) -> Result<Self> {
        if d_sys < 2 || d_anc < 2 {
            return Err(Error::InvalidArgument(format!(
                "attack levels must be >= 2, got d_sys={d_sys}, d_anc={d_anc}"
            )));
        }
        let side = d_sys * d_anc;
        if u.rows() != side || u.cols() != side {
            return Err(Error::DimensionMismatch { expected: side, actual: u.rows().max(u.cols()) });
        }
        let deviation = u.unitarity_deviation();
        if deviation > linalg::UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        if anc_init.len() != d_anc {
            return Err(Error::DimensionMismatch { expected: d_anc, actual: anc_init.len() });
        }
        let norm = anc_init.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { d_sys, d_anc, u, anc_init })
    }

    /// Attack with the ancilla starting in `|0>`.
    pub fn with_zero_ancilla(d_sys: usize, d_anc: usize, u: DenseMatrix) -> Result<Self> {
        let anc = StateVector::basis(&DimensionSpec::uniform(d_anc, 1)?, 0)?;
        Self::new(d_sys, d_anc, u, anc)
    }

    pub fn d_sys(&self) -> usize {
        self.d_sys
    }

    pub fn d_anc(&self) -> usize {
        self.d_anc
    }

    pub fn unitary(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn ancilla_init(&self) -> &StateVector {
        &self.anc_init
    }

    /// `U (|input> ⊗ |ε>)` on dims `(d_sys, d_anc)`.
    pub fn act_on(&self, input: &StateVector) -> Result<StateVector> {
        if input.len() != self.d_sys {
            return Err(Error::DimensionMismatch { expected: self.d_sys, actual: input.len() });
        }
        let joint = input.tensor(&self.anc_init)?;
        linalg::apply(&self.u, &joint)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&AttackFile::from(self)).expect("attack serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: AttackFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}

/// On-disk attack format: `u` row-major and `anc_init` as `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackFile {
    pub d_sys: usize,
    pub d_anc: usize,
    pub u: Vec<[f64; 2]>,
    pub anc_init: Vec<[f64; 2]>,
}

impl From<&AttackUnitary> for AttackFile {
    fn from(atk: &AttackUnitary) -> Self {
        let pairs = |v: &[C64]| v.iter().map(|z| [z.re, z.im]).collect();
        Self {
            d_sys: atk.d_sys,
            d_anc: atk.d_anc,
            u: pairs(atk.u.data()),
            anc_init: pairs(atk.anc_init.amplitudes()),
        }
    }
}

impl TryFrom<AttackFile> for AttackUnitary {
    type Error = Error;

    fn try_from(file: AttackFile) -> Result<Self> {
        let side = file.d_sys * file.d_anc;
        let complex = |v: &[[f64; 2]]| v.iter().map(|&[re, im]| C64::new(re, im)).collect::<Vec<_>>();
        let u = DenseMatrix::from_vec(side, side, complex(&file.u))?;
        let anc = StateVector::unnormalized(DimensionSpec::uniform(file.d_anc, 1)?, complex(&file.anc_init))?;
        AttackUnitary::new(file.d_sys, file.d_anc, u, anc)
    }
}

/// The table of conditional ancilla vectors `e_{l,m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackDecomposition {
    d_sys: usize,
    d_anc: usize,
    e: Vec<Vec<Vec<C64>>>,
}

impl AttackDecomposition {
    pub fn d_sys(&self) -> usize {
        self.d_sys
    }

    pub fn d_anc(&self) -> usize {
        self.d_anc
    }

    /// `e_{l,m}`: ancilla vector accompanying output `|m>` for input `|l>`.
    pub fn e(&self, l: usize, m: usize) -> &[C64] {
        &self.e[l][m]
    }

    /// The diagonal vectors `e_{0,0}, ..., e_{d-1,d-1}`.
    pub fn diagonal(&self) -> Vec<Vec<C64>> {
        (0..self.d_sys).map(|l| self.e[l][l].clone()).collect()
    }

    /// `Σ_m |m> ⊗ e_{l,m}` as a flat vector.
    pub fn reassemble(&self, l: usize) -> Vec<C64> {
        self.e[l].iter().flatten().copied().collect()
    }

    /// `Σ_m ||e_{l,m}||^2` for each `l`.
    pub fn row_weights(&self) -> Vec<f64> {
        self.e
            .iter()
            .map(|row| row.iter().map(|v| linalg::norm(v).powi(2)).sum())
            .collect()
    }

    /// `max_{l≠m} ||e_{l,m}||`.
    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst = 0.0f64;
        for l in 0..self.d_sys {
            for m in 0..self.d_sys {
                if l != m {
                    worst = worst.max(linalg::norm(&self.e[l][m]));
                }
            }
        }
        worst
    }

    /// `max_l ||e_{l,l} - e_{0,0}||`.
    pub fn max_diagonal_spread(&self) -> f64 {
        let reference = &self.e[0][0];
        (0..self.d_sys)
            .map(|l| {
                let diff: Vec<C64> = self.e[l][l].iter().zip(reference).map(|(a, b)| a - b).collect();
                linalg::norm(&diff)
            })
            .fold(0.0, f64::max)
    }
}

/// `e_{l,m} = (<m| ⊗ I) U (|l> ⊗ |ε>)`.
pub fn decompose(atk: &AttackUnitary) -> AttackDecomposition {
    let (d, da) = (atk.d_sys, atk.d_anc);
    let anc = atk.anc_init.amplitudes();
    let u = &atk.u;
    let e = (0..d)
        .map(|l| {
            (0..d)
                .map(|m| {
                    (0..da)
                        .map(|a| (0..da).map(|b| u[(m * da + a, l * da + b)] * anc[b]).sum())
                        .collect()
                })
                .collect()
        })
        .collect();
    AttackDecomposition { d_sys: d, d_anc: da, e }
}

/// No-detection predicate: off-diagonal vectors vanish and all diagonal
/// vectors equal `e_{0,0}`, both within `tol`.
pub fn is_undetectable(dec: &AttackDecomposition, tol: f64) -> bool {
    dec.max_off_diagonal() <= tol && dec.max_diagonal_spread() <= tol
}

/// `U = I` on `d ⊗ d_anc`, ancilla in `|0>`.
pub fn identity_attack(d: usize, d_anc: usize) -> Result<AttackUnitary> {
    AttackUnitary::with_zero_ancilla(d, d_anc, DenseMatrix::identity(d * d_anc))
}

/// `U |l>|a> = |l>|a + l mod d>` with the ancilla in `|0>`; copies the
/// computational value into the ancilla (CNOT for `d = 2`).
pub fn controlled_shift_attack(d: usize) -> Result<AttackUnitary> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("controlled shift needs d >= 2, got {d}")));
    }
    let side = d * d;
    let mut u = DenseMatrix::zeros(side, side);
    for l in 0..d {
        for a in 0..d {
            u[(l * d + (a + l) % d, l * d + a)] = ONE;
        }
    }
    AttackUnitary::with_zero_ancilla(d, d, u)
}

/// `U = I_sys ⊗ W`: the ancilla evolves independently of the system.
pub fn local_ancilla_attack(d: usize, w: &DenseMatrix) -> Result<AttackUnitary> {
    AttackUnitary::with_zero_ancilla(d, w.rows(), linalg::kron(&DenseMatrix::identity(d), w))
}

/// `U = Σ_l |l><l| ⊗ W_l`: never flips the computational value, but leaves
/// distinct ancilla states when the `W_l` differ.
pub fn controlled_ancilla_attack(ws: &[DenseMatrix]) -> Result<AttackUnitary> {
    let d = ws.len();
    let da = ws.first().map_or(0, DenseMatrix::rows);
    let side = d * da;
    let mut u = DenseMatrix::zeros(side, side);
    for (l, w) in ws.iter().enumerate() {
        if w.rows() != da || w.cols() != da {
            return Err(Error::DimensionMismatch { expected: da, actual: w.rows() });
        }
        for r in 0..da {
            for c in 0..da {
                u[(l * da + r, l * da + c)] = w[(r, c)];
            }
        }
    }
    AttackUnitary::with_zero_ancilla(d, da, u)
}

/// Haar-random unitary on `d ⊗ d_anc`, ancilla in `|0>`.
pub fn random_attack<R: Rng + ?Sized>(d: usize, d_anc: usize, rng: &mut R) -> Result<AttackUnitary> {
    AttackUnitary::with_zero_ancilla(d, d_anc, linalg::haar_unitary(d * d_anc, rng))
}

/// Number of real parameters of a generator on `d ⊗ d_anc`.
pub fn param_count(d: usize, d_anc: usize) -> usize {
    (d * d_anc).pow(2)
}

/// Hermitian generator from parameters: the first `n` entries fill the
/// diagonal, then each `(j, k)` with `j < k` in lexicographic order takes
/// two entries (real part, imaginary part) of `H[j][k]`.
pub fn generator_from_params(n: usize, params: &[f64]) -> Result<DenseMatrix> {
    if params.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, actual: params.len() });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("parameter is not finite".into()));
    }
    let mut h = DenseMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = C64::new(params[i], 0.0);
    }
    let mut idx = n;
    for j in 0..n {
        for k in j + 1..n {
            let z = C64::new(params[idx], params[idx + 1]);
            h[(j, k)] = z;
            h[(k, j)] = z.conj();
            idx += 2;
        }
    }
    Ok(h)
}

/// Inverse of [`generator_from_params`].
pub fn params_from_generator(h: &DenseMatrix) -> Vec<f64> {
    let n = h.rows();
    let mut params: Vec<f64> = (0..n).map(|i| h[(i, i)].re).collect();
    for j in 0..n {
        for k in j + 1..n {
            params.push(h[(j, k)].re);
            params.push(h[(j, k)].im);
        }
    }
    params
}

/// `U = exp(i H(params))` on `d ⊗ d_anc`, ancilla in `|0>`.
pub fn parameterized_attack(d: usize, d_anc: usize, params: &[f64]) -> Result<AttackUnitary> {
    let h = generator_from_params(d * d_anc, params)?;
    AttackUnitary::with_zero_ancilla(d, d_anc, expm_hermitian(&h)?)
}

/// Principal Hermitian logarithm `H` with `exp(iH) = u`, eigenphases in
/// `(-π, π]`.
///
/// The unitary is diagonalised through the Hermitian pencil
/// `(u + u†)/2 + φ (u - u†)/(2i)` whose eigenvectors are shared with `u`; the
/// result is checked by re-exponentiating.
pub fn principal_generator(u: &DenseMatrix) -> Result<DenseMatrix> {
    let deviation = u.unitarity_deviation();
    if deviation > linalg::UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    let n = u.rows();
    let ud = linalg::dagger(u);
    let phi = 0.618_033_988_749_894_9;
    let pencil = DenseMatrix::from_fn(n, n, |r, c| {
        let herm = (u[(r, c)] + ud[(r, c)]) * 0.5;
        let anti = (u[(r, c)] - ud[(r, c)]) * C64::new(0.0, -0.5);
        herm + anti * phi
    });
    let eig = hermitian_eigs(&pencil)?;
    let phases: Vec<f64> = (0..n)
        .map(|k| {
            let v = eig.vectors.column(k);
            linalg::inner(&v, &u.mul_vec(&v)).arg()
        })
        .collect();
    let v = &eig.vectors;
    let h = DenseMatrix::from_fn(n, n, |r, c| {
        (0..n).map(|k| v[(r, k)] * phases[k] * v[(c, k)].conj()).sum()
    });
    let back = expm_hermitian(&h)?;
    let err = back.max_abs_diff(u);
    if err > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "unitary logarithm failed to reconstruct (error {err:e}); degenerate pencil"
        )));
    }
    Ok(h)
}

/// Parameters whose [`parameterized_attack`] reproduces `u`.
pub fn params_from_unitary(u: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(params_from_generator(&principal_generator(u)?))
}

/// Two independent attacks on the halves of a Bell pair.
///
/// Output dims `(2, 2, d_anc1, d_anc2)`.
pub fn attack_bell_carrier(a1: &AttackUnitary, a2: &AttackUnitary, b: u8, sign: Sign) -> Result<StateVector> {
    if a1.d_sys != 2 || a2.d_sys != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: a1.d_sys.max(a2.d_sys) });
    }
    let psi = states::bell_state(b, sign)?
        .tensor(&a1.anc_init)?
        .tensor(&a2.anc_init)?;
    psi.apply_on(&[0, 2], &a1.u)?.apply_on(&[1, 3], &a2.u)
}

/// Independent per-particle attacks on a `d`-level `n`-particle GHZ state.
///
/// Output dims `(d, ..., d, d_anc_1, ..., d_anc_n)`.
pub fn attack_ghz_per_particle(attacks: &[AttackUnitary], d: usize, n: usize) -> Result<StateVector> {
    if attacks.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: attacks.len() });
    }
    if let Some(bad) = attacks.iter().find(|a| a.d_sys != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: bad.d_sys });
    }
    let mut psi = states::ghz_state(d, n)?;
    for atk in attacks {
        psi = psi.tensor(&atk.anc_init)?;
    }
    for (i, atk) in attacks.iter().enumerate() {
        psi = psi.apply_on(&[i, n + i], &atk.u)?;
    }
    Ok(psi)
}

/// GHZ carrier entangled with a single ancilla held by Eve:
/// `|Ψ> = Σ_s |s> ⊗ ψ_s` over carrier strings `s`, on dims `(d, ..., d, d_anc)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointAncillaState {
    d: usize,
    n: usize,
    d_anc: usize,
    psi: StateVector,
}

impl JointAncillaState {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_anc(&self) -> usize {
        self.d_anc
    }

    pub fn state(&self) -> &StateVector {
        &self.psi
    }

    /// Regards all trailing ancilla wires of a per-particle attack output as
    /// one joint ancilla.
    pub fn from_per_particle(psi: StateVector, d: usize, n: usize) -> Result<Self> {
        let dims = psi.dims().dims();
        if dims.len() < n + 1 || dims[..n].iter().any(|&x| x != d) {
            return Err(Error::InvalidArgument(format!(
                "state dims {} do not start with {n} carriers of level {d}",
                psi.dims()
            )));
        }
        let d_anc: usize = dims[n..].iter().product();
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { norm });
        }
        let mut new_dims = vec![d; n];
        new_dims.push(d_anc);
        let psi = StateVector::unnormalized(DimensionSpec::new(new_dims)?, psi.into_amplitudes())?;
        Ok(Self { d, n, d_anc, psi })
    }

    /// Unnormalized ancilla slice accompanying carrier string `s` (flat index).
    pub fn conditional(&self, s: usize) -> Result<Vec<C64>> {
        self.psi.slice_leading(self.n, s)
    }

    /// `ε_j = sqrt(d) · (<j...j| ⊗ I)|Ψ>`, the ancilla vectors of the
    /// constant carrier strings.
    pub fn eps(&self) -> Vec<Vec<C64>> {
        let scale = (self.d as f64).sqrt();
        (0..self.d)
            .map(|j| {
                let s = states::constant_string_index(self.d, self.n, j);
                self.psi.slice_leading(self.n, s).expect("in range").iter().map(|z| z * scale).collect()
            })
            .collect()
    }
}

/// `|Ψ> = (1/sqrt d) Σ_j |j, ..., j> ⊗ ε_j` with unnormalized `ε_j`.
pub fn ghz_joint_ancilla(d: usize, n: usize, eps: &[Vec<C64>]) -> Result<JointAncillaState> {
    if eps.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: eps.len() });
    }
    let d_anc = eps[0].len();
    if let Some(bad) = eps.iter().find(|e| e.len() != d_anc) {
        return Err(Error::DimensionMismatch { expected: d_anc, actual: bad.len() });
    }
    let weight: f64 = eps.iter().map(|e| linalg::norm(e).powi(2)).sum();
    if (weight - d as f64).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm: (weight / d as f64).sqrt() });
    }
    let carrier = DimensionSpec::uniform(d, n)?;
    let n_carrier = carrier.total();
    let len = n_carrier
        .checked_mul(d_anc)
        .ok_or(Error::SizeCapExceeded { len: usize::MAX, cap: states::size_cap() })?;
    states::check_size(len)?;
    let dims = carrier.concat(&DimensionSpec::uniform(d_anc, 1)?);
    let mut amps = vec![ZERO; len];
    let s = 1.0 / (d as f64).sqrt();
    for (j, e) in eps.iter().enumerate() {
        let base = states::constant_string_index(d, n, j) * d_anc;
        for (a, z) in e.iter().enumerate() {
            amps[base + a] = z * s;
        }
    }
    Ok(JointAncillaState { d, n, d_anc, psi: StateVector::new(dims, amps)? })
}
