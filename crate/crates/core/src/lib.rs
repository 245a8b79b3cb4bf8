//! Qudit-state simulation of entanglement-measurement attacks against
//! decoy-photon and GHZ-correlation eavesdropping checks.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex matrices, partial traces, spectra, Haar sampling.
//! * [`states`]: computational/Fourier bases, Bell and GHZ states, sampling.
//! * [`attack`]: Eve's unitary on system ⊗ ancilla and its decomposition.
//! * [`eavesdrop`]: exact and Monte-Carlo detection probabilities, Holevo leakage.
//! * [`constraints`]: the roots-of-unity linear systems behind the no-detection conditions.
//! * [`optimizer`]: Nelder–Mead search for maximal leakage under a detection cap.
//! * [`par`]: deterministic data-parallel helpers (rayon behind the `parallel` feature).

pub mod attack;
pub mod constraints;
pub mod eavesdrop;
pub mod error;
pub mod linalg;
pub mod optimizer;
pub mod par;
pub mod states;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DimensionSpec, C64};
pub use states::StateVector;

use serde::{Deserialize, Serialize};

/// A ± choice: the relative sign of a Bell pair, or the exponent sign of a
/// roots-of-unity constraint matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn exponent(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}
