use serde::{Deserialize, Serialize};

use super::CMatrix;
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Truncated motional Hilbert space `{|0⟩, …, |N−1⟩}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    cutoff: usize,
}

impl FockSpace {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::param(format!("Fock cutoff must be >= 2, got {cutoff}")));
        }
        Ok(Self { cutoff })
    }

    /// Default cutoff for an evolution reaching displacement `alpha_max`
    /// from a thermal state of mean occupation `nbar`:
    /// `max(32, ⌈8 (|α|² + 4 n̄)⌉)`.
    pub fn for_evolution<T: Real>(alpha_max: T, nbar: T) -> Self {
        let a = to_f64(alpha_max).abs();
        let n = to_f64(nbar).max(0.0);
        let cutoff = (8.0 * (a * a + 4.0 * n)).ceil() as usize;
        Self { cutoff: cutoff.max(32) }
    }

    /// Motional dimension `N`.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Full spin ⊗ motion dimension `2N`.
    pub fn dim(&self) -> usize {
        2 * self.cutoff
    }

    /// Index of `|s⟩|n⟩` in the spin-major ordering (`s = 0` is |↑⟩).
    #[inline]
    pub fn index(&self, spin: usize, n: usize) -> usize {
        spin * self.cutoff + n
    }
}

/// Lowering and raising operators `(â, â†)` on the truncated space.
pub fn ladder_operators<T: Real>(space: FockSpace) -> (CMatrix<T>, CMatrix<T>) {
    let n = space.cutoff();
    let mut lower = CMatrix::<T>::zeros(n, n);
    for k in 1..n {
        lower[(k - 1, k)] = nalgebra::Complex::new(lit::<T>(k as f64).sqrt(), T::zero());
    }
    let raise = lower.adjoint();
    (lower, raise)
}
