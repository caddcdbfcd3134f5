use nalgebra::{Complex, Matrix2};

use crate::scalar::{c, cis, czero, lit, Real};

/// Operator on the two-level spin, basis `{|↑⟩, |↓⟩}`.
pub type SpinMatrix<T> = Matrix2<Complex<T>>;

/// Pauli and ladder matrices in the `{|↑⟩, |↓⟩}` basis.
pub mod pauli {
    use super::*;

    pub fn x<T: Real>() -> SpinMatrix<T> {
        let (o, l) = (czero::<T>(), c(T::one(), T::zero()));
        SpinMatrix::new(o, l, l, o)
    }

    pub fn y<T: Real>() -> SpinMatrix<T> {
        let o = czero::<T>();
        SpinMatrix::new(o, c(T::zero(), -T::one()), c(T::zero(), T::one()), o)
    }

    pub fn z<T: Real>() -> SpinMatrix<T> {
        let o = czero::<T>();
        SpinMatrix::new(c(T::one(), T::zero()), o, o, c(-T::one(), T::zero()))
    }

    /// `σ₊ = |↑⟩⟨↓|`.
    pub fn plus<T: Real>() -> SpinMatrix<T> {
        let o = czero::<T>();
        SpinMatrix::new(o, c(T::one(), T::zero()), o, o)
    }

    /// `σ₋ = |↓⟩⟨↑|`.
    pub fn minus<T: Real>() -> SpinMatrix<T> {
        plus::<T>().adjoint()
    }
}

/// `σ_φ = e^{−iφ} σ₊ + e^{iφ} σ₋`; equals `σ_x` at `φ = 0`.
pub fn sigma_phi<T: Real>(phi: T) -> SpinMatrix<T> {
    pauli::plus::<T>() * cis(-phi) + pauli::minus::<T>() * cis(phi)
}

/// `exp(−i χ σ_z / 2)`: phase `χ` accumulated between |↑⟩ and |↓⟩.
pub fn z_rotation<T: Real>(chi: T) -> SpinMatrix<T> {
    let half = chi / lit(2.0);
    SpinMatrix::new(cis(-half), czero(), czero(), cis(half))
}

/// Pure spin state `a|↑⟩ + b|↓⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinKet<T: Real> {
    pub up: Complex<T>,
    pub down: Complex<T>,
}

impl<T: Real> SpinKet<T> {
    pub fn up() -> Self {
        Self { up: c(T::one(), T::zero()), down: czero() }
    }

    pub fn down() -> Self {
        Self { up: czero(), down: c(T::one(), T::zero()) }
    }

    /// `(|↑⟩ + e^{iφ}|↓⟩)/√2`, the `+1` eigenstate of `σ_φ`.
    pub fn equator(phi: T) -> Self {
        let r = T::one() / lit::<T>(2.0).sqrt();
        Self { up: c(r, T::zero()), down: cis(phi) * r }
    }

    /// Eigenstate of `σ_φ` with eigenvalue `sign` (`±1`).
    pub fn phi_eigen(phi: T, sign: i8) -> Self {
        if sign >= 0 {
            Self::equator(phi)
        } else {
            Self::equator(phi + T::pi())
        }
    }
}
