//! Linear algebra on the spin ⊗ Fock Hilbert space.
//!
//! Basis ordering is spin-major: index `s * N + n` with `s = 0` for |↑⟩,
//! `s = 1` for |↓⟩ and `n` the Fock level.

mod displacement;
mod space;
mod spin;
mod state;

pub use displacement::{displacement_operator, Displacer};
pub use space::{ladder_operators, FockSpace};
pub use spin::{pauli, sigma_phi, z_rotation, SpinKet, SpinMatrix};
pub use state::{spin_populations, thermal_state, Member, MotionalState, QuantumState};
pub(crate) use state::spin_mul_ket as state_spin_mul;

use nalgebra::{Complex, DMatrix, DVector};

use crate::scalar::Real;

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Default truncated-tail tolerance for thermal states.
pub const DEFAULT_TAIL_TOL: f64 = 1e-4;

/// Largest entry modulus, `‖M‖_max`.
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter()
        .map(|z| crate::scalar::abs(*z))
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// `‖U†U − I‖_max`.
pub fn unitarity_defect<T: Real>(u: &CMatrix<T>) -> T {
    let prod = u.adjoint() * u;
    max_abs(&(prod - CMatrix::<T>::identity(u.nrows(), u.ncols())))
}

/// `‖M − M†‖_max`.
pub fn hermiticity_defect<T: Real>(m: &CMatrix<T>) -> T {
    max_abs(&(m - m.adjoint()))
}

/// Kronecker product `spin ⊗ motion` in the crate's basis ordering.
pub fn spin_tensor<T: Real>(spin: &SpinMatrix<T>, motion: &CMatrix<T>) -> CMatrix<T> {
    spin.kronecker(motion)
}

/// Scalar tolerance floor that stays meaningful in single precision.
pub(crate) fn tol<T: Real>(x: f64) -> T {
    let floor = T::default_epsilon() * crate::scalar::lit(1e3);
    let x = crate::scalar::lit::<T>(x);
    if x > floor {
        x
    } else {
        floor
    }
}
