use nalgebra::Complex;

use super::{tol, CMatrix, CVector, FockSpace, SpinKet, SpinMatrix};
use crate::error::{Error, Result};
use crate::scalar::{czero, lit, norm_sqr, to_f64, Real};

/// One pure component `w |ψ⟩⟨ψ|` of a mixed state.
#[derive(Clone, Debug)]
pub struct Member<T: Real> {
    pub weight: T,
    pub ket: CVector<T>,
}

#[derive(Clone, Debug)]
enum Repr<T: Real> {
    Density(CMatrix<T>),
    Ensemble(Vec<Member<T>>),
}

/// Density operator on spin ⊗ Fock.
///
/// States built from kets or incoherent mixtures of kets keep that
/// decomposition, so unitary evolution never has to touch the full `2N × 2N`
/// matrix. Dissipative evolution produces the dense form.
#[derive(Clone, Debug)]
pub struct QuantumState<T: Real> {
    space: FockSpace,
    repr: Repr<T>,
    pure: bool,
}

impl<T: Real> QuantumState<T> {
    /// Validated construction from a dense density matrix.
    pub fn from_density(rho: CMatrix<T>, space: FockSpace) -> Result<Self> {
        let d = space.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::InvalidState(format!(
                "density is {}x{}, space needs {d}x{d}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let state = Self { space, repr: Repr::Density(rho), pure: false };
        state.check_invariants(true)?;
        Ok(state)
    }

    /// Pure state from a ket; the ket is normalized.
    pub fn from_ket(ket: CVector<T>, space: FockSpace) -> Result<Self> {
        Self::from_ensemble(vec![Member { weight: T::one(), ket }], space)
    }

    /// Incoherent mixture `Σ w_k |ψ_k⟩⟨ψ_k|`. Kets and weights are normalized.
    pub fn from_ensemble(members: Vec<Member<T>>, space: FockSpace) -> Result<Self> {
        let mut total = T::zero();
        let mut kept = Vec::with_capacity(members.len());
        for mut m in members {
            if m.ket.len() != space.dim() {
                return Err(Error::InvalidState(format!(
                    "ket has length {}, space needs {}",
                    m.ket.len(),
                    space.dim()
                )));
            }
            if m.weight < T::zero() || !m.weight.is_finite() {
                return Err(Error::InvalidState("negative or non-finite weight".into()));
            }
            if m.weight == T::zero() {
                continue;
            }
            let norm = m.ket.iter().map(|z| norm_sqr(*z)).fold(T::zero(), |a, b| a + b).sqrt();
            if norm == T::zero() || !norm.is_finite() {
                return Err(Error::InvalidState("zero or non-finite ket".into()));
            }
            m.ket.unscale_mut(norm);
            total += m.weight;
            kept.push(m);
        }
        if kept.is_empty() {
            return Err(Error::InvalidState("empty ensemble".into()));
        }
        for m in &mut kept {
            m.weight /= total;
        }
        let pure = kept.len() == 1;
        Ok(Self { space, repr: Repr::Ensemble(kept), pure })
    }

    /// `|spin⟩⟨spin| ⊗ ρ_motion`.
    pub fn product(spin: SpinKet<T>, motion: &MotionalState<T>) -> Self {
        let space = motion.space();
        let n = space.cutoff();
        let lift = |m: &CVector<T>| {
            let mut ket = CVector::<T>::zeros(2 * n);
            for k in 0..n {
                ket[k] = spin.up * m[k];
                ket[n + k] = spin.down * m[k];
            }
            ket
        };
        let members: Vec<Member<T>> = match motion {
            MotionalState::Diagonal { weights, .. } => weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > T::zero())
                .map(|(k, w)| {
                    let mut ket = CVector::<T>::zeros(2 * n);
                    ket[k] = spin.up;
                    ket[n + k] = spin.down;
                    Member { weight: *w, ket }
                })
                .collect(),
            MotionalState::Pure { ket, .. } => vec![Member { weight: T::one(), ket: lift(ket) }],
        };
        let pure = members.len() == 1;
        Self { space, repr: Repr::Ensemble(members), pure }
    }

    pub(crate) fn from_density_unchecked(rho: CMatrix<T>, space: FockSpace) -> Self {
        Self { space, repr: Repr::Density(rho), pure: false }
    }

    pub(crate) fn from_members_unchecked(members: Vec<Member<T>>, space: FockSpace) -> Self {
        let pure = members.len() == 1;
        Self { space, repr: Repr::Ensemble(members), pure }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    /// Purity hint: true when the state is held as a single ket.
    pub fn is_pure(&self) -> bool {
        self.pure
    }

    /// The pure-state decomposition, when the state carries one.
    pub fn members(&self) -> Option<&[Member<T>]> {
        match &self.repr {
            Repr::Ensemble(m) => Some(m),
            Repr::Density(_) => None,
        }
    }

    /// Dense density matrix.
    pub fn density(&self) -> CMatrix<T> {
        match &self.repr {
            Repr::Density(rho) => rho.clone(),
            Repr::Ensemble(members) => {
                let d = self.space.dim();
                let mut rho = CMatrix::<T>::zeros(d, d);
                for m in members {
                    let w = Complex::new(m.weight, T::zero());
                    rho.gerc(w, &m.ket, &m.ket, Complex::new(T::one(), T::zero()));
                }
                rho
            }
        }
    }

    pub fn trace(&self) -> T {
        match &self.repr {
            Repr::Density(rho) => (0..rho.nrows()).map(|i| rho[(i, i)].re).fold(T::zero(), |a, b| a + b),
            Repr::Ensemble(members) => members
                .iter()
                .map(|m| m.weight * m.ket.iter().map(|z| norm_sqr(*z)).fold(T::zero(), |a, b| a + b))
                .fold(T::zero(), |a, b| a + b),
        }
    }

    /// Checks Hermiticity (1e−12), unit trace (1e−9) and, if `psd`,
    /// eigenvalues ≥ −1e−10.
    pub fn check_invariants(&self, psd: bool) -> Result<()> {
        let tr = self.trace();
        if (tr - T::one()).abs() > tol(1e-9) {
            let deficit = to_f64(T::one() - tr);
            let hint = if deficit > 1e-4 { " (Fock truncation?)" } else { "" };
            return Err(Error::InvalidState(format!("trace deviates by {deficit:e}{hint}")));
        }
        if let Repr::Density(rho) = &self.repr {
            let herm = super::hermiticity_defect(rho);
            if herm > tol(1e-12) {
                return Err(Error::InvalidState(format!("not Hermitian: defect {:e}", to_f64(herm))));
            }
            if psd {
                let eig = rho.clone().symmetric_eigenvalues();
                let min = eig.iter().fold(T::max_value().unwrap(), |a, b| if *b < a { *b } else { a });
                if min < -tol::<T>(1e-10) {
                    return Err(Error::InvalidState(format!(
                        "negative eigenvalue {:e}",
                        to_f64(min)
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(P_↑, P_↓)` after tracing out the motion.
    pub fn spin_populations(&self) -> (T, T) {
        let n = self.space.cutoff();
        match &self.repr {
            Repr::Density(rho) => {
                let mut up = T::zero();
                let mut down = T::zero();
                for k in 0..n {
                    up += rho[(k, k)].re;
                    down += rho[(n + k, n + k)].re;
                }
                (up, down)
            }
            Repr::Ensemble(members) => {
                let mut up = T::zero();
                let mut down = T::zero();
                for m in members {
                    let (mut u, mut dn) = (T::zero(), T::zero());
                    for k in 0..n {
                        u += norm_sqr(m.ket[k]);
                        dn += norm_sqr(m.ket[n + k]);
                    }
                    up += m.weight * u;
                    down += m.weight * dn;
                }
                (up, down)
            }
        }
    }

    /// Mean phonon number `⟨â†â⟩`.
    pub fn mean_phonon_number(&self) -> T {
        let n = self.space.cutoff();
        let level = |i: usize| lit::<T>((i % n) as f64);
        match &self.repr {
            Repr::Density(rho) => (0..2 * n).map(|i| level(i) * rho[(i, i)].re).fold(T::zero(), |a, b| a + b),
            Repr::Ensemble(members) => members
                .iter()
                .map(|m| {
                    m.weight
                        * m.ket
                            .iter()
                            .enumerate()
                            .map(|(i, z)| level(i) * norm_sqr(*z))
                            .fold(T::zero(), |a, b| a + b)
                })
                .fold(T::zero(), |a, b| a + b),
        }
    }

    /// Applies `U ρ U†` with a full-space unitary.
    pub fn apply_unitary(&self, u: &CMatrix<T>) -> Self {
        let repr = match &self.repr {
            Repr::Density(rho) => Repr::Density(u * rho * u.adjoint()),
            Repr::Ensemble(members) => Repr::Ensemble(
                members.iter().map(|m| Member { weight: m.weight, ket: u * &m.ket }).collect(),
            ),
        };
        Self { space: self.space, repr, pure: self.pure }
    }

    /// Applies a spin-only unitary `(u ⊗ 1) ρ (u ⊗ 1)†`.
    pub fn apply_spin(&self, u: &SpinMatrix<T>) -> Self {
        let n = self.space.cutoff();
        let repr = match &self.repr {
            Repr::Ensemble(members) => Repr::Ensemble(
                members
                    .iter()
                    .map(|m| Member { weight: m.weight, ket: spin_mul_ket(u, &m.ket, n) })
                    .collect(),
            ),
            Repr::Density(rho) => {
                let d = 2 * n;
                let mut left = CMatrix::<T>::zeros(d, d);
                for j in 0..d {
                    for k in 0..n {
                        let (a, b) = (rho[(k, j)], rho[(n + k, j)]);
                        left[(k, j)] = u[(0, 0)] * a + u[(0, 1)] * b;
                        left[(n + k, j)] = u[(1, 0)] * a + u[(1, 1)] * b;
                    }
                }
                let mut out = CMatrix::<T>::zeros(d, d);
                let uc = u.map(|z| z.conj());
                for k in 0..n {
                    for i in 0..d {
                        let (a, b) = (left[(i, k)], left[(i, n + k)]);
                        out[(i, k)] = a * uc[(0, 0)] + b * uc[(0, 1)];
                        out[(i, n + k)] = a * uc[(1, 0)] + b * uc[(1, 1)];
                    }
                }
                Repr::Density(out)
            }
        };
        Self { space: self.space, repr, pure: self.pure }
    }

    /// Fidelity `Tr(ρσ)` for the case where at least one state is pure.
    pub fn fidelity(&self, other: &Self) -> Result<T> {
        if self.space != other.space {
            return Err(Error::InvalidState("fidelity across different spaces".into()));
        }
        let (pure, mixed) = if self.pure {
            (self, other)
        } else if other.pure {
            (other, self)
        } else {
            return Err(Error::InvalidState("fidelity needs at least one pure state".into()));
        };
        let psi = &pure.members().expect("pure states carry their ket")[0].ket;
        Ok(match &mixed.repr {
            Repr::Density(rho) => (psi.adjoint() * rho * psi)[(0, 0)].re,
            Repr::Ensemble(members) => members
                .iter()
                .map(|m| m.weight * norm_sqr(psi.dotc(&m.ket)))
                .fold(T::zero(), |a, b| a + b),
        })
    }
}

pub(crate) fn spin_mul_ket<T: Real>(u: &SpinMatrix<T>, ket: &CVector<T>, n: usize) -> CVector<T> {
    let mut out = CVector::<T>::from_element(2 * n, czero());
    for k in 0..n {
        let (a, b) = (ket[k], ket[n + k]);
        out[k] = u[(0, 0)] * a + u[(0, 1)] * b;
        out[n + k] = u[(1, 0)] * a + u[(1, 1)] * b;
    }
    out
}

/// `(P_↑, P_↓)` of a state.
pub fn spin_populations<T: Real>(state: &QuantumState<T>) -> (T, T) {
    state.spin_populations()
}

/// Motional state prepared before the spin is attached.
#[derive(Clone, Debug)]
pub enum MotionalState<T: Real> {
    /// Diagonal in the Fock basis with the given populations.
    Diagonal { space: FockSpace, weights: Vec<T> },
    /// A normalized motional ket.
    Pure { space: FockSpace, ket: CVector<T> },
}

impl<T: Real> MotionalState<T> {
    /// Fock state `|n⟩`.
    pub fn fock(n: usize, space: FockSpace) -> Result<Self> {
        if n >= space.cutoff() {
            return Err(Error::CutoffTooSmall {
                cutoff: space.cutoff(),
                reason: format!("Fock level {n} outside space"),
            });
        }
        let mut weights = vec![T::zero(); space.cutoff()];
        weights[n] = T::one();
        Ok(MotionalState::Diagonal { space, weights })
    }

    pub fn space(&self) -> FockSpace {
        match self {
            MotionalState::Diagonal { space, .. } | MotionalState::Pure { space, .. } => *space,
        }
    }

    /// Fock-level populations.
    pub fn populations(&self) -> Vec<T> {
        match self {
            MotionalState::Diagonal { weights, .. } => weights.clone(),
            MotionalState::Pure { ket, .. } => ket.iter().map(|z| norm_sqr(*z)).collect(),
        }
    }

    pub fn mean_phonon_number(&self) -> T {
        self.populations()
            .iter()
            .enumerate()
            .map(|(k, p)| lit::<T>(k as f64) * *p)
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Thermal motional state of mean occupation `nbar`, renormalized after
/// truncation. Fails if the discarded tail mass `(n̄/(n̄+1))^N` reaches
/// `tail_tol`.
pub fn thermal_state<T: Real>(nbar: T, space: FockSpace, tail_tol: T) -> Result<MotionalState<T>> {
    if nbar < T::zero() || !nbar.is_finite() {
        return Err(Error::param(format!("mean occupation must be >= 0, got {}", to_f64(nbar))));
    }
    let n = space.cutoff();
    let ratio = nbar / (nbar + T::one());
    let tail = ratio.powi(n as i32);
    if tail >= tail_tol {
        return Err(Error::CutoffTooSmall {
            cutoff: n,
            reason: format!(
                "thermal tail mass {:.3e} beyond cutoff for nbar = {} exceeds {:.1e}",
                to_f64(tail),
                to_f64(nbar),
                to_f64(tail_tol)
            ),
        });
    }
    let kept = T::one() - tail;
    let mut weights = Vec::with_capacity(n);
    let mut p = T::one() / (nbar + T::one());
    for _ in 0..n {
        weights.push(p / kept);
        p *= ratio;
    }
    Ok(MotionalState::Diagonal { space, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::DEFAULT_TAIL_TOL;

    fn space(n: usize) -> FockSpace {
        FockSpace::new(n).unwrap()
    }

    #[test]
    fn ground_state_at_zero_nbar() {
        let m = thermal_state::<f64>(0.0, space(8), DEFAULT_TAIL_TOL).unwrap();
        let w = m.populations();
        assert_eq!(w[0], 1.0);
        assert!(w[1..].iter().all(|p| *p == 0.0));
    }

    #[test]
    fn thermal_mean_at_large_cutoff() {
        let m = thermal_state::<f64>(6.0, space(128), DEFAULT_TAIL_TOL).unwrap();
        assert!((m.mean_phonon_number() - 6.0).abs() < 0.01);
    }

    #[test]
    fn thermal_tail_rejected() {
        // tail mass (6/7)^16 = 0.0851 > 1e-4
        let tail: f64 = (6.0f64 / 7.0).powi(16);
        assert!((tail - 0.0851).abs() < 1e-3);
        match thermal_state::<f64>(6.0, space(16), DEFAULT_TAIL_TOL) {
            Err(Error::CutoffTooSmall { cutoff: 16, .. }) => {}
            other => panic!("expected cutoff error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_nbar() {
        assert!(thermal_state::<f64>(-0.1, space(8), DEFAULT_TAIL_TOL).is_err());
    }

    #[test]
    fn populations_of_spin_up_thermal() {
        let m = thermal_state::<f64>(6.0, space(96), DEFAULT_TAIL_TOL).unwrap();
        let s = QuantumState::product(SpinKet::up(), &m);
        let (u, d) = s.spin_populations();
        assert!((u - 1.0).abs() < 1e-12 && d.abs() < 1e-15);
        let dense = QuantumState::from_density(s.density(), s.space()).unwrap();
        let (u2, d2) = dense.spin_populations();
        assert!((u2 - 1.0).abs() < 1e-12 && d2.abs() < 1e-15);
    }

    #[test]
    fn equal_superposition_populations() {
        let s = QuantumState::<f64>::product(SpinKet::equator(0.0), &MotionalState::fock(0, space(4)).unwrap());
        let (u, d) = s.spin_populations();
        assert!((u - 0.5).abs() < 1e-15 && (d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hand_built_four_dim_density() {
        // N = 2: basis |↑0⟩ |↑1⟩ |↓0⟩ |↓1⟩
        let sp = space(2);
        let mut rho = CMatrix::<f64>::zeros(4, 4);
        rho[(0, 0)] = Complex::new(0.1, 0.0);
        rho[(1, 1)] = Complex::new(0.2, 0.0);
        rho[(2, 2)] = Complex::new(0.3, 0.0);
        rho[(3, 3)] = Complex::new(0.4, 0.0);
        rho[(0, 3)] = Complex::new(0.05, 0.02);
        rho[(3, 0)] = Complex::new(0.05, -0.02);
        let s = QuantumState::from_density(rho.clone(), sp).unwrap();
        let (u, d) = s.spin_populations();
        assert!((u - 0.3).abs() < 1e-15 && (d - 0.7).abs() < 1e-15);

        // linearity: mixing with |↑0⟩⟨↑0|
        let mut pure = CMatrix::<f64>::zeros(4, 4);
        pure[(0, 0)] = Complex::new(1.0, 0.0);
        let mix = QuantumState::from_density(rho * Complex::new(0.25, 0.0) + pure * Complex::new(0.75, 0.0), sp)
            .unwrap();
        let (u, d) = mix.spin_populations();
        assert!((u - (0.25 * 0.3 + 0.75)).abs() < 1e-15);
        assert!((d - 0.25 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_density() {
        let sp = space(2);
        let mut rho = CMatrix::<f64>::zeros(4, 4);
        rho[(0, 0)] = Complex::new(0.5, 0.0);
        assert!(QuantumState::from_density(rho.clone(), sp).is_err());
        rho[(1, 1)] = Complex::new(0.5, 0.0);
        rho[(0, 1)] = Complex::new(0.1, 0.0);
        assert!(QuantumState::from_density(rho.clone(), sp).is_err());
        rho[(1, 0)] = Complex::new(0.1, 0.0);
        assert!(QuantumState::from_density(rho.clone(), sp).is_ok());
        rho[(0, 1)] = Complex::new(0.9, 0.0);
        rho[(1, 0)] = Complex::new(0.9, 0.0);
        assert!(QuantumState::from_density(rho, sp).is_err());
    }

    #[test]
    fn spin_rotation_on_density_matches_ensemble() {
        let m = thermal_state::<f64>(1.0, space(24), DEFAULT_TAIL_TOL).unwrap();
        let s = QuantumState::product(SpinKet::equator(0.3), &m);
        let u = crate::quantum::sigma_phi::<f64>(0.9);
        let a = s.apply_spin(&u).density();
        let b = QuantumState::from_density(s.density(), s.space()).unwrap().apply_spin(&u).density();
        assert!(crate::quantum::max_abs(&(a - b)) < 1e-14);
    }
}
