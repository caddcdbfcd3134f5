//! Closed-form model of the bichromatic spin-dependent force.
//!
//! Under the balanced red/blue sideband drive (`Ω_r = Ω_b = Ω_sb`,
//! `−δ_r = δ_b = δ`) each `σ_φ` eigenstate is displaced along the circle
//! `α(t) = α₀ e^{−iφ_m} (1 − e^{−iδt})`, `α₀ = Ω_sb / 2δ`.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::constants;
use crate::error::{Error, Result};
use crate::quantum::{CMatrix, CVector, Displacer, FockSpace, Member, QuantumState, SpinKet, SpinMatrix};
use crate::scalar::{abs, c, cis, lit, norm_sqr, to_f64, Real};

/// Parameters of one bichromatic force pulse. Angular quantities are in
/// rad/s, the duration in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceParams<T: Real> {
    /// Sideband Rabi frequency `Ω_sb`.
    pub omega_sb: T,
    /// Signed force detuning `δ`.
    pub delta: T,
    /// Spin phase `φ_s` (orientation of `σ_φ`).
    pub phi_s: T,
    /// Motional phase `φ_m`.
    pub phi_m: T,
    /// Pulse duration `τ`.
    pub duration: T,
}

impl<T: Real> ForceParams<T> {
    pub fn new(omega_sb: T, delta: T, phi_s: T, phi_m: T, duration: T) -> Result<Self> {
        let f = Self { omega_sb, delta, phi_s, phi_m, duration };
        f.validate()?;
        Ok(f)
    }

    /// Convenience constructor taking `Ω_sb/2π` and `δ/2π` in kHz and `τ` in µs.
    pub fn from_lab_units(omega_sb_khz: f64, delta_khz: f64, tau_us: f64) -> Result<Self> {
        let two_pi_khz = std::f64::consts::TAU * 1e3;
        Self::new(
            lit(omega_sb_khz * two_pi_khz),
            lit(delta_khz * two_pi_khz),
            T::zero(),
            T::zero(),
            lit(tau_us * 1e-6),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_sb > T::zero()) || !self.omega_sb.is_finite() {
            return Err(Error::param(format!("omega_sb must be > 0, got {}", to_f64(self.omega_sb))));
        }
        if !(self.duration >= T::zero()) || !self.duration.is_finite() {
            return Err(Error::param(format!("duration must be >= 0, got {}", to_f64(self.duration))));
        }
        if !self.delta.is_finite() || !self.phi_s.is_finite() || !self.phi_m.is_finite() {
            return Err(Error::param("non-finite force parameter"));
        }
        Ok(())
    }

    /// `α₀ = Ω_sb / 2δ`; `None` on resonance.
    pub fn alpha0(&self) -> Option<T> {
        if self.delta == T::zero() {
            None
        } else {
            Some(self.omega_sb / (lit::<T>(2.0) * self.delta))
        }
    }

    pub fn with_duration(mut self, duration: T) -> Self {
        self.duration = duration;
        self
    }

    pub fn with_delta(mut self, delta: T) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_phases(mut self, phi_s: T, phi_m: T) -> Self {
        self.phi_s = phi_s;
        self.phi_m = phi_m;
        self
    }

    /// Largest `|α(t)|` reached for `t ∈ [0, τ]`.
    pub fn max_displacement(&self) -> T {
        match self.alpha0() {
            None => self.omega_sb * self.duration / lit(2.0),
            Some(a0) => {
                if (self.delta * self.duration).abs() >= T::pi() {
                    lit::<T>(2.0) * a0.abs()
                } else {
                    abs(alpha_trajectory(self, self.duration))
                }
            }
        }
    }
}

/// Phase-space displacement `α(t)` of the `|↑_φ⟩` component.
///
/// On resonance returns the limit `(i/2) Ω_sb t e^{−iφ_m}`.
pub fn alpha_trajectory<T: Real>(f: &ForceParams<T>, t: T) -> Complex<T> {
    let rot = cis(-f.phi_m);
    match f.alpha0() {
        None => rot * c(T::zero(), f.omega_sb * t / lit(2.0)),
        Some(a0) => {
            // 1 − e^{−iδt} = 2 sin(δt/2) · i e^{−iδt/2}, accurate for small δt
            let half = f.delta * t / lit(2.0);
            let s = lit::<T>(2.0) * half.sin();
            let one_minus = c(T::zero(), s) * cis(-half);
            rot * one_minus * a0
        }
    }
}

/// Ion and trap constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrapRecord<T>", into = "TrapRecord<T>")]
pub struct TrapConfig<T: Real> {
    mass: T,
    omega_z: T,
    z0: T,
    omega_hf: T,
    nbar: T,
    nbar_dot: T,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
struct TrapRecord<T: Real> {
    mass_kg: T,
    omega_z: T,
    omega_hf: T,
    nbar: T,
    nbar_dot: T,
}

impl<T: Real> TryFrom<TrapRecord<T>> for TrapConfig<T> {
    type Error = Error;
    fn try_from(r: TrapRecord<T>) -> Result<Self> {
        TrapConfig::new(r.mass_kg, r.omega_z, r.omega_hf, r.nbar, r.nbar_dot)
    }
}

impl<T: Real> From<TrapConfig<T>> for TrapRecord<T> {
    fn from(t: TrapConfig<T>) -> Self {
        TrapRecord { mass_kg: t.mass, omega_z: t.omega_z, omega_hf: t.omega_hf, nbar: t.nbar, nbar_dot: t.nbar_dot }
    }
}

fn ground_state_size<T: Real>(mass: T, omega_z: T) -> T {
    (lit::<T>(constants::HBAR) / (lit::<T>(2.0) * mass * omega_z)).sqrt()
}

impl<T: Real> TrapConfig<T> {
    /// `mass` in kg, `omega_z` and `omega_hf` in rad/s, `nbar_dot` in 1/s.
    pub fn new(mass: T, omega_z: T, omega_hf: T, nbar: T, nbar_dot: T) -> Result<Self> {
        if !(mass > T::zero()) {
            return Err(Error::param("ion mass must be > 0"));
        }
        if !(omega_z > T::zero()) {
            return Err(Error::param("trap frequency must be > 0"));
        }
        if !(nbar >= T::zero()) || !(nbar_dot >= T::zero()) {
            return Err(Error::param("nbar and nbar_dot must be >= 0"));
        }
        Ok(Self { mass, omega_z, z0: ground_state_size(mass, omega_z), omega_hf, nbar, nbar_dot })
    }

    /// 111Cd+ in the 3.55 MHz trap after Doppler cooling, with the directly
    /// measured heating rate.
    pub fn cadmium111() -> Self {
        Self::new(
            lit(constants::CD111_ION_MASS),
            lit(constants::OMEGA_Z),
            lit(constants::OMEGA_HF),
            lit(constants::NBAR_DOPPLER),
            lit(constants::NBAR_DOT_MEASURED),
        )
        .expect("built-in constants are valid")
    }

    pub fn with_thermal(mut self, nbar: T, nbar_dot: T) -> Result<Self> {
        if !(nbar >= T::zero()) || !(nbar_dot >= T::zero()) {
            return Err(Error::param("nbar and nbar_dot must be >= 0"));
        }
        self.nbar = nbar;
        self.nbar_dot = nbar_dot;
        Ok(self)
    }

    pub fn mass(&self) -> T {
        self.mass
    }
    pub fn omega_z(&self) -> T {
        self.omega_z
    }
    /// Ground-state wavepacket size `z₀ = √(ħ / 2mω_z)`, m.
    pub fn z0(&self) -> T {
        self.z0
    }
    pub fn omega_hf(&self) -> T {
        self.omega_hf
    }
    pub fn nbar(&self) -> T {
        self.nbar
    }
    pub fn nbar_dot(&self) -> T {
        self.nbar_dot
    }

    /// Relative difference between the cached and a freshly computed `z₀`.
    pub fn z0_consistency(&self) -> T {
        ((ground_state_size(self.mass, self.omega_z) - self.z0) / self.z0).abs()
    }
}

/// Position (m) and momentum (kg·m/s) displacement for phase-space
/// displacement `α`: `2z₀ Re α` and `2mω_z z₀ Im α`.
pub fn position_momentum<T: Real>(alpha: Complex<T>, trap: &TrapConfig<T>) -> (T, T) {
    let two = lit::<T>(2.0);
    (two * trap.z0 * alpha.re, two * trap.mass * trap.omega_z * trap.z0 * alpha.im)
}

/// Spin-dependent displacement `D(α)|↑_φ⟩⟨↑_φ| + D(−α)|↓_φ⟩⟨↓_φ|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinDependentDisplacement<T: Real> {
    pub alpha: Complex<T>,
    pub phi_s: T,
}

impl<T: Real> SpinDependentDisplacement<T> {
    pub fn from_force(f: &ForceParams<T>, t: T) -> Self {
        Self { alpha: alpha_trajectory(f, t), phi_s: f.phi_s }
    }

    /// Columns are `|↑_φ⟩`, `|↓_φ⟩`.
    fn basis(&self) -> SpinMatrix<T> {
        let up = SpinKet::phi_eigen(self.phi_s, 1);
        let dn = SpinKet::phi_eigen(self.phi_s, -1);
        SpinMatrix::new(up.up, dn.up, up.down, dn.down)
    }

    /// Dense `2N × 2N` unitary.
    pub fn matrix(&self, space: FockSpace) -> Result<CMatrix<T>> {
        let d = crate::quantum::displacement_operator(self.alpha, space)?;
        let d_minus = d.adjoint();
        let v = self.basis();
        let proj = |k: usize| {
            let col = v.column(k);
            col * col.adjoint()
        };
        let (p_up, p_dn) = (proj(0), proj(1));
        Ok(p_up.kronecker(&d) + p_dn.kronecker(&d_minus))
    }

    /// Applies the unitary to a state, using `displacer` for the motional
    /// blocks.
    pub fn apply(&self, state: &QuantumState<T>, displacer: &mut Displacer<T>) -> Result<QuantumState<T>> {
        let space = state.space();
        if displacer.space() != space {
            return Err(Error::InvalidState("displacer built for a different space".into()));
        }
        let n = space.cutoff();
        let v = self.basis();
        let vt = v.adjoint();
        if let Some(members) = state.members() {
            let mut plus = Vec::with_capacity(members.len());
            let mut minus = Vec::with_capacity(members.len());
            for m in members {
                let rotated = crate::quantum::state_spin_mul(&vt, &m.ket, n);
                plus.push(rotated.rows(0, n).into_owned());
                minus.push(rotated.rows(n, n).into_owned());
            }
            let plus = displacer.apply_batch(self.alpha, &plus, false)?;
            let minus = displacer.apply_batch(self.alpha, &minus, true)?;
            let out = members
                .iter()
                .zip(plus.iter().zip(&minus))
                .map(|(m, (p, q))| {
                    let mut ket = CVector::<T>::zeros(2 * n);
                    ket.rows_mut(0, n).copy_from(p);
                    ket.rows_mut(n, n).copy_from(q);
                    Member { weight: m.weight, ket: crate::quantum::state_spin_mul(&v, &ket, n) }
                })
                .collect();
            return Ok(QuantumState::from_members_unchecked(out, space));
        }
        let d = displacer.matrix(self.alpha)?;
        let dm = d.adjoint();
        let rho = state.apply_spin(&vt).density();
        let mut out = CMatrix::<T>::zeros(2 * n, 2 * n);
        for (bs, ls) in [(0usize, &d), (1, &dm)] {
            for (bt, rs) in [(0usize, &d), (1, &dm)] {
                let block = rho.view((bs * n, bt * n), (n, n));
                let moved = ls * block * rs.adjoint();
                out.view_mut((bs * n, bt * n), (n, n)).copy_from(&moved);
            }
        }
        Ok(QuantumState::from_density_unchecked(out, space).apply_spin(&v))
    }
}

/// Dense spin-dependent displacement unitary for force `f` after time `t`.
pub fn sd_displacement_unitary<T: Real>(f: &ForceParams<T>, t: T, space: FockSpace) -> Result<CMatrix<T>> {
    SpinDependentDisplacement::from_force(f, t).matrix(space)
}

/// Probability of `|↓⟩` after a force of duration `tau` on `|↑⟩ ⊗ thermal(n̄)`
/// with heating rate `nbar_dot` (1/s):
/// `½[1 − exp(−½ ṅ̄ τ |4α₀|² − (n̄ + ½)|2α(τ)|²)]`.
pub fn cat_probability<T: Real>(f: &ForceParams<T>, nbar: T, nbar_dot: T, tau: T) -> Result<T> {
    let a0 = f
        .alpha0()
        .ok_or_else(|| Error::param("cat probability is undefined at zero detuning"))?;
    if !(nbar >= T::zero()) || !(nbar_dot >= T::zero()) {
        return Err(Error::param("nbar and nbar_dot must be >= 0"));
    }
    if !(tau >= T::zero()) {
        return Err(Error::param("duration must be >= 0"));
    }
    let half = lit::<T>(0.5);
    let four_a0 = lit::<T>(4.0) * a0;
    let alpha = alpha_trajectory(f, tau);
    let exponent = -half * nbar_dot * tau * four_a0 * four_a0 - (nbar + half) * lit::<T>(4.0) * norm_sqr(alpha);
    let p = half * (T::one() - exponent.exp());
    Ok(p.max(T::zero()).min(half))
}

/// Ramsey signal `P↓ = P↓ᶜ sin²(φ_o − φ_s)`.
pub fn ramsey_signal<T: Real>(phi_o: T, phi_s: T, pcat: T) -> T {
    let s = (phi_o - phi_s).sin();
    pcat * s * s
}

/// Separation of the two cat components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatSeparation<T: Real> {
    /// `Δz / z₀ = 4|α|`.
    pub in_z0: T,
    /// `Δz` in metres.
    pub metres: T,
}

pub fn cat_separation<T: Real>(f: &ForceParams<T>, t: T, trap: &TrapConfig<T>) -> CatSeparation<T> {
    let in_z0 = lit::<T>(4.0) * abs(alpha_trajectory(f, t));
    CatSeparation { in_z0, metres: in_z0 * trap.z0 }
}

/// RMS position spread of a thermal state in units of `z₀`: `√(2n̄ + 1)`.
pub fn thermal_rms_z0<T: Real>(nbar: T) -> T {
    (lit::<T>(2.0) * nbar + T::one()).sqrt()
}

/// Revival times `2πm/|δ|` for `m = 1..=m_max`.
pub fn revival_times<T: Real>(delta: T, m_max: usize) -> Result<Vec<T>> {
    if delta == T::zero() || !delta.is_finite() {
        return Err(Error::param("revival times need a nonzero detuning"));
    }
    let period = T::two_pi() / delta.abs();
    Ok((1..=m_max).map(|m| period * lit::<T>(m as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn khz(x: f64) -> f64 {
        TAU * 1e3 * x
    }

    #[test]
    fn closes_after_one_period() {
        for (om, pm) in [(1.0, 0.0), (2.2, 1.3), (0.3, -2.0)] {
            let f = ForceParams::new(khz(om), khz(5.0), 0.0, pm, 0.0).unwrap();
            assert!(alpha_trajectory(&f, 200e-6).norm() < 1e-12);
        }
    }

    #[test]
    fn half_period_gives_twice_alpha0() {
        let f = ForceParams::new(khz(2.0), khz(5.0), 0.0, 0.0, 0.0).unwrap();
        let a = alpha_trajectory(&f, PI / khz(5.0));
        assert!((a - Complex::new(0.4, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn resonance_limit() {
        let f = ForceParams::new(khz(1.62), 0.0, 0.0, 0.0, 500e-6).unwrap();
        let a = alpha_trajectory(&f, 500e-6);
        assert!((a.norm() - 2.5447).abs() < 1e-4);
        // numeric limit from small detunings
        for eps in [1e-3, 1e-5] {
            let near = alpha_trajectory(&f.with_delta(eps), 500e-6);
            assert!((near - a).norm() < 1e-3 * eps.max(1e-6) * 10.0);
        }
    }

    #[test]
    fn position_and_momentum() {
        let trap = TrapConfig::<f64>::cadmium111();
        let (z, p) = position_momentum(Complex::new(1.0, 0.0), &trap);
        assert_eq!((z, p), (2.0 * trap.z0(), 0.0));
        let (z, p) = position_momentum(Complex::new(0.0, 1.0), &trap);
        assert_eq!(z, 0.0);
        assert!((p - 2.0 * trap.mass() * trap.omega_z() * trap.z0()).abs() < 1e-40);
    }

    #[test]
    fn cadmium_ground_state_size() {
        // sqrt(hbar / (2 m w)) with m = 110.9041838 u - m_e, w = 2π·3.55 MHz
        let trap = TrapConfig::<f64>::cadmium111();
        assert!((trap.z0() * 1e9 - 3.5827).abs() < 1e-3, "z0 = {}", trap.z0());
        assert!(trap.z0_consistency() < 1e-12);
    }

    #[test]
    fn trap_rejects_bad_values() {
        assert!(TrapConfig::<f64>::new(1e-25, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(TrapConfig::<f64>::new(1e-25, 1.0, 0.0, -1.0, 0.0).is_err());
        assert!(TrapConfig::<f64>::new(0.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn force_validation() {
        assert!(ForceParams::<f64>::new(0.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ForceParams::<f64>::new(1.0, 1.0, 0.0, 0.0, -1.0).is_err());
        assert!(ForceParams::<f64>::new(1.0, 0.0, 0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn cat_probability_examples() {
        let tau = PI / khz(5.46);
        let f = ForceParams::new(khz(2.2), khz(5.46), 0.0, 0.0, tau).unwrap();
        let p = cat_probability(&f, 8.1, 0.0, tau).unwrap();
        // 0.5 * (1 - exp(-8.6 * 4 * (2.2/5.46)^2))
        let expected = 0.5 * (1.0 - (-8.6 * 4.0 * (2.2f64 / 5.46).powi(2)).exp());
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 0.498).abs() < 5e-4);

        let f = ForceParams::new(khz(1.62), khz(2.0), 0.0, 0.0, 500e-6).unwrap();
        let p = cat_probability(&f, 5.6, 620.0, 500e-6).unwrap();
        // heating exponent 0.5 * 620 * 5e-4 * (4 * 0.405)^2 = 0.40682
        let expected = 0.5 * (1.0 - (-0.5 * 620.0 * 5e-4 * (4.0f64 * 0.405).powi(2)).exp());
        assert!((p - expected).abs() < 1e-9);
        assert!((p - 0.167).abs() < 1e-3);
    }

    #[test]
    fn cat_probability_limits() {
        let f = ForceParams::new(khz(2.0), khz(5.0), 0.3, 0.7, 0.0).unwrap();
        for m in 1..4 {
            let t = m as f64 * 200e-6;
            assert!(cat_probability(&f, 0.0, 0.0, t).unwrap() < 1e-12);
        }
        let far = ForceParams::new(khz(50.0), khz(5.0), 0.0, 0.0, 0.0).unwrap();
        assert!((cat_probability(&far, 0.0, 0.0, 100e-6).unwrap() - 0.5).abs() < 1e-12);
        assert!(cat_probability(&f.with_delta(0.0), 0.0, 0.0, 1e-4).is_err());
        assert!(cat_probability(&f, -1.0, 0.0, 1e-4).is_err());
    }

    #[test]
    fn ramsey_examples() {
        assert_eq!(ramsey_signal(0.4, 0.4, 0.5), 0.0);
        assert!((ramsey_signal(PI / 2.0, 0.0, 0.5) - 0.5).abs() < 1e-15);
        let n = 4096;
        let mean: f64 = (0..n).map(|k| ramsey_signal(TAU * k as f64 / n as f64, 0.3, 0.42)).sum::<f64>() / n as f64;
        assert!((mean - 0.21).abs() < 1e-12);
    }

    #[test]
    fn separation_on_resonance() {
        let trap = TrapConfig::<f64>::cadmium111();
        let f = ForceParams::new(khz(1.62), 0.0, 0.0, 0.0, 500e-6).unwrap();
        let sep = cat_separation(&f, 500e-6, &trap);
        assert!((sep.in_z0 - 10.18).abs() < 0.01);
        assert!((sep.metres - sep.in_z0 * trap.z0()).abs() < 1e-20);
        let ratio = sep.in_z0 / thermal_rms_z0(5.6);
        assert!((ratio - 2.9).abs() < 0.1);
        let closed = ForceParams::new(khz(1.62), khz(2.0), 0.0, 0.0, 0.0).unwrap();
        assert!(cat_separation(&closed, 500e-6, &trap).in_z0 < 1e-12);
    }

    #[test]
    fn revivals() {
        let r = revival_times(khz(5.46), 1).unwrap();
        assert!((r[0] * 1e6 - 183.15).abs() < 0.01);
        let r = revival_times(khz(5.0), 2).unwrap();
        assert!((r[1] - 400e-6).abs() < 1e-15);
        assert!(revival_times(khz(5.0), 0).unwrap().is_empty());
        assert!(revival_times(0.0, 3).is_err());
    }

    #[test]
    fn max_displacement_on_circle() {
        let f = ForceParams::new(khz(2.0), khz(-5.0), 0.0, 1.0, 300e-6).unwrap();
        assert!((f.max_displacement() - 0.4).abs() < 1e-12);
        let short = f.with_duration(20e-6);
        assert!((short.max_displacement() - alpha_trajectory(&short, 20e-6).norm()).abs() < 1e-15);
    }
}
