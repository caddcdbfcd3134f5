//! Raman beam geometry and optical phase drift.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Raman beam arrangement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Both sideband beat notes share the optical path difference; a drift
    /// lands on the spin phase.
    CoPropagating,
    /// The drift enters the two sidebands with opposite sign and cancels from
    /// the spin phase.
    CounterPropagating,
}

/// Common-mode optical phase drift `δφ(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftProcess {
    Constant { offset: f64 },
    /// `A sin(2πft + φ)`.
    Sinusoid { amplitude: f64, frequency: f64, phase: f64 },
    /// Brownian phase with `Var[δφ(t+Δt) − δφ(t)] = diffusion · Δt`, starting
    /// at zero on the first sample time.
    RandomWalk { diffusion: f64, seed: u64 },
}

impl Default for DriftProcess {
    fn default() -> Self {
        DriftProcess::Constant { offset: 0.0 }
    }
}

impl DriftProcess {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DriftProcess::Constant { offset } => offset.is_finite(),
            DriftProcess::Sinusoid { amplitude, frequency, phase } => {
                amplitude.is_finite() && frequency.is_finite() && phase.is_finite()
            }
            DriftProcess::RandomWalk { diffusion, .. } => diffusion.is_finite() && diffusion >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid drift process {self:?}")))
        }
    }

    /// Same process with its seed replaced (no-op for deterministic kinds).
    pub fn reseeded(self, seed: u64) -> Self {
        match self {
            DriftProcess::RandomWalk { diffusion, .. } => DriftProcess::RandomWalk { diffusion, seed },
            other => other,
        }
    }
}

/// Beam geometry plus the drift acting on it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSetup {
    pub geometry: Geometry,
    pub drift: DriftProcess,
}

impl BeamSetup {
    pub fn new(geometry: Geometry, drift: DriftProcess) -> Self {
        Self { geometry, drift }
    }

    /// Shift `(Δφ_s, Δφ_m)` of the force phases caused by drift `dphi`.
    pub fn force_phase_shift<T: Real>(&self, dphi: T) -> (T, T) {
        let (r, b) = sideband_phases(self.geometry, dphi);
        let half = lit::<T>(0.5);
        ((b + r) * half, (b - r) * half)
    }
}

/// Red and blue sideband phases `(φ_r, φ_b)` produced by a common drift.
pub fn sideband_phases<T: Real>(geometry: Geometry, dphi: T) -> (T, T) {
    match geometry {
        Geometry::CoPropagating => (dphi, dphi),
        Geometry::CounterPropagating => (-dphi, dphi),
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::two_pi();
    let k = ((x - T::pi()) / two_pi).ceil();
    let y = x - k * two_pi;
    // guard against rounding just past either end
    if y <= -T::pi() {
        y + two_pi
    } else if y > T::pi() {
        y - two_pi
    } else {
        y
    }
}

/// `(φ_s, φ_m) = ((φ_b + φ_r)/2, (φ_b − φ_r)/2)`, wrapped to `(−π, π]`.
pub fn ms_phases<T: Real>(phi_r: T, phi_b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    (wrap_angle((phi_b + phi_r) * half), wrap_angle((phi_b - phi_r) * half))
}

/// Samples `p` at ascending `times` (seconds).
pub fn sample_drift(p: &DriftProcess, times: &[f64]) -> Result<Vec<f64>> {
    p.validate()?;
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("drift sample times must be finite"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("drift sample times must be ascending"));
    }
    Ok(match *p {
        DriftProcess::Constant { offset } => vec![offset; times.len()],
        DriftProcess::Sinusoid { amplitude, frequency, phase } => times
            .iter()
            .map(|t| amplitude * (std::f64::consts::TAU * frequency * t + phase).sin())
            .collect(),
        DriftProcess::RandomWalk { diffusion, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            let mut out = Vec::with_capacity(times.len());
            let mut x = 0.0;
            for (i, t) in times.iter().enumerate() {
                if i > 0 {
                    let dt = t - times[i - 1];
                    x += (diffusion * dt).sqrt() * unit.sample(&mut rng);
                }
                out.push(x);
            }
            out
        }
    })
}
