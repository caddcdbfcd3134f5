//! Pulse sequences: carrier rotations, force pulses, AC Stark phases and the
//! photon-echo interferometer built from them.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ForceParams, SpinDependentDisplacement};
use crate::error::{Error, Result};
use crate::noise::BeamSetup;
use crate::oracle::{self, IntegratorSpec};
use crate::quantum::{spin_tensor, z_rotation, CMatrix, Displacer, FockSpace, QuantumState, SpinMatrix};
use crate::scalar::{cis, lit, to_f64, Real};

/// Duration of a carrier π/2 pulse in the echo builder (s).
pub const PI2_DURATION: f64 = crate::constants::CARRIER_PI2_TIME;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pulse<T: Real> {
    /// Resonant carrier rotation by `angle` about the equatorial axis `phase`.
    CarrierRotation { angle: T, phase: T, duration: T },
    MsForce(ForceParams<T>),
    /// Differential AC Stark shift at `rate` rad/s.
    StarkPhase { rate: T, duration: T },
    Wait { duration: T },
}

impl<T: Real> Pulse<T> {
    pub fn duration(&self) -> T {
        match *self {
            Pulse::CarrierRotation { duration, .. } => duration,
            Pulse::MsForce(f) => f.duration,
            Pulse::StarkPhase { duration, .. } => duration,
            Pulse::Wait { duration } => duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.duration();
        if !(d >= T::zero()) || !d.is_finite() {
            return Err(Error::param(format!("pulse duration must be >= 0, got {}", to_f64(d))));
        }
        match *self {
            Pulse::CarrierRotation { angle, phase, .. } => {
                if !(angle >= T::zero() && angle <= T::two_pi()) || !phase.is_finite() {
                    return Err(Error::param(format!("carrier angle must lie in [0, 2π], got {}", to_f64(angle))));
                }
            }
            Pulse::MsForce(f) => f.validate()?,
            Pulse::StarkPhase { rate, .. } => {
                if !rate.is_finite() {
                    return Err(Error::param("non-finite Stark rate"));
                }
            }
            Pulse::Wait { .. } => {}
        }
        Ok(())
    }
}

/// One slot of a schedule: a pulse plus an optional pulse running at the same
/// time (for example a Stark shift during the force).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step<T: Real> {
    pub pulse: Pulse<T>,
    pub concurrent: Option<Pulse<T>>,
}

impl<T: Real> Step<T> {
    pub fn single(pulse: Pulse<T>) -> Self {
        Self { pulse, concurrent: None }
    }

    pub fn duration(&self) -> T {
        let d = self.pulse.duration();
        match self.concurrent {
            Some(p) if p.duration() > d => p.duration(),
            _ => d,
        }
    }
}

/// Ordered pulse schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence<T: Real> {
    pub steps: Vec<Step<T>>,
    /// Whether carrier phases pick up the optical drift (they share the
    /// Raman beams with the force).
    pub carriers_track_drift: bool,
}

impl<T: Real> PulseSequence<T> {
    pub fn new(steps: Vec<Step<T>>) -> Result<Self> {
        let seq = Self { steps, carriers_track_drift: true };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.steps {
            s.pulse.validate()?;
            if let Some(p) = &s.concurrent {
                p.validate()?;
                if matches!(p, Pulse::MsForce(_) | Pulse::CarrierRotation { .. }) {
                    return Err(Error::param("only Stark phases and waits may run concurrently"));
                }
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> T {
        self.steps.iter().fold(T::zero(), |acc, s| acc + s.duration())
    }

    /// Flattened pulse list in execution order; a concurrent pulse follows its
    /// partner.
    pub fn pulses(&self) -> impl Iterator<Item = &Pulse<T>> {
        self.steps.iter().flat_map(|s| std::iter::once(&s.pulse).chain(s.concurrent.iter()))
    }

    /// Largest displacement reached by any force pulse.
    pub fn max_displacement(&self) -> T {
        self.pulses()
            .filter_map(|p| match p {
                Pulse::MsForce(f) => Some(f.max_displacement()),
                _ => None,
            })
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}

/// Spin part of a carrier rotation:
/// `cos(θ/2) 1 + sin(θ/2)(e^{iφ} σ₋ − e^{−iφ} σ₊)`, which takes |↑⟩ to
/// `(|↑⟩ + e^{iφ}|↓⟩)/√2` at `θ = π/2`.
pub fn carrier_spin<T: Real>(theta: T, phi: T) -> SpinMatrix<T> {
    let half = theta / lit(2.0);
    let (s, co) = (half.sin(), half.cos());
    let cc = Complex::new(co, T::zero());
    SpinMatrix::new(cc, -cis(-phi) * s, cis(phi) * s, cc)
}

/// Carrier rotation on the full spin ⊗ Fock space.
pub fn carrier_unitary<T: Real>(theta: T, phi: T, space: FockSpace) -> CMatrix<T> {
    spin_tensor(&carrier_spin(theta, phi), &CMatrix::identity(space.cutoff(), space.cutoff()))
}

/// Knobs for [`build_echo_sequence_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EchoOptions<T: Real> {
    /// Phase overrides for the three carrier pulses (`None` uses `φ_o`).
    pub phases: [Option<T>; 3],
    /// Apply the Stark compensation pulse in the second echo zone.
    pub compensate: bool,
    /// π/2 pulse duration; the π pulse takes twice as long.
    pub pi2_duration: T,
}

impl<T: Real> Default for EchoOptions<T> {
    fn default() -> Self {
        Self { phases: [None; 3], compensate: true, pi2_duration: lit(PI2_DURATION) }
    }
}

/// `[π/2(φ_o), force ∥ Stark, π(φ_o), Stark compensation, π/2(φ_o)]`.
pub fn build_echo_sequence<T: Real>(phi_o: T, f: ForceParams<T>, stark_rate: T) -> Result<PulseSequence<T>> {
    build_echo_sequence_with(phi_o, f, stark_rate, EchoOptions::default())
}

pub fn build_echo_sequence_with<T: Real>(
    phi_o: T,
    f: ForceParams<T>,
    stark_rate: T,
    opts: EchoOptions<T>,
) -> Result<PulseSequence<T>> {
    let tau = f.duration;
    let half_pi = T::frac_pi_2();
    let phase = |k: usize| opts.phases[k].unwrap_or(phi_o);
    let carrier = |angle: T, k: usize, duration: T| Pulse::CarrierRotation { angle, phase: phase(k), duration };
    let stark = Pulse::StarkPhase { rate: stark_rate, duration: tau };
    let (concurrent, second_zone) = if stark_rate == T::zero() {
        (None, Pulse::Wait { duration: tau })
    } else if opts.compensate {
        (Some(stark), stark)
    } else {
        (Some(stark), Pulse::Wait { duration: tau })
    };
    PulseSequence::new(vec![
        Step::single(carrier(half_pi, 0, opts.pi2_duration)),
        Step { pulse: Pulse::MsForce(f), concurrent },
        Step::single(carrier(T::pi(), 1, opts.pi2_duration * lit(2.0))),
        Step::single(second_zone),
        Step::single(carrier(half_pi, 2, opts.pi2_duration)),
    ])
}

/// How force pulses are executed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Engine<T: Real> {
    /// Exact spin-dependent displacement; heating is not modelled.
    ClosedForm,
    /// Lindblad integration with heating rate `nbar_dot` (1/s).
    Oracle { nbar_dot: T },
}

/// Executes sequences, reusing displacement matrices between runs.
pub struct SequenceRunner<T: Real> {
    displacer: Displacer<T>,
}

impl<T: Real> SequenceRunner<T> {
    pub fn new(space: FockSpace) -> Self {
        Self { displacer: Displacer::new(space) }
    }

    pub fn space(&self) -> FockSpace {
        self.displacer.space()
    }

    /// Final state after `seq` with optical drift `dphi`.
    pub fn evolve(
        &mut self,
        initial: &QuantumState<T>,
        seq: &PulseSequence<T>,
        engine: Engine<T>,
        dphi: T,
        setup: &BeamSetup,
    ) -> Result<QuantumState<T>> {
        if initial.space() != self.space() {
            return Err(Error::InvalidState("initial state and runner use different spaces".into()));
        }
        seq.validate()?;
        let carrier_shift = if seq.carriers_track_drift { dphi } else { T::zero() };
        let (ds, dm) = setup.force_phase_shift(dphi);
        let mut state = initial.clone();
        for p in seq.pulses() {
            state = match *p {
                Pulse::CarrierRotation { angle, phase, .. } => {
                    state.apply_spin(&carrier_spin(angle, phase + carrier_shift))
                }
                Pulse::StarkPhase { rate, duration } => state.apply_spin(&z_rotation(rate * duration)),
                Pulse::Wait { .. } => state,
                Pulse::MsForce(f) => {
                    let f = f.with_phases(f.phi_s + ds, f.phi_m + dm);
                    match engine {
                        Engine::ClosedForm => {
                            SpinDependentDisplacement::from_force(&f, f.duration).apply(&state, &mut self.displacer)?
                        }
                        Engine::Oracle { nbar_dot } => {
                            let spec = IntegratorSpec::for_force(&f, self.space(), nbar_dot);
                            oracle::evolve(&state, &f, &spec)?
                        }
                    }
                }
            };
        }
        Ok(state)
    }

    /// Final `P↓`.
    pub fn run(
        &mut self,
        initial: &QuantumState<T>,
        seq: &PulseSequence<T>,
        engine: Engine<T>,
        dphi: T,
        setup: &BeamSetup,
    ) -> Result<T> {
        Ok(self.evolve(initial, seq, engine, dphi, setup)?.spin_populations().1)
    }
}

/// Runs `seq` once and returns `P↓`.
pub fn run_sequence<T: Real>(
    initial: &QuantumState<T>,
    seq: &PulseSequence<T>,
    engine: Engine<T>,
    dphi: T,
    setup: &BeamSetup,
) -> Result<T> {
    SequenceRunner::new(initial.space()).run(initial, seq, engine, dphi, setup)
}
