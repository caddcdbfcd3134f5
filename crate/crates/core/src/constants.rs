//! Physical constants (CODATA 2018) and the apparatus values of the
//! 111Cd+ experiment used as defaults.

use std::f64::consts::TAU;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Electron mass, kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;

/// Atomic mass of 111Cd, u.
pub const CD111_ATOMIC_MASS_U: f64 = 110.904_183_8;

/// Mass of the singly ionized 111Cd+ ion, kg.
pub const CD111_ION_MASS: f64 = CD111_ATOMIC_MASS_U * ATOMIC_MASS_UNIT - ELECTRON_MASS;

/// Axial (force) trap frequency, rad/s.
pub const OMEGA_Z: f64 = TAU * 3.55e6;

/// Transverse trap frequencies, rad/s. Documentation only.
pub const OMEGA_X: f64 = TAU * 8.0e6;
pub const OMEGA_Y: f64 = TAU * 9.0e6;

/// Qubit hyperfine splitting, rad/s. Documentation only.
pub const OMEGA_HF: f64 = TAU * 14.53e9;

/// Cooling transition linewidth, rad/s. Documentation only.
pub const GAMMA_COOLING: f64 = TAU * 47.0e6;

/// Raman detuning from the P3/2 level, rad/s. Documentation only.
pub const RAMAN_DETUNING: f64 = TAU * 220.0e9;

/// Mean occupation after Doppler cooling.
pub const NBAR_DOPPLER: f64 = 6.0;

/// Mean occupation after sideband cooling.
pub const NBAR_SIDEBAND: f64 = 0.05;

/// Directly measured heating rate, quanta per second.
pub const NBAR_DOT_MEASURED: f64 = 200.0;

/// Carrier pi/2 pulse time used in the echo interferometer, s.
pub const CARRIER_PI2_TIME: f64 = 13e-6;

/// Shots per scan point in every experiment.
pub const DEFAULT_SHOTS: u64 = 100;
