//! TOML run configuration. Every physical quantity carries its unit in the
//! key name and unknown keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use catsim_core::constants;
use catsim_core::dynamics::{ForceParams, TrapConfig};
use catsim_core::fitter::{FitSpec, ModelKind, Param, Setting};
use catsim_core::harness::{EngineKind, Nuisance, ScanKind, ScanSpec};
use catsim_core::noise::{BeamSetup, DriftProcess, Geometry};
use serde::Deserialize;

use crate::error::CliError;

const KHZ: f64 = TAU * 1e3;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Emit an SVG plot next to the data files.
    #[serde(default = "default_true")]
    pub svg: bool,
    pub trap: Option<TrapBlock>,
    pub force: Option<ForceBlock>,
    pub scan: Option<ScanBlock>,
    #[serde(default)]
    pub beam: BeamBlock,
    pub compare: Option<CompareBlock>,
    pub fit: Option<FitBlock>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapBlock {
    #[serde(default = "default_mass_amu")]
    pub mass_amu: f64,
    #[serde(default = "default_omega_z_mhz")]
    pub omega_z_mhz: f64,
    #[serde(default = "default_omega_hf_ghz")]
    pub omega_hf_ghz: f64,
    #[serde(default = "default_nbar")]
    pub nbar: f64,
    #[serde(default = "default_nbar_dot")]
    pub nbar_dot_per_ms: f64,
}

fn default_mass_amu() -> f64 {
    constants::CD111_ION_MASS / constants::ATOMIC_MASS_UNIT
}
fn default_omega_z_mhz() -> f64 {
    constants::OMEGA_Z / TAU / 1e6
}
fn default_omega_hf_ghz() -> f64 {
    constants::OMEGA_HF / TAU / 1e9
}
fn default_nbar() -> f64 {
    constants::NBAR_DOPPLER
}
fn default_nbar_dot() -> f64 {
    constants::NBAR_DOT_MEASURED * 1e-3
}

impl Default for TrapBlock {
    fn default() -> Self {
        Self {
            mass_amu: default_mass_amu(),
            omega_z_mhz: default_omega_z_mhz(),
            omega_hf_ghz: default_omega_hf_ghz(),
            nbar: default_nbar(),
            nbar_dot_per_ms: default_nbar_dot(),
        }
    }
}

impl TrapBlock {
    pub fn to_trap(self) -> Result<TrapConfig<f64>, CliError> {
        TrapConfig::new(
            self.mass_amu * constants::ATOMIC_MASS_UNIT,
            self.omega_z_mhz * TAU * 1e6,
            self.omega_hf_ghz * TAU * 1e9,
            self.nbar,
            self.nbar_dot_per_ms * 1e3,
        )
        .map_err(|e| CliError::Config(format!("[trap]: {e}")))
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceBlock {
    pub omega_sb_khz: f64,
    pub delta_khz: f64,
    #[serde(default)]
    pub tau_us: f64,
    #[serde(default)]
    pub phi_s_rad: f64,
    #[serde(default)]
    pub phi_m_rad: f64,
}

impl ForceBlock {
    pub fn to_force(self) -> Result<ForceParams<f64>, CliError> {
        ForceParams::from_lab_units(self.omega_sb_khz, self.delta_khz, self.tau_us)
            .map(|f| f.with_phases(self.phi_s_rad, self.phi_m_rad))
            .and_then(|f| f.validate().map(|_| f))
            .map_err(|e| CliError::Config(format!("[force]: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EngineName {
    Closed,
    Oracle,
}

impl From<EngineName> for EngineKind {
    fn from(e: EngineName) -> Self {
        match e {
            EngineName::Closed => EngineKind::ClosedForm,
            EngineName::Oracle => EngineKind::Oracle,
        }
    }
}

/// Sweep range: `*_us` for durations, `*_khz` for detunings, `*_rad` for
/// analysis phases. Exactly one pair must be given; it fixes the scan kind.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub start_us: Option<f64>,
    pub stop_us: Option<f64>,
    pub start_khz: Option<f64>,
    pub stop_khz: Option<f64>,
    pub start_rad: Option<f64>,
    pub stop_rad: Option<f64>,
    pub points: usize,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_engine")]
    pub engine: EngineName,
    #[serde(default = "default_window")]
    pub smoothing_window: usize,
    #[serde(default = "default_shot_interval_ms")]
    pub shot_interval_ms: f64,
    /// Stark shift during the force, `/2π` in kHz.
    #[serde(default)]
    pub stark_rate_khz: f64,
    pub cutoff: Option<usize>,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    /// Detuning change over the scan, `/2π` in kHz.
    #[serde(default)]
    pub detuning_drift_khz: f64,
    #[serde(default)]
    pub peak_drift: f64,
    #[serde(default)]
    pub contrast_drift: f64,
}

fn default_shots() -> u64 {
    constants::DEFAULT_SHOTS
}
fn default_engine() -> EngineName {
    EngineName::Closed
}
fn default_window() -> usize {
    3
}
fn default_shot_interval_ms() -> f64 {
    2.0
}
fn default_tail_tol() -> f64 {
    1e-4
}

impl ScanBlock {
    /// Scan kind and SI range implied by the range keys.
    pub fn range(&self) -> Result<(ScanKind, f64, f64), CliError> {
        let pairs = [
            (ScanKind::TimeScan, self.start_us, self.stop_us, 1e-6, "start_us/stop_us"),
            (ScanKind::DetuningScan, self.start_khz, self.stop_khz, KHZ, "start_khz/stop_khz"),
            (ScanKind::PhaseScan, self.start_rad, self.stop_rad, 1.0, "start_rad/stop_rad"),
        ];
        let given: Vec<_> = pairs.iter().filter(|p| p.1.is_some() || p.2.is_some()).collect();
        match given.as_slice() {
            [(kind, Some(a), Some(b), scale, _)] => Ok((*kind, a * scale, b * scale)),
            [(_, _, _, _, keys)] => Err(CliError::Config(format!("[scan]: {keys} must both be set"))),
            [] => Err(CliError::Config(
                "[scan]: set one range pair (start_us/stop_us, start_khz/stop_khz or start_rad/stop_rad)".into(),
            )),
            _ => Err(CliError::Config("[scan]: only one range pair may be set".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamBlock {
    #[serde(default = "default_geometry")]
    pub geometry: Geometry,
    #[serde(default)]
    pub drift: DriftBlock,
}

fn default_geometry() -> Geometry {
    Geometry::CoPropagating
}

impl Default for BeamBlock {
    fn default() -> Self {
        Self { geometry: default_geometry(), drift: DriftBlock::default() }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftBlock {
    Constant {
        #[serde(default)]
        offset_rad: f64,
    },
    Sinusoid {
        amplitude_rad: f64,
        frequency_hz: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// Seeded from the run seed.
    RandomWalk { diffusion_rad2_per_s: f64 },
}

impl Default for DriftBlock {
    fn default() -> Self {
        DriftBlock::Constant { offset_rad: 0.0 }
    }
}

impl From<DriftBlock> for DriftProcess {
    fn from(d: DriftBlock) -> Self {
        match d {
            DriftBlock::Constant { offset_rad } => DriftProcess::Constant { offset: offset_rad },
            DriftBlock::Sinusoid { amplitude_rad, frequency_hz, phase_rad } => {
                DriftProcess::Sinusoid { amplitude: amplitude_rad, frequency: frequency_hz, phase: phase_rad }
            }
            DriftBlock::RandomWalk { diffusion_rad2_per_s } => {
                DriftProcess::RandomWalk { diffusion: diffusion_rad2_per_s, seed: 0 }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {
    /// Largest tolerated `|ΔP↓|` between the engines.
    pub gate: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    /// Required for CSV input; JSON input records its scan kind.
    pub model: Option<ModelKind>,
    /// Data file, relative to the config file.
    pub data: Option<PathBuf>,
    pub max_iters: Option<u64>,
    #[serde(default)]
    pub params: BTreeMap<Param, Setting>,
}

/// Command-line overrides shared by the run commands.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub out: Option<PathBuf>,
    pub engine: Option<EngineName>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(dir) = &o.out {
            self.output_dir = dir.clone();
        }
        if let Some(scan) = &mut self.scan {
            if let Some(n) = o.shots {
                scan.shots = n;
            }
            if let Some(e) = o.engine {
                scan.engine = e;
            }
        }
    }

    pub fn trap(&self) -> Result<TrapConfig<f64>, CliError> {
        self.trap.unwrap_or_default().to_trap()
    }

    /// Harness spec described by the `[force]`, `[trap]`, `[beam]` and
    /// `[scan]` blocks.
    pub fn scan_spec(&self) -> Result<ScanSpec, CliError> {
        let scan = self.scan.as_ref().ok_or_else(|| CliError::Config("missing [scan] block".into()))?;
        let force = self.force.as_ref().ok_or_else(|| CliError::Config("missing [force] block".into()))?.to_force()?;
        let trap = self.trap()?;
        let (kind, start, stop) = scan.range()?;
        let mut s = ScanSpec::new(kind, start, stop, scan.points, force);
        s.shots = scan.shots;
        s.engine = scan.engine.into();
        s.setup = BeamSetup::new(self.beam.geometry, self.beam.drift.into());
        s.nbar = trap.nbar();
        s.nbar_dot = trap.nbar_dot();
        s.nuisance = Nuisance {
            detuning_drift: scan.detuning_drift_khz * KHZ,
            peak_drift: scan.peak_drift,
            contrast_drift: scan.contrast_drift,
        };
        s.smoothing_window = scan.smoothing_window;
        s.seed = self.seed;
        s.shot_interval = scan.shot_interval_ms * 1e-3;
        s.stark_rate = scan.stark_rate_khz * KHZ;
        s.cutoff = scan.cutoff;
        s.tail_tol = scan.tail_tol;
        s.validate().map_err(|e| CliError::Config(format!("[scan]: {e}")))?;
        Ok(s)
    }

    /// Fit spec for `model`. Physical parameters the `[fit.params]` table
    /// leaves out are fixed at the `[force]`/`[trap]` values when those
    /// blocks are present.
    pub fn fit_spec(&self, model: ModelKind) -> Result<FitSpec, CliError> {
        let block = self.fit.as_ref().ok_or_else(|| CliError::Config("missing [fit] block".into()))?;
        let mut spec = FitSpec::new(model);
        let mut known: Vec<(Param, f64)> = Vec::new();
        if let Some(f) = &self.force {
            known.extend([
                (Param::OmegaSbKhz, f.omega_sb_khz),
                (Param::DeltaKhz, f.delta_khz),
                (Param::TauUs, f.tau_us),
            ]);
        }
        if let Some(t) = &self.trap {
            known.extend([(Param::Nbar, t.nbar), (Param::NbarDotPerMs, t.nbar_dot_per_ms)]);
        }
        for (p, v) in known {
            if model.params().contains(&p) {
                spec = spec.fixed(p, v);
            }
        }
        for (p, s) in &block.params {
            spec.params.insert(*p, *s);
        }
        if let Some(n) = block.max_iters {
            spec.max_iters = n;
        }
        spec.validate().map_err(|e| CliError::Config(format!("[fit]: {e}")))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 5
[force]
omega_sb_khz = 2.2
delta_khz = -5.46
[trap]
nbar = 8.1
nbar_dot_per_ms = 0.0
[scan]
start_us = 0.0
stop_us = 450.0
points = 46
"#;

    #[test]
    fn parses_time_scan() {
        let c = RunConfig::parse(BASE).unwrap();
        let s = c.scan_spec().unwrap();
        assert_eq!(s.kind, ScanKind::TimeScan);
        assert!((s.stop - 450e-6).abs() < 1e-18);
        assert!((s.force.delta + 5.46 * KHZ).abs() < 1e-9);
        assert_eq!(s.seed, 5);
        assert_eq!(s.shots, 100);
    }

    #[test]
    fn rejects_unknown_keys() {
        for bad in [
            format!("{BASE}\nomega_khz = 1.0"),
            BASE.replace("delta_khz", "delta_hz"),
            format!("{BASE}\n[beam.drift]\nkind = \"constant\"\noffset = 1.0"),
            format!("{BASE}\n[fit]\n[fit.params]\nomega = {{ fixed = 1.0 }}"),
        ] {
            assert!(RunConfig::parse(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn range_pairs_are_exclusive() {
        let c = RunConfig::parse(&BASE.replace("points = 46", "points = 46\nstart_khz = 1.0\nstop_khz = 2.0")).unwrap();
        assert!(c.scan_spec().is_err());
        let c = RunConfig::parse(&BASE.replace("stop_us = 450.0", "")).unwrap();
        assert!(c.scan_spec().is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut c = RunConfig::parse(BASE).unwrap();
        c.apply(&Overrides { seed: Some(9), shots: Some(0), out: None, engine: Some(EngineName::Oracle) });
        let s = c.scan_spec().unwrap();
        assert_eq!((s.seed, s.shots, s.engine), (9, 0, EngineKind::Oracle));
    }

    #[test]
    fn drift_blocks() {
        let text = format!("{BASE}\n[beam]\ngeometry = \"counter_propagating\"\n[beam.drift]\nkind = \"random_walk\"\ndiffusion_rad2_per_s = 100.0");
        let s = RunConfig::parse(&text).unwrap().scan_spec().unwrap();
        assert_eq!(s.setup.geometry, Geometry::CounterPropagating);
        assert_eq!(s.setup.drift, DriftProcess::RandomWalk { diffusion: 100.0, seed: 0 });
    }

    #[test]
    fn fit_spec_fills_known_values() {
        let text = format!("{BASE}\n[fit]\n[fit.params]\ndelta_khz = {{ free = -5.0 }}\nnbar = {{ free = 7.0 }}");
        let c = RunConfig::parse(&text).unwrap();
        let spec = c.fit_spec(ModelKind::TimeScan).unwrap();
        assert_eq!(spec.params[&Param::OmegaSbKhz], Setting::Fixed { fixed: 2.2 });
        assert_eq!(spec.free_params(), vec![Param::DeltaKhz, Param::Nbar]);
    }

    #[test]
    fn fit_setting_rejects_stray_keys() {
        let text = format!("{BASE}\n[fit]\n[fit.params]\nnbar = {{ free = 7.0, guess = 1.0 }}");
        assert!(RunConfig::parse(&text).is_err());
    }
}
