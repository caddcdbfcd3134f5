//! Least-squares recovery of force and thermal parameters from scan data.
//!
//! Parameters are expressed in lab units (kHz, µs, 1/ms). The optimiser
//! works in a transformed space where bounds and positivity are built in:
//! a coarse coordinate grid search, a Nelder–Mead simplex, then damped
//! Gauss–Newton polishing.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use argmin::core::{CostFunction, Executor, State, TerminationReason};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{cat_probability, ForceParams};
use crate::error::{Error, Result};
use crate::harness::{ScanResult, ScanTable};

const KHZ: f64 = TAU * 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    /// `Ω_sb / 2π` in kHz.
    OmegaSbKhz,
    /// `δ / 2π` in kHz.
    DeltaKhz,
    Nbar,
    /// Heating rate in quanta per ms.
    NbarDotPerMs,
    /// Force duration in µs.
    TauUs,
    /// Fringe peak at the start of the scan (1 = ideal).
    Peak,
    /// Peak change over the scan.
    PeakDrift,
    /// Fringe contrast at the start of the scan (1 = ideal).
    Contrast,
    ContrastDrift,
    /// Detuning change over the scan, `/2π` in kHz.
    DeltaDriftKhz,
    /// Phase-fringe amplitude.
    Amplitude,
    PhiSRad,
    Offset,
    /// Linear baseline change over a phase scan.
    Slope,
}

impl Param {
    pub const ALL: [Param; 14] = [
        Param::OmegaSbKhz,
        Param::DeltaKhz,
        Param::Nbar,
        Param::NbarDotPerMs,
        Param::TauUs,
        Param::Peak,
        Param::PeakDrift,
        Param::Contrast,
        Param::ContrastDrift,
        Param::DeltaDriftKhz,
        Param::Amplitude,
        Param::PhiSRad,
        Param::Offset,
        Param::Slope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::OmegaSbKhz => "omega_sb_khz",
            Param::DeltaKhz => "delta_khz",
            Param::Nbar => "nbar",
            Param::NbarDotPerMs => "nbar_dot_per_ms",
            Param::TauUs => "tau_us",
            Param::Peak => "peak",
            Param::PeakDrift => "peak_drift",
            Param::Contrast => "contrast",
            Param::ContrastDrift => "contrast_drift",
            Param::DeltaDriftKhz => "delta_drift_khz",
            Param::Amplitude => "amplitude",
            Param::PhiSRad => "phi_s_rad",
            Param::Offset => "offset",
            Param::Slope => "slope",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Physically positive; fitted on a log scale unless bounded.
    fn positive(self) -> bool {
        matches!(self, Param::OmegaSbKhz | Param::Nbar | Param::NbarDotPerMs | Param::TauUs | Param::Amplitude)
    }

    /// Default value for nuisance parameters that may be left unspecified.
    fn nuisance_default(self) -> Option<f64> {
        match self {
            Param::Peak | Param::Contrast => Some(1.0),
            Param::PeakDrift | Param::ContrastDrift | Param::DeltaDriftKhz | Param::Offset | Param::Slope => Some(0.0),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Cat-state probability against force duration.
    TimeScan,
    /// Cat-state probability against detuning.
    DetuningScan,
    /// `offset + slope·u + amplitude·sin²(φ_o − φ_s)`.
    PhaseScan,
}

impl ModelKind {
    pub fn params(self) -> &'static [Param] {
        use Param::*;
        match self {
            ModelKind::TimeScan => &[
                OmegaSbKhz,
                DeltaKhz,
                Nbar,
                NbarDotPerMs,
                Peak,
                PeakDrift,
                Contrast,
                ContrastDrift,
                DeltaDriftKhz,
            ],
            ModelKind::DetuningScan => &[
                OmegaSbKhz,
                Nbar,
                NbarDotPerMs,
                TauUs,
                Peak,
                PeakDrift,
                Contrast,
                ContrastDrift,
                DeltaDriftKhz,
            ],
            ModelKind::PhaseScan => &[Amplitude, PhiSRad, Offset, Slope],
        }
    }
}

/// Role of one parameter in a fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Setting {
    Fixed {
        fixed: f64,
    },
    Free {
        free: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
    },
}

fn default_max_iters() -> u64 {
    4000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub model: ModelKind,
    pub params: BTreeMap<Param, Setting>,
    /// Iteration budget shared by the simplex and the polishing stage.
    #[serde(default = "default_max_iters")]
    pub max_iters: u64,
}

impl FitSpec {
    /// Spec with nuisance parameters fixed at their ideal values; physical
    /// parameters still need to be set.
    pub fn new(model: ModelKind) -> Self {
        let params = model
            .params()
            .iter()
            .filter_map(|p| p.nuisance_default().map(|v| (*p, Setting::Fixed { fixed: v })))
            .collect();
        Self { model, params, max_iters: default_max_iters() }
    }

    pub fn fixed(mut self, p: Param, value: f64) -> Self {
        self.params.insert(p, Setting::Fixed { fixed: value });
        self
    }

    pub fn free(mut self, p: Param, initial: f64) -> Self {
        self.params.insert(p, Setting::Free { free: initial, lower: None, upper: None });
        self
    }

    pub fn bounded(mut self, p: Param, initial: f64, lower: f64, upper: f64) -> Self {
        self.params.insert(p, Setting::Free { free: initial, lower: Some(lower), upper: Some(upper) });
        self
    }

    /// Fills missing nuisance parameters with their fixed defaults.
    pub fn with_nuisance_defaults(mut self) -> Self {
        for p in self.model.params() {
            if let Some(v) = p.nuisance_default() {
                self.params.entry(*p).or_insert(Setting::Fixed { fixed: v });
            }
        }
        self
    }

    pub fn free_params(&self) -> Vec<Param> {
        self.params
            .iter()
            .filter(|(_, s)| matches!(s, Setting::Free { .. }))
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let wanted = self.model.params();
        for p in wanted {
            if !self.params.contains_key(p) {
                return Err(Error::param(format!("parameter {} is neither fixed nor free", p.name())));
            }
        }
        for (p, s) in &self.params {
            if !wanted.contains(p) {
                return Err(Error::param(format!("parameter {} does not belong to this model", p.name())));
            }
            match *s {
                Setting::Fixed { fixed } if !fixed.is_finite() => {
                    return Err(Error::param(format!("{} must be finite", p.name())));
                }
                Setting::Free { free, lower, upper } => {
                    if !free.is_finite() {
                        return Err(Error::param(format!("{} initial guess must be finite", p.name())));
                    }
                    if let (Some(lo), Some(hi)) = (lower, upper) {
                        if !(lo < hi) || !(free > lo && free < hi) {
                            return Err(Error::param(format!("{} initial guess must lie strictly inside its bounds", p.name())));
                        }
                    } else if lower.is_some_and(|lo| !(free > lo)) || upper.is_some_and(|hi| !(free < hi)) {
                        return Err(Error::param(format!("{} initial guess must lie strictly inside its bounds", p.name())));
                    } else if lower.is_none() && upper.is_none() && p.positive() && !(free > 0.0) {
                        return Err(Error::param(format!("{} must start positive", p.name())));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Observations plus the normalised scan position `u ∈ [0, 1]` of each.
#[derive(Clone, Debug, PartialEq)]
pub struct FitData {
    /// Swept value in SI units (s, rad/s or rad).
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
}

impl FitData {
    pub fn new(x: Vec<f64>, y: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != u.len() {
            return Err(Error::DataMismatch(format!(
                "x, y and u lengths differ: {}, {}, {}",
                x.len(),
                y.len(),
                u.len()
            )));
        }
        if x.iter().chain(&y).chain(&u).any(|v| !v.is_finite()) {
            return Err(Error::DataMismatch("non-finite data".into()));
        }
        Ok(Self { x, y, u })
    }

    /// Uses the recorded sweep range for `u`.
    pub fn from_result(r: &ScanResult) -> Result<Self> {
        let (a, b) = (r.spec.start, r.spec.stop);
        let u = r.swept.iter().map(|x| (x - a) / (b - a)).collect();
        Self::new(r.swept.clone(), r.estimate.clone(), u)
    }

    /// Without a recorded range the sweep is taken to run from the smallest
    /// to the largest swept value.
    pub fn from_table(t: &ScanTable) -> Result<Self> {
        let lo = t.swept.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.swept.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::DataMismatch("swept column has no range".into()));
        }
        let u = t.swept.iter().map(|x| (x - lo) / (hi - lo)).collect();
        Self::new(t.swept.clone(), t.estimate.clone(), u)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Parameter values keyed by name.
pub type Values = BTreeMap<Param, f64>;

fn get(v: &Values, p: Param) -> Result<f64> {
    v.get(&p).copied().ok_or_else(|| Error::param(format!("missing value for {}", p.name())))
}

/// Model prediction at one point; `NaN` where the model is undefined.
pub fn predict(model: ModelKind, v: &Values, x: f64, u: f64) -> Result<f64> {
    let drifted = |p: f64| -> Result<f64> {
        let peak = get(v, Param::Peak)? + get(v, Param::PeakDrift)? * u;
        let contrast = get(v, Param::Contrast)? + get(v, Param::ContrastDrift)? * u;
        Ok(0.5 * (peak - contrast * (1.0 - 2.0 * p)))
    };
    let cat = |delta: f64, tau: f64| -> Result<f64> {
        let omega = get(v, Param::OmegaSbKhz)? * KHZ;
        let f = match ForceParams::new(omega, delta, 0.0, 0.0, tau) {
            Ok(f) => f,
            Err(_) => return Ok(f64::NAN),
        };
        let nbar = get(v, Param::Nbar)?;
        let nbar_dot = get(v, Param::NbarDotPerMs)? * 1e3;
        Ok(cat_probability(&f, nbar, nbar_dot, tau).unwrap_or(f64::NAN))
    };
    let ddrift = |u: f64| -> Result<f64> { Ok(get(v, Param::DeltaDriftKhz)? * KHZ * u) };
    match model {
        ModelKind::TimeScan => {
            let delta = get(v, Param::DeltaKhz)? * KHZ + ddrift(u)?;
            drifted(cat(delta, x)?)
        }
        ModelKind::DetuningScan => {
            let tau = get(v, Param::TauUs)? * 1e-6;
            drifted(cat(x + ddrift(u)?, tau)?)
        }
        ModelKind::PhaseScan => {
            let s = (x - get(v, Param::PhiSRad)?).sin();
            Ok(get(v, Param::Offset)? + get(v, Param::Slope)? * u + get(v, Param::Amplitude)? * s * s)
        }
    }
}

/// `y − model` per point.
pub fn residuals(data: &FitData, model: ModelKind, v: &Values) -> Result<Vec<f64>> {
    if data.x.len() != data.y.len() || data.x.len() != data.u.len() {
        return Err(Error::DataMismatch("x, y and u lengths differ".into()));
    }
    data.x
        .iter()
        .zip(&data.y)
        .zip(&data.u)
        .map(|((x, y), u)| Ok(y - predict(model, v, *x, *u)?))
        .collect()
}

/// Map between a free parameter and its unconstrained coordinate.
#[derive(Clone, Copy, Debug)]
enum Transform {
    Identity,
    Log,
    Lower(f64),
    Upper(f64),
    Logit(f64, f64),
}

impl Transform {
    fn for_setting(p: Param, s: &Setting) -> Transform {
        match *s {
            Setting::Free { lower: Some(lo), upper: Some(hi), .. } => Transform::Logit(lo, hi),
            Setting::Free { lower: Some(lo), upper: None, .. } => Transform::Lower(lo),
            Setting::Free { lower: None, upper: Some(hi), .. } => Transform::Upper(hi),
            _ if p.positive() => Transform::Log,
            _ => Transform::Identity,
        }
    }

    fn encode(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Lower(lo) => (x - lo).ln(),
            Transform::Upper(hi) => (hi - x).ln(),
            Transform::Logit(lo, hi) => {
                let t = (x - lo) / (hi - lo);
                (t / (1.0 - t)).ln()
            }
        }
    }

    fn decode(self, z: f64) -> f64 {
        match self {
            Transform::Identity => z,
            Transform::Log => z.exp(),
            Transform::Lower(lo) => lo + z.exp(),
            Transform::Upper(hi) => hi - z.exp(),
            Transform::Logit(lo, hi) => lo + (hi - lo) / (1.0 + (-z).exp()),
        }
    }

    /// Initial simplex edge in `z`.
    fn step(self, x: f64) -> f64 {
        match self {
            Transform::Identity => 0.1 * x.abs().max(0.1),
            _ => 0.1,
        }
    }
}

struct Problem<'a> {
    data: &'a FitData,
    model: ModelKind,
    base: Values,
    free: Vec<(Param, Transform)>,
}

impl Problem<'_> {
    fn values(&self, z: &[f64]) -> Values {
        let mut v = self.base.clone();
        for ((p, t), zi) in self.free.iter().zip(z) {
            v.insert(*p, t.decode(*zi));
        }
        v
    }

    fn residuals_z(&self, z: &[f64]) -> Result<Vec<f64>> {
        residuals(self.data, self.model, &self.values(z))
    }

    fn ssr(&self, z: &[f64]) -> f64 {
        match self.residuals_z(z) {
            Ok(r) => {
                let s: f64 = r.iter().map(|x| x * x).sum();
                if s.is_finite() {
                    s
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    }
}

impl CostFunction for &Problem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.ssr(z))
    }
}

/// Coordinate-wise grid search around `z` (two sweeps); moves the start off
/// flat `P↓ = ½` plateaus before the simplex runs.
fn coarse_scan(problem: &Problem, mut z: Vec<f64>) -> Vec<f64> {
    const GRID: usize = 41;
    let mut best = problem.ssr(&z);
    for _ in 0..2 {
        for k in 0..z.len() {
            let (p, t) = problem.free[k];
            let half_width = match t {
                Transform::Identity => 0.5 * problem.base[&p].abs().max(1.0),
                Transform::Logit(..) => 2.0,
                _ => 1.5f64.ln(),
            };
            let centre = z[k];
            for g in 0..GRID {
                let mut trial = z.clone();
                trial[k] = centre + half_width * (2.0 * g as f64 / (GRID - 1) as f64 - 1.0);
                let c = problem.ssr(&trial);
                if c < best {
                    best = c;
                    z = trial;
                }
            }
        }
    }
    z
}

/// Central-difference Jacobian of the model (`−∂r/∂θ`) with respect to
/// `coords`, evaluated through `values_of`.
fn jacobian<F>(data: &FitData, model: ModelKind, coords: &[f64], values_of: F) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Values,
{
    let base = residuals(data, model, &values_of(coords))?;
    let mut j = DMatrix::zeros(data.len(), coords.len());
    let mut c = coords.to_vec();
    for k in 0..coords.len() {
        let h = 1e-6 * coords[k].abs().max(1e-3);
        c[k] = coords[k] + h;
        let plus = residuals(data, model, &values_of(&c))?;
        c[k] = coords[k] - h;
        let minus = residuals(data, model, &values_of(&c))?;
        c[k] = coords[k];
        for i in 0..data.len() {
            // r = y − model, so ∂model/∂θ = −∂r/∂θ
            j[(i, k)] = -(plus[i] - minus[i]) / (2.0 * h);
        }
    }
    if j.iter().any(|x| !x.is_finite()) || base.iter().any(|x| !x.is_finite()) {
        return Err(Error::Integration("model undefined near the solution".into()));
    }
    Ok(j)
}

/// Damped Gauss–Newton refinement. Returns the improved point, its cost, the
/// number of iterations and whether the relative cost change fell below
/// tolerance.
fn polish(problem: &Problem, z0: Vec<f64>, max_iters: u64) -> (Vec<f64>, f64, u64, bool) {
    let mut z = z0;
    let mut cost = problem.ssr(&z);
    let mut lambda = 1e-3;
    let k = z.len();
    for it in 0..max_iters {
        let r = match problem.residuals_z(&z) {
            Ok(r) => DVector::from_vec(r),
            Err(_) => return (z, cost, it, false),
        };
        let j = match jacobian(problem.data, problem.model, &z, |c| problem.values(c)) {
            Ok(j) => j,
            Err(_) => return (z, cost, it, false),
        };
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for d in 0..k {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&jtr),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let c = problem.ssr(&trial);
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                let small = step.iter().zip(&z).all(|(s, zi)| s.abs() <= 1e-10 * zi.abs().max(1.0));
                z = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-12 || small {
                    return (z, cost, it + 1, true);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: a stationary point
            return (z, cost, it + 1, true);
        }
    }
    (z, cost, max_iters, false)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    /// All model parameters, fixed ones included.
    pub values: Values,
    pub free: Vec<Param>,
    /// 1σ uncertainties of the free parameters; `None` when the normal matrix
    /// is singular or there are no degrees of freedom.
    pub uncertainties: Option<Values>,
    /// `√(Σ r²)`.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: u64,
    /// Human-readable status; non-empty when the fit needs attention.
    pub warning: Option<String>,
}

/// Fits `spec` to `data`.
pub fn fit(data: &FitData, spec: &FitSpec) -> Result<FitResult> {
    spec.validate()?;
    let free_params = spec.free_params();
    if data.len() < 2 * free_params.len() {
        return Err(Error::param(format!(
            "{} points cannot constrain {} free parameters (need at least twice as many)",
            data.len(),
            free_params.len()
        )));
    }
    let mut base = Values::new();
    let mut free = Vec::new();
    let mut z0 = Vec::new();
    for (p, s) in &spec.params {
        match *s {
            Setting::Fixed { fixed } => {
                base.insert(*p, fixed);
            }
            Setting::Free { free: init, .. } => {
                let t = Transform::for_setting(*p, s);
                base.insert(*p, init);
                free.push((*p, t));
                z0.push(t.encode(init));
            }
        }
    }
    let problem = Problem { data, model: spec.model, base, free };

    if z0.is_empty() {
        let r = residuals(data, spec.model, &problem.base)?;
        return Ok(FitResult {
            model: spec.model,
            values: problem.base.clone(),
            free: vec![],
            uncertainties: None,
            residual_norm: r.iter().map(|x| x * x).sum::<f64>().sqrt(),
            converged: true,
            iterations: 0,
            warning: None,
        });
    }
    if !problem.ssr(&z0).is_finite() {
        return Err(Error::param("model is undefined at the initial guess"));
    }

    let z0 = coarse_scan(&problem, z0);
    let mut simplex = vec![z0.clone()];
    for (k, (_, t)) in problem.free.iter().enumerate() {
        let mut v = z0.clone();
        v[k] += t.step(problem.base[&problem.free[k].0]);
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-13)
        .map_err(|e| Error::param(e.to_string()))?;
    let res = Executor::new(&problem, solver)
        .configure(|s| s.max_iters(spec.max_iters))
        .run()
        .map_err(|e| Error::Integration(format!("simplex failed: {e}")))?;
    let state = res.state();
    let nm_iters = state.get_iter();
    let nm_converged = matches!(state.get_termination_reason(), Some(TerminationReason::SolverConverged));
    let zs = state.get_best_param().cloned().unwrap_or(z0);

    let budget = spec.max_iters.saturating_sub(nm_iters).min(200);
    let (z, cost, gn_iters, gn_converged) = polish(&problem, zs, budget);
    let converged = gn_converged || nm_converged;
    let values = problem.values(&z);

    let dof = data.len() as isize - problem.free.len() as isize;
    let uncertainties = if dof > 0 {
        let coords: Vec<f64> = problem.free.iter().map(|(p, _)| values[p]).collect();
        let names: Vec<Param> = problem.free.iter().map(|(p, _)| *p).collect();
        let at = |c: &[f64]| {
            let mut v = values.clone();
            for (p, x) in names.iter().zip(c) {
                v.insert(*p, *x);
            }
            v
        };
        jacobian(data, spec.model, &coords, at).ok().and_then(|j| {
            let s2 = cost / dof as f64;
            let cov = (j.transpose() * &j).try_inverse()?;
            let mut out = Values::new();
            for (k, p) in names.iter().enumerate() {
                let var = s2 * cov[(k, k)];
                if !(var >= 0.0) || !var.is_finite() {
                    return None;
                }
                out.insert(*p, var.sqrt());
            }
            Some(out)
        })
    } else {
        None
    };

    let mut warnings = Vec::new();
    if !converged {
        warnings.push("optimiser hit its iteration cap before converging".to_string());
    }
    if uncertainties.is_none() {
        warnings.push("uncertainties unavailable (singular normal matrix or no degrees of freedom)".to_string());
    }
    Ok(FitResult {
        model: spec.model,
        values,
        free: free_params,
        uncertainties,
        residual_norm: cost.sqrt(),
        converged,
        iterations: nm_iters + gn_iters,
        warning: if warnings.is_empty() { None } else { Some(warnings.join("; ")) },
    })
}

/// Two-stage detuning-scan recipe: fit cold data with `n̄` fixed to extract
/// `Ω_sb`, then fix that `Ω_sb` and fit hot data for `n̄` and `ṅ̄`.
pub fn two_stage_fit(cold: &FitData, cold_spec: &FitSpec, hot: &FitData, hot_spec: &FitSpec) -> Result<(FitResult, FitResult)> {
    let first = fit(cold, cold_spec)?;
    let omega = first.values[&Param::OmegaSbKhz];
    let second = fit(hot, &hot_spec.clone().fixed(Param::OmegaSbKhz, omega))?;
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(model: ModelKind, truth: &Values, xs: &[f64]) -> FitData {
        let n = xs.len();
        let u: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let y = xs.iter().zip(&u).map(|(x, u)| predict(model, truth, *x, *u).unwrap()).collect();
        FitData::new(xs.to_vec(), y, u).unwrap()
    }

    fn phase_truth() -> Values {
        [(Param::Amplitude, 0.45), (Param::PhiSRad, 0.4), (Param::Offset, 0.02), (Param::Slope, 0.01)]
            .into_iter()
            .collect()
    }

    #[test]
    fn phase_round_trip() {
        let truth = phase_truth();
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.16).collect();
        let data = synthetic(ModelKind::PhaseScan, &truth, &xs);
        let spec = FitSpec::new(ModelKind::PhaseScan)
            .free(Param::Amplitude, 0.38)
            .free(Param::PhiSRad, 0.5)
            .free(Param::Offset, 0.0)
            .fixed(Param::Slope, 0.01);
        let r = fit(&data, &spec).unwrap();
        assert!(r.converged);
        for p in [Param::Amplitude, Param::PhiSRad, Param::Offset] {
            assert!((r.values[&p] - truth[&p]).abs() < 1e-6 * truth[&p].abs().max(1.0), "{p:?}");
        }
    }

    #[test]
    fn all_fixed_is_residual_only() {
        let truth = phase_truth();
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.6).collect();
        let data = synthetic(ModelKind::PhaseScan, &truth, &xs);
        let mut spec = FitSpec::new(ModelKind::PhaseScan);
        for (p, v) in &truth {
            spec = spec.fixed(*p, *v);
        }
        let r = fit(&data, &spec).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.residual_norm < 1e-15);
    }

    #[test]
    fn residual_behaviour() {
        let truth = phase_truth();
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.6).collect();
        let mut data = synthetic(ModelKind::PhaseScan, &truth, &xs);
        assert!(residuals(&data, ModelKind::PhaseScan, &truth).unwrap().iter().all(|r| r.abs() < 1e-15));
        for y in data.y.iter_mut() {
            *y += 0.03;
        }
        let r = residuals(&data, ModelKind::PhaseScan, &truth).unwrap();
        assert!((r.iter().sum::<f64>() / r.len() as f64 - 0.03).abs() < 1e-12);
        data.u.pop();
        assert!(residuals(&data, ModelKind::PhaseScan, &truth).is_err());
    }

    #[test]
    fn spec_validation() {
        let spec = FitSpec::new(ModelKind::TimeScan).free(Param::DeltaKhz, 5.0);
        assert!(spec.validate().is_err()); // omega, nbar, nbar_dot unset
        let spec = FitSpec::new(ModelKind::PhaseScan)
            .free(Param::Amplitude, 0.5)
            .fixed(Param::PhiSRad, 0.0)
            .fixed(Param::TauUs, 3.0);
        assert!(spec.validate().is_err());
        let spec = FitSpec::new(ModelKind::PhaseScan)
            .free(Param::Amplitude, -0.5)
            .fixed(Param::PhiSRad, 0.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn too_few_points_rejected() {
        let truth = phase_truth();
        let data = synthetic(ModelKind::PhaseScan, &truth, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let spec = FitSpec::new(ModelKind::PhaseScan)
            .free(Param::Amplitude, 0.4)
            .free(Param::PhiSRad, 0.3)
            .free(Param::Offset, 0.0);
        assert!(fit(&data, &spec).is_err());
    }

    #[test]
    fn transforms_invert() {
        for t in [
            Transform::Identity,
            Transform::Log,
            Transform::Lower(-1.0),
            Transform::Upper(3.0),
            Transform::Logit(-2.0, 5.0),
        ] {
            let x = 0.7;
            assert!((t.decode(t.encode(x)) - x).abs() < 1e-12, "{t:?}");
        }
    }

    #[test]
    fn setting_serde_shapes() {
        let s: Setting = serde_json::from_str(r#"{"fixed": 1.5}"#).unwrap();
        assert_eq!(s, Setting::Fixed { fixed: 1.5 });
        let s: Setting = serde_json::from_str(r#"{"free": 2.0, "lower": 0.0}"#).unwrap();
        assert_eq!(s, Setting::Free { free: 2.0, lower: Some(0.0), upper: None });
        assert!(serde_json::from_str::<Setting>(r#"{"fixd": 1.5}"#).is_err());
    }
}
