//! Reference integrator for the interaction-frame force Hamiltonian
//!
//! `H(t)/ħ = −(Ω_sb/2) σ_φ (â e^{i(δt+φ_m)} + â† e^{−i(δt+φ_m)})`
//!
//! with optional motional heating through the Lindblad pair `√ṅ̄ â†`, `√ṅ̄ â`.
//! Fixed-step RK4; the right-hand side is applied directly from the ladder
//! structure so one step costs `O(d²)` for a density matrix and `O(d)` per ket.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::dynamics::ForceParams;
use crate::error::{Error, Result};
use crate::quantum::{ladder_operators, sigma_phi, CMatrix, CVector, FockSpace, Member, QuantumState};
use crate::scalar::{c, cis, czero, lit, to_f64, Real};

/// Largest allowed step is this fraction of the shorter of `2π/|δ|`, `2π/Ω_sb`.
pub const STEPS_PER_PERIOD_MIN: f64 = 200.0;

/// Default step refinement below the bound.
pub const DEFAULT_REFINEMENT: f64 = 2.0;

/// Trace drift beyond which an evolution is reported as failed.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec<T: Real> {
    /// Maximum step, s.
    pub dt: T,
    pub method: Method,
    pub space: FockSpace,
    /// Heating rate `ṅ̄`, 1/s. Zero selects pure Schrödinger evolution for
    /// states that carry a ket decomposition.
    pub nbar_dot: T,
}

/// Step bound `min(2π/|δ|, 2π/Ω_sb) / 200`.
pub fn step_bound<T: Real>(f: &ForceParams<T>) -> T {
    let mut period = T::two_pi() / f.omega_sb;
    if f.delta != T::zero() {
        let p = T::two_pi() / f.delta.abs();
        if p < period {
            period = p;
        }
    }
    period / lit(STEPS_PER_PERIOD_MIN)
}

impl<T: Real> IntegratorSpec<T> {
    /// Spec with the default step for `f`.
    pub fn for_force(f: &ForceParams<T>, space: FockSpace, nbar_dot: T) -> Self {
        Self { dt: step_bound(f) / lit(DEFAULT_REFINEMENT), method: Method::Rk4, space, nbar_dot }
    }

    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self, f: &ForceParams<T>) -> Result<()> {
        f.validate()?;
        let bound = step_bound(f);
        if !(self.dt > T::zero()) || self.dt > bound * lit(1.0 + 1e-12) {
            return Err(Error::param(format!(
                "step {:e} s outside (0, {:e}]",
                to_f64(self.dt),
                to_f64(bound)
            )));
        }
        if !(self.nbar_dot >= T::zero()) {
            return Err(Error::param("heating rate must be >= 0"));
        }
        let a = f.max_displacement();
        if a * a > lit(self.space.cutoff() as f64 / 4.0) {
            return Err(Error::CutoffTooSmall {
                cutoff: self.space.cutoff(),
                reason: format!("|alpha|max^2 = {:.3} exceeds N/4", to_f64(a * a)),
            });
        }
        Ok(())
    }
}

/// Dense `H_I(t)/ħ` in rad/s.
pub fn hamiltonian_at<T: Real>(f: &ForceParams<T>, t: T, space: FockSpace) -> CMatrix<T> {
    let (a, ad) = ladder_operators::<T>(space);
    let theta = f.delta * t + f.phi_m;
    let quad = a * cis(theta) + ad * cis(-theta);
    let pref = c(-f.omega_sb / lit(2.0), T::zero());
    sigma_phi(f.phi_s).kronecker(&quad) * pref
}

/// Right-hand side in ladder form.
struct Generator<T: Real> {
    n: usize,
    sq: Vec<T>,
    /// `i (Ω/2) e^{∓iφ_s}` for the ↑ and ↓ rows of `−iH`.
    coupling: [Complex<T>; 2],
    delta: T,
    phi_m: T,
    gamma: T,
    /// `(⟨m|â†â|m⟩ + ⟨m|ââ†|m⟩)/2` in the truncated space.
    decay: Vec<T>,
    /// Per full-space index `j = s·N + m`: `decay[m]`, `√(m+1)` (0 at the
    /// top level) and `√m`.
    decay_full: Vec<T>,
    raise_full: Vec<T>,
    sq_full: Vec<T>,
}

impl<T: Real> Generator<T> {
    fn new(f: &ForceParams<T>, space: FockSpace, gamma: T) -> Self {
        let n = space.cutoff();
        let half = f.omega_sb / lit(2.0);
        let i_half = c(T::zero(), half);
        let decay: Vec<T> = (0..n)
            .map(|k| {
                let aad = if k + 1 < n { (k + 1) as f64 } else { 0.0 };
                lit((k as f64 + aad) / 2.0)
            })
            .collect();
        let raise: Vec<T> = (0..n).map(|k| if k + 1 < n { lit::<T>((k + 1) as f64).sqrt() } else { T::zero() }).collect();
        let sqrt_m: Vec<T> = (0..n).map(|k| lit::<T>(k as f64).sqrt()).collect();
        let twice = |v: &Vec<T>| v.iter().chain(v.iter()).copied().collect::<Vec<T>>();
        Self {
            n,
            decay_full: twice(&decay),
            raise_full: twice(&raise),
            sq_full: twice(&sqrt_m),
            decay,
            sq: (0..=n).map(|k| lit::<T>(k as f64).sqrt()).collect(),
            coupling: [i_half * cis(-f.phi_s), i_half * cis(f.phi_s)],
            delta: f.delta,
            phi_m: f.phi_m,
            gamma,
        }
    }

    /// `(Q v)_m = e^{iθ}√(m+1) v_{m+1} + e^{−iθ}√m v_{m−1}` scaled by `s`,
    /// accumulated into `out`.
    #[inline]
    fn quad_into(&self, e: Complex<T>, s: Complex<T>, v: &[Complex<T>], out: &mut [Complex<T>]) {
        let n = self.n;
        let up = s * e;
        let dn = s * e.conj();
        for m in 0..n {
            let mut acc = czero::<T>();
            if m + 1 < n {
                acc += up * v[m + 1] * self.sq[m + 1];
            }
            if m > 0 {
                acc += dn * v[m - 1] * self.sq[m];
            }
            out[m] = acc;
        }
    }

    /// `dψ/dt = −i H ψ`.
    fn ket_rhs(&self, t: T, psi: &[Complex<T>], out: &mut [Complex<T>]) {
        let n = self.n;
        let e = cis(self.delta * t + self.phi_m);
        let (top, bottom) = out.split_at_mut(n);
        self.quad_into(e, self.coupling[0], &psi[n..], top);
        self.quad_into(e, self.coupling[1], &psi[..n], bottom);
    }

    /// `dρ/dt` for a row-major `d × d` density. `cols` is scratch of length
    /// `2d` for the right-multiplication coefficients.
    fn density_rhs(&self, t: T, rho: &[Complex<T>], cols: &mut [Complex<T>], out: &mut [Complex<T>]) {
        let n = self.n;
        let d = 2 * n;
        let e = cis(self.delta * t + self.phi_m);
        let ep = e;
        let em = e.conj();
        // +iρH: column (s,m) picks up ρ[·,(s̄,m+1)] and ρ[·,(s̄,m−1)] with
        // coefficients −g_{s̄} e^{∓iθ}√·; zero where the neighbour is outside
        // the block.
        let (up_next, up_prev) = cols.split_at_mut(d);
        for s in 0..2 {
            let g = -self.coupling[1 - s];
            for m in 0..n {
                up_next[s * n + m] = if m + 1 < n { g * em * self.sq[m + 1] } else { czero() };
                up_prev[s * n + m] = if m > 0 { g * ep * self.sq[m] } else { czero() };
            }
        }
        let zero = czero::<T>();
        for s in 0..2 {
            let g = self.coupling[s];
            let other = (1 - s) * n;
            for m in 0..n {
                let i = s * n + m;
                let row = &mut out[i * d..(i + 1) * d];
                let here = &rho[i * d..(i + 1) * d];

                // −iHρ: row (s,m) mixes rows (s̄, m±1).
                let a = if m + 1 < n { g * ep * self.sq[m + 1] } else { zero };
                let b = if m > 0 { g * em * self.sq[m] } else { zero };
                let r1 = &rho[(other + (m + 1).min(n - 1)) * d..][..d];
                let r2 = &rho[(other + m.saturating_sub(1)) * d..][..d];
                // +iρH reads the same row, shifted into the other spin block.
                for (half, src) in [(0usize, n), (n, 0usize)] {
                    let z = &mut row[half..half + n];
                    let (x1, x2) = (&r1[half..half + n], &r2[half..half + n]);
                    let next = &up_next[half..half + n];
                    let prev = &up_prev[half..half + n];
                    let from = &here[src..src + n];
                    z[0] = a * x1[0] + b * x2[0] + next[0] * from[1];
                    z[n - 1] = a * x1[n - 1] + b * x2[n - 1] + prev[n - 1] * from[n - 2];
                    let inner = z[1..n - 1]
                        .iter_mut()
                        .zip(&x1[1..n - 1])
                        .zip(&x2[1..n - 1])
                        .zip(next[1..n - 1].iter().zip(&prev[1..n - 1]))
                        .zip(from[2..].iter().zip(&from[..n - 2]));
                    for ((((z, x1), x2), (cn, cp)), (fn_, fp)) in inner {
                        *z = a * *x1 + b * *x2 + *cn * *fn_ + *cp * *fp;
                    }
                }

                if self.gamma > T::zero() {
                    let gam = self.gamma;
                    let ci = self.decay[m];
                    for ((z, x), cj) in row.iter_mut().zip(here).zip(&self.decay_full) {
                        *z -= *x * ((ci + *cj) * gam);
                    }
                    if m + 1 < n {
                        // √((m_i+1)(m_j+1)) ρ[i+1, j+1]
                        let below = &rho[(i + 1) * d..(i + 2) * d];
                        let si = self.sq[m + 1] * gam;
                        for ((z, x), sj) in row[..d - 1].iter_mut().zip(&below[1..]).zip(&self.raise_full) {
                            *z += *x * (si * *sj);
                        }
                    }
                    if m > 0 {
                        // √(m_i m_j) ρ[i−1, j−1]
                        let above = &rho[(i - 1) * d..i * d];
                        let si = self.sq[m] * gam;
                        for ((z, x), sj) in row[1..].iter_mut().zip(above).zip(&self.sq_full[1..]) {
                            *z += *x * (si * *sj);
                        }
                    }
                }
            }
        }
    }
}

/// Classic RK4 on a flat buffer with a caller-supplied right-hand side.
struct Rk4<T: Real> {
    k1: Vec<Complex<T>>,
    k2: Vec<Complex<T>>,
    k3: Vec<Complex<T>>,
    k4: Vec<Complex<T>>,
    tmp: Vec<Complex<T>>,
}

impl<T: Real> Rk4<T> {
    fn new(len: usize) -> Self {
        let z = vec![czero::<T>(); len];
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    fn step<F>(&mut self, t: T, h: T, y: &mut [Complex<T>], mut rhs: F)
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]),
    {
        let half = h / lit(2.0);
        rhs(t, y, &mut self.k1);
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *tmp = *y + *k * half;
        }
        rhs(t + half, &self.tmp, &mut self.k2);
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *tmp = *y + *k * half;
        }
        rhs(t + half, &self.tmp, &mut self.k3);
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *tmp = *y + *k * h;
        }
        rhs(t + h, &self.tmp, &mut self.k4);
        let sixth = h / lit(6.0);
        let two = lit::<T>(2.0);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += (self.k1[i] + (self.k2[i] + self.k3[i]) * two + self.k4[i]) * sixth;
        }
    }
}

/// Integrates `y` from `t0` to `t1` in equal steps no longer than `dt`.
fn advance<T: Real, F>(rk: &mut Rk4<T>, y: &mut [Complex<T>], t0: T, t1: T, dt: T, mut rhs: F)
where
    F: FnMut(T, &[Complex<T>], &mut [Complex<T>]),
{
    let span = t1 - t0;
    if span <= T::zero() {
        return;
    }
    let steps = (to_f64(span) / to_f64(dt)).ceil().max(1.0) as usize;
    let h = span / lit(steps as f64);
    for k in 0..steps {
        let t = t0 + h * lit(k as f64);
        rk.step(t, h, y, &mut rhs);
    }
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.iter().any(|t| !(*t >= T::zero())) {
        return Err(Error::param("time grid must be non-negative"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("time grid must be ascending"));
    }
    Ok(())
}

fn check_trace<T: Real>(state: &QuantumState<T>) -> Result<()> {
    let drift = (state.trace() - T::one()).abs();
    if drift > lit(TRACE_DRIFT_LIMIT) {
        return Err(Error::Integration(format!(
            "trace drifted by {:e}; reduce the step or raise the cutoff",
            to_f64(drift)
        )));
    }
    Ok(())
}

/// Evolves `rho0` under force `f` for `f.duration`.
pub fn evolve<T: Real>(rho0: &QuantumState<T>, f: &ForceParams<T>, spec: &IntegratorSpec<T>) -> Result<QuantumState<T>> {
    let mut out = None;
    integrate(rho0, f, spec, &[f.duration], |_, s| {
        out = Some(s.clone());
        Ok(())
    })?;
    Ok(out.expect("one checkpoint"))
}

/// `P↓` at each point of an ascending time grid from a single integration.
pub fn pdown_vs_time<T: Real>(
    rho0: &QuantumState<T>,
    f: &ForceParams<T>,
    spec: &IntegratorSpec<T>,
    grid: &[T],
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(grid.len());
    integrate(rho0, f, spec, grid, |_, s| {
        out.push(s.spin_populations().1);
        Ok(())
    })?;
    Ok(out)
}

/// Integrates through ascending `checkpoints`, handing the state at each to
/// `visit`.
pub fn integrate<T: Real, V>(
    rho0: &QuantumState<T>,
    f: &ForceParams<T>,
    spec: &IntegratorSpec<T>,
    checkpoints: &[T],
    mut visit: V,
) -> Result<()>
where
    V: FnMut(usize, &QuantumState<T>) -> Result<()>,
{
    if rho0.space() != spec.space {
        return Err(Error::InvalidState("state and integrator use different Fock spaces".into()));
    }
    check_grid(checkpoints)?;
    let last = checkpoints.last().copied().unwrap_or(T::zero());
    let horizon = f.with_duration(if last > f.duration { last } else { f.duration });
    spec.validate(&horizon)?;
    let space = spec.space;
    let gen = Generator::new(f, space, spec.nbar_dot);

    match rho0.members() {
        Some(members) if spec.nbar_dot == T::zero() => {
            let d = space.dim();
            let mut kets: Vec<Vec<Complex<T>>> = members.iter().map(|m| m.ket.iter().copied().collect()).collect();
            let weights: Vec<T> = members.iter().map(|m| m.weight).collect();
            let mut rk = Rk4::new(d);
            let mut t = T::zero();
            for (idx, &cp) in checkpoints.iter().enumerate() {
                for ket in kets.iter_mut() {
                    advance(&mut rk, ket, t, cp, spec.dt, |tt, y, o| gen.ket_rhs(tt, y, o));
                }
                t = cp;
                let snapshot = QuantumState::from_members_unchecked(
                    kets.iter()
                        .zip(&weights)
                        .map(|(k, w)| Member { weight: *w, ket: CVector::from_column_slice(k) })
                        .collect(),
                    space,
                );
                check_trace(&snapshot)?;
                visit(idx, &snapshot)?;
            }
        }
        _ => {
            let d = space.dim();
            let dense = rho0.density();
            // row-major copy
            let mut rho: Vec<Complex<T>> = (0..d * d).map(|i| dense[(i / d, i % d)]).collect();
            let mut scratch = vec![czero::<T>(); 2 * d];
            let mut rk = Rk4::new(d * d);
            let mut t = T::zero();
            for (idx, &cp) in checkpoints.iter().enumerate() {
                advance(&mut rk, &mut rho, t, cp, spec.dt, |tt, y, o| gen.density_rhs(tt, y, &mut scratch, o));
                t = cp;
                let m = CMatrix::from_row_slice(d, d, &rho);
                let snapshot = QuantumState::from_density_unchecked(m, space);
                check_trace(&snapshot)?;
                visit(idx, &snapshot)?;
            }
        }
    }
    Ok(())
}
