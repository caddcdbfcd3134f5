use std::collections::HashMap;

use nalgebra::Complex;

use super::{ladder_operators, CMatrix, CVector, FockSpace};
use crate::error::{Error, Result};
use crate::scalar::{abs, cis, lit, norm_sqr, to_f64, Real};

fn check_margin<T: Real>(alpha: Complex<T>, space: FockSpace) -> Result<()> {
    let a2 = norm_sqr(alpha);
    let limit = lit::<T>(space.cutoff() as f64 / 4.0);
    if a2 > limit || !a2.is_finite() {
        return Err(Error::CutoffTooSmall {
            cutoff: space.cutoff(),
            reason: format!("|alpha|^2 = {:.4} exceeds N/4", to_f64(a2)),
        });
    }
    Ok(())
}

/// Displacement operator `D(α) = exp(α â† − α* â)` on the truncated space.
///
/// Requires `|α|² ≤ N/4`.
pub fn displacement_operator<T: Real>(alpha: Complex<T>, space: FockSpace) -> Result<CMatrix<T>> {
    check_margin(alpha, space)?;
    let (a, ad) = ladder_operators::<T>(space);
    let generator = ad * alpha - a * alpha.conj();
    Ok(generator.exp())
}

/// Applies displacements to motional vectors, caching `D(r)` for each real
/// magnitude `r` and recovering `D(r e^{iθ}) = e^{iθn̂} D(r) e^{−iθn̂}` by
/// diagonal phases.
#[derive(Debug)]
pub struct Displacer<T: Real> {
    space: FockSpace,
    cache: HashMap<u64, CMatrix<T>>,
}

impl<T: Real> Displacer<T> {
    pub fn new(space: FockSpace) -> Self {
        Self { space, cache: HashMap::new() }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    fn real_displacement(&mut self, r: T) -> Result<&CMatrix<T>> {
        // Magnitudes recovered from rotated α differ in the last few bits;
        // bucketing by 2⁸ ulp keeps them on one cached matrix.
        let key = to_f64(r).to_bits() >> 8;
        if !self.cache.contains_key(&key) {
            let d = displacement_operator(Complex::new(r, T::zero()), self.space)?;
            self.cache.insert(key, d);
        }
        Ok(&self.cache[&key])
    }

    /// Full matrix `D(α)`.
    pub fn matrix(&mut self, alpha: Complex<T>) -> Result<CMatrix<T>> {
        check_margin(alpha, self.space)?;
        let r = abs(alpha);
        let theta = if r == T::zero() { T::zero() } else { alpha.im.atan2(alpha.re) };
        let n = self.space.cutoff();
        let base = self.real_displacement(r)?;
        let mut out = base.clone();
        for col in 0..n {
            for row in 0..n {
                let k = lit::<T>(row as f64) - lit::<T>(col as f64);
                out[(row, col)] *= cis(theta * k);
            }
        }
        Ok(out)
    }

    /// `D(α) v` for a length-`N` motional vector. With `adjoint`, applies
    /// `D(α)† = D(−α)`.
    pub fn apply(&mut self, alpha: Complex<T>, v: &CVector<T>, adjoint: bool) -> Result<CVector<T>> {
        Ok(self.apply_batch(alpha, std::slice::from_ref(v), adjoint)?.pop().expect("one input"))
    }

    /// [`apply`](Self::apply) over several vectors sharing one `α`. Zero
    /// entries are skipped, so Fock-state inputs cost `O(N)` each.
    pub fn apply_batch(&mut self, alpha: Complex<T>, vs: &[CVector<T>], adjoint: bool) -> Result<Vec<CVector<T>>> {
        let alpha = if adjoint { -alpha } else { alpha };
        check_margin(alpha, self.space)?;
        let r = abs(alpha);
        let theta = if r == T::zero() { T::zero() } else { alpha.im.atan2(alpha.re) };
        let n = self.space.cutoff();
        let phases: Vec<Complex<T>> = (0..n).map(|k| cis(theta * lit::<T>(k as f64))).collect();
        let base = self.real_displacement(r)?;
        let mut outs = Vec::with_capacity(vs.len());
        for v in vs {
            if v.len() != n {
                return Err(Error::InvalidState(format!("vector length {} != cutoff {n}", v.len())));
            }
            let mut out = CVector::<T>::zeros(n);
            for (k, (x, ph)) in v.iter().zip(&phases).enumerate() {
                if x.re == T::zero() && x.im == T::zero() {
                    continue;
                }
                let w = *x * ph.conj();
                for (o, d) in out.iter_mut().zip(base.column(k).iter()) {
                    *o += *d * w;
                }
            }
            for (o, ph) in out.iter_mut().zip(&phases) {
                *o *= *ph;
            }
            outs.push(out);
        }
        Ok(outs)
    }
}
