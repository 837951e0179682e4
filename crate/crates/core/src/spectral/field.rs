use std::fmt;
use std::ops::Neg;
use std::sync::Arc;

use num_complex::Complex64;

use super::{cnorm_sq, dot_kc, leray_project_f, polarization_basis, CVec3, CZERO};
use crate::error::{domain, Result};

/// A nonzero lattice wavevector `k ∈ Z³ \ {0}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Wavevector([i32; 3]);

impl Wavevector {
    pub fn new(k: [i32; 3]) -> Result<Self> {
        if k == [0, 0, 0] {
            return Err(domain("the zero wavevector is excluded (mean-zero fields)"));
        }
        Ok(Self(k))
    }

    pub fn components(self) -> [i32; 3] {
        self.0
    }

    pub fn as_f64(self) -> [f64; 3] {
        [self.0[0] as f64, self.0[1] as f64, self.0[2] as f64]
    }

    pub fn norm_sq(self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// True for the stored member of a `±k` pair: the first nonzero
    /// component is positive.
    pub fn is_representative(self) -> bool {
        let [x, y, z] = self.0;
        x > 0 || (x == 0 && (y > 0 || (y == 0 && z > 0)))
    }
}

impl Neg for Wavevector {
    type Output = Self;
    fn neg(self) -> Self {
        Self([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl fmt::Display for Wavevector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

struct TruncationInner {
    k_max: u32,
    modes: Vec<Wavevector>,
    radius: Vec<f64>,
    radius_sq: Vec<f64>,
    basis: Vec<[[f64; 3]; 2]>,
    /// Dense cube lookup: `idx + 1` for a representative, `−(idx + 1)` for its
    /// negative, 0 outside the ball.
    lookup: Vec<i32>,
}

/// The Galerkin truncation `P_N`: all wavevectors with `|k|² ≤ k_max²`.
///
/// Modes are ordered by `|k|²` and then lexicographically, so each spherical
/// shell is a contiguous range. Cloning is cheap.
#[derive(Clone)]
pub struct Truncation(Arc<TruncationInner>);

impl Truncation {
    pub fn new(k_max: u32) -> Result<Self> {
        if k_max == 0 {
            return Err(domain("k_max must be positive"));
        }
        if k_max > 512 {
            return Err(domain("k_max above 512 is not supported"));
        }
        let kk = k_max as i32;
        let k2max = (kk as i64) * (kk as i64);
        let mut modes = Vec::new();
        for x in -kk..=kk {
            for y in -kk..=kk {
                for z in -kk..=kk {
                    let k = Wavevector([x, y, z]);
                    if k.0 != [0, 0, 0] && k.is_representative() && k.norm_sq() <= k2max {
                        modes.push(k);
                    }
                }
            }
        }
        modes.sort_by_key(|k| (k.norm_sq(), k.0));
        let side = (2 * kk + 1) as usize;
        let mut lookup = vec![0i32; side * side * side];
        for (i, k) in modes.iter().enumerate() {
            let tag = i as i32 + 1;
            lookup[cube_index(k.0, kk, side)] = tag;
            lookup[cube_index((-*k).0, kk, side)] = -tag;
        }
        let radius_sq: Vec<f64> = modes.iter().map(|k| k.norm_sq() as f64).collect();
        Ok(Self(Arc::new(TruncationInner {
            k_max,
            radius: radius_sq.iter().map(|r| r.sqrt()).collect(),
            radius_sq,
            basis: modes.iter().map(|k| polarization_basis(k.0)).collect(),
            modes,
            lookup,
        })))
    }

    pub fn k_max(&self) -> u32 {
        self.0.k_max
    }

    /// Stored representatives, one per `±k` pair.
    pub fn modes(&self) -> &[Wavevector] {
        &self.0.modes
    }

    pub fn len(&self) -> usize {
        self.0.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.modes.is_empty()
    }

    /// Number of lattice points in the ball (both `k` and `−k`).
    pub fn lattice_count(&self) -> usize {
        2 * self.0.modes.len()
    }

    /// Dimension of `P_N H`: two polarizations per lattice mode. This is the
    /// number of Stokes eigenvalues `N` retained, counted with multiplicity.
    pub fn eigen_count(&self) -> usize {
        2 * self.lattice_count()
    }

    pub(crate) fn radius(&self) -> &[f64] {
        &self.0.radius
    }

    pub(crate) fn radius_sq(&self) -> &[f64] {
        &self.0.radius_sq
    }

    /// Polarization basis per representative.
    pub fn basis(&self) -> &[[[f64; 3]; 2]] {
        &self.0.basis
    }

    /// Locates `k`: index of its representative, and whether `k` is the
    /// negated member of the pair.
    pub fn locate(&self, k: [i32; 3]) -> Option<(usize, bool)> {
        let kk = self.0.k_max as i32;
        if k.iter().any(|c| c.abs() > kk) {
            return None;
        }
        let side = (2 * kk + 1) as usize;
        match self.0.lookup[cube_index(k, kk, side)] {
            0 => None,
            t if t > 0 => Some((t as usize - 1, false)),
            t => Some(((-t) as usize - 1, true)),
        }
    }

    pub fn contains(&self, k: Wavevector) -> bool {
        self.locate(k.0).is_some()
    }

    pub fn same_as(&self, other: &Truncation) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.k_max == other.0.k_max
    }
}

impl PartialEq for Truncation {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Truncation")
            .field("k_max", &self.0.k_max)
            .field("representatives", &self.0.modes.len())
            .finish()
    }
}

#[inline]
fn cube_index(k: [i32; 3], kk: i32, side: usize) -> usize {
    let x = (k[0] + kk) as usize;
    let y = (k[1] + kk) as usize;
    let z = (k[2] + kk) as usize;
    (x * side + y) * side + z
}

/// Relative tolerance for the incompressibility check on user-supplied data.
const DIV_TOL: f64 = 1e-12;

/// Fourier coefficients of a real, mean-zero, divergence-free field.
#[derive(Clone, PartialEq)]
pub struct SpectralField {
    trunc: Truncation,
    coeffs: Vec<CVec3>,
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("k_max", &self.trunc.k_max())
            .field("nonzero", &self.coeffs.iter().filter(|c| cnorm_sq(c) > 0.0).count())
            .finish()
    }
}

impl SpectralField {
    pub fn zeros(trunc: &Truncation) -> Self {
        Self {
            trunc: trunc.clone(),
            coeffs: vec![CZERO; trunc.len()],
        }
    }

    /// Builds a field from `f(k)` on every representative. Rejects
    /// coefficients that are not orthogonal to `k`.
    pub fn try_from_fn<F>(trunc: &Truncation, mut f: F) -> Result<Self>
    where
        F: FnMut(Wavevector) -> CVec3,
    {
        let mut out = Self::zeros(trunc);
        for (i, &k) in trunc.modes().iter().enumerate() {
            let c = f(k);
            check_transverse(k, &c)?;
            out.coeffs[i] = c;
        }
        Ok(out)
    }

    /// Builds a field from `f(k)`, Leray-projecting every coefficient.
    pub fn solenoidal_from_fn<F>(trunc: &Truncation, mut f: F) -> Self
    where
        F: FnMut(Wavevector) -> CVec3,
    {
        let mut out = Self::zeros(trunc);
        for (i, &k) in trunc.modes().iter().enumerate() {
            out.coeffs[i] = leray_project_f(f(k), k.as_f64());
        }
        out
    }

    /// Builds a field from representative coefficients in mode order.
    pub fn from_coeffs(trunc: &Truncation, coeffs: Vec<CVec3>) -> Result<Self> {
        if coeffs.len() != trunc.len() {
            return Err(domain(format!(
                "expected {} coefficients, got {}",
                trunc.len(),
                coeffs.len()
            )));
        }
        for (k, c) in trunc.modes().iter().zip(&coeffs) {
            check_transverse(*k, c)?;
        }
        Ok(Self {
            trunc: trunc.clone(),
            coeffs,
        })
    }

    pub fn truncation(&self) -> &Truncation {
        &self.trunc
    }

    /// Representative coefficients in mode order.
    pub fn coeffs(&self) -> &[CVec3] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [CVec3] {
        &mut self.coeffs
    }

    /// `û(k)`; zero outside the truncation.
    pub fn get(&self, k: Wavevector) -> CVec3 {
        match self.trunc.locate(k.components()) {
            None => CZERO,
            Some((i, false)) => self.coeffs[i],
            Some((i, true)) => conj3(&self.coeffs[i]),
        }
    }

    /// Sets `û(k)` (and `û(−k)` by conjugation).
    pub fn set(&mut self, k: Wavevector, c: CVec3) -> Result<()> {
        check_transverse(k, &c)?;
        match self.trunc.locate(k.components()) {
            None => Err(domain(format!("mode {k} is outside the truncation"))),
            Some((i, false)) => {
                self.coeffs[i] = c;
                Ok(())
            }
            Some((i, true)) => {
                self.coeffs[i] = conj3(&c);
                Ok(())
            }
        }
    }

    /// Iterates over the full symmetric mode set as `(k, û(k))`.
    pub fn iter_full(&self) -> impl Iterator<Item = (Wavevector, CVec3)> + '_ {
        self.trunc
            .modes()
            .iter()
            .zip(&self.coeffs)
            .flat_map(|(&k, c)| [(k, *c), (-k, conj3(c))])
    }

    /// Largest `|k·û(k)| / (|k| |û(k)|)` over the field.
    pub fn max_divergence(&self) -> f64 {
        self.trunc
            .modes()
            .iter()
            .zip(&self.coeffs)
            .map(|(k, c)| dot_kc(k.as_f64(), c).norm() / k.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            for z in c.iter_mut() {
                *z *= a;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a · other`
    pub fn axpy(&mut self, a: f64, other: &SpectralField) -> Result<()> {
        ensure_same(&self.trunc, &other.trunc)?;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for d in 0..3 {
                x[d] += y[d] * a;
            }
        }
        Ok(())
    }

    /// L² inner product `(x, y) = Σ_k Re(x̂(k)·conj(ŷ(k)))` over the full set.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        ensure_same(&self.trunc, &other.trunc)?;
        Ok(2.0
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| super::re_dot(a, b))
                .sum::<f64>())
    }

    /// Re-applies the Leray projection on every mode.
    pub(crate) fn project_in_place(&mut self) {
        for (k, c) in self.trunc.modes().iter().zip(self.coeffs.iter_mut()) {
            *c = leray_project_f(*c, k.as_f64());
        }
    }
}

pub(crate) fn ensure_same(a: &Truncation, b: &Truncation) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(domain(format!(
            "truncation mismatch: k_max {} vs {}",
            a.k_max(),
            b.k_max()
        )))
    }
}

#[inline]
pub(crate) fn conj3(c: &CVec3) -> CVec3 {
    [c[0].conj(), c[1].conj(), c[2].conj()]
}

fn check_transverse(k: Wavevector, c: &CVec3) -> Result<()> {
    let kc = dot_kc(k.as_f64(), c).norm();
    let scale = k.norm() * cnorm_sq(c).sqrt();
    if kc > DIV_TOL * scale + f64::MIN_POSITIVE {
        return Err(domain(format!(
            "coefficient at {k} is not divergence-free (|k·c| = {kc:e})"
        )));
    }
    Ok(())
}

#[allow(dead_code)]
pub(crate) fn cvec(x: [f64; 3]) -> CVec3 {
    [
        Complex64::new(x[0], 0.0),
        Complex64::new(x[1], 0.0),
        Complex64::new(x[2], 0.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_wavevector_rejected() {
        assert!(Wavevector::new([0, 0, 0]).is_err());
    }

    #[test]
    fn ball_counts() {
        let t = Truncation::new(1).unwrap();
        assert_eq!(t.lattice_count(), 6);
        assert_eq!(t.eigen_count(), 12);
        // |k|² ≤ 4: 6 + 12 + 8 + 6 = 32 lattice points
        let t2 = Truncation::new(2).unwrap();
        assert_eq!(t2.lattice_count(), 32);
    }

    #[test]
    fn mode_set_closed_under_negation() {
        let t = Truncation::new(5).unwrap();
        for &k in t.modes() {
            assert!(k.is_representative());
            let (i, neg) = t.locate((-k).components()).unwrap();
            assert!(neg);
            assert_eq!(t.modes()[i], k);
        }
        assert!(t.locate([5, 1, 0]).is_none());
        assert!(t.locate([0, 0, 0]).is_none());
    }

    #[test]
    fn shells_are_contiguous() {
        let t = Truncation::new(6).unwrap();
        let r2: Vec<i64> = t.modes().iter().map(|k| k.norm_sq()).collect();
        assert!(r2.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn get_set_respects_hermitian_symmetry() {
        let t = Truncation::new(3).unwrap();
        let mut f = SpectralField::zeros(&t);
        let k = Wavevector::new([-1, 2, 0]).unwrap();
        let c = [
            Complex64::new(2.0, 1.0),
            Complex64::new(1.0, 0.5),
            Complex64::new(0.0, -3.0),
        ];
        f.set(k, c).unwrap();
        assert_eq!(f.get(k), c);
        assert_eq!(f.get(-k), conj3(&c));
    }

    #[test]
    fn set_rejects_compressible_coefficient() {
        let t = Truncation::new(3).unwrap();
        let mut f = SpectralField::zeros(&t);
        let k = Wavevector::new([1, 0, 0]).unwrap();
        assert!(f.set(k, cvec([1.0, 0.0, 0.0])).is_err());
        let far = Wavevector::new([4, 0, 0]).unwrap();
        assert!(f.set(far, cvec([0.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn inner_rejects_truncation_mismatch() {
        let a = SpectralField::zeros(&Truncation::new(2).unwrap());
        let b = SpectralField::zeros(&Truncation::new(3).unwrap());
        assert!(a.inner(&b).is_err());
    }
}
