//! Frequency lattice, dense mode-field storage and field diagnostics.
//!
//! A [`ModeField`] stores, for each velocity component, every Fourier
//! coefficient `v_{iα}` with `|α|∞ ≤ K` in a dense array. Offsets into that
//! array follow the lexicographic order of [`iter_lattice`], first axis
//! slowest, so that the mirror `-α` of an offset `o` is `len - 1 - o`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;

use crate::bounds::DecayEnvelope;
use crate::error::SimError;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A point of the integer frequency lattice `Z^n`, `n ≤ 3`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    dim: u8,
    entries: [i64; MAX_DIM],
}

impl MultiIndex {
    /// Builds an index from its entries. Panics if `entries.len()` is not 1, 2 or 3.
    pub fn new(entries: &[i64]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&entries.len()),
            "lattice dimension must be 1, 2 or 3"
        );
        let mut e = [0; MAX_DIM];
        e[..entries.len()].copy_from_slice(entries);
        MultiIndex {
            dim: entries.len() as u8,
            entries: e,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(&[0; MAX_DIM][..dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries[..self.dim()]
    }

    pub fn is_zero(&self) -> bool {
        self.entries().iter().all(|&a| a == 0)
    }

    /// Squared Euclidean modulus `Σ α_j²`.
    pub fn norm_sq(&self) -> i64 {
        self.entries().iter().map(|a| a * a).sum()
    }

    /// Euclidean modulus `|α|`.
    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn max_norm(&self) -> i64 {
        self.entries().iter().map(|a| a.abs()).max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> i64 {
        self.entries().iter().map(|a| a.abs()).sum()
    }

    pub fn in_box(&self, k: usize) -> bool {
        self.max_norm() <= k as i64
    }
}

impl Sub for MultiIndex {
    type Output = MultiIndex;
    fn sub(mut self, rhs: MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim, rhs.dim);
        for d in 0..self.dim() {
            self.entries[d] -= rhs.entries[d];
        }
        self
    }
}

impl Add for MultiIndex {
    type Output = MultiIndex;
    fn add(mut self, rhs: MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim, rhs.dim);
        for d in 0..self.dim() {
            self.entries[d] += rhs.entries[d];
        }
        self
    }
}

impl Neg for MultiIndex {
    type Output = MultiIndex;
    fn neg(mut self) -> MultiIndex {
        for d in 0..self.dim() {
            self.entries[d] = -self.entries[d];
        }
        self
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (d, a) in self.entries().iter().enumerate() {
            if d > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Geometry of the box `{α : |α|∞ ≤ K}` in `Z^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeBox {
    n: usize,
    k: usize,
    side: usize,
    len: usize,
}

impl ModeBox {
    pub fn new(n: usize, k: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension must be 1, 2 or 3");
        let side = 2 * k + 1;
        ModeBox {
            n,
            k,
            side,
            len: side.pow(n as u32),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.k
    }

    /// `2K + 1`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of lattice points, `(2K+1)^n`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        alpha.dim() == self.n && alpha.in_box(self.k)
    }

    /// Offset of `α` in lexicographic order, or `None` outside the box.
    pub fn offset(&self, alpha: &MultiIndex) -> Option<usize> {
        if !self.contains(alpha) {
            return None;
        }
        let k = self.k as i64;
        Some(
            alpha
                .entries()
                .iter()
                .fold(0usize, |acc, &a| acc * self.side + (a + k) as usize),
        )
    }

    pub fn index(&self, mut offset: usize) -> MultiIndex {
        debug_assert!(offset < self.len);
        let mut e = [0i64; MAX_DIM];
        for d in (0..self.n).rev() {
            e[d] = (offset % self.side) as i64 - self.k as i64;
            offset /= self.side;
        }
        MultiIndex::new(&e[..self.n])
    }

    /// Offset of `-α` given the offset of `α`.
    pub fn mirror(&self, offset: usize) -> usize {
        self.len - 1 - offset
    }

    /// Offset of the zero mode.
    pub fn origin(&self) -> usize {
        (self.len - 1) / 2
    }

    pub fn iter(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.len).map(move |o| self.index(o))
    }
}

/// Every `α` with `|α|∞ ≤ K`, each exactly once, in lexicographic order
/// (first entry slowest).
pub fn iter_lattice(k: usize, n: usize) -> Vec<MultiIndex> {
    let b = ModeBox::new(n, k);
    b.iter().collect()
}

/// Physical wavenumber `2π α_j / l` of one lattice direction.
#[inline]
pub(crate) fn wavenumber(alpha_j: i64, l: f64) -> f64 {
    2.0 * PI * alpha_j as f64 / l
}

/// Squared physical wavenumber `Σ_j (2π α_j / l)²`.
#[inline]
pub(crate) fn wavenumber_sq(alpha: &MultiIndex, l: f64) -> f64 {
    alpha
        .entries()
        .iter()
        .map(|&a| {
            let k = wavenumber(a, l);
            k * k
        })
        .sum()
}

/// The velocity modes `v_{iα}` of all `n` components over the box `|α|∞ ≤ K`.
#[derive(Clone, PartialEq)]
pub struct ModeField {
    geometry: ModeBox,
    real: bool,
    data: Vec<Complex64>,
}

impl fmt::Debug for ModeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModeField")
            .field("n", &self.dim())
            .field("K", &self.cutoff())
            .field("real", &self.real)
            .finish_non_exhaustive()
    }
}

impl ModeField {
    /// The zero field with `n` components in dimension `n`.
    pub fn zeros(n: usize, k: usize) -> Self {
        let geometry = ModeBox::new(n, k);
        ModeField {
            geometry,
            real: true,
            data: vec![Complex64::new(0.0, 0.0); n * geometry.len()],
        }
    }

    /// Builds a field from component-major coefficients in lattice order.
    pub fn from_coefficients(n: usize, k: usize, real: bool, data: Vec<Complex64>) -> Result<Self, SimError> {
        let geometry = ModeBox::new(n, k);
        if data.len() != n * geometry.len() {
            return Err(SimError::DimensionMismatch(format!(
                "expected {} coefficients for n={n}, K={k}, got {}",
                n * geometry.len(),
                data.len()
            )));
        }
        Ok(ModeField { geometry, real, data })
    }

    pub fn geometry(&self) -> &ModeBox {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn n_components(&self) -> usize {
        self.geometry.dim()
    }

    pub fn cutoff(&self) -> usize {
        self.geometry.cutoff()
    }

    /// Whether the field is flagged as the transform of a real velocity.
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn set_real(&mut self, real: bool) {
        self.real = real;
    }

    pub fn component(&self, i: usize) -> &[Complex64] {
        let len = self.geometry.len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [Complex64] {
        let len = self.geometry.len();
        &mut self.data[i * len..(i + 1) * len]
    }

    /// All coefficients, component-major, lattice order within a component.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.data
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// `v_{iα}`, zero outside the box.
    pub fn get(&self, i: usize, alpha: &MultiIndex) -> Complex64 {
        match self.geometry.offset(alpha) {
            Some(o) => self.component(i)[o],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Sets `v_{iα}`. Panics outside the box.
    pub fn set(&mut self, i: usize, alpha: &MultiIndex, value: Complex64) {
        let o = self
            .geometry
            .offset(alpha)
            .unwrap_or_else(|| panic!("mode {alpha} outside the box K={}", self.cutoff()));
        self.component_mut(i)[o] = value;
    }

    /// Sets `v_{iα}` and its Hermitian partner `v_{i,-α} = conj(v_{iα})`.
    pub fn set_pair(&mut self, i: usize, alpha: &MultiIndex, value: Complex64) {
        self.set(i, alpha, value);
        self.set(i, &-*alpha, value.conj());
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> ModeField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= factor);
        out
    }

    /// Zero-mode value of every component.
    pub fn zero_modes(&self) -> Vec<Complex64> {
        let o = self.geometry.origin();
        (0..self.n_components()).map(|i| self.component(i)[o]).collect()
    }

    pub fn set_zero_modes(&mut self, values: &[Complex64]) {
        let o = self.geometry.origin();
        for (i, v) in values.iter().enumerate() {
            self.component_mut(i)[o] = *v;
        }
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `sqrt(Σ |v_{iα}|²)` over all components and modes.
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `sqrt(Σ |a - b|²)`. Panics on mismatched shapes.
    pub fn l2_distance(&self, other: &ModeField) -> f64 {
        assert_eq!(self.geometry, other.geometry, "field shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `|a - b|` over all coefficients.
    pub fn max_distance(&self, other: &ModeField) -> f64 {
        assert_eq!(self.geometry, other.geometry, "field shapes differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from Hermitian symmetry, `max |v_{i,-α} - conj(v_{iα})|`.
    pub fn hermitian_defect(&self) -> f64 {
        let len = self.geometry.len();
        let mut worst = 0.0f64;
        for i in 0..self.n_components() {
            let c = self.component(i);
            for o in 0..len {
                let m = self.geometry.mirror(o);
                worst = worst.max((c[m] - c[o].conj()).norm());
            }
        }
        worst
    }
}

/// Replaces every pair by its Hermitian average, `(v_{iα} + conj(v_{i,-α}))/2`
/// at `α` and the conjugate at `-α`; zero modes keep their real part.
pub fn hermitian_symmetrize(f: &ModeField) -> ModeField {
    let mut out = f.clone();
    symmetrize_in_place(&mut out);
    out
}

pub(crate) fn symmetrize_in_place(f: &mut ModeField) {
    let geometry = *f.geometry();
    for i in 0..f.n_components() {
        let c = f.component_mut(i);
        for o in 0..=geometry.origin() {
            let m = geometry.mirror(o);
            let avg = (c[o] + c[m].conj()) * 0.5;
            if o == m {
                c[o] = Complex64::new(avg.re, 0.0);
            } else {
                c[o] = avg;
                c[m] = avg.conj();
            }
        }
    }
    f.set_real(true);
}

/// Dual Sobolev norm `max_i sqrt(Σ_α |v_{iα}|² (1+|α|²)^m)`.
pub fn sobolev_norm(f: &ModeField, m: f64) -> f64 {
    let geometry = f.geometry();
    let weights: Vec<f64> = geometry.iter().map(|a| (1.0 + a.norm_sq() as f64).powf(m)).collect();
    (0..f.n_components())
        .map(|i| {
            f.component(i)
                .iter()
                .zip(&weights)
                .map(|(z, w)| z.norm_sqr() * w)
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Worst ratio `max_{i, α≠0} |v_{iα}| (1+|α|^{n+s}) / C`; the field lies
/// inside the envelope iff the result is at most 1.
pub fn decay_envelope_ratio(f: &ModeField, env: &DecayEnvelope) -> f64 {
    worst_envelope_mode(f, env).map_or(0.0, |(_, _, r)| r)
}

/// Component, mode and ratio of the worst envelope violation over `α ≠ 0`.
pub fn worst_envelope_mode(f: &ModeField, env: &DecayEnvelope) -> Option<(usize, MultiIndex, f64)> {
    let geometry = f.geometry();
    let origin = geometry.origin();
    let weights: Vec<f64> = geometry.iter().map(|a| env.weight(&a)).collect();
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..f.n_components() {
        for (o, z) in f.component(i).iter().enumerate() {
            if o == origin {
                continue;
            }
            let a = z.norm();
            let r = if a == 0.0 {
                0.0
            } else {
                a * weights[o] / env.amplitude()
            };
            if worst.is_none_or(|(_, _, w)| r > w) {
                worst = Some((i, o, r));
            }
        }
    }
    worst.map(|(i, o, r)| (i, geometry.index(o), r))
}

/// Mode-space divergence `Σ_i (2πi α_i / l) v_{iα}`.
pub fn divergence_mode(f: &ModeField, alpha: &MultiIndex, l: f64) -> Complex64 {
    alpha
        .entries()
        .iter()
        .enumerate()
        .map(|(i, &a)| Complex64::new(0.0, wavenumber(a, l)) * f.get(i, alpha))
        .sum()
}

/// `max_α |divergence_mode(f, α)|`.
pub fn max_divergence(f: &ModeField, l: f64) -> f64 {
    f.geometry()
        .iter()
        .map(|a| divergence_mode(f, &a, l).norm())
        .fold(0.0, f64::max)
}

/// Kinetic energy density `½ Σ_{i,α} |v_{iα}|²` (Parseval, per unit volume).
pub fn energy(f: &ModeField) -> f64 {
    0.5 * f.coefficients().iter().map(|z| z.norm_sqr()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lattice_enumeration_examples() {
        assert_eq!(iter_lattice(0, 2), vec![MultiIndex::new(&[0, 0])]);
        let one_d: Vec<i64> = iter_lattice(1, 1).iter().map(|a| a.entries()[0]).collect();
        assert_eq!(one_d, vec![-1, 0, 1]);
        let two_d = iter_lattice(1, 2);
        assert_eq!(two_d.len(), 9);
        assert_eq!(two_d[0], MultiIndex::new(&[-1, -1]));
        assert_eq!(two_d[1], MultiIndex::new(&[-1, 0]));
        assert_eq!(two_d[3], MultiIndex::new(&[0, -1]));
        assert_eq!(two_d[8], MultiIndex::new(&[1, 1]));
    }

    #[test]
    fn offsets_round_trip_and_mirror() {
        for n in 1..=3 {
            let b = ModeBox::new(n, 2);
            for o in 0..b.len() {
                let a = b.index(o);
                assert_eq!(b.offset(&a), Some(o));
                assert_eq!(b.index(b.mirror(o)), -a);
            }
            assert!(b.index(b.origin()).is_zero());
        }
    }

    #[test]
    fn symmetrize_averages_pairs() {
        let mut f = ModeField::zeros(2, 2);
        f.set(0, &MultiIndex::new(&[1, 0]), c(1.0, 2.0));
        f.set_real(false);
        let g = hermitian_symmetrize(&f);
        assert_eq!(g.get(0, &MultiIndex::new(&[1, 0])), c(0.5, 1.0));
        assert_eq!(g.get(0, &MultiIndex::new(&[-1, 0])), c(0.5, -1.0));
        assert_eq!(hermitian_symmetrize(&g), g);
        assert_eq!(g.hermitian_defect(), 0.0);
        let z = ModeField::zeros(2, 3);
        assert_eq!(hermitian_symmetrize(&z), z);
    }

    #[test]
    fn sobolev_norm_examples() {
        let mut f = ModeField::zeros(2, 2);
        assert_eq!(sobolev_norm(&f, 1.0), 0.0);
        f.set(0, &MultiIndex::new(&[1, 0]), c(1.0, 0.0));
        assert_eq!(sobolev_norm(&f, 0.0), 1.0);
        let g = hermitian_symmetrize(&f);
        // the pair halves each entry: 2 * 0.25 = 0.5
        assert!((sobolev_norm(&g, 0.0) - 0.5f64.sqrt()).abs() < 1e-15);
        f.set(0, &MultiIndex::new(&[-1, 0]), c(1.0, 0.0));
        assert!((sobolev_norm(&f, 0.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn envelope_ratio_examples() {
        let env = DecayEnvelope::new(1.0, 1.5, 2).unwrap();
        let mut f = ModeField::zeros(2, 3);
        assert_eq!(decay_envelope_ratio(&f, &env), 0.0);
        f.set(0, &MultiIndex::new(&[2, 0]), c(0.1, 0.0));
        let expected = 0.1 * (1.0 + 2f64.powf(3.5));
        assert!((decay_envelope_ratio(&f, &env) - expected).abs() < 1e-14);

        let env = DecayEnvelope::new(0.7, 2.0, 2).unwrap();
        let mut g = ModeField::zeros(2, 3);
        for a in g.geometry().clone().iter().filter(|a| !a.is_zero()) {
            g.set(0, &a, c(env.bound(&a), 0.0));
        }
        assert!((decay_envelope_ratio(&g, &env) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn divergence_examples() {
        let mut f = ModeField::zeros(2, 2);
        let a = MultiIndex::new(&[0, 1]);
        assert_eq!(divergence_mode(&f, &a, 1.0), c(0.0, 0.0));
        f.set(0, &a, c(0.3, -0.2));
        assert_eq!(divergence_mode(&f, &a, 1.0).norm(), 0.0);
        let b = MultiIndex::new(&[1, 1]);
        f.set(0, &b, c(1.0, 0.0));
        f.set(1, &b, c(1.0, 0.0));
        let d = divergence_mode(&f, &b, 2.0);
        assert!((d - c(0.0, 2.0 * PI / 2.0 * 2.0)).norm() < 1e-14);
    }

    fn arb_field() -> impl Strategy<Value = ModeField> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * 25).prop_map(|v| {
            let data = v.into_iter().map(|(a, b)| c(a, b)).collect();
            ModeField::from_coefficients(2, 2, false, data).unwrap()
        })
    }

    proptest! {
        #[test]
        fn lattice_count_and_uniqueness(k in 0usize..5, n in 1usize..=3) {
            let all = iter_lattice(k, n);
            prop_assert_eq!(all.len(), (2 * k + 1).pow(n as u32));
            let set: std::collections::HashSet<_> = all.iter().copied().collect();
            prop_assert_eq!(set.len(), all.len());
        }

        #[test]
        fn symmetrize_idempotent_and_commutes_with_scaling(f in arb_field(), s in 0.1f64..10.0) {
            let g = hermitian_symmetrize(&f);
            prop_assert_eq!(&hermitian_symmetrize(&g), &g);
            let a = hermitian_symmetrize(&f.scaled(s));
            let b = g.scaled(s);
            prop_assert!(a.max_distance(&b) <= 1e-14 * (1.0 + b.max_abs()));
        }

        #[test]
        fn sobolev_norm_monotone_in_order(f in arb_field(), m1 in 0.0f64..3.0, dm in 0.0f64..3.0) {
            prop_assert!(sobolev_norm(&f, m1) <= sobolev_norm(&f, m1 + dm) * (1.0 + 1e-15));
        }

        #[test]
        fn envelope_ratio_homogeneous(f in arb_field(), s in 0.01f64..100.0) {
            let env = DecayEnvelope::new(0.5, 1.5, 2).unwrap();
            let r = decay_envelope_ratio(&f, &env);
            let rs = decay_envelope_ratio(&f.scaled(s), &env);
            prop_assert!((rs - s * r).abs() <= 1e-13 * (1.0 + s * r));
        }
    }
}
