//! Initial-data generators. All fields are Hermitian, divergence-free and
//! have zero mean.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::DecayEnvelope;
use crate::error::{Result, SimError};
use crate::lattice::{ModeBox, ModeField, MultiIndex};

/// How [`make_envelope_data`] picks mode directions and phases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeMode {
    /// Fixed quasi-periodic phases; the seed is ignored.
    #[default]
    Deterministic,
    /// Phases and directions drawn from a seeded ChaCha8 stream.
    RandomPhase,
}

/// Removes the component along `α`: `w - α (α·w)/|α|²`. Vectors that are
/// (numerically) parallel to `α` become exactly zero.
fn project(alpha: &MultiIndex, w: &mut [Complex64]) {
    let a = alpha.entries();
    let norm_sq = alpha.norm_sq() as f64;
    let before = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if norm_sq == 0.0 {
        w.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        return;
    }
    let dot: Complex64 = a.iter().zip(w.iter()).map(|(&ai, z)| z * ai as f64).sum();
    let coef = dot / norm_sq;
    for (z, &ai) in w.iter_mut().zip(a) {
        *z -= coef * ai as f64;
    }
    let after = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if after <= 1e-10 * before {
        w.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    }
}

fn deterministic_phase(i: usize, alpha: &MultiIndex) -> f64 {
    // irrational rotations keep neighbouring modes decorrelated
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    const SILVER: f64 = 0.414_213_562_373_095_1;
    let mut x = (i + 1) as f64 * GOLDEN;
    for (d, &a) in alpha.entries().iter().enumerate() {
        x += a as f64 * (d + 1) as f64 * SILVER + (a * a) as f64 * 0.1;
    }
    2.0 * PI * x.fract()
}

/// Writes `w` at `α` and `conj(w)` at `-α` for every component.
fn set_pair_vector(f: &mut ModeField, alpha: &MultiIndex, w: &[Complex64]) {
    for (i, z) in w.iter().enumerate() {
        f.set_pair(i, alpha, *z);
    }
}

/// Scales `w` so its largest component has modulus `target`, never above.
fn normalise(w: &mut [Complex64], target: f64, weight: f64, amplitude: f64) {
    let m = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return;
    }
    let scale = target / m;
    w.iter_mut().for_each(|z| *z *= scale);
    // rounding can push the ratio a hair above one
    while w.iter().map(|z| z.norm() * weight / amplitude).fold(0.0, f64::max) > 1.0 {
        w.iter_mut().for_each(|z| *z *= 1.0 - 4.0 * f64::EPSILON);
    }
}

/// Data at the envelope: every nonzero mode vector is divergence-free and
/// its largest component equals `C / (1 + |α|^{n+s})`.
pub fn make_envelope_data(env: &DecayEnvelope, seed: u64, k: usize, mode: EnvelopeMode) -> ModeField {
    let n = env.dim();
    let mut f = ModeField::zeros(n, k);
    if env.amplitude() == 0.0 {
        return f;
    }
    let geometry = ModeBox::new(n, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for o in 0..geometry.origin() {
        let alpha = geometry.index(o);
        let mut w: Vec<Complex64> = (0..n)
            .map(|i| match mode {
                EnvelopeMode::Deterministic => Complex64::from_polar(1.0, deterministic_phase(i, &alpha)),
                EnvelopeMode::RandomPhase => {
                    let r: f64 = rng.random_range(0.2..1.0);
                    let phi: f64 = rng.random_range(0.0..2.0 * PI);
                    Complex64::from_polar(r, phi)
                }
            })
            .collect();
        project(&alpha, &mut w);
        normalise(&mut w, env.bound(&alpha), env.weight(&alpha), env.amplitude());
        set_pair_vector(&mut f, &alpha, &w);
    }
    f
}

/// `|α|_1` even: the set where [`make_even_zero_data`] vanishes.
pub fn in_even_set(alpha: &MultiIndex) -> bool {
    alpha.l1_norm() % 2 == 0
}

/// Data vanishing on `{α : |α|_1 even}` with mode size `A / (1 + |α|)^p`
/// elsewhere; `p` defaults to `n/2 + 1.25`, just above the `h¹` threshold.
pub fn make_even_zero_data(n: usize, k: usize, amplitude: f64, power: Option<f64>) -> Result<ModeField> {
    if !(1..=3).contains(&n) {
        return Err(SimError::InvalidParameter(format!("dimension {n} not in 1..=3")));
    }
    if !amplitude.is_finite() {
        return Err(SimError::InvalidParameter("amplitude must be finite".into()));
    }
    let p = power.unwrap_or(n as f64 / 2.0 + 1.25);
    let mut f = ModeField::zeros(n, k);
    if amplitude == 0.0 {
        return Ok(f);
    }
    let geometry = ModeBox::new(n, k);
    for o in 0..geometry.origin() {
        let alpha = geometry.index(o);
        if in_even_set(&alpha) {
            continue;
        }
        let mut w: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, deterministic_phase(i, &alpha)))
            .collect();
        project(&alpha, &mut w);
        let m = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if m == 0.0 {
            continue;
        }
        let target = amplitude / (1.0 + alpha.norm()).powf(p);
        w.iter_mut().for_each(|z| *z *= target / m);
        set_pair_vector(&mut f, &alpha, &w);
    }
    Ok(f)
}

/// Modes of `v = (-A cos x sin y, A sin x cos y)` on the torus of period
/// `l = 2π`, where the Navier–Stokes solution decays as `e^{-2νt}`.
pub fn make_taylor_green(n: usize, k: usize, amplitude: f64) -> Result<ModeField> {
    if n != 2 {
        return Err(SimError::InvalidParameter(format!(
            "Taylor-Green data need n = 2, got {n}"
        )));
    }
    if k < 1 {
        return Err(SimError::InvalidParameter("Taylor-Green data need K >= 1".into()));
    }
    let mut f = ModeField::zeros(2, k);
    for a in [-1i64, 1] {
        for b in [-1i64, 1] {
            let alpha = MultiIndex::new(&[a, b]);
            f.set(0, &alpha, Complex64::new(0.0, amplitude * b as f64 / 4.0));
            f.set(1, &alpha, Complex64::new(0.0, -amplitude * a as f64 / 4.0));
        }
    }
    Ok(f)
}

/// Shear mode `v_1 = c` at `α = (0, 1, ...)` with its conjugate partner: a
/// divergence-free field on which the nonlinear terms vanish identically.
pub fn heat_pair(n: usize, k: usize, c: Complex64) -> Result<ModeField> {
    if !(2..=3).contains(&n) {
        return Err(SimError::InvalidParameter(format!(
            "heat pair needs n in 2..=3, got {n}"
        )));
    }
    let mut f = ModeField::zeros(n, k);
    let mut e = vec![0i64; n];
    e[1] = 1;
    f.set_pair(0, &MultiIndex::new(&e), c);
    Ok(f)
}
