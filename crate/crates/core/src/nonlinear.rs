//! Right-hand side of the truncated mode system.
//!
//! For every component `i` and mode `α` in the box,
//!
//! ```text
//! dv_{iα}/dt = -ν |k_α|² v_{iα}
//!              - Σ_j Σ_γ (2πi γ_j / l) v_{j(α-γ)} v_{iγ}                 (Burgers)
//!              + (2πi α_i / l) 1_{α≠0} Q_α / Σ_m 4π² α_m²                 (Leray)
//! Q_α = Σ_{j,k} Σ_γ 4π² γ_k (α_j - γ_j) v_{jγ} v_{k(α-γ)}
//! ```
//!
//! with `|k_α|² = Σ_j 4π² α_j² / l²`. Sums over `γ` keep only triads where
//! both `γ` and `α - γ` lie in the box (sharp Galerkin truncation). `Q_α` is
//! the transform of `-l² Σ_{j,k} ∂_k v_j ∂_j v_k`, the source of the pressure
//! Poisson equation, so `Σ_i α_i (Burgers + Leray)_{iα}` vanishes for
//! divergence-free fields.
//!
//! The per-mode functions below evaluate these sums literally and are meant
//! for inspection and testing; [`NonlinearEvaluator`] computes all modes at
//! once, either by direct summation or by zero-padded FFT products.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{ConvolutionMethod, SimConfig};
use crate::lattice::{symmetrize_in_place, wavenumber, wavenumber_sq, ModeBox, ModeField, MultiIndex};
use crate::spectral::SpectralGrid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Box size above which [`ConvolutionMethod::Auto`] switches to FFTs.
const AUTO_DIRECT_MAX_MODES: usize = 9;

fn four_pi_sq_norm(alpha: &MultiIndex) -> f64 {
    4.0 * PI * PI * alpha.norm_sq() as f64
}

/// Pairs `(γ, α-γ)` with both members in the box.
fn triads(geometry: &ModeBox, alpha: MultiIndex) -> impl Iterator<Item = (MultiIndex, MultiIndex)> + '_ {
    geometry.iter().filter_map(move |g| {
        let b = alpha - g;
        geometry.contains(&b).then_some((g, b))
    })
}

/// Truncated Burgers term `-Σ_j Σ_γ (2πi γ_j / l) v_{j(α-γ)} v_{iγ}`.
pub fn burgers_mode(f: &ModeField, i: usize, alpha: &MultiIndex, l: f64) -> Complex64 {
    let n = f.n_components();
    let mut acc = ZERO;
    for (g, b) in triads(f.geometry(), *alpha) {
        for j in 0..n {
            let grad = Complex64::new(0.0, 2.0 * PI * g.entries()[j] as f64 / l);
            acc += grad * f.get(j, &b) * f.get(i, &g);
        }
    }
    -acc
}

/// `Q_α = Σ_{j,k} Σ_γ 4π² γ_k (α_j - γ_j) v_{jγ} v_{k(α-γ)}`.
fn pressure_source(f: &ModeField, alpha: &MultiIndex) -> Complex64 {
    let n = f.n_components();
    let mut acc = ZERO;
    for (g, b) in triads(f.geometry(), *alpha) {
        for j in 0..n {
            for k in 0..n {
                let w = 4.0 * PI * PI * g.entries()[k] as f64 * b.entries()[j] as f64;
                if w != 0.0 {
                    acc += f.get(j, &g) * f.get(k, &b) * w;
                }
            }
        }
    }
    acc
}

/// Pressure mode `p_α = -1_{α≠0} Q_α / Σ_i 4π² α_i²`.
pub fn pressure_mode(f: &ModeField, alpha: &MultiIndex) -> Complex64 {
    if alpha.is_zero() {
        return ZERO;
    }
    -pressure_source(f, alpha) / four_pi_sq_norm(alpha)
}

/// Leray term `(2πi α_i / l) 1_{α≠0} Q_α / Σ_m 4π² α_m²`, i.e. `-(2πi α_i/l) p_α`.
pub fn leray_mode(f: &ModeField, i: usize, alpha: &MultiIndex, l: f64) -> Complex64 {
    if alpha.is_zero() {
        return ZERO;
    }
    let grad = Complex64::new(0.0, 2.0 * PI * alpha.entries()[i] as f64 / l);
    grad * pressure_source(f, alpha) / four_pi_sq_norm(alpha)
}

/// Entry `e_{ijαγ}` of the Euler-term matrix, so that
/// `Σ_j Σ_γ e_{ijαγ} v_{jγ}` equals Burgers plus Leray at `(i, α)`.
pub fn euler_matrix_entry(
    f: &ModeField,
    i: usize,
    j: usize,
    alpha: &MultiIndex,
    gamma: &MultiIndex,
    l: f64,
) -> Complex64 {
    let geometry = f.geometry();
    let b = *alpha - *gamma;
    if !geometry.contains(gamma) || !geometry.contains(&b) {
        return ZERO;
    }
    let n = f.n_components();
    let transport = -Complex64::new(0.0, 2.0 * PI * b.entries()[j] as f64 / l) * f.get(i, &b);
    if alpha.is_zero() {
        return transport;
    }
    let mut s = ZERO;
    for k in 0..n {
        s += f.get(k, &b) * gamma.entries()[k] as f64;
    }
    let grad = Complex64::new(0.0, 2.0 * PI * alpha.entries()[i] as f64 / l);
    transport + grad * s * (4.0 * PI * PI * b.entries()[j] as f64) / four_pi_sq_norm(alpha)
}

/// Full time derivative `dv_{iα}/dt`, including the scaling multipliers.
pub fn rhs_mode(f: &ModeField, i: usize, alpha: &MultiIndex, cfg: &SimConfig) -> Complex64 {
    let (visc, nonlin) = cfg.scaling.coefficients();
    let rate = visc * cfg.nu * wavenumber_sq(alpha, cfg.period);
    let euler = burgers_mode(f, i, alpha, cfg.period) + leray_mode(f, i, alpha, cfg.period);
    -f.get(i, alpha) * rate + euler * nonlin
}

/// Burgers and Leray terms of every mode.
#[derive(Clone, Debug)]
pub struct NonlinearParts {
    pub burgers: ModeField,
    pub leray: ModeField,
}

impl NonlinearParts {
    /// Burgers plus Leray, the contraction `Σ_j Σ_γ e_{ijαγ} v_{jγ}`.
    pub fn total(&self) -> ModeField {
        let mut out = self.burgers.clone();
        for (o, l) in out.coefficients_mut().iter_mut().zip(self.leray.coefficients()) {
            *o += l;
        }
        out
    }
}

enum Backend {
    Direct,
    Spectral(Box<SpectralState>),
}

/// Evaluates the quadratic terms of all modes of fields with a fixed box.
pub struct NonlinearEvaluator {
    geometry: ModeBox,
    backend: Backend,
}

impl NonlinearEvaluator {
    pub fn new(geometry: ModeBox, method: ConvolutionMethod) -> Self {
        let spectral = match method {
            ConvolutionMethod::Direct => false,
            ConvolutionMethod::Spectral => true,
            ConvolutionMethod::Auto => geometry.len() > AUTO_DIRECT_MAX_MODES,
        };
        let backend = if spectral {
            Backend::Spectral(Box::new(SpectralState::new(geometry)))
        } else {
            Backend::Direct
        };
        NonlinearEvaluator { geometry, backend }
    }

    pub fn for_config(cfg: &SimConfig) -> Self {
        Self::new(ModeBox::new(cfg.n, cfg.cutoff), cfg.method)
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.backend, Backend::Spectral(_))
    }

    pub fn parts(&mut self, f: &ModeField, l: f64) -> NonlinearParts {
        assert_eq!(*f.geometry(), self.geometry, "field does not match evaluator box");
        let n = f.n_components();
        // ∂_j v_i in mode space
        let mut grads = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let comp: Vec<Complex64> = f
                    .component(i)
                    .iter()
                    .zip(self.geometry.iter())
                    .map(|(v, a)| v * Complex64::new(0.0, wavenumber(a.entries()[j], l)))
                    .collect();
                grads.push(comp);
            }
        }
        let (burgers_data, source) = match &mut self.backend {
            Backend::Direct => direct_products(f, &grads),
            Backend::Spectral(state) => state.products(f, &grads),
        };
        let mut burgers =
            ModeField::from_coefficients(n, f.cutoff(), f.is_real(), burgers_data).expect("shape fixed by evaluator");
        let mut leray = ModeField::zeros(n, f.cutoff());
        let origin = self.geometry.origin();
        for i in 0..n {
            let comp = leray.component_mut(i);
            for (o, a) in self.geometry.iter().enumerate() {
                if o == origin {
                    continue;
                }
                let ki = wavenumber(a.entries()[i], l);
                comp[o] = Complex64::new(0.0, -ki) * source[o] / wavenumber_sq(&a, l);
            }
        }
        if f.is_real() {
            symmetrize_in_place(&mut burgers);
            symmetrize_in_place(&mut leray);
        } else {
            leray.set_real(false);
        }
        NonlinearParts { burgers, leray }
    }

    /// Burgers plus Leray for every mode.
    pub fn euler_terms(&mut self, f: &ModeField, l: f64) -> ModeField {
        self.parts(f, l).total()
    }
}

/// Returns (component-major `-Σ_j v_j ∂_j v_i` modes, modes of `Σ_{j,k} ∂_k v_j ∂_j v_k`).
fn direct_products(f: &ModeField, grads: &[Vec<Complex64>]) -> (Vec<Complex64>, Vec<Complex64>) {
    let geometry = *f.geometry();
    let n = geometry.dim();
    let k = geometry.cutoff() as i64;
    let side = geometry.side();
    let len = geometry.len();
    let per_mode: Vec<(Vec<Complex64>, Complex64)> = (0..len)
        .into_par_iter()
        .map(|o| {
            let alpha = geometry.index(o);
            let mut lo = [0i64; 3];
            let mut hi = [0i64; 3];
            for d in 0..n {
                let a = alpha.entries()[d];
                lo[d] = (a - k).max(-k);
                hi[d] = (a + k).min(k);
            }
            let mut burgers = vec![ZERO; n];
            let mut source = ZERO;
            let mut g = lo;
            'outer: loop {
                let mut og = 0usize;
                let mut ob = 0usize;
                for (gd, ad) in g.iter().zip(alpha.entries()) {
                    og = og * side + (gd + k) as usize;
                    ob = ob * side + (ad - gd + k) as usize;
                }
                for (i, b) in burgers.iter_mut().enumerate() {
                    for j in 0..n {
                        *b += f.component(j)[ob] * grads[i * n + j][og];
                    }
                }
                for j in 0..n {
                    for kk in 0..n {
                        source += grads[j * n + kk][og] * grads[kk * n + j][ob];
                    }
                }
                for d in (0..n).rev() {
                    if g[d] < hi[d] {
                        g[d] += 1;
                        continue 'outer;
                    }
                    g[d] = lo[d];
                }
                break;
            }
            (burgers.into_iter().map(|b| -b).collect(), source)
        })
        .collect();
    let mut burgers = vec![ZERO; n * len];
    let mut source = vec![ZERO; len];
    for (o, (b, s)) in per_mode.into_iter().enumerate() {
        for i in 0..n {
            burgers[i * len + o] = b[i];
        }
        source[o] = s;
    }
    (burgers, source)
}

struct SpectralState {
    grid: SpectralGrid,
    velocity: Vec<Vec<Complex64>>,
    gradient: Vec<Vec<Complex64>>,
    work: Vec<Complex64>,
}

impl SpectralState {
    fn new(geometry: ModeBox) -> Self {
        let grid = SpectralGrid::new(geometry);
        let n = geometry.dim();
        let total = grid.total();
        SpectralState {
            grid,
            velocity: vec![vec![ZERO; total]; n],
            gradient: vec![vec![ZERO; total]; n * n],
            work: vec![ZERO; total],
        }
    }

    fn products(&mut self, f: &ModeField, grads: &[Vec<Complex64>]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = f.n_components();
        let len = f.geometry().len();
        for j in 0..n {
            self.grid
                .synthesize(f.component(j).iter().copied(), &mut self.velocity[j]);
        }
        for (idx, g) in grads.iter().enumerate() {
            self.grid.synthesize(g.iter().copied(), &mut self.gradient[idx]);
        }
        let mut burgers = vec![ZERO; n * len];
        for i in 0..n {
            for (x, w) in self.work.iter_mut().enumerate() {
                let mut acc = ZERO;
                for j in 0..n {
                    acc += self.velocity[j][x] * self.gradient[i * n + j][x];
                }
                *w = -acc;
            }
            self.grid.analyze(&mut self.work, &mut burgers[i * len..(i + 1) * len]);
        }
        for (x, w) in self.work.iter_mut().enumerate() {
            let mut acc = ZERO;
            for j in 0..n {
                for k in 0..n {
                    acc += self.gradient[j * n + k][x] * self.gradient[k * n + j][x];
                }
            }
            *w = acc;
        }
        let mut source = vec![ZERO; len];
        self.grid.analyze(&mut self.work, &mut source);
        (burgers, source)
    }
}

/// Burgers and Leray terms of all modes with a one-off evaluator.
pub fn nonlinear_parts(f: &ModeField, l: f64, method: ConvolutionMethod) -> NonlinearParts {
    NonlinearEvaluator::new(*f.geometry(), method).parts(f, l)
}

/// Full right-hand side of every mode with a one-off evaluator.
pub fn rhs_field(f: &ModeField, cfg: &SimConfig) -> ModeField {
    let mut eval = NonlinearEvaluator::for_config(cfg);
    rhs_with(&mut eval, f, cfg)
}

pub(crate) fn rhs_with(eval: &mut NonlinearEvaluator, f: &ModeField, cfg: &SimConfig) -> ModeField {
    let (visc, nonlin) = cfg.scaling.coefficients();
    let mut out = eval.euler_terms(f, cfg.period);
    let geometry = *f.geometry();
    let rates: Vec<f64> = geometry
        .iter()
        .map(|a| visc * cfg.nu * wavenumber_sq(&a, cfg.period))
        .collect();
    for i in 0..f.n_components() {
        let v = f.component(i);
        for ((o, e), r) in out.component_mut(i).iter_mut().zip(v).zip(&rates) {
            *o = -e * *r + *o * nonlin;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::DecayEnvelope;
    use crate::data::{make_envelope_data, EnvelopeMode};
    use crate::lattice::divergence_mode;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn heat_pair(k: usize) -> ModeField {
        let mut f = ModeField::zeros(2, k);
        f.set_pair(0, &MultiIndex::new(&[0, 1]), c(0.7, -0.2));
        f
    }

    fn random_field(k: usize, seed: u64) -> ModeField {
        let env = DecayEnvelope::new(1.0, 2.0, 2).unwrap();
        make_envelope_data(&env, seed, k, EnvelopeMode::RandomPhase)
    }

    #[test]
    fn zero_field_gives_zero_terms() {
        let f = ModeField::zeros(2, 3);
        let a = MultiIndex::new(&[1, -1]);
        assert_eq!(burgers_mode(&f, 0, &a, 1.0), ZERO);
        assert_eq!(pressure_mode(&f, &a), ZERO);
        assert_eq!(leray_mode(&f, 1, &a, 1.0), ZERO);
        assert_eq!(euler_matrix_entry(&f, 0, 1, &a, &MultiIndex::new(&[0, 1]), 1.0), ZERO);
        let cfg = SimConfig::new(2, 1.0, 1.0, 3, 1e-3);
        assert_eq!(rhs_mode(&f, 0, &a, &cfg), ZERO);
        for method in [ConvolutionMethod::Direct, ConvolutionMethod::Spectral] {
            let p = nonlinear_parts(&f, 1.0, method);
            assert_eq!(p.total().max_abs(), 0.0);
        }
    }

    #[test]
    fn shear_pair_has_no_nonlinear_terms() {
        let f = heat_pair(3);
        for a in f.geometry().iter() {
            for i in 0..2 {
                assert_eq!(burgers_mode(&f, i, &a, 1.0).norm(), 0.0);
                assert_eq!(leray_mode(&f, i, &a, 1.0).norm(), 0.0);
            }
            assert_eq!(pressure_mode(&f, &a).norm(), 0.0);
        }
        for method in [ConvolutionMethod::Direct, ConvolutionMethod::Spectral] {
            assert_eq!(nonlinear_parts(&f, 1.0, method).total().max_abs(), 0.0);
        }
    }

    #[test]
    fn pressure_and_leray_vanish_at_origin() {
        let f = random_field(3, 4);
        let z = MultiIndex::zero(2);
        assert_eq!(pressure_mode(&f, &z), ZERO);
        assert_eq!(leray_mode(&f, 0, &z, 1.0), ZERO);
    }

    #[test]
    fn leray_is_gradient_of_pressure() {
        let f = random_field(3, 9);
        let l = 1.7;
        for a in f.geometry().iter().filter(|a| !a.is_zero()) {
            for i in 0..2 {
                let expected = -Complex64::new(0.0, 2.0 * PI * a.entries()[i] as f64 / l) * pressure_mode(&f, &a);
                assert!((leray_mode(&f, i, &a, l) - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn heat_pair_rhs_is_pure_diffusion() {
        let f = heat_pair(3);
        let cfg = SimConfig::new(2, 1.0, 1.0, 3, 1e-3);
        let a = MultiIndex::new(&[0, 1]);
        let expected = f.get(0, &a) * (-4.0 * PI * PI);
        assert!((rhs_mode(&f, 0, &a, &cfg) - expected).norm() < 1e-13);
        for b in f.geometry().iter() {
            if b != a && b != -a {
                assert_eq!(rhs_mode(&f, 0, &b, &cfg).norm(), 0.0);
                assert_eq!(rhs_mode(&f, 1, &b, &cfg).norm(), 0.0);
            }
        }
    }

    #[test]
    fn euler_matrix_contraction_matches_terms() {
        let f = random_field(2, 11);
        let l = 1.0;
        let parts = nonlinear_parts(&f, l, ConvolutionMethod::Direct).total();
        for a in f.geometry().iter() {
            for i in 0..2 {
                let mut acc = ZERO;
                for j in 0..2 {
                    for g in f.geometry().iter() {
                        acc += euler_matrix_entry(&f, i, j, &a, &g, l) * f.get(j, &g);
                    }
                }
                let direct = burgers_mode(&f, i, &a, l) + leray_mode(&f, i, &a, l);
                assert!((acc - direct).norm() < 1e-11, "{a}: {acc} vs {direct}");
                assert!((acc - parts.get(i, &a)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn diagonal_transport_entry_vanishes_for_zero_mean() {
        let f = random_field(2, 3);
        let a = MultiIndex::new(&[1, 2]);
        for j in 0..2 {
            let e = euler_matrix_entry(&f, 0, j, &a, &a, 1.0);
            // transport part is zero; the Leray part sees v_{k,0} = 0 too
            assert!(e.norm() < 1e-15);
        }
    }

    #[test]
    fn evaluator_paths_agree_with_per_mode_sums() {
        for (n, k) in [(1usize, 4usize), (2, 3), (3, 2)] {
            let data: Vec<Complex64> = (0..n * (2 * k + 1).pow(n as u32))
                .map(|x| {
                    let t = x as f64;
                    c((t * 0.37).sin(), (t * 0.91).cos() * 0.5)
                })
                .collect();
            let f = ModeField::from_coefficients(n, k, false, data).unwrap();
            let l = 1.3;
            let direct = nonlinear_parts(&f, l, ConvolutionMethod::Direct);
            let spectral = nonlinear_parts(&f, l, ConvolutionMethod::Spectral);
            let scale = direct.total().max_abs();
            assert!(direct.burgers.max_distance(&spectral.burgers) <= 1e-10 * scale);
            assert!(direct.leray.max_distance(&spectral.leray) <= 1e-10 * scale);
            for a in f.geometry().iter() {
                for i in 0..n {
                    let b = burgers_mode(&f, i, &a, l);
                    assert!((b - direct.burgers.get(i, &a)).norm() <= 1e-10 * scale);
                    let r = leray_mode(&f, i, &a, l);
                    assert!((r - direct.leray.get(i, &a)).norm() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn divergence_and_energy_neutrality() {
        for seed in 0..5 {
            let f = random_field(4, seed);
            let total = nonlinear_parts(&f, 1.0, ConvolutionMethod::Spectral).total();
            let scale = total.max_abs() * 4.0;
            for a in f.geometry().iter().filter(|a| !a.is_zero()) {
                assert!(divergence_mode(&total, &a, 1.0).norm() <= 1e-10 * scale * 2.0 * PI);
            }
            let work: f64 = f
                .coefficients()
                .iter()
                .zip(total.coefficients())
                .map(|(v, e)| (v.conj() * e).re)
                .sum();
            let energy_scale: f64 = f
                .coefficients()
                .iter()
                .zip(total.coefficients())
                .map(|(v, e)| v.norm() * e.norm())
                .sum();
            assert!(work.abs() <= 1e-9 * energy_scale);
        }
    }

    #[test]
    fn reality_and_bilinearity() {
        let f = random_field(3, 21);
        let g = nonlinear_parts(&f, 1.0, ConvolutionMethod::Direct).total();
        assert_eq!(g.hermitian_defect(), 0.0);
        let cfg = SimConfig::new(2, 1.0, 0.3, 3, 1e-3);
        let r = rhs_field(&f, &cfg);
        assert_eq!(r.hermitian_defect(), 0.0);
        let g3 = nonlinear_parts(&f.scaled(3.0), 1.0, ConvolutionMethod::Direct).total();
        assert!(g3.max_distance(&g.scaled(9.0)) <= 1e-12 * g3.max_abs());
    }

    #[test]
    fn rhs_field_matches_rhs_mode() {
        let f = random_field(3, 5);
        let mut cfg = SimConfig::new(2, 0.8, 0.2, 3, 1e-3);
        cfg.scaling = crate::scaling::ScalingParams::spatial(1.5).unwrap();
        let r = rhs_field(&f, &cfg);
        for a in f.geometry().iter() {
            for i in 0..2 {
                assert!((r.get(i, &a) - rhs_mode(&f, i, &a, &cfg)).norm() < 1e-11);
            }
        }
    }
}
