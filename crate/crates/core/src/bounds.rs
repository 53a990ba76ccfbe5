//! Decay envelopes, the lattice-sum constants behind them, and the per-step
//! envelope certificate.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::lattice::{wavenumber_sq, ModeBox, ModeField, MultiIndex};

/// Growth slopes at or below this value count as bounded.
pub const BOUNDED_SLOPE: f64 = 0.1;

/// The bound `|v_{iα}| ≤ C / (1 + |α|^{n+s})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    amplitude: f64,
    s: f64,
    n: usize,
}

impl DecayEnvelope {
    /// Envelope with amplitude `C ≥ 0`, excess regularity `s` in dimension `n`.
    pub fn new(amplitude: f64, s: f64, n: usize) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(SimError::InvalidParameter(format!(
                "envelope amplitude C = {amplitude} must be finite and >= 0"
            )));
        }
        if !s.is_finite() {
            return Err(SimError::InvalidParameter(format!("envelope s = {s} must be finite")));
        }
        if !(1..=3).contains(&n) {
            return Err(SimError::InvalidParameter(format!(
                "envelope dimension {n} not in 1..=3"
            )));
        }
        if s <= 1.0 {
            log::warn!("envelope s = {s} <= 1: no certificate claim is made in this regime");
        }
        Ok(DecayEnvelope { amplitude, s, n })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn smoothness(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Decay exponent `n + s`.
    pub fn exponent(&self) -> f64 {
        self.n as f64 + self.s
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        Self::new(amplitude, self.s, self.n)
    }

    /// `1 + |α|^{n+s}`.
    pub fn weight(&self, alpha: &MultiIndex) -> f64 {
        self.weight_at(alpha.norm())
    }

    /// `1 + ρ^{n+s}` at Euclidean radius `ρ`.
    pub fn weight_at(&self, radius: f64) -> f64 {
        if radius == 0.0 {
            1.0
        } else {
            1.0 + radius.powf(self.exponent())
        }
    }

    /// `C / (1 + |α|^{n+s})`.
    pub fn bound(&self, alpha: &MultiIndex) -> f64 {
        self.amplitude / self.weight(alpha)
    }
}

/// A truncated lattice sum together with an upper bound for the omitted tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSum {
    pub partial: f64,
    pub tail: f64,
}

impl LatticeSum {
    /// Upper end of the bracket `[partial, partial + tail]`.
    pub fn upper(&self) -> f64 {
        self.partial + self.tail
    }
}

fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// Bound for `Σ_{|β|∞ > K} |β|^{-q}` in dimension `n` (needs `q > n`).
///
/// Each unit cube around such a `β` lies outside the ball of radius
/// `K + ½`, and `|β| ≥ |x| - √n/2` on it, so the sum is at most
/// `∫_{|x| ≥ K+½} (|x| - √n/2)^{-q} dx`.
fn power_tail(n: usize, q: f64, k: usize) -> f64 {
    let nf = n as f64;
    let r = k as f64 + 0.5;
    let h = nf.sqrt() / 2.0;
    if r <= h {
        return f64::INFINITY;
    }
    let inner = r - h;
    sphere_area(n) * (r / inner).powf(nf - 1.0) * inner.powf(nf - q) / (q - nf)
}

fn prefactor(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * PI * (nf + nf * nf)
}

/// Sums `term(β)` over `|β|∞ ≤ K` in a fixed order.
fn box_sum(n: usize, k: usize, term: impl Fn(&MultiIndex) -> f64 + Sync) -> f64 {
    let geometry = ModeBox::new(n, k);
    let side = geometry.side();
    let slab = geometry.len() / side;
    let partials: Vec<f64> = (0..side)
        .into_par_iter()
        .map(|first| {
            (first * slab..(first + 1) * slab)
                .map(|o| term(&geometry.index(o)))
                .sum()
        })
        .collect();
    partials.iter().sum()
}

/// The constant `c = 2π(n+n²) Σ_β 1/(1+|β|^{n/2+s})²`, summed over
/// `|β|∞ ≤ K_sum`, with a bound on the remaining tail.
pub fn elliptic_sum_constant(n: usize, s: f64, k_sum: usize) -> Result<LatticeSum> {
    if !(s > 0.0) {
        return Err(SimError::InvalidParameter(format!(
            "elliptic sum diverges for s = {s} <= 0"
        )));
    }
    lattice_sum_constant(n, n as f64 / 2.0 + s, k_sum)
}

/// `2π(n+n²) Σ_β 1/(1+|β|^p)²` for a general exponent `p > n/2`.
///
/// With `p = n + s` this is the constant matching the data decay used by
/// the step estimates, as opposed to [`elliptic_sum_constant`].
pub fn lattice_sum_constant(n: usize, p: f64, k_sum: usize) -> Result<LatticeSum> {
    if !(1..=3).contains(&n) {
        return Err(SimError::InvalidParameter(format!("dimension {n} not in 1..=3")));
    }
    if !(2.0 * p > n as f64) {
        return Err(SimError::InvalidParameter(format!(
            "lattice sum diverges for exponent {p} <= n/2"
        )));
    }
    let partial = box_sum(n, k_sum, |b| {
        let w = if b.is_zero() { 1.0 } else { 1.0 + b.norm().powf(p) };
        1.0 / (w * w)
    });
    let pre = prefactor(n);
    Ok(LatticeSum {
        partial: pre * partial,
        tail: pre * power_tail(n, 2.0 * p, k_sum),
    })
}

/// One normalisation exponent of the convolution check and its verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentVerdict {
    pub label: String,
    pub exponent: f64,
    /// `sup_α lhs(α) (1+|α|^e) / C²` over the scanned range.
    pub empirical_c: f64,
    /// Least-squares slope of log(max ratio) against log|α| on `[R/4, R]`.
    pub growth_slope: f64,
    pub bounded: bool,
    /// Modes whose normalised ratio exceeds the reference constant.
    pub exceeds_reference: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionRow {
    pub alpha: Vec<i64>,
    pub radius: f64,
    pub lhs: f64,
    /// Normalised ratios, one per exponent in table order.
    pub ratios: Vec<f64>,
}

/// Result of [`convolution_bound_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionTable {
    pub n: usize,
    pub s: f64,
    pub amplitude: f64,
    pub k_sum: usize,
    pub alpha_max: usize,
    pub reference_c: f64,
    pub rows: Vec<ConvolutionRow>,
    pub verdicts: Vec<ExponentVerdict>,
}

impl ConvolutionTable {
    pub fn verdict(&self, label: &str) -> Option<&ExponentVerdict> {
        self.verdicts.iter().find(|v| v.label == label)
    }
}

/// The exponents checked against the convolution sum, with labels.
pub fn convolution_exponents(n: usize, s: f64) -> Vec<(String, f64)> {
    let nf = n as f64;
    vec![
        ("n+2s-1".to_string(), nf + 2.0 * s - 1.0),
        ("n+2s-2".to_string(), nf + 2.0 * s - 2.0),
        ("n+s-1".to_string(), nf + s - 1.0),
    ]
}

/// `1/(1+|γ|^{n+s})` over a box, for table lookups.
struct UnitEnvelope {
    geometry: ModeBox,
    values: Vec<f64>,
}

impl UnitEnvelope {
    fn new(env: &DecayEnvelope, k: usize) -> Self {
        let geometry = ModeBox::new(env.dim(), k);
        let values = geometry.iter().map(|g| 1.0 / env.weight(&g)).collect();
        UnitEnvelope { geometry, values }
    }

    fn at(&self, g: &MultiIndex) -> f64 {
        self.values[self.geometry.offset(g).expect("lookup inside table")]
    }
}

fn unit_lhs(env: &DecayEnvelope, k_sum: usize, diff: &UnitEnvelope, alpha: &MultiIndex) -> f64 {
    let beta_box = ModeBox::new(env.dim(), k_sum);
    let pre = prefactor(env.dim());
    let sum: f64 = beta_box
        .iter()
        .map(|b| {
            if b.is_zero() {
                return 0.0;
            }
            b.norm() * diff.at(&(*alpha - b)) / env.weight(&b)
        })
        .sum();
    pre * sum
}

/// `lhs(α) = 2π(n+n²) Σ_{|β|∞ ≤ K_sum} |β| C/(1+|α-β|^{n+s}) C/(1+|β|^{n+s})`.
pub fn convolution_lhs(env: &DecayEnvelope, k_sum: usize, alpha: &MultiIndex) -> f64 {
    let reach = k_sum + alpha.max_norm() as usize;
    let diff = UnitEnvelope::new(env, reach);
    env.amplitude() * env.amplitude() * unit_lhs(env, k_sum, &diff, alpha)
}

/// Evaluates the convolution inequality for all `α` with `|α| ≤ alpha_max`.
///
/// The sum is invariant under permutations and sign changes of `α`, so rows
/// are produced for `α_1 ≥ α_2 ≥ … ≥ 0` only. For each exponent `e` of
/// [`convolution_exponents`] the normalised ratio `lhs(α)(1+|α|^e)/C²` is
/// reported; its supremum is the smallest constant admissible on the range,
/// and `reference_c` (usually the elliptic-sum constant) is compared against
/// it.
pub fn convolution_bound_check(
    env: &DecayEnvelope,
    k_sum: usize,
    alpha_max: usize,
    reference_c: f64,
) -> ConvolutionTable {
    let n = env.dim();
    let exps = convolution_exponents(n, env.smoothness());
    let diff = UnitEnvelope::new(env, k_sum + alpha_max);
    let r2 = (alpha_max * alpha_max) as i64;
    let alphas: Vec<MultiIndex> = ModeBox::new(n, alpha_max)
        .iter()
        .filter(|a| {
            let e = a.entries();
            e.iter().all(|&x| x >= 0) && e.windows(2).all(|w| w[0] >= w[1]) && a.norm_sq() <= r2
        })
        .collect();
    let c2 = env.amplitude() * env.amplitude();
    let rows: Vec<ConvolutionRow> = alphas
        .par_iter()
        .map(|a| {
            let unit = unit_lhs(env, k_sum, &diff, a);
            let radius = a.norm();
            let ratios = exps
                .iter()
                .map(|(_, e)| {
                    let w = if radius == 0.0 { 1.0 } else { 1.0 + radius.powf(*e) };
                    unit * w
                })
                .collect();
            ConvolutionRow {
                alpha: a.entries().to_vec(),
                radius,
                lhs: c2 * unit,
                ratios,
            }
        })
        .collect();

    let verdicts = exps
        .iter()
        .enumerate()
        .map(|(idx, (label, e))| {
            let empirical_c = rows.iter().map(|r| r.ratios[idx]).fold(0.0, f64::max);
            let exceeds_reference = rows.iter().filter(|r| r.ratios[idx] > reference_c).count();
            let growth_slope = radial_growth_slope(&rows, idx, alpha_max as f64);
            ExponentVerdict {
                label: label.clone(),
                exponent: *e,
                empirical_c,
                growth_slope,
                bounded: growth_slope <= BOUNDED_SLOPE,
                exceeds_reference,
            }
        })
        .collect();

    ConvolutionTable {
        n,
        s: env.smoothness(),
        amplitude: env.amplitude(),
        k_sum,
        alpha_max,
        reference_c,
        rows,
        verdicts,
    }
}

/// Log-log slope of the per-radius maximum ratio over `|α| ∈ [R/4, R]`.
fn radial_growth_slope(rows: &[ConvolutionRow], idx: usize, r_max: f64) -> f64 {
    let mut per_radius: Vec<(f64, f64)> = Vec::new();
    for row in rows {
        if row.radius < (r_max / 4.0).max(1.0) {
            continue;
        }
        match per_radius.iter_mut().find(|(r, _)| (*r - row.radius).abs() < 1e-12) {
            Some(entry) => entry.1 = entry.1.max(row.ratios[idx]),
            None => per_radius.push((row.radius, row.ratios[idx])),
        }
    }
    let pts: Vec<(f64, f64)> = per_radius
        .into_iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Inputs of [`step_growth_budget`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetParams {
    /// Convolution constant `c`.
    pub c: f64,
    pub nu: f64,
    pub dt: f64,
    pub visc_factor: f64,
    pub nonlin_factor: f64,
    pub period: f64,
}

impl BudgetParams {
    /// Parameters of a simulation with convolution constant `c`.
    pub fn from_config(cfg: &SimConfig, c: f64) -> Self {
        let (visc_factor, nonlin_factor) = cfg.scaling.coefficients();
        BudgetParams {
            c,
            nu: cfg.nu,
            dt: cfg.dt,
            visc_factor,
            nonlin_factor,
            period: cfg.period,
        }
    }
}

/// Growth minus damping of one mode over one step,
/// `nf c C²/(1+|α|^{n+2s-1}) δt - visc ν |k_α|² a δt`, where `a` is the
/// mode amplitude. A nonpositive value means damping wins at amplitude `a`.
pub fn step_growth_budget(alpha: &MultiIndex, env: &DecayEnvelope, amplitude: f64, p: &BudgetParams) -> Result<f64> {
    if alpha.is_zero() {
        return Err(SimError::InvalidParameter(
            "growth budget undefined at alpha = 0".into(),
        ));
    }
    let e = env.dim() as f64 + 2.0 * env.smoothness() - 1.0;
    let c2 = env.amplitude() * env.amplitude();
    let growth = p.nonlin_factor * p.c * c2 / (1.0 + alpha.norm().powf(e)) * p.dt;
    let damping = p.visc_factor * p.nu * wavenumber_sq(alpha, p.period) * amplitude * p.dt;
    Ok(growth - damping)
}

/// Outcome of one certified step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub pass: bool,
    pub before_ratio: f64,
    pub worst_ratio: f64,
    pub worst_component: usize,
    pub worst_mode: Vec<i64>,
    /// Modes with `|v| ≤ (C/2)/(1+|α|^{n+s})` before the step.
    pub case_a: usize,
    /// Remaining modes, where damping has to dominate.
    pub case_b: usize,
    /// Largest growth budget among case-b modes (`-inf` without case-b modes).
    pub damping_margin: f64,
    pub damping_dominated: bool,
}

/// Envelope certificate with per-mode budgets computed once.
#[derive(Clone, Debug)]
pub struct StepCertifier {
    env: DecayEnvelope,
    geometry: ModeBox,
    half_bounds: Vec<f64>,
    weights: Vec<f64>,
    budgets: Vec<f64>,
}

impl StepCertifier {
    pub fn new(env: DecayEnvelope, c: f64, cfg: &SimConfig) -> Self {
        let geometry = ModeBox::new(cfg.n, cfg.cutoff);
        let params = BudgetParams::from_config(cfg, c);
        let weights: Vec<f64> = geometry.iter().map(|a| env.weight(&a)).collect();
        let half_bounds: Vec<f64> = weights.iter().map(|w| 0.5 * env.amplitude() / w).collect();
        let budgets = geometry
            .iter()
            .zip(&half_bounds)
            .map(|(a, h)| step_growth_budget(&a, &env, *h, &params).unwrap_or(f64::NEG_INFINITY))
            .collect();
        StepCertifier {
            env,
            geometry,
            half_bounds,
            weights,
            budgets,
        }
    }

    pub fn envelope(&self) -> &DecayEnvelope {
        &self.env
    }

    fn ratio(&self, z: f64, o: usize) -> f64 {
        if z == 0.0 {
            0.0
        } else {
            z * self.weights[o] / self.env.amplitude()
        }
    }

    pub fn certify(&self, before: &ModeField, after: &ModeField) -> CertReport {
        assert_eq!(*before.geometry(), self.geometry, "field does not match certifier box");
        assert_eq!(*after.geometry(), self.geometry, "field does not match certifier box");
        let origin = self.geometry.origin();
        let mut before_ratio = 0.0f64;
        let mut worst = (0usize, origin, 0.0f64);
        let mut case_a = 0;
        let mut case_b = 0;
        let mut margin = f64::NEG_INFINITY;
        for i in 0..before.n_components() {
            let b = before.component(i);
            let a = after.component(i);
            for o in 0..self.geometry.len() {
                if o == origin {
                    continue;
                }
                let zb = b[o].norm();
                before_ratio = before_ratio.max(self.ratio(zb, o));
                if zb <= self.half_bounds[o] {
                    case_a += 1;
                } else {
                    case_b += 1;
                    margin = margin.max(self.budgets[o]);
                }
                let ra = self.ratio(a[o].norm(), o);
                if ra > worst.2 {
                    worst = (i, o, ra);
                }
            }
        }
        CertReport {
            pass: before_ratio <= 1.0 && worst.2 <= 1.0,
            before_ratio,
            worst_ratio: worst.2,
            worst_component: worst.0,
            worst_mode: self.geometry.index(worst.1).entries().to_vec(),
            case_a,
            case_b,
            damping_margin: margin,
            damping_dominated: margin <= 0.0,
        }
    }
}

/// One-off certificate of the step `before → after`; see [`StepCertifier`].
pub fn certify_step(before: &ModeField, after: &ModeField, env: &DecayEnvelope, c: f64, cfg: &SimConfig) -> CertReport {
    StepCertifier::new(*env, c, cfg).certify(before, after)
}

/// Constants bounding the zero-mode control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeBound {
    /// `r^μ 2π(n+n²) c C²`, bound on a single control increment.
    pub per_step: f64,
    /// `R = c² C² / min{ν, 1}`.
    pub r_const: f64,
    /// Slope `C⁺ = R C` of the linear-in-time bound.
    pub c_plus: f64,
}

pub fn zero_mode_increment_bound(env: &DecayEnvelope, c: f64, r_mu: f64, nu: f64) -> Result<ZeroModeBound> {
    if !(nu > 0.0) {
        return Err(SimError::InvalidParameter(format!(
            "zero-mode bound needs nu > 0, got {nu}"
        )));
    }
    let c_amp = env.amplitude();
    let per_step = r_mu * prefactor(env.dim()) * c * c_amp * c_amp;
    let r_const = c * c * c_amp * c_amp / nu.min(1.0);
    Ok(ZeroModeBound {
        per_step,
        r_const,
        c_plus: r_const * c_amp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::{choose_r_mu, ScalingParams};
    use num_complex::Complex64;

    #[test]
    fn envelope_basics() {
        let env = DecayEnvelope::new(2.0, 1.5, 2).unwrap();
        assert_eq!(env.weight(&MultiIndex::zero(2)), 1.0);
        let a = MultiIndex::new(&[3, 4]);
        assert!((env.weight(&a) - (1.0 + 5f64.powf(3.5))).abs() < 1e-9);
        assert!((env.bound(&a) - 2.0 / (1.0 + 5f64.powf(3.5))).abs() < 1e-15);
        assert!(DecayEnvelope::new(-1.0, 1.5, 2).is_err());
        assert!(DecayEnvelope::new(1.0, 1.5, 4).is_err());
        assert!(DecayEnvelope::new(0.0, 1.5, 2).is_ok());
    }

    #[test]
    fn elliptic_sum_small_case_by_hand() {
        let r = elliptic_sum_constant(1, 10.0, 2).unwrap();
        let hand = 1.0 + 2.0 / 4.0 + 2.0 / (1.0 + 2f64.powf(10.5)).powi(2);
        assert!((r.partial - 4.0 * PI * hand).abs() < 1e-12);
        assert!(r.tail > 0.0 && r.tail < 1e-5);
    }

    #[test]
    fn lattice_sum_generalises_elliptic_sum() {
        let a = elliptic_sum_constant(2, 1.5, 8).unwrap();
        let b = lattice_sum_constant(2, 2.5, 8).unwrap();
        assert_eq!(a, b);
        // faster decay, smaller constant
        let d = lattice_sum_constant(2, 3.5, 8).unwrap();
        assert!(d.upper() < a.partial);
        assert!(lattice_sum_constant(2, 1.0, 8).is_err());
    }

    #[test]
    fn elliptic_sum_rejects_nonpositive_s() {
        assert!(elliptic_sum_constant(2, 0.0, 4).is_err());
        assert!(elliptic_sum_constant(2, -1.0, 4).is_err());
    }

    #[test]
    fn elliptic_sum_brackets_are_nested() {
        let mut last: Option<LatticeSum> = None;
        for k in [4, 8, 16, 32] {
            let r = elliptic_sum_constant(2, 1.5, k).unwrap();
            if let Some(prev) = last {
                assert!(r.partial >= prev.partial);
                assert!(r.tail <= prev.tail);
                assert!(r.partial <= prev.upper());
            }
            last = Some(r);
        }
    }

    #[test]
    fn convolution_lhs_is_quadratic_and_symmetric() {
        let e1 = DecayEnvelope::new(1.0, 1.5, 2).unwrap();
        let e2 = e1.with_amplitude(2.0).unwrap();
        let e0 = e1.with_amplitude(0.0).unwrap();
        let a = MultiIndex::new(&[3, -1]);
        let l1 = convolution_lhs(&e1, 8, &a);
        assert!((convolution_lhs(&e2, 8, &a) - 4.0 * l1).abs() < 1e-12 * l1);
        assert_eq!(convolution_lhs(&e0, 8, &a), 0.0);
        let lm = convolution_lhs(&e1, 8, &(-a));
        assert!((lm - l1).abs() < 1e-12 * l1);
        let swapped = convolution_lhs(&e1, 8, &MultiIndex::new(&[-1, 3]));
        assert!((swapped - l1).abs() < 1e-12 * l1);
    }

    #[test]
    fn table_rows_match_pointwise_lhs() {
        let env = DecayEnvelope::new(0.5, 1.5, 2).unwrap();
        let t = convolution_bound_check(&env, 8, 4, 100.0);
        assert_eq!(t.verdicts.len(), 3);
        for row in &t.rows {
            let a = MultiIndex::new(&row.alpha);
            let direct = convolution_lhs(&env, 8, &a);
            assert!((row.lhs - direct).abs() <= 1e-12 * direct.max(1e-300));
        }
        assert!(t.rows.iter().any(|r| r.alpha == vec![4, 0]));
        assert!(t.rows.iter().all(|r| r.radius <= 4.0));
    }

    #[test]
    fn budget_examples() {
        let env = DecayEnvelope::new(1.0, 1.5, 2).unwrap();
        let a = MultiIndex::new(&[1, 2]);
        let mut p = BudgetParams {
            c: 10.0,
            nu: 1.0,
            dt: 0.0,
            visc_factor: 1.0,
            nonlin_factor: 1.0,
            period: 1.0,
        };
        assert_eq!(step_growth_budget(&a, &env, 0.1, &p).unwrap(), 0.0);
        p.dt = 1e-3;
        p.nu = 0.0;
        assert!(step_growth_budget(&a, &env, 0.1, &p).unwrap() > 0.0);
        assert!(step_growth_budget(&MultiIndex::zero(2), &env, 0.1, &p).is_err());
    }

    #[test]
    fn scaled_budget_is_damping_dominated_in_case_b() {
        let env = DecayEnvelope::new(1.0, 1.5, 2).unwrap();
        let c = elliptic_sum_constant(2, 1.5, 16).unwrap().upper();
        let r_mu = choose_r_mu(1.0, 1.0, c, 2).unwrap();
        let p = BudgetParams {
            c,
            nu: 1.0,
            dt: 1e-3,
            visc_factor: r_mu * r_mu,
            nonlin_factor: r_mu,
            period: 1.0,
        };
        for a in ModeBox::new(2, 16).iter().filter(|a| !a.is_zero()) {
            let amp = 0.5 * env.bound(&a);
            assert!(step_growth_budget(&a, &env, amp, &p).unwrap() <= 0.0, "{a}");
        }
    }

    #[test]
    fn certificate_examples() {
        let cfg = SimConfig::new(2, 1.0, 1.0, 3, 1e-3);
        let env = DecayEnvelope::new(1.0, 1.5, 2).unwrap();
        let zero = ModeField::zeros(2, 3);
        let rep = certify_step(&zero, &zero, &env, 10.0, &cfg);
        assert!(rep.pass);
        assert_eq!(rep.case_b, 0);
        assert_eq!(rep.case_a, 2 * 48);

        let mut bad = ModeField::zeros(2, 3);
        let a = MultiIndex::new(&[2, -1]);
        bad.set_pair(1, &a, Complex64::new(1.01 * env.bound(&a), 0.0));
        let rep = certify_step(&zero, &bad, &env, 10.0, &cfg);
        assert!(!rep.pass);
        assert_eq!(rep.worst_component, 1);
        let m = MultiIndex::new(&rep.worst_mode);
        assert!(m == a || m == -a);
        assert!((rep.worst_ratio - 1.01).abs() < 1e-12);
    }

    #[test]
    fn zero_mode_bound_components() {
        let env = DecayEnvelope::new(0.0, 1.5, 2).unwrap();
        let b = zero_mode_increment_bound(&env, 100.0, 3000.0, 1.0).unwrap();
        assert_eq!(b.per_step, 0.0);
        let env = DecayEnvelope::new(0.5, 1.5, 2).unwrap();
        let r_mu = choose_r_mu(0.25, 1.0, 100.0, 2).unwrap();
        let b = zero_mode_increment_bound(&env, 100.0, r_mu, 0.25).unwrap();
        assert!((b.r_const - 100.0 * 100.0 * 0.25 / 0.25).abs() < 1e-9);
        assert!((b.c_plus - b.r_const * 0.5).abs() < 1e-12);
        let s = ScalingParams::spatial(r_mu).unwrap();
        assert!(b.per_step <= s.coefficients().0);
    }
}
