//! Time stepping against closed forms, analytic solutions and step-halving.

use std::f64::consts::PI;

use nsmodes_core::*;

fn smooth(k: usize, seed: u64) -> ModeField {
    let env = DecayEnvelope::new(1.0, 2.0, 2).unwrap();
    make_envelope_data(&env, seed, k, EnvelopeMode::RandomPhase)
}

#[test]
fn heat_pair_trotter_run_is_exponential() {
    let c = Complex64::new(0.8, -0.3);
    let f = heat_pair(2, 4, c).unwrap();
    let cfg = SimConfig::new(2, 1.0, 1.0, 4, 1e-4);
    let out = run(&f, &cfg, 0.05, &RunOptions::new(2)).unwrap();
    let a = MultiIndex::new(&[0, 1]);
    let expect = c * (-4.0 * PI * PI * 0.05).exp();
    let err = (out.final_field.get(0, &a) - expect).norm() / expect.norm();
    assert!(err < 1e-12, "{err}");
    assert_eq!(out.steps, 500);
    assert!(out.ledger.iter().all(|r| r.increment.norm() == 0.0));
}

#[test]
fn heat_pair_in_three_dimensions() {
    let c = Complex64::new(0.1, 0.2);
    let f = heat_pair(3, 2, c).unwrap();
    let cfg = SimConfig::new(3, 2.0, 0.5, 2, 1e-3);
    let g = trotter_step(&f, &cfg).unwrap();
    let a = MultiIndex::new(&[0, 1, 0]);
    let expect = c * (-(0.5 * 4.0 * PI * PI / 4.0) * 1e-3).exp();
    assert!((g.get(0, &a) - expect).norm() < 1e-16);
}

#[test]
fn taylor_green_follows_analytic_decay() {
    let nu = 0.1;
    let f = make_taylor_green(2, 6, 1.0).unwrap();
    let cfg = SimConfig::new(2, 2.0 * PI, nu, 6, 1e-3);
    let out = run(&f, &cfg, 0.1, &RunOptions::new(2)).unwrap();
    let exact = f.scaled((-2.0 * nu * 0.1f64).exp());
    let rel = out.final_field.l2_distance(&exact) / exact.l2_norm();
    assert!(rel < 1e-12, "{rel}");
}

#[test]
fn euler_and_trotter_differ_at_second_order() {
    for seed in 0..3 {
        let f = smooth(4, seed);
        let mut diffs = Vec::new();
        for dt in [1e-4, 5e-5] {
            let cfg = SimConfig::new(2, 1.0, 0.05, 4, dt);
            diffs.push(
                trotter_step(&f, &cfg)
                    .unwrap()
                    .l2_distance(&euler_step(&f, &cfg).unwrap()),
            );
        }
        let q = diffs[0] / diffs[1];
        assert!((3.5..=4.5).contains(&q), "seed {seed}: {q}");
    }
}

#[test]
fn nonlinear_free_trotter_is_heat_semigroup() {
    // zero nonlinear multiplier through an extreme negative scaling exponent is
    // not representable; use a shear field, on which the nonlinearity vanishes
    let mut f = ModeField::zeros(2, 4);
    for k in 1..=4i64 {
        f.set_pair(0, &MultiIndex::new(&[0, k]), Complex64::new(1.0 / k as f64, 0.1));
    }
    let cfg = SimConfig::new(2, 1.0, 0.3, 4, 1e-3);
    let g = trotter_step(&f, &cfg).unwrap();
    for k in 1..=4i64 {
        let a = MultiIndex::new(&[0, k]);
        let factor = damped_viscosity_factor(&a, 0.3, 0.3, 1e-3, 1.0).unwrap();
        assert_eq!(g.get(0, &a), f.get(0, &a) * factor);
    }
}

#[test]
fn period_equivalence_is_bit_exact() {
    let f = smooth(4, 11);
    let scaled = SimConfig::new(2, 1.0, 0.2, 4, 1e-4).with_scaling(ScalingParams::spatial(2.0).unwrap());
    let plain = SimConfig::new(2, 0.5, 0.2, 4, 1e-4);
    for method in [ConvolutionMethod::Direct, ConvolutionMethod::Spectral] {
        let a = run(&f, &scaled.clone().with_method(method), 2e-3, &RunOptions::new(2)).unwrap();
        let b = run(&f, &plain.clone().with_method(method), 2e-3, &RunOptions::new(2)).unwrap();
        assert_eq!(a.final_field, b.final_field);
    }
}

#[test]
fn spatial_scaling_transfers_envelope_bounds() {
    // under pure spatial scaling the mode values are identical, so any envelope
    // satisfied by v* is satisfied by v
    let env = DecayEnvelope::new(0.5, 1.5, 2).unwrap();
    let f = make_envelope_data(&env, 2, 4, EnvelopeMode::Deterministic);
    let scaled = SimConfig::new(2, 1.0, 0.2, 4, 1e-4).with_scaling(ScalingParams::spatial(2.0).unwrap());
    let plain = SimConfig::new(2, 0.5, 0.2, 4, 1e-4);
    let a = trotter_step(&f, &scaled).unwrap();
    let b = trotter_step(&f, &plain).unwrap();
    assert!(decay_envelope_ratio(&a, &env) >= decay_envelope_ratio(&b, &env));
}

#[test]
fn control_reconstructs_uncontrolled_zero_modes() {
    // a non-solenoidal start gives the zero modes a nontrivial history
    let mut f = smooth(3, 2);
    f.set_pair(0, &MultiIndex::new(&[1, 0]), Complex64::new(0.05, 0.1));
    f.set_pair(1, &MultiIndex::new(&[0, 1]), Complex64::new(-0.08, 0.02));
    let cfg = SimConfig::new(2, 1.0, 0.1, 3, 1e-3);
    let mut controlled = RunOptions::new(2);
    controlled.controlled = true;
    let mut free = RunOptions::new(2);
    free.controlled = false;
    let a = run(&f, &cfg, 2e-2, &controlled).unwrap();
    let b = run(&f, &cfg, 2e-2, &free).unwrap();
    assert!(a
        .final_field
        .zero_modes()
        .iter()
        .all(|z| *z == Complex64::new(0.0, 0.0)));
    let r = a.control.r_zero();
    let z = b.final_field.zero_modes();
    assert!(z.iter().any(|x| x.norm() > 1e-6));
    for (x, y) in r.iter().zip(&z) {
        assert!((x - y).norm() <= 1e-3 * y.norm() + 1e-15, "{x} vs {y}");
    }
    let mut nonzero = a.final_field.clone();
    let mut other = b.final_field.clone();
    nonzero.set_zero_modes(&[Complex64::new(0.0, 0.0); 2]);
    other.set_zero_modes(&[Complex64::new(0.0, 0.0); 2]);
    assert!(nonzero.max_distance(&other) <= 1e-3 * nonzero.max_abs());
    // the ledger is a running sum
    let mut sum = [Complex64::new(0.0, 0.0); 2];
    for rec in &a.ledger {
        sum[rec.component] += rec.increment;
        assert_eq!(rec.cumulative, sum[rec.component]);
    }
}

#[test]
fn controlled_steps_keep_zero_modes_exactly_zero() {
    let f = smooth(4, 5);
    let cfg = SimConfig::new(2, 1.0, 0.05, 4, 1e-3);
    let mut stepper = Stepper::new(&cfg, StepperKind::Trotter).unwrap();
    let mut st = ControlState::new(2);
    let mut v = f;
    for _ in 0..20 {
        let (next, s) = controlled_step(&v, &st, &mut stepper).unwrap();
        assert!(next.zero_modes().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!(s.last_increment().iter().all(|z| z.im == 0.0 || z.norm() < 1e-15));
        v = next;
        st = s;
    }
    assert_eq!(st.steps(), 20);
}

fn dilated(theta: f64, variant: DilatationVariant, dt: f64) -> SimConfig {
    SimConfig::new(2, 1.0, 0.1, 4, dt).with_dilatation(DilatationParams {
        theta,
        t0: 0.0,
        window: 0.5,
        variant,
    })
}

/// Discrepancy between the u-step pulled back and the v-step over the same
/// time increment, at a fixed point in the middle of the window.
fn dilatation_gap(theta: f64, variant: DilatationVariant, dt: f64, f: &ModeField) -> f64 {
    let cfg = dilated(theta, variant, dt);
    let clock = DilatedClock::new(0.0, 0.5, dt).unwrap();
    let l = (0.2 / dt).round() as usize;
    let mut auto = AutoControl::new(&cfg, clock, StepperKind::Trotter).unwrap();
    let v = f.clone();
    let u = auto.pushforward(&v, l).unwrap();
    let ua = auto.step(&u, l).unwrap();
    let va = auto.pullback(&ua, l + 1).unwrap();
    let mut plain = cfg.clone();
    plain.dilatation.variant = DilatationVariant::None;
    plain.dt = clock.time(l + 1) - clock.time(l);
    let vb = trotter_step(&v, &plain).unwrap();
    va.l2_distance(&vb)
}

#[test]
fn dilated_step_is_consistent_to_second_order() {
    let f = smooth(4, 13);
    for variant in [DilatationVariant::Local, DilatationVariant::Global] {
        for theta in [0.0, 1.0, 5.0] {
            let d1 = dilatation_gap(theta, variant, 1e-3, &f);
            let d2 = dilatation_gap(theta, variant, 5e-4, &f);
            let q = d1 / d2;
            assert!((3.5..=4.5).contains(&q), "{variant:?} θ={theta}: {q}");
        }
    }
}

#[test]
fn dilated_run_tracks_plain_run() {
    let f = smooth(3, 3);
    let mut cfg = dilated(1.0, DilatationVariant::Local, 1e-3);
    cfg.cutoff = 3;
    let a = run(&f, &cfg, 0.6, &RunOptions::new(2)).unwrap();
    let mut plain = cfg.clone();
    plain.dilatation.variant = DilatationVariant::None;
    let b = run(&f, &plain, 0.6, &RunOptions::new(2)).unwrap();
    assert!((a.final_time - 0.6).abs() < 1e-9);
    let rel = a.final_field.l2_distance(&b.final_field) / b.final_field.l2_norm();
    assert!(rel < 1e-2, "{rel}");
    assert_eq!(a.reports.len(), 600);
}

#[test]
fn certified_short_run_passes() {
    let n = 2;
    let s = 1.5;
    let env = DecayEnvelope::new(0.05, s, n).unwrap();
    let c = elliptic_sum_constant(n, s, 32).unwrap().upper();
    let r_mu = choose_r_mu(1.0, env.amplitude().max(1.0), c, n).unwrap();
    let cfg = SimConfig::new(n, 1.0, 1.0, 6, 1e-3).with_scaling(ScalingParams::spatial(r_mu).unwrap());
    let f = make_envelope_data(&env, 1, 6, EnvelopeMode::RandomPhase);
    let mut opts = RunOptions::new(n);
    opts.envelope = env;
    opts.certifier = Some(StepCertifier::new(env, c, &cfg));
    opts.strict = true;
    let out = run(&f, &cfg, 0.05, &opts).unwrap();
    let summary = out.certificates.unwrap();
    assert!(summary.all_pass);
    assert_eq!(summary.steps_checked, 50);
    let bound = zero_mode_increment_bound(&env, c, r_mu, 1.0).unwrap();
    assert!(out.ledger.iter().all(|r| r.increment.norm() <= bound.per_step));
}

#[test]
fn strict_certifier_aborts_on_violation() {
    let env = DecayEnvelope::new(1.0, 1.5, 2).unwrap();
    let cfg = SimConfig::new(2, 1.0, 0.0, 3, 1e-2);
    let f = make_envelope_data(&env, 1, 3, EnvelopeMode::Deterministic);
    let tight = env.with_amplitude(0.5).unwrap();
    let mut opts = RunOptions::new(2);
    opts.certifier = Some(StepCertifier::new(tight, 10.0, &cfg));
    opts.strict = true;
    let err = run(&f, &cfg, 0.02, &opts).unwrap_err();
    assert!(matches!(err, SimError::CertificateViolated { step: 1, .. }));
    opts.strict = false;
    let out = run(&f, &cfg, 0.02, &opts).unwrap();
    let s = out.certificates.unwrap();
    assert!(!s.all_pass);
    assert_eq!(s.first_failure.unwrap().0, 1);
}
