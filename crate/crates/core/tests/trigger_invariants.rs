//! Trajectory-level checks of the event trigger: the unconditional
//! invariants, dwell-time behavior, the holding-error rate bound, the
//! Lyapunov decay diagnostic, and the dwell-time closed form against
//! adaptive quadrature over random coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdetc::analysis::{dwell_time_quadrature, inverse_quadratic_integral};
use rdetc::config::{SimConfig, TriggerConfig};
use rdetc::grid::InitialCondition;
use rdetc::kernels::{KernelKind, KernelTable};
use rdetc::sim::{lyapunov_series, precompute, run_with};
use rdetc::trigger::rate_bound_check;

fn etc_config(eta: f64, t_final: f64) -> SimConfig {
    let mut cfg = SimConfig::reference();
    cfg.trigger = Some(TriggerConfig {
        eta,
        sigma: 0.1,
        m0: -1e-4,
    });
    cfg.t_final = t_final;
    cfg
}

#[test]
fn invariants_hold_across_configurations() {
    for (eta, plant_ic) in [
        (1.0, InitialCondition::PolyBump),
        (100.0, InitialCondition::PolyBump),
        (1.0, InitialCondition::SineBump { mode: 7 }),
    ] {
        let cfg = etc_config(eta, 40.0);
        let pre = precompute(&cfg).unwrap();
        let cl = pre.closed_loop.as_ref().unwrap();
        let observer_ic = InitialCondition::Scaled {
            factor: 2.0,
            of: Box::new(plant_ic.clone()),
        };
        let res = run_with(&pre, &cfg, &plant_ic, &observer_ic).unwrap();
        let traj = &res.trajectory;

        // m < 0 and d^2 <= -m at every accepted step.
        for i in 1..traj.t.len() {
            assert!(traj.m[i] < 0.0, "m >= 0 at step {i} (eta = {eta})");
            assert!(
                traj.d[i] * traj.d[i] <= -traj.m[i],
                "threshold crossed uncaught at step {i}"
            );
        }
        // Every inter-execution gap respects the certified dwell-time.
        let tau = cl.certs.dwell.tau;
        for gap in res.inter_execution_gaps() {
            assert!(gap >= tau, "gap {gap} below tau {tau}");
        }
        // d resets exactly at event steps; m is carried across unchanged.
        let dt = pre.grid.dt;
        for ev in res.events.iter().skip(1) {
            let step = (ev.t / dt).round() as usize;
            assert_eq!(traj.d[step], 0.0, "d not reset at event step {step}");
            assert_eq!(traj.m[step], ev.m, "m not continuous across event");
        }
    }
}

#[test]
fn faster_m_decay_samples_faster() {
    let slow = {
        let cfg = etc_config(1.0, 60.0);
        run_with(
            &precompute(&cfg).unwrap(),
            &cfg,
            &cfg.initial_condition.plant,
            &cfg.initial_condition.observer,
        )
        .unwrap()
        .events
        .len()
    };
    let fast = {
        let cfg = etc_config(100.0, 60.0);
        run_with(
            &precompute(&cfg).unwrap(),
            &cfg,
            &cfg.initial_condition.plant,
            &cfg.initial_condition.observer,
        )
        .unwrap()
        .events
        .len()
    };
    assert!(fast > slow, "eta = 100 fired {fast} vs eta = 1 fired {slow}");
}

#[test]
fn rate_bound_holds_along_reference_run() {
    let cfg = etc_config(1.0, 50.0);
    let pre = precompute(&cfg).unwrap();
    let cl = pre.closed_loop.as_ref().unwrap();
    let res = run_with(
        &pre,
        &cfg,
        &cfg.initial_condition.plant,
        &cfg.initial_condition.observer,
    )
    .unwrap();
    let traj = &res.trajectory;
    let report = rate_bound_check(
        pre.grid.dt,
        &traj.d,
        &traj.w_hat_norm_sq,
        &traj.w_hat_1_sq,
        &traj.w_tilde_0_sq,
        &traj.event_step,
        &cl.certs.bound,
    );
    assert!(report.checked > 1000);
    assert_eq!(
        report.violations, 0,
        "rate bound violated, worst margin {}",
        report.worst_margin
    );
}

#[test]
fn lyapunov_function_decays_along_the_run() {
    let cfg = etc_config(1.0, 60.0);
    let pre = precompute(&cfg).unwrap();
    let cl = pre.closed_loop.as_ref().unwrap();
    let res = run_with(
        &pre,
        &cfg,
        &cfg.initial_condition.plant,
        &cfg.initial_condition.observer,
    )
    .unwrap();
    let lyap = &cl.certs.lyapunov;
    assert!(lyap.ok, "need a feasible candidate for the diagnostic");
    let table_q = KernelTable::build(KernelKind::Q, &cfg.params, pre.grid.n_nodes, 64).unwrap();
    let series = lyapunov_series(
        &res,
        &pre.grid,
        &table_q,
        &cl.k_transform,
        lyap.a,
        lyap.candidate.b,
    )
    .unwrap();
    assert!(series.len() > 100);
    // V > 0 everywhere and bounded by the certified envelope between every
    // ordered pair of samples (5% slack for discretization).
    for (_, v) in &series {
        assert!(*v > 0.0);
    }
    for pair in series.windows(2) {
        let (t0, v0) = pair[0];
        let (t1, v1) = pair[1];
        assert!(
            v1 <= 1.05 * v0 * (-lyap.varrho * (t1 - t0)).exp(),
            "V rose beyond the envelope between t = {t0} and t = {t1}: {v0} -> {v1}"
        );
    }
    let first = series.first().unwrap().1;
    let last = series.last().unwrap().1;
    assert!(last < first, "V did not decrease over the run");
}

#[test]
fn dwell_time_closed_form_matches_quadrature_on_random_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0dd5);
    for _ in 0..1000 {
        let draw = |rng: &mut ChaCha8Rng| 10f64.powf(rng.gen_range(-1.0..2.7));
        let (a1, a2, a3) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let closed = inverse_quadratic_integral(a1, a2, a3);
        let quad = dwell_time_quadrature(a1, a2, a3);
        assert!(
            (closed - quad).abs() <= 1e-12 * (1.0 + closed.abs()),
            "({a1}, {a2}, {a3}): {closed} vs {quad}"
        );
    }
}
