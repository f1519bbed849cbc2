//! Orchestration of closed- and open-loop runs and initial-condition
//! sweeps.
//!
//! Per step, with all quantities at the old time level feeding the solves:
//!
//! 1. sample the measurement y = u(0, t);
//! 2. advance observer and plant with the currently held input (both see
//!    the same U: an event at the end of this step takes effect from the
//!    next step on, which is exactly the zero-order-hold semantics of an
//!    event at t + dt);
//! 3. form the trigger signals at the new time level: d, ||w-hat||^2,
//!    w-hat(1)^2, w-tilde(0)^2 (the last one output-feedback realizable as
//!    u(0) - u-hat(0));
//! 4. advance m and evaluate the firing rule; on an event refresh the held
//!    input and the snapshot;
//! 5. enforce the trigger invariants (m < 0, d^2 <= -m) and record.
//!
//! Continuous mode refreshes the input every step (so the holding error is
//! identically zero); open loop holds U = 0 and does not touch the observer
//! machinery at all.

use crate::analysis::{assemble_certificates, CertificateSet};
use crate::config::{ControllerMode, SimConfig};
use crate::error::{Error, Result};
use crate::grid::{init_profile, l2_norm_sq_values, Grid, InitialCondition, ProfileLabel, StateProfile};
use crate::kernels::{
    control_kernel, eval_g, observer_gains, ControlKernel, KernelKind, KernelTable, ObserverGains,
    VolterraDirection, VolterraOp,
};
use crate::params::SystemParams;
use crate::solver::{ObserverStepper, PlantStepper};
use crate::trigger::{continuous_control, should_fire, EventRecord, TriggerState};
use rayon::prelude::*;
use serde::Serialize;

/// Everything reusable across runs of one configuration: grid, steppers,
/// kernels and certificates.
pub struct Precomputed {
    pub grid: Grid,
    pub params: SystemParams,
    pub plant: PlantStepper,
    /// Controller-side machinery; absent in open-loop mode.
    pub closed_loop: Option<ClosedLoop>,
}

pub struct ClosedLoop {
    pub control: ControlKernel,
    pub gains: ObserverGains,
    pub observer: ObserverStepper,
    /// The forward transform w-hat = (I - K) u-hat as a cached matrix.
    pub k_transform: VolterraOp,
    pub certs: CertificateSet,
}

/// Build the per-configuration state. Open loop skips all kernel work.
pub fn precompute(cfg: &SimConfig) -> Result<Precomputed> {
    cfg.validate()?;
    let grid = Grid::new(cfg.grid.n_nodes, cfg.effective_dt())?;
    let plant = PlantStepper::new(&grid, &cfg.params)?;
    let closed_loop = if cfg.mode == ControllerMode::OpenLoop {
        None
    } else {
        let n = grid.n_nodes;
        let control = control_kernel(&cfg.params, n);
        let gains = observer_gains(&cfg.params, n, cfg.quad_points)?;
        let field = eval_g(&cfg.params, &gains, n)?;
        let table_k = KernelTable::build(KernelKind::K, &cfg.params, n, cfg.quad_points)?;
        let table_l = KernelTable::build(KernelKind::L, &cfg.params, n, cfg.quad_points)?;
        let table_p = KernelTable::build(KernelKind::P, &cfg.params, n, cfg.quad_points)?;
        let tc = cfg.trigger_or_default();
        let certs = assemble_certificates(
            &cfg.params,
            &control,
            &gains,
            &field,
            &table_l,
            &table_p,
            tc.sigma,
            tc.eta,
            tc.m0,
            &cfg.lyapunov,
        )?;
        let observer = ObserverStepper::new(&grid, &cfg.params, &gains)?;
        let k_transform = VolterraOp::from_table(&table_k, VolterraDirection::Subtract);
        Some(ClosedLoop {
            control,
            gains,
            observer,
            k_transform,
            certs,
        })
    };
    Ok(Precomputed {
        grid,
        params: cfg.params,
        plant,
        closed_loop,
    })
}

/// Per-step scalar records of one run (column-oriented; every step, no
/// decimation).
#[derive(Debug, Clone, Default, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub norm_u: Vec<f64>,
    pub norm_uhat: Vec<f64>,
    pub norm_utilde: Vec<f64>,
    pub u_at_0: Vec<f64>,
    pub uhat_at_1: Vec<f64>,
    pub u_held: Vec<f64>,
    pub d: Vec<f64>,
    pub m: Vec<f64>,
    pub w_hat_norm_sq: Vec<f64>,
    pub w_hat_1_sq: Vec<f64>,
    pub w_tilde_0_sq: Vec<f64>,
    pub event_step: Vec<bool>,
}

/// Full spatial profiles kept at decimated steps for offline diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSnapshot {
    pub step: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub uhat: Vec<f64>,
}

/// Outcome of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub mode: ControllerMode,
    pub trajectory: Trajectory,
    pub events: Vec<EventRecord>,
    pub snapshots: Vec<ProfileSnapshot>,
    pub warnings: Vec<String>,
    pub steps: usize,
}

impl RunResult {
    pub fn inter_execution_gaps(&self) -> Vec<f64> {
        self.events.iter().skip(1).map(|e| e.gap).collect()
    }
}

/// Run the configured experiment.
pub fn run_simulation(cfg: &SimConfig) -> Result<RunResult> {
    let pre = precompute(cfg)?;
    run_with(&pre, cfg, &cfg.initial_condition.plant, &cfg.initial_condition.observer)
}

/// Run with explicit initial conditions against an existing precomputation
/// (the sweep path).
pub fn run_with(
    pre: &Precomputed,
    cfg: &SimConfig,
    ic_plant: &InitialCondition,
    ic_observer: &InitialCondition,
) -> Result<RunResult> {
    let grid = &pre.grid;
    let dt = grid.dt;
    let steps = (cfg.t_final / dt).round().max(1.0) as usize;
    let mut warnings = Vec::new();

    let mut u = init_profile(ic_plant, grid, ProfileLabel::Plant)?;
    let mut uhat = init_profile(ic_observer, grid, ProfileLabel::Observer)?;
    if cfg.mode == ControllerMode::OpenLoop {
        return run_open_loop(pre, cfg, u, steps);
    }

    let cl = pre
        .closed_loop
        .as_ref()
        .expect("closed-loop run without controller precomputation");
    let tc = cfg.trigger_or_default();
    let tp = cl.certs.trigger;
    debug_assert_eq!(tp.eta, tc.eta);
    if cfg.mode == ControllerMode::EventTriggered && dt > cl.certs.dwell.tau / 2.0 {
        warnings.push(format!(
            "monitoring step dt = {dt:.4e} exceeds half the minimal dwell-time tau = {:.4e}; \
             events are detected at step granularity",
            cl.certs.dwell.tau
        ));
    }

    let mut trigger = TriggerState::init(0.0, &uhat, &cl.control, grid, &tp)?;
    let n = grid.n_nodes;
    let mut traj = Trajectory::default();
    let mut snapshots = Vec::new();
    let mut w_hat = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    let mut u_next = vec![0.0; n];
    let mut uhat_next = vec![0.0; n];

    // Step-0 record (the initial event has just fired).
    cl.k_transform.apply(&uhat.values, &mut w_hat);
    record_step(
        &mut traj,
        grid,
        0.0,
        &u.values,
        &uhat.values,
        trigger.u_held,
        0.0,
        trigger.m,
        &w_hat,
        true,
    );
    push_snapshot(&mut snapshots, cfg, 0, 0.0, &u, &uhat, steps);

    for step in 1..=steps {
        let t = step as f64 * dt;
        let y_meas = u.values[0];
        let u_held = trigger.u_held;

        pre.plant.step_into(&u.values, u_held, &mut scratch, &mut u_next);
        cl.observer
            .step_into(&uhat.values, u_held, y_meas, &mut scratch, &mut uhat_next);
        std::mem::swap(&mut u.values, &mut u_next);
        std::mem::swap(&mut uhat.values, &mut uhat_next);

        cl.k_transform.apply(&uhat.values, &mut w_hat);
        let w_hat_norm_sq = l2_norm_sq_values(&w_hat, grid.h);
        let w_hat_1_sq = w_hat[n - 1] * w_hat[n - 1];
        let w_tilde_0 = u.values[0] - uhat.values[0];
        let w_tilde_0_sq = w_tilde_0 * w_tilde_0;

        let fired = match cfg.mode {
            ControllerMode::EventTriggered => {
                let d = trigger.holding_error(&uhat, &cl.control, grid)?;
                let m = trigger.step_m(d, w_hat_norm_sq, w_hat_1_sq, w_tilde_0_sq, dt, &tp);
                let fire = should_fire(d, m)?;
                if fire {
                    trigger.on_event(t, &uhat, &cl.control, grid)?;
                }
                // The unconditional trigger invariants, checked literally.
                if trigger.m >= 0.0 || trigger.d * trigger.d > -trigger.m {
                    return Err(Error::InvariantViolated(format!(
                        "trigger invariant broken at t = {t}: d = {}, m = {}",
                        trigger.d, trigger.m
                    )));
                }
                fire
            }
            ControllerMode::Continuous => {
                // Refresh the input every step; the holding error as the
                // trigger computes it must vanish identically.
                trigger.u_held = continuous_control(&uhat, &cl.control, grid)?;
                trigger.snapshot_uhat.values.copy_from_slice(&uhat.values);
                let d = trigger.holding_error(&uhat, &cl.control, grid)?;
                if d != 0.0 {
                    return Err(Error::InvariantViolated(format!(
                        "continuous mode must have zero holding error, got {d} at t = {t}"
                    )));
                }
                trigger.step_m(d, w_hat_norm_sq, w_hat_1_sq, w_tilde_0_sq, dt, &tp);
                false
            }
            ControllerMode::OpenLoop => unreachable!(),
        };

        record_step(
            &mut traj,
            grid,
            t,
            &u.values,
            &uhat.values,
            trigger.u_held,
            trigger.d,
            trigger.m,
            &w_hat,
            fired,
        );
        push_snapshot(&mut snapshots, cfg, step, t, &u, &uhat, steps);
    }

    Ok(RunResult {
        mode: cfg.mode,
        trajectory: traj,
        events: trigger.events,
        snapshots,
        warnings,
        steps,
    })
}

fn run_open_loop(
    pre: &Precomputed,
    cfg: &SimConfig,
    mut u: StateProfile,
    steps: usize,
) -> Result<RunResult> {
    let grid = &pre.grid;
    let n = grid.n_nodes;
    let mut traj = Trajectory::default();
    let mut snapshots = Vec::new();
    let zeros = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    let mut u_next = vec![0.0; n];
    record_step(&mut traj, grid, 0.0, &u.values, &zeros, 0.0, 0.0, 0.0, &zeros, false);
    push_snapshot(&mut snapshots, cfg, 0, 0.0, &u, &StateProfile::zeros(n, ProfileLabel::Observer), steps);
    for step in 1..=steps {
        let t = step as f64 * grid.dt;
        pre.plant.step_into(&u.values, 0.0, &mut scratch, &mut u_next);
        std::mem::swap(&mut u.values, &mut u_next);
        if !u.values[0].is_finite() {
            return Err(Error::InvariantViolated(format!(
                "open-loop state became non-finite at t = {t}"
            )));
        }
        record_step(&mut traj, grid, t, &u.values, &zeros, 0.0, 0.0, 0.0, &zeros, false);
        push_snapshot(&mut snapshots, cfg, step, t, &u, &StateProfile::zeros(n, ProfileLabel::Observer), steps);
    }
    Ok(RunResult {
        mode: ControllerMode::OpenLoop,
        trajectory: traj,
        events: Vec::new(),
        snapshots,
        warnings: Vec::new(),
        steps,
    })
}

#[allow(clippy::too_many_arguments)]
fn record_step(
    traj: &mut Trajectory,
    grid: &Grid,
    t: f64,
    u: &[f64],
    uhat: &[f64],
    u_held: f64,
    d: f64,
    m: f64,
    w_hat: &[f64],
    event: bool,
) {
    let n = grid.n_nodes;
    traj.t.push(t);
    traj.norm_u.push(l2_norm_sq_values(u, grid.h).sqrt());
    traj.norm_uhat.push(l2_norm_sq_values(uhat, grid.h).sqrt());
    let utilde: Vec<f64> = u.iter().zip(uhat).map(|(a, b)| a - b).collect();
    traj.norm_utilde.push(l2_norm_sq_values(&utilde, grid.h).sqrt());
    traj.u_at_0.push(u[0]);
    traj.uhat_at_1.push(uhat[n - 1]);
    traj.u_held.push(u_held);
    traj.d.push(d);
    traj.m.push(m);
    traj.w_hat_norm_sq.push(l2_norm_sq_values(w_hat, grid.h));
    traj.w_hat_1_sq.push(w_hat[n - 1] * w_hat[n - 1]);
    let wt0 = u[0] - uhat[0];
    traj.w_tilde_0_sq.push(wt0 * wt0);
    traj.event_step.push(event);
}

fn push_snapshot(
    snapshots: &mut Vec<ProfileSnapshot>,
    cfg: &SimConfig,
    step: usize,
    t: f64,
    u: &StateProfile,
    uhat: &StateProfile,
    total_steps: usize,
) {
    if step.is_multiple_of(cfg.output.decimation) || step == total_steps {
        snapshots.push(ProfileSnapshot {
            step,
            t,
            u: u.values.clone(),
            uhat: uhat.values.clone(),
        });
    }
}

/// Pooled sweep statistics for one eta.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub eta: f64,
    pub n_runs: usize,
    pub tau: f64,
    /// Inter-execution gaps pooled over all runs, in run order.
    pub gaps: Vec<f64>,
    pub events_total: usize,
    pub min_gap: f64,
    pub median_gap: f64,
    pub max_gap: f64,
}

/// Run the initial-condition family u0_n = x^2 (x-1)^2 sin(n pi x),
/// u-hat0 = 2 u0, n = 1..=n_ics, and pool the inter-execution gaps.
/// Runs execute in parallel; any failing run aborts the sweep with its
/// diagnostics. `ETC_SIM_WORKERS` caps the worker count.
pub fn run_sweep(cfg: &SimConfig, n_ics: u32) -> Result<SweepResult> {
    let mut sweep_cfg = cfg.clone();
    sweep_cfg.mode = ControllerMode::EventTriggered;
    let pre = precompute(&sweep_cfg)?;
    let cl = pre.closed_loop.as_ref().expect("sweep is closed loop");
    let tau = cl.certs.dwell.tau;
    let eta = sweep_cfg.trigger_or_default().eta;

    let run_one = |mode: u32| -> Result<Vec<f64>> {
        let plant_ic = InitialCondition::SineBump { mode };
        let observer_ic = InitialCondition::Scaled {
            factor: 2.0,
            of: Box::new(plant_ic.clone()),
        };
        let result = run_with(&pre, &sweep_cfg, &plant_ic, &observer_ic)
            .map_err(|e| Error::InvariantViolated(format!("sweep run n = {mode} failed: {e}")))?;
        Ok(result.inter_execution_gaps())
    };

    let modes: Vec<u32> = (1..=n_ics).collect();
    let per_run: Result<Vec<Vec<f64>>> = match sweep_workers() {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(|| modes.par_iter().map(|n| run_one(*n)).collect()),
        None => modes.par_iter().map(|n| run_one(*n)).collect(),
    };
    let per_run = per_run?;

    let gaps: Vec<f64> = per_run.into_iter().flatten().collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("gaps are finite"));
    let (min_gap, median_gap, max_gap) = if sorted.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            sorted[0],
            sorted[sorted.len() / 2],
            sorted[sorted.len() - 1],
        )
    };
    Ok(SweepResult {
        eta,
        n_runs: n_ics as usize,
        tau,
        events_total: gaps.len(),
        gaps,
        min_gap,
        median_gap,
        max_gap,
    })
}

fn sweep_workers() -> Option<usize> {
    std::env::var("ETC_SIM_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|w| *w > 0)
}

/// Lyapunov diagnostic along recorded snapshots: V(t) with the feasible
/// weights (A, B), using the full backstepping images w-tilde = (I + Q)
/// (u - u-hat) and w-hat = (I - K) u-hat.
pub fn lyapunov_series(
    result: &RunResult,
    grid: &Grid,
    table_q: &KernelTable,
    k_transform: &VolterraOp,
    a: f64,
    b: f64,
) -> Result<Vec<(f64, f64)>> {
    let q_transform = VolterraOp::from_table(table_q, VolterraDirection::Add);
    let n = grid.n_nodes;
    let mut w_tilde = vec![0.0; n];
    let mut w_hat = vec![0.0; n];
    let mut out = Vec::with_capacity(result.snapshots.len());
    for snap in &result.snapshots {
        let utilde: Vec<f64> = snap.u.iter().zip(&snap.uhat).map(|(a, b)| a - b).collect();
        q_transform.apply(&utilde, &mut w_tilde);
        k_transform.apply(&snap.uhat, &mut w_hat);
        let v = crate::trigger::lyapunov_v(
            l2_norm_sq_values(&w_tilde, grid.h),
            l2_norm_sq_values(&w_hat, grid.h),
            result.trajectory.m[snap.step],
            a,
            b,
        );
        out.push((snap.t, v));
    }
    Ok(out)
}
