//! The dynamic event-triggering mechanism.
//!
//! Between events the control input is held at U_j, the value the
//! continuous-time law produced from the observer profile at the last event
//! time t_j. Two scalars drive the trigger:
//!
//! * d(t), the input holding error: the gap between the held input and what
//!   the continuous-time law would output right now;
//! * m(t) < 0, an auxiliary variable integrating
//!   m-dot = -eta m + rho d^2 - beta1 ||w-hat||^2 - beta2 w-hat(1)^2 -
//!   beta3 w-tilde(0)^2.
//!
//! An event fires as soon as d^2 exceeds -m; the input and the observer
//! snapshot refresh, d resets to zero, and m is carried across the event
//! unchanged. m < 0 and d^2 <= -m hold along every trajectory by
//! construction; the runtime treats a violation as a scheme bug and aborts.
//!
//! Everything in this module consumes only observer data and the boundary
//! measurement u(0,t) (through the scalar w-tilde(0) = u(0) - u-hat(0)); the
//! trigger is output-feedback realizable by construction and has no access
//! to interior plant values.

use crate::analysis::{ErrorRateBound, TriggerParams};
use crate::error::{Error, Result};
use crate::grid::{l2_norm_sq_values, Grid, StateProfile};
use crate::kernels::ControlKernel;
use crate::quad::trapezoid;
use serde::Serialize;

/// One control update: when it fired, what was applied, and the gap to the
/// previous event.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EventRecord {
    pub index: usize,
    pub t: f64,
    pub u_held: f64,
    /// t - t_previous; zero for the initial event.
    pub gap: f64,
    /// m at the event instant (continuous across it).
    pub m: f64,
}

/// Live state of the event-triggered controller.
#[derive(Debug, Clone)]
pub struct TriggerState {
    pub u_held: f64,
    pub t_last_event: f64,
    pub snapshot_uhat: StateProfile,
    pub m: f64,
    pub d: f64,
    pub events: Vec<EventRecord>,
}

impl TriggerState {
    /// Start the trigger at t0 with the mandatory initial event: the held
    /// input is the continuous-time law evaluated on the initial observer
    /// profile, and m starts at the configured m(0) < 0.
    pub fn init(
        t0: f64,
        uhat0: &StateProfile,
        control: &ControlKernel,
        grid: &Grid,
        tp: &TriggerParams,
    ) -> Result<Self> {
        let u_held = continuous_control(uhat0, control, grid)?;
        let mut state = Self {
            u_held,
            t_last_event: t0,
            snapshot_uhat: uhat0.clone(),
            m: tp.m0,
            d: 0.0,
            events: Vec::new(),
        };
        state.events.push(EventRecord {
            index: 0,
            t: t0,
            u_held,
            gap: 0.0,
            m: tp.m0,
        });
        Ok(state)
    }

    /// Holding error d = U_held - U_continuous(u-hat now). In debug builds
    /// the definition as the kernel integral of the snapshot difference is
    /// evaluated too and must agree.
    pub fn holding_error(
        &self,
        uhat_now: &StateProfile,
        control: &ControlKernel,
        grid: &Grid,
    ) -> Result<f64> {
        let d = self.u_held - continuous_control(uhat_now, control, grid)?;
        #[cfg(debug_assertions)]
        {
            let h = grid.h;
            let diff: Vec<f64> = self
                .snapshot_uhat
                .values
                .iter()
                .zip(&uhat_now.values)
                .zip(&control.k)
                .map(|((snap, now), k)| k * (snap - now))
                .collect();
            let direct = trapezoid(&diff, h);
            debug_assert!(
                (direct - d).abs() <= 1e-12 * (1.0 + d.abs()),
                "holding-error forms disagree: {direct} vs {d}"
            );
        }
        Ok(d)
    }

    /// One implicit-Euler step of the m dynamics: the stiff decay -eta m is
    /// implicit, the source terms enter explicitly at the current step.
    pub fn step_m(
        &mut self,
        d: f64,
        w_hat_norm_sq: f64,
        w_hat_1_sq: f64,
        w_tilde_0_sq: f64,
        dt: f64,
        tp: &TriggerParams,
    ) -> f64 {
        let source = tp.rho * d * d
            - tp.beta1 * w_hat_norm_sq
            - tp.beta2 * w_hat_1_sq
            - tp.beta3 * w_tilde_0_sq;
        self.m = (self.m + dt * source) / (1.0 + dt * tp.eta);
        self.d = d;
        self.m
    }

    /// Refresh the held input and the snapshot at an event instant. m is
    /// carried across unchanged; d resets to zero by construction.
    pub fn on_event(
        &mut self,
        t: f64,
        uhat_now: &StateProfile,
        control: &ControlKernel,
        grid: &Grid,
    ) -> Result<()> {
        self.u_held = continuous_control(uhat_now, control, grid)?;
        self.snapshot_uhat = uhat_now.clone();
        let gap = t - self.t_last_event;
        self.t_last_event = t;
        self.d = 0.0;
        self.events.push(EventRecord {
            index: self.events.len(),
            t,
            u_held: self.u_held,
            gap,
            m: self.m,
        });
        Ok(())
    }

    /// Gaps between consecutive events (the initial event carries none).
    pub fn inter_execution_gaps(&self) -> Vec<f64> {
        self.events.iter().skip(1).map(|e| e.gap).collect()
    }
}

/// The continuous-time control law U = integral k(y) u-hat(y) dy by
/// composite trapezoid, guarded by the discrete Cauchy-Schwarz bound
/// |U| <= ||k|| ||u-hat||.
pub fn continuous_control(
    uhat: &StateProfile,
    control: &ControlKernel,
    grid: &Grid,
) -> Result<f64> {
    if uhat.len() != control.grid_n || grid.n_nodes != control.grid_n {
        return Err(Error::GridMismatch(format!(
            "control kernel on {} nodes, profile on {}, grid on {}",
            control.grid_n,
            uhat.len(),
            grid.n_nodes
        )));
    }
    let prods: Vec<f64> = control
        .k
        .iter()
        .zip(&uhat.values)
        .map(|(k, u)| k * u)
        .collect();
    let u_val = trapezoid(&prods, grid.h);
    let bound = control.norm() * l2_norm_sq_values(&uhat.values, grid.h).sqrt();
    if u_val.abs() > bound * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::InvariantViolated(format!(
            "control value {u_val} exceeds the Cauchy-Schwarz bound {bound}"
        )));
    }
    Ok(u_val)
}

/// The event rule: fire strictly when d^2 > -m. m >= 0 would contradict a
/// property that holds unconditionally, so it aborts with a diagnostic.
pub fn should_fire(d: f64, m: f64) -> Result<bool> {
    if m >= 0.0 {
        return Err(Error::InvariantViolated(format!(
            "auxiliary trigger variable must stay negative, got m = {m}"
        )));
    }
    Ok(d * d > -m)
}

/// Closed-loop Lyapunov function V = A/2 ||w-tilde||^2 + B/2 ||w-hat||^2 - m.
pub fn lyapunov_v(w_tilde_norm_sq: f64, w_hat_norm_sq: f64, m: f64, a: f64, b: f64) -> f64 {
    0.5 * a * w_tilde_norm_sq + 0.5 * b * w_hat_norm_sq - m
}

/// Result of replaying a recorded trajectory against the holding-error rate
/// bound d-dot^2 <= rho1 d^2 + alpha1 ||w-hat||^2 + alpha2 w-hat(1)^2
/// + alpha3 w-tilde(0)^2.
#[derive(Debug, Clone, Serialize)]
pub struct RateBoundReport {
    /// Samples actually tested (events and their neighbors excluded).
    pub checked: usize,
    pub violations: usize,
    /// Smallest remaining slack, rhs + tolerance - ddot^2; negative means a
    /// violation.
    pub worst_margin: f64,
}

/// Check the rate bound along per-step scalar series. d-dot is approximated
/// by central differences; samples whose stencil straddles an event are
/// excluded because d jumps there. The right-hand side gets 10% relative
/// plus 1e-8 absolute slack for discretization error.
pub fn rate_bound_check(
    dt: f64,
    d: &[f64],
    w_hat_norm_sq: &[f64],
    w_hat_1_sq: &[f64],
    w_tilde_0_sq: &[f64],
    event_step: &[bool],
    bound: &ErrorRateBound,
) -> RateBoundReport {
    let n = d.len();
    assert!(
        w_hat_norm_sq.len() == n
            && w_hat_1_sq.len() == n
            && w_tilde_0_sq.len() == n
            && event_step.len() == n
    );
    let mut checked = 0;
    let mut violations = 0;
    let mut worst_margin = f64::INFINITY;
    for k in 1..n.saturating_sub(1) {
        if event_step[k - 1] || event_step[k] || event_step[k + 1] {
            continue;
        }
        let ddot = (d[k + 1] - d[k - 1]) / (2.0 * dt);
        let rhs = bound.rho1 * d[k] * d[k]
            + bound.alpha1 * w_hat_norm_sq[k]
            + bound.alpha2 * w_hat_1_sq[k]
            + bound.alpha3 * w_tilde_0_sq[k];
        let margin = rhs + 0.1 * rhs + 1e-8 - ddot * ddot;
        checked += 1;
        if margin < 0.0 {
            violations += 1;
        }
        worst_margin = worst_margin.min(margin);
    }
    RateBoundReport {
        checked,
        violations,
        worst_margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::control_kernel;
    use crate::params::SystemParams;
    use crate::ProfileLabel;

    fn setup() -> (Grid, ControlKernel, TriggerParams) {
        let grid = Grid::new(81, 1.0 / 80.0).unwrap();
        let control = control_kernel(&SystemParams::reference(), grid.n_nodes);
        let tp = TriggerParams {
            eta: 1.0,
            sigma: 0.1,
            m0: -1e-4,
            rho: 48.3,
            beta1: 4.6,
            beta2: 2.3,
            beta3: 3.7,
        };
        (grid, control, tp)
    }

    #[test]
    fn control_of_zero_profile_is_zero() {
        let (grid, control, _) = setup();
        let zero = StateProfile::zeros(grid.n_nodes, ProfileLabel::Observer);
        assert_eq!(continuous_control(&zero, &control, &grid).unwrap(), 0.0);
    }

    #[test]
    fn control_is_linear_in_the_profile() {
        let (grid, control, _) = setup();
        let ones = StateProfile::new(vec![1.0; grid.n_nodes], ProfileLabel::Observer);
        let u1 = continuous_control(&ones, &control, &grid).unwrap();
        // A constant profile integrates the kernel itself.
        let k_int = trapezoid(&control.k, grid.h);
        assert!((u1 - k_int).abs() < 1e-14);
        let threes = StateProfile::new(vec![3.0; grid.n_nodes], ProfileLabel::Observer);
        let u3 = continuous_control(&threes, &control, &grid).unwrap();
        assert!((u3 - 3.0 * u1).abs() < 1e-12);
    }

    #[test]
    fn holding_error_zero_at_snapshot_and_equals_held_on_zero() {
        let (grid, control, tp) = setup();
        let uhat0 = StateProfile::new(
            (0..grid.n_nodes).map(|i| (grid.x(i) * 2.0).sin()).collect(),
            ProfileLabel::Observer,
        );
        let state = TriggerState::init(0.0, &uhat0, &control, &grid, &tp).unwrap();
        // Current profile equal to the snapshot: d = 0 exactly.
        let d0 = state.holding_error(&uhat0, &control, &grid).unwrap();
        assert_eq!(d0, 0.0);
        // Current profile identically zero: d = U_held.
        let zero = StateProfile::zeros(grid.n_nodes, ProfileLabel::Observer);
        let dz = state.holding_error(&zero, &control, &grid).unwrap();
        assert_eq!(dz, state.u_held);
    }

    #[test]
    fn m_step_homogeneous_decay() {
        let (grid, control, tp) = setup();
        let uhat0 = StateProfile::zeros(grid.n_nodes, ProfileLabel::Observer);
        let mut state = TriggerState::init(0.0, &uhat0, &control, &grid, &tp).unwrap();
        state.m = -1e-4;
        let m1 = state.step_m(0.0, 0.0, 0.0, 0.0, 0.00621, &tp);
        // m / (1 + dt eta) with eta = 1.
        assert!((m1 - (-1e-4 / 1.00621)).abs() < 1e-18);
        assert!(m1 < 0.0 && m1 > -1e-4);
    }

    #[test]
    fn m_step_sources_push_down() {
        let (grid, control, tp) = setup();
        let uhat0 = StateProfile::zeros(grid.n_nodes, ProfileLabel::Observer);
        let mut state = TriggerState::init(0.0, &uhat0, &control, &grid, &tp).unwrap();
        state.m = -1e-4;
        let homogeneous = -1e-4 / (1.0 + 0.00621 * tp.eta);
        let m1 = state.step_m(0.0, 0.5, 0.1, 0.2, 0.00621, &tp);
        assert!(m1 < homogeneous);
    }

    #[test]
    fn fire_rule_is_strict() {
        assert!(!should_fire(0.0, -1e-4).unwrap());
        assert!(should_fire(0.02, -1e-4).unwrap()); // 4e-4 > 1e-4
        // Boundary d^2 = -m exactly: no event.
        let m = -4e-4;
        assert!(!should_fire(0.02, m).unwrap());
        assert!(should_fire(0.02, -3.9e-4).unwrap());
    }

    #[test]
    fn nonnegative_m_aborts() {
        assert!(should_fire(0.1, 0.0).is_err());
        assert!(should_fire(0.1, 1e-9).is_err());
    }

    #[test]
    fn event_resets_d_and_preserves_m() {
        let (grid, control, tp) = setup();
        let uhat0 = StateProfile::new(
            (0..grid.n_nodes)
                .map(|i| grid.x(i) * (1.0 - grid.x(i)))
                .collect(),
            ProfileLabel::Observer,
        );
        let mut state = TriggerState::init(0.0, &uhat0, &control, &grid, &tp).unwrap();
        state.m = -5e-5;
        let uhat_now = StateProfile::new(
            uhat0.values.iter().map(|v| 0.5 * v).collect(),
            ProfileLabel::Observer,
        );
        let m_before = state.m;
        state.on_event(0.37, &uhat_now, &control, &grid).unwrap();
        assert_eq!(state.m, m_before);
        assert_eq!(state.d, 0.0);
        assert_eq!(
            state.holding_error(&uhat_now, &control, &grid).unwrap(),
            0.0
        );
        // Held input equals the continuous law on the event profile by
        // construction (the sampled law coincides with the continuous one at
        // event instants).
        assert_eq!(
            state.u_held,
            continuous_control(&uhat_now, &control, &grid).unwrap()
        );
        assert_eq!(state.events.len(), 2);
        assert!((state.events[1].gap - 0.37).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_value_composition() {
        assert_eq!(lyapunov_v(0.0, 0.0, -1e-4, 100.0, 460.0), 1e-4);
        let v = lyapunov_v(0.3, 0.2, -0.5, 2.0, 4.0);
        assert_eq!(v, 0.3 + 0.4 + 0.5);
        assert!(v > 0.0);
    }

    #[test]
    fn rate_bound_trivially_holds_on_zero_trajectory() {
        let bound = ErrorRateBound {
            rho1: 0.67,
            alpha1: 4.1,
            alpha2: 2.0,
            alpha3: 7.2,
        };
        let zeros = vec![0.0; 50];
        let no_events = vec![false; 50];
        let report = rate_bound_check(0.01, &zeros, &zeros, &zeros, &zeros, &no_events, &bound);
        assert_eq!(report.violations, 0);
        assert_eq!(report.checked, 48);
        assert!(report.worst_margin >= 0.0);
    }

    #[test]
    fn rate_bound_excludes_event_neighborhoods() {
        let bound = ErrorRateBound {
            rho1: 1.0,
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
        };
        // A jump in d at step 5 would register an enormous difference
        // quotient; flagging step 5 as an event must mask steps 4..=6.
        let mut d = vec![0.5; 10];
        for v in d.iter_mut().skip(5) {
            *v = 0.0;
        }
        let zeros = vec![0.0; 10];
        let mut events = vec![false; 10];
        events[5] = true;
        let report = rate_bound_check(0.01, &d, &zeros, &zeros, &zeros, &events, &bound);
        assert_eq!(report.violations, 0, "straddling samples not excluded");
        assert_eq!(report.checked, 5);
    }
}
