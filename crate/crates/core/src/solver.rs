//! Implicit-Euler finite-difference stepping of the plant and the observer.
//!
//! Space is discretized with second-order central differences on the uniform
//! grid; both boundary conditions enter through ghost nodes so the scheme
//! stays O(h^2) up to the walls:
//!
//! * sensed end x = 0: u_x = 0 for the plant, u-hat_x = p10 (y - u-hat(0))
//!   for the observer;
//! * actuated end x = 1: u_x + q u = U with the held input U.
//!
//! Each step is one tridiagonal solve. The output injection
//! p1(x)(y - u-hat(0)) is evaluated at the previous time level (the
//! measurement is a sample, and keeping the whole injected signal explicit
//! means an exact-agreement observer stays exactly on the plant). The
//! diffusion and reaction terms are implicit, so the step is stable for any
//! dt. Plant and observer share one matrix factorization: the injection
//! only touches the right-hand side.

use crate::error::{Error, Result};
use crate::grid::{Grid, StateProfile};
use crate::kernels::ObserverGains;
use crate::params::SystemParams;

/// Plant and observer profiles at one time instant.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub plant: StateProfile,
    pub observer: StateProfile,
}

/// Prefactorized tridiagonal system (Thomas algorithm).
#[derive(Debug, Clone)]
pub struct Tridiag {
    sub: Vec<f64>,
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl Tridiag {
    /// Factor the system with sub-diagonal `sub` (first entry unused),
    /// diagonal `diag` and super-diagonal `sup` (last entry unused).
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let n = diag.len();
        assert!(n >= 2 && sub.len() == n && sup.len() == n);
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut denom = diag[0];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::SolveBreakdown("zero pivot in first row".into()));
        }
        inv_denom[0] = 1.0 / denom;
        c_prime[0] = sup[0] * inv_denom[0];
        for i in 1..n {
            denom = diag[i] - sub[i] * c_prime[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::SolveBreakdown(format!("zero pivot in row {i}")));
            }
            inv_denom[i] = 1.0 / denom;
            if i < n - 1 {
                c_prime[i] = sup[i] * inv_denom[i];
            }
        }
        Ok(Self {
            sub: sub.to_vec(),
            c_prime,
            inv_denom,
        })
    }

    /// Solve into `out`; `out` may alias a scratch buffer but not `rhs`.
    pub fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.inv_denom.len());
        out[0] = rhs[0] * self.inv_denom[0];
        for i in 1..n {
            out[i] = (rhs[i] - self.sub[i] * out[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            out[i] -= self.c_prime[i] * out[i + 1];
        }
    }
}

/// Build (I - dt A) for u_t = eps u_xx + lambda u with the ghost-node
/// boundary rows described in the module docs.
fn implicit_matrix(grid: &Grid, params: &SystemParams) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = grid.n_nodes;
    let (h, dt) = (grid.h, grid.dt);
    let r = params.epsilon * dt / (h * h);
    let diag_main = 1.0 + 2.0 * r - params.lambda * dt;
    let mut sub = vec![-r; n];
    let mut diag = vec![diag_main; n];
    let mut sup = vec![-r; n];
    // x = 0, mirrored ghost: two super-diagonal contributions.
    sup[0] = -2.0 * r;
    sub[0] = 0.0;
    // x = 1, Robin ghost eliminated into the row.
    sub[n - 1] = -2.0 * r;
    diag[n - 1] = 1.0 + 2.0 * r * (1.0 + h * params.q) - params.lambda * dt;
    sup[n - 1] = 0.0;
    (sub, diag, sup)
}

/// One-step integrator for the plant under a held boundary input.
#[derive(Debug, Clone)]
pub struct PlantStepper {
    factor: Tridiag,
    /// dt * 2 eps / h, the weight of the held input in the last row.
    input_weight: f64,
    n: usize,
}

impl PlantStepper {
    pub fn new(grid: &Grid, params: &SystemParams) -> Result<Self> {
        let (sub, diag, sup) = implicit_matrix(grid, params);
        Ok(Self {
            factor: Tridiag::factor(&sub, &diag, &sup)?,
            input_weight: grid.dt * 2.0 * params.epsilon / grid.h,
            n: grid.n_nodes,
        })
    }

    /// Advance `u_old` by one step with the held input `u_held`, writing the
    /// new profile into `out`. `scratch` must be a buffer of grid length.
    pub fn step_into(&self, u_old: &[f64], u_held: f64, scratch: &mut Vec<f64>, out: &mut [f64]) {
        debug_assert_eq!(u_old.len(), self.n);
        scratch.clear();
        scratch.extend_from_slice(u_old);
        scratch[self.n - 1] += self.input_weight * u_held;
        self.factor.solve_into(scratch, out);
    }

    /// Profile-level convenience wrapper.
    pub fn step(&self, u: &StateProfile, u_held: f64) -> Result<StateProfile> {
        if u.len() != self.n {
            return Err(Error::GridMismatch(format!(
                "plant profile has {} nodes, stepper expects {}",
                u.len(),
                self.n
            )));
        }
        let mut scratch = Vec::with_capacity(self.n);
        let mut out = vec![0.0; self.n];
        self.step_into(&u.values, u_held, &mut scratch, &mut out);
        Ok(StateProfile::new(out, u.label))
    }
}

/// One-step integrator for the observer. Same implicit operator as the
/// plant; the anticollocated output injection p1(x)(y - u-hat(0)) and its
/// boundary counterpart enter the right-hand side at the previous time
/// level.
#[derive(Debug, Clone)]
pub struct ObserverStepper {
    factor: Tridiag,
    input_weight: f64,
    /// dt * p1(x_i): distributed injection weights.
    injection: Vec<f64>,
    /// -dt * 2 eps p10 / h: boundary injection weight in row 0.
    injection_row0: f64,
    n: usize,
}

impl ObserverStepper {
    pub fn new(grid: &Grid, params: &SystemParams, gains: &ObserverGains) -> Result<Self> {
        if gains.grid_n != grid.n_nodes {
            return Err(Error::GridMismatch(format!(
                "gains sampled on {} nodes, grid has {}",
                gains.grid_n, grid.n_nodes
            )));
        }
        let (sub, diag, sup) = implicit_matrix(grid, params);
        Ok(Self {
            factor: Tridiag::factor(&sub, &diag, &sup)?,
            input_weight: grid.dt * 2.0 * params.epsilon / grid.h,
            injection: gains.p1.iter().map(|p| grid.dt * p).collect(),
            injection_row0: -grid.dt * 2.0 * params.epsilon * gains.p10 / grid.h,
            n: grid.n_nodes,
        })
    }

    /// Advance the observer by one step. `y_meas` is the plant boundary
    /// sample u(0, t) taken at the beginning of the step.
    pub fn step_into(
        &self,
        uhat_old: &[f64],
        u_held: f64,
        y_meas: f64,
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) {
        debug_assert_eq!(uhat_old.len(), self.n);
        let inj = y_meas - uhat_old[0];
        scratch.clear();
        scratch.extend_from_slice(uhat_old);
        for (s, w) in scratch.iter_mut().zip(&self.injection) {
            *s += w * inj;
        }
        scratch[0] += self.injection_row0 * inj;
        scratch[self.n - 1] += self.input_weight * u_held;
        self.factor.solve_into(scratch, out);
    }

    pub fn step(&self, uhat: &StateProfile, u_held: f64, y_meas: f64) -> Result<StateProfile> {
        if uhat.len() != self.n {
            return Err(Error::GridMismatch(format!(
                "observer profile has {} nodes, stepper expects {}",
                uhat.len(),
                self.n
            )));
        }
        let mut scratch = Vec::with_capacity(self.n);
        let mut out = vec![0.0; self.n];
        self.step_into(&uhat.values, u_held, y_meas, &mut scratch, &mut out);
        Ok(StateProfile::new(out, uhat.label))
    }
}
