//! Closed-form backstepping gain kernels and everything derived from them.
//!
//! Four kernels appear, all supported on the lower triangle
//! 0 <= y <= x <= 1:
//!
//! * K, L: the controller pair. w-hat = (I - K) u-hat maps the observer onto
//!   a damped Robin target system; L inverts the map.
//! * P, Q: the observer pair. u-tilde = (I - P) w-tilde maps the observer
//!   error onto a pure heat equation; Q inverts the map.
//!
//! K and L are single Bessel ratios. P and Q add an integral over an
//! exponentially weighted sinh profile, evaluated here by Gauss-Legendre
//! with automatic order doubling.
//!
//! Everything is expressed through [`bessel_ratio`], which is entire in
//! w = z^2, so kernels extend smoothly across the triangle diagonal. The
//! finite-difference stencils of the residual checks and the observer-gain
//! derivative exploit that extension.

use crate::bessel::bessel_ratio;
use crate::error::{Error, Result};
use crate::grid::StateProfile;
use crate::params::SystemParams;
use crate::quad::{integrate_refining, trapezoid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default Gauss-Legendre order for the P and Q integrals.
pub const DEFAULT_QUAD_POINTS: usize = 64;
/// Absolute tolerance for the automatic quadrature refinement.
const QUAD_TOL: f64 = 1e-10;
/// Base step of the Richardson-extrapolated derivative in the observer gain.
const GAIN_FD_STEP: f64 = 1e-5;

/// Which gain kernel a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    P,
    Q,
    K,
    L,
}

fn check_triangle(x: f64, y: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) || y < 0.0 || y > x {
        return Err(Error::Domain(format!(
            "kernel argument ({x}, {y}) outside the triangle 0 <= y <= x <= 1"
        )));
    }
    Ok(())
}

/// Controller kernel K(x,y) = -(lambda/eps) x I1(z)/z, z = sqrt(lambda (x^2 - y^2) / eps).
pub fn eval_kernel_k(x: f64, y: f64, params: &SystemParams) -> Result<f64> {
    check_triangle(x, y)?;
    Ok(kernel_k_ext(x, y, params))
}

/// Controller inverse kernel L(x,y), the J-Bessel analogue of K.
pub fn eval_kernel_l(x: f64, y: f64, params: &SystemParams) -> Result<f64> {
    check_triangle(x, y)?;
    Ok(kernel_l_ext(x, y, params))
}

/// Observer kernel P(x,y): sinh-weighted integral plus an I1 ratio term.
pub fn eval_kernel_p(x: f64, y: f64, params: &SystemParams, quad_points: usize) -> Result<f64> {
    check_triangle(x, y)?;
    kernel_p_ext(x, y, params, quad_points)
}

/// Observer inverse kernel Q(x,y), the J-Bessel analogue of P.
///
/// Requires q^2 > lambda/eps so the sinh frequency is real; that is implied
/// by the standing assumption but guarded anyway.
pub fn eval_kernel_q(x: f64, y: f64, params: &SystemParams, quad_points: usize) -> Result<f64> {
    check_triangle(x, y)?;
    kernel_q_ext(x, y, params, quad_points)
}

pub(crate) fn kernel_k_ext(x: f64, y: f64, params: &SystemParams) -> f64 {
    let c = params.reaction_ratio();
    -c * x * bessel_ratio(1, c * (x * x - y * y))
}

pub(crate) fn kernel_l_ext(x: f64, y: f64, params: &SystemParams) -> f64 {
    let c = params.reaction_ratio();
    -c * x * bessel_ratio(1, -(c * (x * x - y * y)))
}

/// dK/dx, analytic via d/dz [I1(z)/z] = I2(z)/z.
pub fn kernel_k_dx(x: f64, y: f64, params: &SystemParams) -> f64 {
    let c = params.reaction_ratio();
    let w = c * (x * x - y * y);
    -c * bessel_ratio(1, w) - c * c * x * x * bessel_ratio(2, w)
}

pub(crate) fn kernel_p_ext(
    x: f64,
    y: f64,
    params: &SystemParams,
    quad_points: usize,
) -> Result<f64> {
    let c = params.reaction_ratio();
    let q = params.q;
    let s = (c + q * q).sqrt();
    let upper = x - y;
    let integral = if upper == 0.0 {
        0.0
    } else {
        integrate_refining(
            0.0,
            upper,
            &|tau| {
                (-0.5 * q * tau).exp()
                    * bessel_ratio(0, c * (2.0 - x - y) * (upper - tau))
                    * (0.5 * s * tau).sinh()
            },
            quad_points,
            QUAD_TOL,
        )?
    };
    let v = c * ((1.0 - y) * (1.0 - y) - (1.0 - x) * (1.0 - x));
    Ok(q * c / s * integral - c * (1.0 - y) * bessel_ratio(1, v))
}

pub(crate) fn kernel_q_ext(
    x: f64,
    y: f64,
    params: &SystemParams,
    quad_points: usize,
) -> Result<f64> {
    let c = params.reaction_ratio();
    let q = params.q;
    let disc = q * q - c;
    if disc <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "inverse observer kernel needs q^2 > lambda/eps, got q^2 = {} vs {}",
            q * q,
            c
        )));
    }
    let s = disc.sqrt();
    let upper = x - y;
    let integral = if upper == 0.0 {
        0.0
    } else {
        integrate_refining(
            0.0,
            upper,
            &|tau| {
                (-0.5 * q * tau).exp()
                    * bessel_ratio(0, -(c * (2.0 - x - y) * (upper - tau)))
                    * (0.5 * s * tau).sinh()
            },
            quad_points,
            QUAD_TOL,
        )?
    };
    let v = c * ((1.0 - y) * (1.0 - y) - (1.0 - x) * (1.0 - x));
    Ok(q * c / s * integral - c * (1.0 - y) * bessel_ratio(1, -v))
}

fn eval_ext(kind: KernelKind, x: f64, y: f64, params: &SystemParams, quad_points: usize) -> Result<f64> {
    match kind {
        KernelKind::K => Ok(kernel_k_ext(x, y, params)),
        KernelKind::L => Ok(kernel_l_ext(x, y, params)),
        KernelKind::P => kernel_p_ext(x, y, params, quad_points),
        KernelKind::Q => kernel_q_ext(x, y, params, quad_points),
    }
}

/// A kernel sampled on the lower-triangular grid. Immutable after
/// construction; rows above the diagonal are zero and unused.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub kind: KernelKind,
    pub grid_n: usize,
    pub quad_points: usize,
    values: Vec<f64>,
}

impl KernelTable {
    /// Sample the kernel at every node pair (x_i, y_j), y_j <= x_i.
    /// Rows are independent, so they are filled in parallel.
    pub fn build(
        kind: KernelKind,
        params: &SystemParams,
        grid_n: usize,
        quad_points: usize,
    ) -> Result<Self> {
        if grid_n < 2 {
            return Err(Error::InvalidParameter(format!(
                "kernel table needs at least 2 nodes, got {grid_n}"
            )));
        }
        let h = 1.0 / (grid_n - 1) as f64;
        let rows: Result<Vec<Vec<f64>>> = (0..grid_n)
            .into_par_iter()
            .map(|i| {
                let x = i as f64 * h;
                let mut row = vec![0.0; grid_n];
                for (j, slot) in row.iter_mut().enumerate().take(i + 1) {
                    let y = j as f64 * h;
                    *slot = eval_ext(kind, x, y, params, quad_points)?;
                }
                Ok(row)
            })
            .collect();
        let values = rows?.into_iter().flatten().collect();
        Ok(Self {
            kind,
            grid_n,
            quad_points,
            values,
        })
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i, "kernel tables only cover the lower triangle");
        self.values[i * self.grid_n + j]
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.grid_n - 1) as f64
    }

    /// Double integral of the squared kernel over the triangle, by nested
    /// trapezoid quadrature.
    pub fn square_integral(&self) -> f64 {
        let h = self.h();
        let inner: Vec<f64> = (0..self.grid_n)
            .map(|i| {
                let sq: Vec<f64> = (0..=i).map(|j| self.value(i, j).powi(2)).collect();
                trapezoid(&sq, h)
            })
            .collect();
        trapezoid(&inner, h)
    }
}

/// Whether the Volterra integral is subtracted (forward transforms) or
/// added (inverse transforms).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolterraDirection {
    Subtract,
    Add,
}

/// w(x_i) = u(x_i) -/+ integral_0^{x_i} kernel(x_i, y) u(y) dy with
/// composite-trapezoid weights on each row.
pub fn apply_volterra(
    direction: VolterraDirection,
    table: &KernelTable,
    profile: &StateProfile,
) -> Result<StateProfile> {
    if profile.len() != table.grid_n {
        return Err(Error::GridMismatch(format!(
            "profile has {} nodes, kernel table {}",
            profile.len(),
            table.grid_n
        )));
    }
    let op = VolterraOp::from_table(table, direction);
    let mut out = vec![0.0; table.grid_n];
    op.apply(&profile.values, &mut out);
    Ok(StateProfile::new(out, profile.label))
}

/// Pre-weighted lower-triangular matrix form of a Volterra transform, for
/// the per-step use inside the simulation loop: one O(n^2) matrix-vector
/// product, no allocation.
#[derive(Debug, Clone)]
pub struct VolterraOp {
    grid_n: usize,
    sign: f64,
    weighted: Vec<f64>,
}

impl VolterraOp {
    pub fn from_table(table: &KernelTable, direction: VolterraDirection) -> Self {
        let n = table.grid_n;
        let h = table.h();
        let mut weighted = vec![0.0; n * n];
        for i in 1..n {
            for j in 0..=i {
                let w = if j == 0 || j == i { 0.5 * h } else { h };
                weighted[i * n + j] = w * table.value(i, j);
            }
        }
        let sign = match direction {
            VolterraDirection::Subtract => -1.0,
            VolterraDirection::Add => 1.0,
        };
        Self {
            grid_n: n,
            sign,
            weighted,
        }
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn apply(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.grid_n);
        debug_assert_eq!(out.len(), self.grid_n);
        out[0] = values[0];
        for i in 1..self.grid_n {
            let row = &self.weighted[i * self.grid_n..i * self.grid_n + i + 1];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(values) {
                acc += w * v;
            }
            out[i] = values[i] + self.sign * acc;
        }
    }
}

/// Output-injection gains of the observer: the distributed gain
/// p1(x) = eps dP/dy (x, 0) and the boundary gain p10 = -lambda / (2 eps).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObserverGains {
    pub p1: Vec<f64>,
    pub p10: f64,
    pub grid_n: usize,
}

/// p1 by Richardson-extrapolated central differences of the closed-form P
/// in y at y = 0, using the analytic extension for y < 0. The base step is
/// 1e-5; one halving plus extrapolation leaves an O(h^4) remainder far below
/// the quadrature tolerance.
pub fn observer_gains(
    params: &SystemParams,
    grid_n: usize,
    quad_points: usize,
) -> Result<ObserverGains> {
    let h = 1.0 / (grid_n - 1) as f64;
    let p1: Result<Vec<f64>> = (0..grid_n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * h;
            let d1 = central_dy_p(x, GAIN_FD_STEP, params, quad_points)?;
            let d2 = central_dy_p(x, 0.5 * GAIN_FD_STEP, params, quad_points)?;
            Ok(params.epsilon * (4.0 * d2 - d1) / 3.0)
        })
        .collect();
    Ok(ObserverGains {
        p1: p1?,
        p10: -params.lambda / (2.0 * params.epsilon),
        grid_n,
    })
}

fn central_dy_p(x: f64, step: f64, params: &SystemParams, quad_points: usize) -> Result<f64> {
    let plus = kernel_p_ext(x, step, params, quad_points)?;
    let minus = kernel_p_ext(x, -step, params, quad_points)?;
    Ok((plus - minus) / (2.0 * step))
}

/// The scalar control kernel k(y) = r K(1,y) + K_x(1,y) together with its
/// first two derivatives, sampled on the grid.
///
/// All three are closed forms in the Bessel ratios F_nu(w) = I_nu(z)/z^nu,
/// w = lambda (1 - y^2) / eps, obtained from d/dz [I_nu(z)/z^nu] =
/// I_{nu+1}(z)/z^nu (equivalently dF_nu/dw = F_{nu+1}/2):
///
///   k   = -(r+1) c F1 - c^2 F2
///   k'  = c^2 y [ (r+1) F2 + c F3 ]
///   k'' = c^2 [ (r+1) F2 + c F3 ] - c^3 y^2 [ (r+1) F3 + c F4 ]
///
/// with c = lambda/eps. In particular k'(0) = 0 identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlKernel {
    pub r: f64,
    pub k: Vec<f64>,
    pub k_prime: Vec<f64>,
    pub k_double_prime: Vec<f64>,
    pub grid_n: usize,
}

impl ControlKernel {
    pub fn k_at_0(&self) -> f64 {
        self.k[0]
    }
    pub fn k_at_1(&self) -> f64 {
        *self.k.last().expect("control kernel is never empty")
    }
    pub fn k_prime_at_1(&self) -> f64 {
        *self.k_prime.last().expect("control kernel is never empty")
    }
    /// sqrt of the trapezoid integral of k^2, the Cauchy-Schwarz constant
    /// bounding |U| by ||u-hat||.
    pub fn norm(&self) -> f64 {
        let h = 1.0 / (self.grid_n - 1) as f64;
        let sq: Vec<f64> = self.k.iter().map(|v| v * v).collect();
        trapezoid(&sq, h).sqrt()
    }
}

pub fn control_kernel(params: &SystemParams, grid_n: usize) -> ControlKernel {
    let c = params.reaction_ratio();
    let r = params.target_robin();
    let h = 1.0 / (grid_n - 1) as f64;
    let mut k = Vec::with_capacity(grid_n);
    let mut k_prime = Vec::with_capacity(grid_n);
    let mut k_double_prime = Vec::with_capacity(grid_n);
    for i in 0..grid_n {
        let y = i as f64 * h;
        let w = c * (1.0 - y * y);
        let f1 = bessel_ratio(1, w);
        let f2 = bessel_ratio(2, w);
        let f3 = bessel_ratio(3, w);
        let f4 = bessel_ratio(4, w);
        k.push(-(r + 1.0) * c * f1 - c * c * f2);
        k_prime.push(c * c * y * ((r + 1.0) * f2 + c * f3));
        k_double_prime
            .push(c * c * ((r + 1.0) * f2 + c * f3) - c.powi(3) * y * y * ((r + 1.0) * f3 + c * f4));
    }
    ControlKernel {
        r,
        k,
        k_prime,
        k_double_prime,
        grid_n,
    }
}

/// The coupling field of the controlled target system,
/// g(x) = p1(x) - (lambda/2) K(x,0) - integral_0^x K(x,y) p1(y) dy,
/// with its squared L2 norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainField {
    pub g: Vec<f64>,
    pub norm_sq: f64,
    pub grid_n: usize,
}

pub fn eval_g(params: &SystemParams, gains: &ObserverGains, grid_n: usize) -> Result<GainField> {
    if gains.grid_n != grid_n {
        return Err(Error::GridMismatch(format!(
            "gains sampled on {} nodes, requested {}",
            gains.grid_n, grid_n
        )));
    }
    let h = 1.0 / (grid_n - 1) as f64;
    let mut g = Vec::with_capacity(grid_n);
    for i in 0..grid_n {
        let x = i as f64 * h;
        let k_row: Vec<f64> = (0..=i)
            .map(|j| kernel_k_ext(x, j as f64 * h, params))
            .collect();
        let prods: Vec<f64> = k_row.iter().zip(&gains.p1).map(|(k, p)| k * p).collect();
        let volterra = trapezoid(&prods, h);
        g.push(gains.p1[i] - 0.5 * params.lambda * k_row[0] - volterra);
    }
    let sq: Vec<f64> = g.iter().map(|v| v * v).collect();
    let norm_sq = trapezoid(&sq, h);
    Ok(GainField { g, norm_sq, grid_n })
}

/// Report from checking a closed-form kernel against its defining PDE by
/// second-order finite differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub kind: KernelKind,
    pub grid_n: usize,
    /// Worst wave-operator residual over interior triangle points.
    pub max_interior: f64,
    /// Worst lateral boundary-condition violation (Neumann for K, Robin for P).
    pub max_boundary: f64,
    /// Worst diagonal trace violation (closed form is exact there).
    pub max_trace: f64,
}

/// Evaluate the kernel PDE residual for K or P.
///
/// K must satisfy K_xx - K_yy = (lambda/eps) K with K_y(x,0) = 0 and
/// K(x,x) = -(lambda/2eps) x; P must satisfy P_xx - P_yy = -(lambda/eps) P
/// with P_x(1,y) = -q P(1,y) and P(x,x) = (lambda/2eps)(x-1). Stencils near
/// the diagonal reach across it via the analytic extension.
pub fn kernel_pde_residual(
    kind: KernelKind,
    params: &SystemParams,
    grid_n: usize,
    quad_points: usize,
) -> Result<ResidualReport> {
    if grid_n < 41 {
        return Err(Error::InvalidParameter(format!(
            "residual check needs grid_n >= 41, got {grid_n}"
        )));
    }
    let (sign, is_p) = match kind {
        KernelKind::K => (1.0, false),
        KernelKind::P => (-1.0, true),
        other => {
            return Err(Error::InvalidParameter(format!(
                "residual check covers K and P, not {other:?}"
            )))
        }
    };
    let c = params.reaction_ratio();
    let h = 1.0 / (grid_n - 1) as f64;
    let eval = |x: f64, y: f64| -> Result<f64> {
        if is_p {
            kernel_p_ext(x, y, params, quad_points)
        } else {
            Ok(kernel_k_ext(x, y, params))
        }
    };

    let interior: Result<Vec<f64>> = (1..grid_n - 1)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * h;
            let mut worst = 0.0_f64;
            for j in 1..=i {
                let y = j as f64 * h;
                if y > x {
                    break;
                }
                let center = eval(x, y)?;
                let kxx = (eval(x + h, y)? - 2.0 * center + eval(x - h, y)?) / (h * h);
                let kyy = (eval(x, y + h)? - 2.0 * center + eval(x, y - h)?) / (h * h);
                let res = kxx - kyy - sign * c * center;
                worst = worst.max(res.abs());
            }
            Ok(worst)
        })
        .collect();
    let max_interior = interior?.into_iter().fold(0.0_f64, f64::max);

    let mut max_boundary = 0.0_f64;
    for idx in 0..grid_n {
        let t = idx as f64 * h;
        let violation = if is_p {
            // Robin condition at the actuated end: P_x(1,y) + q P(1,y).
            let px = (eval(1.0 + h, t)? - eval(1.0 - h, t)?) / (2.0 * h);
            px + params.q * eval(1.0, t)?
        } else {
            // Neumann condition at the sensed end: K_y(x,0).
            (eval(t, h)? - eval(t, -h)?) / (2.0 * h)
        };
        max_boundary = max_boundary.max(violation.abs());
    }

    let mut max_trace = 0.0_f64;
    for i in 0..grid_n {
        let x = i as f64 * h;
        let want = if is_p {
            0.5 * c * (x - 1.0)
        } else {
            -0.5 * c * x
        };
        max_trace = max_trace.max((eval(x, x)? - want).abs());
    }

    Ok(ResidualReport {
        kind,
        grid_n,
        max_interior,
        max_boundary,
        max_trace,
    })
}

/// Amplification constants of the inverse transforms used by the
/// convergence estimate: (1 + sqrt(double integral of kernel^2))^2 for each
/// of P and L.
pub fn transform_norm_bounds(table_p: &KernelTable, table_l: &KernelTable) -> (f64, f64) {
    let amp = |t: &KernelTable| (1.0 + t.square_integral().sqrt()).powi(2);
    (amp(table_p), amp(table_l))
}
