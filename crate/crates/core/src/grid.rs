//! Uniform spatial grid on [0, 1], state profiles living on it, and the
//! discrete L2 norm.

use crate::error::{Error, Result};
use crate::quad::trapezoid;
use serde::{Deserialize, Serialize};

/// Uniform grid with `n_nodes` points on [0, 1] and a fixed time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n_nodes: usize,
    /// Spacing, 1 / (n_nodes - 1).
    pub h: f64,
    /// Time step in seconds.
    pub dt: f64,
}

impl Grid {
    pub fn new(n_nodes: usize, dt: f64) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 nodes, got {n_nodes}"
            )));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        Ok(Self {
            n_nodes,
            h: 1.0 / (n_nodes - 1) as f64,
            dt,
        })
    }

    /// Coordinate of node i.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }
}

/// Which physical field a profile represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileLabel {
    /// Plant state u.
    Plant,
    /// Observer state u-hat.
    Observer,
    /// Observer error u - u-hat.
    ObserverError,
    /// Backstepping image of the observer state (w-hat).
    TargetObserver,
    /// Backstepping image of the observer error (w-tilde).
    TargetError,
}

/// One spatial function sampled at the grid nodes at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateProfile {
    pub values: Vec<f64>,
    pub label: ProfileLabel,
}

impl StateProfile {
    pub fn new(values: Vec<f64>, label: ProfileLabel) -> Self {
        Self { values, label }
    }

    pub fn zeros(n: usize, label: ProfileLabel) -> Self {
        Self {
            values: vec![0.0; n],
            label,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Initial condition families used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum InitialCondition {
    /// 10 x^2 (x - 1)^2.
    PolyBump,
    /// 5 x^2 (x - 1)^2 + 5 x^3 (x - 1)^3.
    PolyBumpSkewed,
    /// x^2 (x - 1)^2 sin(mode * pi * x).
    SineBump { mode: u32 },
    /// factor * inner.
    Scaled { factor: f64, of: Box<InitialCondition> },
    /// Explicit node values; must match the grid length.
    Samples { values: Vec<f64> },
}

impl InitialCondition {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::PolyBump => 10.0 * x * x * (x - 1.0) * (x - 1.0),
            Self::PolyBumpSkewed => {
                let b = x * x * (x - 1.0) * (x - 1.0);
                5.0 * b + 5.0 * x * b * (x - 1.0)
            }
            Self::SineBump { mode } => {
                x * x * (x - 1.0) * (x - 1.0) * (*mode as f64 * std::f64::consts::PI * x).sin()
            }
            Self::Scaled { factor, of } => factor * of.eval(x),
            // Sample lists are expanded by init_profile, never pointwise.
            Self::Samples { .. } => f64::NAN,
        }
    }
}

/// Sample an initial condition on the grid.
pub fn init_profile(ic: &InitialCondition, grid: &Grid, label: ProfileLabel) -> Result<StateProfile> {
    match ic {
        InitialCondition::Samples { values } => {
            if values.len() != grid.n_nodes {
                return Err(Error::GridMismatch(format!(
                    "initial sample list has {} values, grid has {} nodes",
                    values.len(),
                    grid.n_nodes
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("non-finite initial sample".into()));
            }
            Ok(StateProfile::new(values.clone(), label))
        }
        InitialCondition::Scaled { factor, of } => {
            let mut inner = init_profile(of, grid, label)?;
            for v in &mut inner.values {
                *v *= factor;
            }
            Ok(inner)
        }
        _ => {
            let values = (0..grid.n_nodes).map(|i| ic.eval(grid.x(i))).collect();
            Ok(StateProfile::new(values, label))
        }
    }
}

/// Composite-trapezoid approximation of the L2(0,1) norm.
pub fn l2_norm(profile: &StateProfile, grid: &Grid) -> f64 {
    l2_norm_sq_values(&profile.values, grid.h).sqrt()
}

/// Squared L2 norm of raw node values.
#[inline]
pub fn l2_norm_sq_values(values: &[f64], h: f64) -> f64 {
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    trapezoid(&squares, h)
}
