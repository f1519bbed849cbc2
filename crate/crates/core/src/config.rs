//! Run configuration. The on-disk format is JSON with a fixed schema;
//! unknown keys are rejected so a typo fails loudly instead of silently
//! running defaults.

use crate::analysis::LyapunovCandidate;
use crate::error::{Error, Result};
use crate::grid::InitialCondition;
use crate::kernels::DEFAULT_QUAD_POINTS;
use crate::params::SystemParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// How the boundary input is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    /// U = 0; the plant runs free (no observer needed).
    OpenLoop,
    /// The control law is re-evaluated every time step.
    Continuous,
    /// The control law is sampled by the dynamic event trigger.
    EventTriggered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_nodes: usize,
    /// Time step; defaults to the spatial spacing h when omitted.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerConfig {
    pub eta: f64,
    pub sigma: f64,
    pub m0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcConfig {
    pub plant: InitialCondition,
    pub observer: InitialCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for CSV and JSON artifacts; none means no files.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Keep every n-th step in trajectory CSVs (event logs are never
    /// decimated).
    #[serde(default = "default_decimation")]
    pub decimation: usize,
}

fn default_decimation() -> usize {
    10
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            decimation: default_decimation(),
        }
    }
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub params: SystemParams,
    pub grid: GridConfig,
    /// Required for event-triggered mode; continuous mode falls back to the
    /// reference values when omitted, open loop ignores it.
    #[serde(default)]
    pub trigger: Option<TriggerConfig>,
    #[serde(default = "LyapunovCandidate::reference")]
    pub lyapunov: LyapunovCandidate,
    pub mode: ControllerMode,
    /// Simulated horizon in seconds.
    pub t_final: f64,
    pub initial_condition: IcConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Starting Gauss-Legendre order for the observer-kernel integrals.
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
}

fn default_quad_points() -> usize {
    DEFAULT_QUAD_POINTS
}

impl SimConfig {
    /// The configuration of the reference numerical study: eps = 0.1,
    /// lambda = 0.25, q = 2.3 on 162 nodes with dt = h, eta = 1,
    /// sigma = 0.1, m(0) = -1e-4, event-triggered over 150 s.
    pub fn reference() -> Self {
        Self {
            params: SystemParams::reference(),
            grid: GridConfig {
                n_nodes: 162,
                dt: None,
            },
            trigger: Some(TriggerConfig {
                eta: 1.0,
                sigma: 0.1,
                m0: -1e-4,
            }),
            lyapunov: LyapunovCandidate::reference(),
            mode: ControllerMode::EventTriggered,
            t_final: 150.0,
            initial_condition: IcConfig {
                plant: InitialCondition::PolyBump,
                observer: InitialCondition::PolyBumpSkewed,
            },
            output: OutputConfig::default(),
            quad_points: DEFAULT_QUAD_POINTS,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.grid.n_nodes < 3 {
            return Err(Error::Config(format!(
                "grid.n_nodes must be at least 3, got {}",
                self.grid.n_nodes
            )));
        }
        if let Some(dt) = self.grid.dt {
            if !dt.is_finite() || dt <= 0.0 {
                return Err(Error::Config(format!("grid.dt must be > 0, got {dt}")));
            }
        }
        if !self.t_final.is_finite() || self.t_final <= 0.0 {
            return Err(Error::Config(format!(
                "t_final must be > 0, got {}",
                self.t_final
            )));
        }
        if self.output.decimation == 0 {
            return Err(Error::Config("output.decimation must be >= 1".into()));
        }
        if self.quad_points < 2 {
            return Err(Error::Config(format!(
                "quad_points must be >= 2, got {}",
                self.quad_points
            )));
        }
        match (self.mode, &self.trigger) {
            (ControllerMode::EventTriggered, None) => Err(Error::Config(
                "event_triggered mode requires the trigger section (eta, sigma, m0)".into(),
            )),
            (_, Some(t)) => {
                if !(t.sigma > 0.0 && t.sigma < 1.0) {
                    return Err(Error::Config(format!(
                        "trigger.sigma must lie in (0,1), got {}",
                        t.sigma
                    )));
                }
                if !t.eta.is_finite() || t.eta <= 0.0 {
                    return Err(Error::Config(format!(
                        "trigger.eta must be > 0, got {}",
                        t.eta
                    )));
                }
                if !t.m0.is_finite() || t.m0 >= 0.0 {
                    return Err(Error::Config(format!(
                        "trigger.m0 must be < 0, got {}",
                        t.m0
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Effective trigger settings (reference fallback outside
    /// event-triggered mode).
    pub fn trigger_or_default(&self) -> TriggerConfig {
        self.trigger.unwrap_or(TriggerConfig {
            eta: 1.0,
            sigma: 0.1,
            m0: -1e-4,
        })
    }

    /// Effective time step: configured value or the grid spacing.
    pub fn effective_dt(&self) -> f64 {
        self.grid
            .dt
            .unwrap_or(1.0 / (self.grid.n_nodes - 1) as f64)
    }
}
