//! Artifact export: trajectory / event / trigger / histogram / kernel CSVs
//! and the JSON summary. All writers are deterministic: identical inputs
//! produce byte-identical files (floats are printed with the shortest
//! round-trip representation).

use crate::analysis::{dwell_time, CertificateSet};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::kernels::KernelTable;
use crate::sim::{RunResult, SweepResult, Trajectory};
use crate::trigger::EventRecord;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    std::fs::write(path, content).map_err(io_err)
}

/// Trajectory CSV: one row per kept step,
/// t, ||u||, ||u-hat||, ||u-tilde||, u(0,t), u-hat(1,t), U, d, m.
/// The final step is always kept.
pub fn trajectory_csv(traj: &Trajectory, decimation: usize) -> String {
    let mut out = String::from("t,norm_u,norm_uhat,norm_utilde,u_at_0,uhat_at_1,u_held,d,m\n");
    let last = traj.t.len().saturating_sub(1);
    for i in 0..traj.t.len() {
        if i % decimation != 0 && i != last {
            continue;
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            traj.t[i],
            traj.norm_u[i],
            traj.norm_uhat[i],
            traj.norm_utilde[i],
            traj.u_at_0[i],
            traj.uhat_at_1[i],
            traj.u_held[i],
            traj.d[i],
            traj.m[i],
        );
    }
    out
}

/// Event log CSV: index, event time, applied input, gap to the previous
/// event, m at the event. Never decimated.
pub fn events_csv(events: &[EventRecord]) -> String {
    let mut out = String::from("index,t,u_held,gap,m\n");
    for e in events {
        let _ = writeln!(out, "{},{},{},{},{}", e.index, e.t, e.u_held, e.gap, e.m);
    }
    out
}

/// Trigger trajectory CSV: t, d^2, -m (the two curves whose crossing fires
/// an event).
pub fn trigger_csv(traj: &Trajectory, decimation: usize) -> String {
    let mut out = String::from("t,d_sq,minus_m\n");
    let last = traj.t.len().saturating_sub(1);
    for i in 0..traj.t.len() {
        if i % decimation != 0 && i != last {
            continue;
        }
        let _ = writeln!(out, "{},{},{}", traj.t[i], traj.d[i] * traj.d[i], -traj.m[i]);
    }
    out
}

/// Inter-execution-time histogram on log10-spaced bins.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    /// bins + 1 edges, log10-spaced over [lo, hi].
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// counts / total.
    pub fraction: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bin positive values into `bins` log10-spaced buckets spanning [lo, hi];
/// values outside the span land in the edge buckets.
pub fn log_histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
    assert!(lo > 0.0 && hi > lo && bins > 0);
    let log_lo = lo.log10();
    let log_hi = hi.log10();
    let edges: Vec<f64> = (0..=bins)
        .map(|i| 10f64.powf(log_lo + (log_hi - log_lo) * i as f64 / bins as f64))
        .collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let frac = (v.log10() - log_lo) / (log_hi - log_lo);
        let idx = ((frac * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let total = values.len().max(1) as f64;
    let fraction = counts.iter().map(|c| *c as f64 / total).collect();
    Histogram {
        edges,
        counts,
        fraction,
    }
}

/// Histogram CSV: bin_lo, bin_hi, count, fraction. Header only when there
/// is nothing to bin.
pub fn histogram_csv(hist: Option<&Histogram>) -> String {
    let mut out = String::from("bin_lo,bin_hi,count,fraction\n");
    if let Some(h) = hist {
        for i in 0..h.counts.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                h.edges[i],
                h.edges[i + 1],
                h.counts[i],
                h.fraction[i]
            );
        }
    }
    out
}

/// Kernel dump CSV over the lower triangle: kind, x, y, value.
pub fn kernels_csv(tables: &[&KernelTable]) -> String {
    let mut out = String::from("kind,x,y,value\n");
    for table in tables {
        let h = table.h();
        for i in 0..table.grid_n {
            for j in 0..=i {
                let _ = writeln!(
                    out,
                    "{:?},{},{},{}",
                    table.kind,
                    i as f64 * h,
                    j as f64 * h,
                    table.value(i, j)
                );
            }
        }
    }
    out
}

/// Aggregate statistics of one run for the JSON summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub n_events: usize,
    pub min_gap: Option<f64>,
    pub final_norm_u: f64,
    pub final_norm_uhat: f64,
    pub final_norm_utilde: f64,
    pub warnings: Vec<String>,
}

impl RunStats {
    pub fn from_run(result: &RunResult) -> Self {
        let gaps = result.inter_execution_gaps();
        Self {
            steps: result.steps,
            n_events: result.events.len(),
            min_gap: gaps.iter().copied().reduce(f64::min),
            final_norm_u: *result.trajectory.norm_u.last().unwrap_or(&f64::NAN),
            final_norm_uhat: *result.trajectory.norm_uhat.last().unwrap_or(&f64::NAN),
            final_norm_utilde: *result.trajectory.norm_utilde.last().unwrap_or(&f64::NAN),
            warnings: result.warnings.clone(),
        }
    }
}

/// The JSON summary: the configuration it came from (so it can be re-run),
/// the certificates, and run statistics.
#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub config: &'a SimConfig,
    pub certificates: Option<&'a CertificateSet>,
    pub run: Option<RunStats>,
    pub sweeps: Vec<&'a SweepResult>,
}

pub fn summary_json(summary: &Summary<'_>) -> String {
    serde_json::to_string_pretty(summary).expect("summary serialization cannot fail")
}

/// One line of the built-in reference comparison.
#[derive(Debug, Clone, Serialize)]
pub struct RefCheck {
    pub name: &'static str,
    pub computed: f64,
    pub expected: f64,
    /// Relative tolerance, except for `rho` which is absolute 1e-9.
    pub tolerance: f64,
    pub relative: bool,
    pub ok: bool,
}

impl RefCheck {
    fn rel(name: &'static str, computed: f64, expected: f64, tolerance: f64) -> Self {
        let ok = (computed - expected).abs() <= tolerance * expected.abs();
        Self {
            name,
            computed,
            expected,
            tolerance,
            relative: true,
            ok,
        }
    }

    fn abs(name: &'static str, computed: f64, expected: f64, tolerance: f64) -> Self {
        let ok = (computed - expected).abs() <= tolerance;
        Self {
            name,
            computed,
            expected,
            tolerance,
            relative: false,
            ok,
        }
    }
}

/// Compare a certificate set against the published values of the reference
/// study (eps = 0.1, lambda = 0.25, q = 2.3, sigma = 0.1, kappa1 = 2.1,
/// B = 460). Three-significant-figure values get 3%, two-figure dwell
/// times 5%, and rho is closed-form arithmetic compared at 1e-9.
///
/// Only valid for the reference parameter set; anything else is an error.
pub fn reference_checks(certs: &CertificateSet) -> Result<Vec<RefCheck>> {
    let p = certs.params;
    let reference = crate::params::SystemParams::reference();
    if (p.epsilon - reference.epsilon).abs() > 1e-12
        || (p.lambda - reference.lambda).abs() > 1e-12
        || (p.q - reference.q).abs() > 1e-12
        || (certs.trigger.sigma - 0.1).abs() > 1e-12
    {
        return Err(Error::Config(
            "reference comparison requires eps = 0.1, lambda = 0.25, q = 2.3, sigma = 0.1".into(),
        ));
    }
    let b = &certs.bound;
    let t = &certs.trigger;
    let tau1 = dwell_time(b.rho1, t.rho, t.sigma, 1.0)?.tau;
    let tau100 = dwell_time(b.rho1, t.rho, t.sigma, 100.0)?.tau;
    Ok(vec![
        RefCheck::rel("alpha1", b.alpha1, 4.14, 0.03),
        RefCheck::rel("alpha2", b.alpha2, 2.07, 0.03),
        RefCheck::rel("alpha3", b.alpha3, 3.3, 0.03),
        RefCheck::rel("g_norm_sq", certs.g_norm_sq, 0.0297, 0.03),
        RefCheck::rel("beta1", t.beta1, 4.6, 0.03),
        RefCheck::rel("beta2", t.beta2, 2.3, 0.03),
        RefCheck::rel("beta3", t.beta3, 3.7, 0.03),
        RefCheck::abs("rho", t.rho, 48.3, 1e-9),
        RefCheck::rel("tau_eta_1", tau1, 2.2e-3, 0.05),
        RefCheck::rel("tau_eta_100", tau100, 7.2e-4, 0.05),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_sum_to_total() {
        let values = [0.15, 0.2, 1.0, 3.0, 9.9, 0.11, 5.0];
        let h = log_histogram(&values, 0.1, 10.0, 8);
        assert_eq!(h.total(), values.len() as u64);
        let frac_sum: f64 = h.fraction.iter().sum();
        assert!((frac_sum - 1.0).abs() < 1e-12);
        assert_eq!(h.edges.len(), 9);
    }

    #[test]
    fn histogram_clamps_outliers_into_edge_bins() {
        let h = log_histogram(&[0.01, 100.0], 0.1, 10.0, 4);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[3], 1);
    }

    #[test]
    fn empty_event_log_gives_header_only_histogram_csv() {
        assert_eq!(histogram_csv(None), "bin_lo,bin_hi,count,fraction\n");
    }

    #[test]
    fn trajectory_csv_keeps_last_row() {
        let mut traj = Trajectory::default();
        for i in 0..25 {
            traj.t.push(i as f64);
            traj.norm_u.push(0.0);
            traj.norm_uhat.push(0.0);
            traj.norm_utilde.push(0.0);
            traj.u_at_0.push(0.0);
            traj.uhat_at_1.push(0.0);
            traj.u_held.push(0.0);
            traj.d.push(0.0);
            traj.m.push(-1.0);
            traj.w_hat_norm_sq.push(0.0);
            traj.w_hat_1_sq.push(0.0);
            traj.w_tilde_0_sq.push(0.0);
            traj.event_step.push(false);
        }
        let csv = trajectory_csv(&traj, 10);
        let lines: Vec<&str> = csv.lines().collect();
        // Header + steps 0, 10, 20 + final step 24.
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("24,"));
    }
}
