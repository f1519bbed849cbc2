//! Command-line front end: single runs, initial-condition sweeps,
//! certificate reports, kernel dumps and the self-validation suite.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rdetc::analysis::compute_certificates;
use rdetc::config::{ControllerMode, SimConfig};
use rdetc::grid::{init_profile, InitialCondition, ProfileLabel};
use rdetc::kernels::{
    apply_volterra, kernel_pde_residual, KernelKind, KernelTable, VolterraDirection,
};
use rdetc::params::SystemParams;
use rdetc::report;
use rdetc::sim::{precompute, run_simulation, run_sweep, run_with};
use rdetc::trigger::rate_bound_check;
use rdetc::Grid;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "rdetc",
    about = "Event-triggered backstepping boundary control of a 1-D reaction-diffusion PDE",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[clap(rename_all = "snake_case")]
enum ModeArg {
    OpenLoop,
    Continuous,
    /// Event-triggered control.
    Etc,
}

impl From<ModeArg> for ControllerMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::OpenLoop => ControllerMode::OpenLoop,
            ModeArg::Continuous => ControllerMode::Continuous,
            ModeArg::Etc => ControllerMode::EventTriggered,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and export trajectory, event and trigger CSVs
    /// plus a JSON summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the controller mode from the config.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Override the output directory (default: config value or ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Batch sweep over the sine-bump initial-condition family, pooling
    /// inter-execution times per eta.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Number of initial conditions (modes 1..=n).
        #[arg(long, default_value_t = 100)]
        n: u32,
        /// Comma-separated list of eta values; default: the config value.
        #[arg(long)]
        eta: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the full certificate set and print it as JSON.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Compare against the built-in reference values and exit nonzero
        /// on any mismatch beyond tolerance.
        #[arg(long)]
        check_paper: bool,
    },
    /// Sample the four gain kernels on the triangle and dump them as CSV.
    Kernels {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        lam: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 161)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        /// Starting Gauss-Legendre order for the P/Q integrals.
        #[arg(long, default_value_t = 64)]
        quad: usize,
    },
    /// Run the built-in verification checks; exit 0 only if all pass.
    Validate {
        /// Kernel checks: PDE residuals, traces, inverse-pair round trips.
        #[arg(long)]
        kernels: bool,
        /// Trigger checks: invariants along a closed-loop run.
        #[arg(long)]
        trigger: bool,
        /// Everything (default when no flag is given).
        #[arg(long)]
        all: bool,
    },
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, mode, out } => simulate(&config, mode, out),
        Command::Sweep {
            config,
            n,
            eta,
            out,
        } => sweep(&config, n, eta.as_deref(), out),
        Command::Analyze {
            config,
            check_paper,
        } => analyze(&config, check_paper),
        Command::Kernels {
            eps,
            lam,
            q,
            grid,
            out,
            quad,
        } => kernels(eps, lam, q, grid, &out, quad),
        Command::Validate {
            kernels,
            trigger,
            all,
        } => {
            let everything = all || (!kernels && !trigger);
            validate(everything || kernels, everything || trigger)
        }
    }
}

fn out_dir(cfg: &SimConfig, cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn simulate(config: &Path, mode: Option<ModeArg>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = SimConfig::load(config).context("loading config")?;
    if let Some(m) = mode {
        cfg.mode = m.into();
        cfg.validate()?;
    }
    let dir = out_dir(&cfg, out);
    let pre = precompute(&cfg)?;
    let result = run_with(
        &pre,
        &cfg,
        &cfg.initial_condition.plant,
        &cfg.initial_condition.observer,
    )?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let dec = cfg.output.decimation;
    report::write_file(
        &dir.join("trajectory.csv"),
        &report::trajectory_csv(&result.trajectory, dec),
    )?;
    report::write_file(&dir.join("events.csv"), &report::events_csv(&result.events))?;
    report::write_file(
        &dir.join("trigger.csv"),
        &report::trigger_csv(&result.trajectory, dec),
    )?;
    let certs = pre.closed_loop.as_ref().map(|cl| &cl.certs);
    let summary = report::Summary {
        config: &cfg,
        certificates: certs,
        run: Some(report::RunStats::from_run(&result)),
        sweeps: Vec::new(),
    };
    report::write_file(&dir.join("summary.json"), &report::summary_json(&summary))?;
    println!(
        "{} steps, {} events, final ||u|| = {:.3e}; artifacts in {}",
        result.steps,
        result.events.len(),
        result.trajectory.norm_u.last().unwrap_or(&f64::NAN),
        dir.display()
    );
    Ok(())
}

fn sweep(config: &Path, n: u32, eta_list: Option<&str>, out: Option<PathBuf>) -> Result<()> {
    let cfg = SimConfig::load(config).context("loading config")?;
    let dir = out_dir(&cfg, out);
    let etas: Vec<f64> = match eta_list {
        Some(list) => list
            .split(',')
            .map(|tok| tok.trim().parse::<f64>().context("parsing --eta"))
            .collect::<Result<_>>()?,
        None => vec![cfg.trigger_or_default().eta],
    };
    let mut all_ok = true;
    let mut sweeps = Vec::new();
    for eta in etas {
        let mut run_cfg = cfg.clone();
        let mut tc = run_cfg.trigger_or_default();
        tc.eta = eta;
        run_cfg.trigger = Some(tc);
        let result = run_sweep(&run_cfg, n)?;
        let hist = if result.gaps.is_empty() {
            None
        } else {
            Some(report::log_histogram(
                &result.gaps,
                result.tau / 10.0,
                cfg.t_final,
                40,
            ))
        };
        let tag = format!("{eta}");
        report::write_file(
            &dir.join(format!("gaps_eta_{tag}.csv")),
            &gaps_csv(&result.gaps),
        )?;
        report::write_file(
            &dir.join(format!("histogram_eta_{tag}.csv")),
            &report::histogram_csv(hist.as_ref()),
        )?;
        let min_ok = result.gaps.is_empty() || result.min_gap >= result.tau;
        println!(
            "eta = {eta}: {} runs, {} events, gaps in [{:.4e}, {:.4e}] s, tau = {:.4e} s, min-gap >= tau: {}",
            result.n_runs,
            result.events_total,
            result.min_gap,
            result.max_gap,
            result.tau,
            if min_ok { "yes" } else { "VIOLATED" },
        );
        all_ok &= min_ok;
        sweeps.push(result);
    }
    let summary = report::Summary {
        config: &cfg,
        certificates: None,
        run: None,
        sweeps: sweeps.iter().collect(),
    };
    report::write_file(&dir.join("sweep_summary.json"), &report::summary_json(&summary))?;
    if !all_ok {
        bail!("a pooled inter-execution gap fell below the minimal dwell-time");
    }
    Ok(())
}

fn gaps_csv(gaps: &[f64]) -> String {
    let mut out = String::from("gap\n");
    for g in gaps {
        out.push_str(&format!("{g}\n"));
    }
    out
}

fn analyze(config: &Path, check_paper: bool) -> Result<()> {
    let cfg = SimConfig::load(config).context("loading config")?;
    let tc = cfg.trigger_or_default();
    let certs = compute_certificates(
        &cfg.params,
        cfg.grid.n_nodes,
        cfg.quad_points,
        tc.sigma,
        tc.eta,
        tc.m0,
        &cfg.lyapunov,
    )?;
    println!("{}", serde_json::to_string_pretty(&certs)?);
    if check_paper {
        let checks = report::reference_checks(&certs)?;
        let mut failures = 0;
        for c in &checks {
            let tol = if c.relative {
                format!("{}%", c.tolerance * 100.0)
            } else {
                format!("{:e} abs", c.tolerance)
            };
            eprintln!(
                "{}: computed {:.6} vs reference {:.6} (tol {tol}) ... {}",
                c.name,
                c.computed,
                c.expected,
                if c.ok { "ok" } else { "MISMATCH" }
            );
            if !c.ok {
                failures += 1;
            }
        }
        if failures > 0 {
            bail!("{failures} reference value(s) outside tolerance");
        }
    }
    Ok(())
}

fn kernels(eps: f64, lam: f64, q: f64, grid: usize, out: &Path, quad: usize) -> Result<()> {
    let params = SystemParams::new(eps, lam, q)?;
    let mut tables = Vec::new();
    for kind in [KernelKind::P, KernelKind::Q, KernelKind::K, KernelKind::L] {
        tables.push(KernelTable::build(kind, &params, grid, quad)?);
    }
    let refs: Vec<&KernelTable> = tables.iter().collect();
    report::write_file(out, &report::kernels_csv(&refs))?;
    println!("wrote {} kernel samples to {}", grid * (grid + 1) * 2, out.display());
    Ok(())
}

fn validate(check_kernels: bool, check_trigger: bool) -> Result<()> {
    let mut failures = 0;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };
    let params = SystemParams::reference();

    if check_kernels {
        for kind in [KernelKind::K, KernelKind::P] {
            let coarse = kernel_pde_residual(kind, &params, 81, 64)?;
            let fine = kernel_pde_residual(kind, &params, 161, 64)?;
            let ratio = coarse.max_interior / fine.max_interior;
            check(
                "kernel pde residual order",
                (3.0..=5.0).contains(&ratio),
                format!("{kind:?}: interior residual ratio 81/161 = {ratio:.2}"),
            );
            check(
                "kernel diagonal trace",
                fine.max_trace <= 1e-10,
                format!("{kind:?}: worst trace violation {:.2e}", fine.max_trace),
            );
            check(
                "kernel boundary condition",
                fine.max_boundary <= 1e-4,
                format!("{kind:?}: worst boundary violation {:.2e}", fine.max_boundary),
            );
        }
        let n = 161;
        let grid = Grid::new(n, 1.0)?;
        let profile = init_profile(
            &InitialCondition::Scaled {
                factor: 16.0,
                of: Box::new(InitialCondition::SineBump { mode: 1 }),
            },
            &grid,
            ProfileLabel::Observer,
        )?;
        for (fwd, inv, label) in [
            (KernelKind::K, KernelKind::L, "K/L"),
            (KernelKind::P, KernelKind::Q, "P/Q"),
        ] {
            let t_fwd = KernelTable::build(fwd, &params, n, 64)?;
            let t_inv = KernelTable::build(inv, &params, n, 64)?;
            let transformed = apply_volterra(VolterraDirection::Subtract, &t_fwd, &profile)?;
            let back = apply_volterra(VolterraDirection::Add, &t_inv, &transformed)?;
            let err: Vec<f64> = back
                .values
                .iter()
                .zip(&profile.values)
                .map(|(a, b)| a - b)
                .collect();
            let err_norm = rdetc::grid::l2_norm_sq_values(&err, grid.h).sqrt();
            check(
                "volterra inverse pair",
                err_norm <= 1e-5,
                format!("{label}: round-trip error {err_norm:.2e}"),
            );
        }
    }

    if check_trigger {
        let mut cfg = SimConfig::reference();
        cfg.t_final = 30.0;
        let pre = precompute(&cfg)?;
        let cl = pre.closed_loop.as_ref().expect("closed loop");
        let result = run_simulation(&cfg)?;
        let traj = &result.trajectory;
        let m_ok = traj.m.iter().skip(1).all(|m| *m < 0.0);
        check("trigger m negativity", m_ok, "m(t) < 0 along the run".into());
        let d_ok = traj
            .d
            .iter()
            .zip(&traj.m)
            .skip(1)
            .all(|(d, m)| d * d <= -m);
        check("trigger threshold", d_ok, "d^2 <= -m along the run".into());
        let gaps = result.inter_execution_gaps();
        let tau = cl.certs.dwell.tau;
        let gap_ok = gaps.iter().all(|g| *g >= tau);
        check(
            "minimal dwell-time",
            gap_ok && !gaps.is_empty(),
            format!("{} gaps, min {:.4e} vs tau {tau:.4e}", gaps.len(),
                gaps.iter().copied().fold(f64::INFINITY, f64::min)),
        );
        let rate = rate_bound_check(
            pre.grid.dt,
            &traj.d,
            &traj.w_hat_norm_sq,
            &traj.w_hat_1_sq,
            &traj.w_tilde_0_sq,
            &traj.event_step,
            &cl.certs.bound,
        );
        check(
            "holding-error rate bound",
            rate.violations == 0,
            format!(
                "{} samples checked, {} violations, worst margin {:.3e}",
                rate.checked, rate.violations, rate.worst_margin
            ),
        );
    }

    if failures > 0 {
        bail!("{failures} validation check(s) failed");
    }
    println!("all checks passed");
    Ok(())
}
