use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mipt::config::RunConfig;
use mipt::error::{Error, Result};
use mipt::lattice::LatticeSpec;
use mipt::oracle;
use mipt::run::{self, AnalyzeMode};
use mipt::theory;
use mipt::trajectory::{sample_schedule, trajectory_rng};

/// Monitored free fermions on hypercubic lattices: exact Gaussian-state
/// trajectories, transition diagnostics and finite-size-scaling analysis.
#[derive(Parser)]
#[command(name = "mipt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Configuration file (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the measurement rate gamma.
    #[arg(long)]
    gamma: Option<f64>,
    /// Override the linear size L.
    #[arg(long)]
    size: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker count (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration (all defaults filled in) and exit.
    #[arg(long)]
    print_config: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if let Some(l) = self.size {
            cfg.l = l;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of quantum trajectories and write the observable tables.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Continue from an existing manifest in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Grid of runs over sizes and rates; merges the covariance dataset.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated gamma list, e.g. `2.0,2.4,2.8`.
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
        /// Comma-separated size list, e.g. `12,16,20`.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        resume: bool,
    },
    /// Turn raw run outputs into figure-style tables.
    Analyze {
        /// momentum | covariance | entropy
        #[arg(long)]
        mode: String,
        /// Run directories (or a sweep root for covariance).
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Combine inputs even when their config digests differ.
        #[arg(long)]
        force: bool,
    },
    /// Finite-size-scaling fit of a covariance dataset.
    Collapse {
        /// Dataset CSV with columns `l,gamma,g_ab,err`.
        #[arg(long)]
        input: PathBuf,
        /// Gamma window `lo,hi` (default 2.4,3.4).
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<f64>>,
        /// Initial `gamma_c,nu` for the simplex (default 2.8,1.2).
        #[arg(long, value_delimiter = ',')]
        init: Option<Vec<f64>>,
        /// Also fit the multiplicative exponent zeta.
        #[arg(long)]
        fit_zeta: bool,
        /// Where to write the JSON summary.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also locate the curve crossing of consecutive sizes.
        #[arg(long)]
        crossing: bool,
    },
    /// Emit analytic prediction tables.
    Theory {
        /// gaussian-q | gaussian-x | cumulant | rg | critical
        #[arg(long)]
        what: String,
        #[arg(long, default_value_t = 2.0)]
        d: f64,
        #[arg(long, default_value_t = 1.0)]
        j: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Largest scale (in units of l0) for rg / cumulant tables.
        #[arg(long, default_value_t = 1e3)]
        scale_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lockstep comparison of the Gaussian engine against the brute-force
    /// many-body oracle on a small lattice.
    OracleCheck {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        l: usize,
        /// Measurement events to replay.
        #[arg(long, default_value_t = 50)]
        events: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; keep exit code 0 for --help/--version
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, resume } => {
            let cfg = config.build()?;
            if config.print_config {
                println!("{cfg}");
                return Ok(());
            }
            let report = run::simulate(&cfg, resume)?;
            println!(
                "simulate: digest {} -> {} ({} trajectories, {} failed, {} re-purifications)",
                report.digest,
                report.out.display(),
                report.completed,
                report.failed,
                report.repurifications
            );
            if let Some(q0) = report.worst_q0 {
                println!("  worst per-trajectory |C(q=0)| = {q0:.3e}");
            }
            if let Some((g, err)) = report.mean_g_ab {
                match err {
                    Some(e) => println!("  G_AB = {g:.6} +- {e:.6}"),
                    None => println!("  G_AB = {g:.6}"),
                }
            }
            Ok(())
        }
        Command::Sweep {
            config,
            gammas,
            sizes,
            resume,
        } => {
            let cfg = config.build()?;
            if config.print_config {
                println!("{cfg}");
                return Ok(());
            }
            let report = run::sweep(&cfg, &sizes, &gammas, resume)?;
            let mut failed = 0;
            for (l, gamma, cell) in &report.cells {
                match cell {
                    Ok(r) => println!(
                        "cell L={l} gamma={gamma}: {} trajectories, {} failed",
                        r.completed, r.failed
                    ),
                    Err(e) => {
                        failed += 1;
                        println!("cell L={l} gamma={gamma}: FAILED ({e})");
                    }
                }
            }
            println!(
                "sweep {}: dataset at {}",
                report.sweep_digest,
                report.dataset.display()
            );
            if failed > 0 {
                return Err(Error::Config(format!("{failed} sweep cells failed")));
            }
            Ok(())
        }
        Command::Analyze {
            mode,
            input,
            out,
            force,
        } => {
            let mode = match mode.as_str() {
                "momentum" => AnalyzeMode::Momentum,
                "covariance" => AnalyzeMode::Covariance,
                "entropy" => AnalyzeMode::Entropy,
                other => {
                    return Err(Error::Config(format!(
                        "unknown analyze mode `{other}` (momentum | covariance | entropy)"
                    )))
                }
            };
            run::analyze(mode, &input, &out, force)?;
            println!("analyze: wrote {}", out.display());
            Ok(())
        }
        Command::Collapse {
            input,
            window,
            init,
            fit_zeta,
            out,
            crossing,
        } => {
            let window = match window {
                Some(w) if w.len() == 2 => Some((w[0], w[1])),
                Some(_) => return Err(Error::Config("--window wants `lo,hi`".into())),
                None => None,
            };
            let init = match init {
                Some(v) if v.len() == 2 => (v[0], v[1]),
                Some(_) => return Err(Error::Config("--init wants `gamma_c,nu`".into())),
                None => (2.8, 1.2),
            };
            if crossing {
                let points = run::load_dataset(&input)?;
                match run::crossing_from_points(&points)? {
                    Some(est) => println!(
                        "crossing: gamma_c = {:.4} +- {:.4} ({} pairwise crossings)",
                        est.gamma_c,
                        est.spread,
                        est.crossings.len()
                    ),
                    None => println!("crossing: none found in range"),
                }
            }
            let summary = run::collapse_file(&input, window, init, fit_zeta, out.as_deref())?;
            println!(
                "collapse: gamma_c = {:.4} +- {}, nu = {:.4} +- {}, chi2 = {:.3} ({} points, {} excluded{})",
                summary.gamma_c,
                summary
                    .gamma_c_err
                    .map_or("?".into(), |e| format!("{e:.4}")),
                summary.nu,
                summary.nu_err.map_or("?".into(), |e| format!("{e:.4}")),
                summary.chi2,
                summary.n_points,
                summary.excluded_points,
                if summary.converged { "" } else { ", NOT CONVERGED" },
            );
            if let Some(z) = summary.zeta {
                println!(
                    "  zeta = {z:.5} +- {}",
                    summary.zeta_err.map_or("?".into(), |e| format!("{e:.5}"))
                );
            }
            Ok(())
        }
        Command::Theory {
            what,
            d,
            j,
            gamma,
            rho,
            scale_max,
            out,
        } => theory_tables(&what, d, j, gamma, rho, scale_max, out.as_deref()),
        Command::OracleCheck { d, l, events, seed } => {
            let spec = LatticeSpec::new(d, l, 1.0)?;
            let n = spec.n_sites();
            let spectrum = mipt::lattice::build_spectrum(&spec);
            let n_particles = n / 2;
            // draw a schedule long enough to hold `events` measurements
            let mut rng = trajectory_rng(seed, 0);
            let mut schedule = sample_schedule(1.0, events as f64 / n as f64 + 1.0, n, &mut rng);
            schedule.events.truncate(events);
            // outcomes from the oracle's Born rule, replayed into both engines
            let space = oracle::FockSpace::new(spec, n_particles)?;
            let evolver = oracle::Evolver::new(space.clone());
            let mut state = oracle::FockState::ground(space, &spectrum)?;
            let mut outcomes = Vec::with_capacity(schedule.events.len());
            let mut t = 0.0;
            for event in &schedule.events {
                evolver.evolve(&mut state, event.time - t)?;
                t = event.time;
                use rand::Rng;
                let u: f64 = rng.gen();
                let (outcome, _) = state.measure(event.site, None, u)?;
                outcomes.push(outcome);
            }
            let report = oracle::lockstep_compare(&spectrum, n_particles, &schedule, &outcomes)?;
            println!(
                "oracle-check: {} events on {}^{d} sites: max born dev {:.3e}, max green dev {:.3e}",
                report.steps, l, report.max_born_dev, report.max_green_dev
            );
            if report.max_born_dev > 1e-10 || report.max_green_dev > 1e-8 {
                return Err(Error::NumericalDegradation {
                    what: "lockstep deviation",
                    value: report.max_born_dev.max(report.max_green_dev),
                });
            }
            Ok(())
        }
    }
}

fn theory_tables(
    what: &str,
    d: f64,
    j: f64,
    gamma: f64,
    rho: f64,
    scale_max: f64,
    out: Option<&std::path::Path>,
) -> Result<()> {
    let params = theory::NlsmParams::new(d, j, gamma, rho)?;
    let mut text = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(
        text,
        "# mipt={} theory d={d} j={j} gamma={gamma} rho={rho} g0={} l0={}",
        mipt::VERSION,
        params.bare_coupling(),
        params.mean_free_path()
    );
    match what {
        "gaussian-q" => {
            let _ = writeln!(text, "q,c_q");
            for k in 0..=200 {
                let q = std::f64::consts::PI * k as f64 / 200.0;
                let _ = writeln!(text, "{q:.8e},{:.8e}", theory::gaussian_momentum_correlator(&params, q));
            }
        }
        "gaussian-x" => {
            let _ = writeln!(text, "x,c_x");
            let l0 = params.mean_free_path();
            for k in 1..=200 {
                let x = l0 * (1.0 + 0.2 * k as f64);
                let _ = writeln!(text, "{x:.8e},{:.8e}", theory::gaussian_real_correlator(&params, x));
            }
        }
        "cumulant" => {
            let _ = writeln!(text, "ell,c2");
            let l0 = params.mean_free_path();
            let mut ell = l0 * 1.05;
            while ell < l0 * scale_max {
                let _ = writeln!(text, "{ell:.8e},{:.8e}", theory::gaussian_cumulant(&params, ell)?);
                ell *= 1.1;
            }
        }
        "rg" => {
            let _ = writeln!(text, "ln_scale,ell_over_l0,conductance,z");
            let flow = theory::rg_flow(
                params.epsilon(),
                params.replicas,
                params.bare_conductance(),
                scale_max,
            );
            for (k, p) in flow.iter().enumerate() {
                // the table stays readable: subsample to ~200 rows
                if k % (flow.len() / 200 + 1) == 0 {
                    let _ = writeln!(
                        text,
                        "{:.8e},{:.8e},{:.8e},{}",
                        p.ln_scale,
                        p.ln_scale.exp(),
                        p.conductance,
                        p.z
                    );
                }
            }
        }
        "critical" => {
            let crit = theory::critical_quantities(params.epsilon(), params.replicas)?;
            let _ = writeln!(text, "epsilon,g_c,nu,zeta,g0,l0,bare_conductance,l_corr");
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{}",
                params.epsilon(),
                crit.g_c,
                crit.nu,
                crit.zeta,
                params.bare_coupling(),
                params.mean_free_path(),
                params.bare_conductance(),
                theory::correlation_length(&params)?
            );
        }
        other => {
            return Err(Error::Config(format!(
                "unknown theory table `{other}` (gaussian-q | gaussian-x | cumulant | rg | critical)"
            )))
        }
    }
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::io(path.display().to_string(), e))?,
        None => print!("{text}"),
    }
    Ok(())
}
