use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use blowup_core::experiment::{self, output::to_json, ExperimentConfig, Outcome, RunKind};
use blowup_core::pde::BoundaryMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Blow-up profiles for u_t = u_xx + mu|u_x|^q + |u|^{p-1}u with q = 2p/(p+1).
#[derive(Parser, Debug)]
#[command(name = "blowup", version)]
struct Cli {
    /// JSON configuration; flags given on the command line override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write report.json, CSV series and metadata.json here instead of
    /// printing the report.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    p: Option<f64>,

    #[arg(long, global = true, allow_negative_numbers = true)]
    mu: Option<f64>,

    /// Keep wall-clock data out of metadata.json too.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Worker threads for parallel runs.
    #[arg(long, env = "BLOWUP_WORKERS", global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Every closed-form constant of the profile.
    Constants,
    /// The identity battery; exit code 1 if any check fails.
    Verify {
        /// Multiply quadrature weights by 1 + EPS.
        #[arg(long, allow_negative_numbers = true)]
        inject_weight_fault: Option<f64>,
    },
    /// Bounded trajectory of the two-mode ODE and its power-law fit.
    Ode {
        #[arg(long)]
        s0: Option<f64>,
        #[arg(long)]
        s_end: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        w2: Option<f64>,
        #[arg(long)]
        rtol: Option<f64>,
    },
    /// One similarity-variable run from phi + psi_{s0,d0,d1}.
    Simulate(SimArgs),
    /// Physical-space run toward blow-up from the same initial data.
    Physical {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        amplification: Option<f64>,
        #[arg(long)]
        physical_safety: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Boundary degree of the exit map and the trapped-point search.
    Shoot {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
        /// Search rectangle d0_lo,d0_hi,d1_lo,d1_hi.
        #[arg(long, value_delimiter = ',', num_args = 4, allow_negative_numbers = true)]
        rect: Option<Vec<f64>>,
    },
    /// Independent runs over a (p, mu, A, s0, d0, d1) grid.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        grid_p: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        grid_mu: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        grid_a: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        grid_s0: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        grid_d0: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        grid_d1: Vec<f64>,
        /// Also run an exit probe per point.
        #[arg(long)]
        simulate: bool,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Boundary {
    Profile,
    Neumann,
}

#[derive(Args, Debug, Default)]
struct SimArgs {
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    s_end: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    d0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    d1: Option<f64>,
    /// Trap amplitude A.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Cut-off scale K.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    ds_max: Option<f64>,
    #[arg(long)]
    safety: Option<f64>,
    #[arg(long, value_enum)]
    boundary: Option<Boundary>,
    /// Similarity times at which to store the field.
    #[arg(long, value_delimiter = ',')]
    snapshot: Vec<f64>,
    /// Keep integrating after the first exit.
    #[arg(long)]
    no_stop_on_exit: bool,
}

fn apply_sim(cfg: &mut ExperimentConfig, a: &SimArgs) {
    let s = &mut cfg.simulation;
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = a.$field {
                s.$field = v;
            }
        };
    }
    set!(s0);
    set!(d0);
    set!(d1);
    set!(a);
    set!(k);
    set!(spacing);
    set!(ds_max);
    set!(safety);
    if a.s_end.is_some() {
        s.s_end = a.s_end;
    }
    if a.gamma.is_some() {
        s.gamma = a.gamma;
    }
    if let Some(b) = a.boundary {
        s.boundary = match b {
            Boundary::Profile => BoundaryMode::Profile,
            Boundary::Neumann => BoundaryMode::Neumann,
        };
    }
    if !a.snapshot.is_empty() {
        s.snapshot_times = a.snapshot.clone();
    }
    if a.no_stop_on_exit {
        s.stop_on_exit = false;
    }
}

/// Errors split by exit code.
enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

fn core_failure(e: blowup_core::Error) -> Failure {
    if e.is_configuration() {
        Failure::Config(e.into())
    } else {
        Failure::Numerical(e.into())
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Config)?;
            ExperimentConfig::from_json(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(Failure::Config)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(p) = cli.p {
        cfg.p = p;
    }
    if let Some(mu) = cli.mu {
        cfg.mu = mu;
    }
    if cli.output_dir.is_some() {
        cfg.output_dir = cli.output_dir.clone();
    }
    cfg.deterministic |= cli.deterministic;
    cfg.kind = match &cli.command {
        Command::Constants => RunKind::Constants,
        Command::Verify { inject_weight_fault } => {
            if inject_weight_fault.is_some() {
                cfg.verify.weight_fault = *inject_weight_fault;
            }
            RunKind::Verify
        }
        Command::Ode { s0, s_end, w2, rtol } => {
            let o = &mut cfg.ode;
            o.s0 = s0.unwrap_or(o.s0);
            o.s_end = s_end.unwrap_or(o.s_end);
            o.rtol = rtol.unwrap_or(o.rtol);
            if w2.is_some() {
                o.w2_initial = *w2;
            }
            RunKind::Ode
        }
        Command::Simulate(sim) => {
            apply_sim(&mut cfg, sim);
            RunKind::Simulate
        }
        Command::Physical {
            sim,
            amplification,
            physical_safety,
            max_steps,
        } => {
            apply_sim(&mut cfg, sim);
            let ph = &mut cfg.physical;
            ph.amplification = amplification.unwrap_or(ph.amplification);
            ph.safety = physical_safety.unwrap_or(ph.safety);
            ph.max_steps = max_steps.unwrap_or(ph.max_steps);
            RunKind::Physical
        }
        Command::Shoot {
            sim,
            samples,
            levels,
            rect,
        } => {
            apply_sim(&mut cfg, sim);
            let sh = &mut cfg.shooting;
            sh.boundary_samples = samples.unwrap_or(sh.boundary_samples);
            sh.levels = levels.unwrap_or(sh.levels);
            if let Some(r) = rect {
                sh.rect = blowup_core::Rect::new(r[0], r[1], r[2], r[3]).map_err(core_failure)?;
            }
            RunKind::Shoot
        }
        Command::Sweep {
            grid_p,
            grid_mu,
            grid_a,
            grid_s0,
            grid_d0,
            grid_d1,
            simulate,
        } => {
            let g = &mut cfg.sweep;
            for (dst, src) in [
                (&mut g.p, grid_p),
                (&mut g.mu, grid_mu),
                (&mut g.a, grid_a),
                (&mut g.s0, grid_s0),
                (&mut g.d0, grid_d0),
                (&mut g.d1, grid_d1),
            ] {
                if !src.is_empty() {
                    *dst = src.clone();
                }
            }
            g.simulate |= *simulate;
            RunKind::Sweep
        }
    };
    Ok(cfg)
}

fn write_outputs(dir: &Path, outcome: &Outcome, meta: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for a in &outcome.artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.contents).with_context(|| format!("writing {}", path.display()))?;
    }
    fs::write(dir.join("metadata.json"), meta).context("writing metadata.json")?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool, Failure> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")
            .map_err(Failure::Config)?;
    }
    let cfg = build_config(cli)?;
    let start = Instant::now();
    let outcome = experiment::run(&cfg).map_err(core_failure)?;
    match &cfg.output_dir {
        Some(dir) => {
            let meta = experiment::metadata(&cfg, start.elapsed())
                .and_then(|m| to_json(&m))
                .map_err(core_failure)?;
            write_outputs(dir, &outcome, &meta).map_err(Failure::Numerical)?;
            eprintln!("[blowup] wrote {} files to {}", outcome.artifacts.len() + 1, dir.display());
        }
        None => print!("{}", outcome.report()),
    }
    Ok(outcome.success)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("invalid configuration: {e:#}");
            ExitCode::from(2)
        }
    }
}
