//! Command-line driver: certificate checks, simulations, sweeps and order studies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use boussinesq_delay::certificate::{
    certify, check_gains, f_of_mu1, g_of_mu1, mu1_right_endpoint, optimal_mu1,
};
use boussinesq_delay::config::Config;
use boussinesq_delay::harness::{
    run_sweep, simulate, write_series, write_summary, write_sweep, SweepSpec,
};
use boussinesq_delay::mms::mms_study;
use boussinesq_delay::params::{DelaySpec, SystemParams};
use boussinesq_delay::Error;

const EXIT_REFUSED: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bsqd",
    version,
    about = "Boussinesq system with delayed boundary feedback"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    /// Interior grid nodes.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Include the nonlinear terms.
    #[arg(long)]
    nonlinear: bool,
    /// Seed for random perturbations of the initial data.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gain admissibility and the stability certificate.
    Check(Common),
    /// Run one configuration and write the time series and summary.
    Simulate(Common),
    /// Evaluate a parameter grid from a sweep file.
    Sweep(Common),
    /// Manufactured-solution order study.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Grid sizes, coarse to fine.
        #[arg(long, value_delimiter = ',', default_value = "19,39,79")]
        sizes: Vec<usize>,
        /// Time step as a multiple of h².
        #[arg(long, default_value_t = 1.0)]
        dt_over_h2: f64,
    },
    /// Tabulate f and g on the admissible interval and locate their crossing.
    OptimizeRate {
        #[command(flatten)]
        common: Common,
        /// Table rows.
        #[arg(long, default_value_t = 11)]
        points: usize,
    },
}

fn load(c: &Common) -> Result<Config, Error> {
    let mut cfg = Config::load(&c.config)?;
    apply(&mut cfg, c);
    Ok(cfg)
}

fn apply(cfg: &mut Config, c: &Common) {
    if let Some(v) = c.dt {
        cfg.run.dt = v;
    }
    if let Some(v) = c.n {
        cfg.grid.n = v;
    }
    if let Some(v) = c.horizon {
        cfg.run.horizon = v;
    }
    if c.nonlinear {
        cfg.run.nonlinear = true;
    }
    if c.seed.is_some() {
        cfg.run.seed = c.seed;
    }
}

fn config_failure(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn cmd_check(c: &Common) -> ExitCode {
    let cfg = match load(c) {
        Ok(cfg) => cfg,
        Err(e) => return config_failure(e),
    };
    let report = cfg.validate();
    print!("{report}");
    if !report.ok() {
        return config_failure("invalid configuration");
    }
    let gains = match check_gains(&cfg.system, &cfg.delay) {
        Ok(g) => g,
        Err(e) => return config_failure(e),
    };
    println!("threshold = {}", gains.threshold);
    println!("admissible = {}", gains.admissible);
    match certify(&cfg.system, &cfg.delay) {
        Ok(cert) => match toml::to_string(&cert) {
            Ok(text) => {
                println!("\n[certificate]\n{text}");
                ExitCode::SUCCESS
            }
            Err(e) => config_failure(e),
        },
        Err(Error::Config(e)) => config_failure(e),
        Err(e) => {
            println!("uncertified: {e}");
            ExitCode::from(EXIT_REFUSED)
        }
    }
}

fn ensure_dir(p: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(p)?;
    Ok(())
}

fn cmd_simulate(c: &Common) -> ExitCode {
    let cfg = match load(c) {
        Ok(cfg) => cfg,
        Err(e) => return config_failure(e),
    };
    let sim = match simulate(&cfg) {
        Ok(s) => s,
        Err(e @ Error::Config(_)) => return config_failure(e),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let written = ensure_dir(&c.out)
        .and_then(|_| write_series(&c.out.join("series.csv"), &sim.report.rows))
        .and_then(|_| write_summary(&c.out.join("summary.toml"), &sim.summary));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    let s = &sim.summary;
    println!("status: {}", s.status);
    println!(
        "rows: {}  E(0) = {:.6e}  E(T) = {:.6e}",
        s.rows, s.e0, s.e_final
    );
    match (&s.certificate, &s.bound) {
        (Some(cert), Some(b)) => {
            println!(
                "lambda_theory = {:.6e}  zeta = {:.6}",
                cert.lambda_theory, cert.zeta
            );
            println!(
                "bound max ratio = {:.6e}  passed = {}",
                b.max_ratio, b.passed
            );
        }
        _ => println!(
            "uncertified: {}",
            s.uncertified_reason.as_deref().unwrap_or("unknown")
        ),
    }
    if let Some(f) = &s.fit {
        println!("lambda_obs = {:.6e}  r2 = {:.6}", f.lambda_obs, f.r2);
    }
    println!("wrote {}", c.out.display());
    if s.status == "completed" {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn cmd_sweep(c: &Common) -> ExitCode {
    let spec = match std::fs::read_to_string(&c.config)
        .map_err(Error::from)
        .and_then(|t| SweepSpec::parse(&t))
    {
        Ok(mut s) => {
            apply(&mut s.base, c);
            s
        }
        Err(e) => return config_failure(e),
    };
    let rows = run_sweep(&spec);
    let path = c.out.join(&spec.output);
    if let Err(e) = ensure_dir(&c.out).and_then(|_| write_sweep(&path, &spec, &rows)) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} points ({} with errors) -> {}",
        rows.len(),
        failed,
        path.display()
    );
    ExitCode::SUCCESS
}

fn cmd_convergence(c: &Common, sizes: &[usize], dt_over_h2: f64) -> ExitCode {
    let (p, dly, horizon): (SystemParams, DelaySpec, f64) = match load(c) {
        Ok(cfg) => (cfg.system, cfg.delay, cfg.run.horizon),
        Err(e) => return config_failure(e),
    };
    match mms_study(&p, &dly, sizes, dt_over_h2, horizon, &[1.0]) {
        Ok(study) => {
            println!("{:>6} {:>12} {:>12} {:>14}", "n", "h", "dt", "L2 error");
            for l in &study.levels {
                println!(
                    "{:>6} {:>12.4e} {:>12.4e} {:>14.6e}",
                    l.n, l.h, l.dt, l.error
                );
            }
            for (k, o) in study.orders.iter().enumerate() {
                println!(
                    "order {} -> {}: {:.4}",
                    study.levels[k].n,
                    study.levels[k + 1].n,
                    o
                );
            }
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config(_)) => config_failure(e),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_optimize(c: &Common, points: usize) -> ExitCode {
    let cfg = match load(c) {
        Ok(cfg) => cfg,
        Err(e) => return config_failure(e),
    };
    let (p, d) = (&cfg.system, &cfg.delay);
    let r = mu1_right_endpoint(p, d);
    let opt = match optimal_mu1(p, d, 1e-12) {
        Ok(o) => o,
        Err(Error::Config(e)) => return config_failure(e),
        Err(e) => {
            println!("no optimal mu1: {e}");
            return ExitCode::from(EXIT_REFUSED);
        }
    };
    println!("{:>14} {:>14} {:>14}", "mu1", "f", "g");
    let k = points.max(2) - 1;
    for j in 0..=k {
        let m = r * j as f64 / k as f64;
        match (f_of_mu1(p, d, m), g_of_mu1(p, d, m)) {
            (Ok(f), Ok(g)) => println!("{m:>14.6e} {f:>14.6e} {g:>14.6e}"),
            (f, g) => println!("{m:>14.6e} {:?} {:?}", f.err(), g.err()),
        }
    }
    println!("interval = [0, {r}]");
    println!("mu1_star = {:.12e}", opt.mu1_star);
    println!("lambda_star = {:.12e}", opt.lambda_star);
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Check(c) => cmd_check(c),
        Cmd::Simulate(c) => cmd_simulate(c),
        Cmd::Sweep(c) => cmd_sweep(c),
        Cmd::Convergence {
            common,
            sizes,
            dt_over_h2,
        } => cmd_convergence(common, sizes, *dt_over_h2),
        Cmd::OptimizeRate { common, points } => cmd_optimize(common, *points),
    }
}
