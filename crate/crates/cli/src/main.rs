mod config;
mod plots;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Setting};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Check(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) | Failure::Check(m) => f.write_str(m),
        }
    }
}

#[derive(Parser)]
#[command(name = "hypoflow", version, about = "shear-flow decay solver and audit harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve each viscosity, audit the enabled checks, write artifacts
    Run(RunArgs),
    /// Rate-vs-viscosity sweep (at least 4 viscosities over 3 decades)
    Sweep(RunArgs),
    /// Render SVG plots from a finished output directory
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; the flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// sine | sin2 | zero | table:<csv>
    #[arg(long)]
    profile: Option<String>,
    /// repeatable
    #[arg(long = "nu")]
    nu: Vec<f64>,
    /// number in (0, 1] or "auto"
    #[arg(long)]
    beta: Option<String>,
    /// number in (0, 1] or "auto"
    #[arg(long)]
    sigma: Option<String>,
    /// random[:seed[:m_max]] | critical_bump | monotone_bump[:width] | fourier:<m>
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    /// grid size (power of two)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// comma list from: gronwall,equivalence,lemmaA2,spectral,scaling
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
}

#[derive(Args)]
struct PlotArgs {
    /// output directory of a previous run
    #[arg(long)]
    out: PathBuf,
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_toml_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &a.profile {
        cfg.profile = p.clone();
    }
    if !a.nu.is_empty() {
        cfg.nu = a.nu.clone();
    }
    if let Some(b) = &a.beta {
        cfg.beta = Setting::parse(b)?;
    }
    if let Some(s) = &a.sigma {
        cfg.sigma = Setting::parse(s)?;
    }
    if let Some(d) = &a.data {
        cfg.data = d.clone();
    }
    if let Some(dt) = a.dt {
        cfg.dt = Some(dt);
    }
    if let Some(n) = a.n {
        cfg.n = Some(n);
    }
    if let Some(t) = a.t_end {
        cfg.t_end = Some(t);
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(c) = &a.checks {
        cfg.checks = c.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(a) => build_config(a).and_then(|c| runner::run(&c, false)),
        Cmd::Sweep(a) => build_config(a).and_then(|c| runner::run(&c, true)),
        Cmd::Plot(p) => plots::emit(&p.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("audit failed: {m}");
            ExitCode::from(3)
        }
    }
}
