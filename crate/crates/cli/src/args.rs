use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "crn", version, about = "Analyze chemical reaction networks written in the .crn DSL")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Closed interval written `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

pub fn parse_span(s: &str) -> Result<Span, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(format!("need finite lo < hi, got `{s}`"));
    }
    Ok(Span { lo, hi })
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// System size V.
    #[arg(long, global = true, value_parser = positive, default_value_t = 100.0)]
    pub volume: f64,
    /// Initial state, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    /// Final time.
    #[arg(long = "t", global = true, value_parser = positive)]
    pub t: Option<f64>,
    #[arg(long, global = true, value_parser = positive, default_value_t = 1e-10)]
    pub tol: f64,
    /// Per-species box lo:hi, comma separated.
    #[arg(long = "box", global = true, value_delimiter = ',', value_parser = parse_span)]
    pub bounds: Vec<Span>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of SSA paths.
    #[arg(long, global = true)]
    pub ensemble: Option<usize>,
    /// gMAM images.
    #[arg(long, global = true, default_value_t = 100)]
    pub images: usize,
    #[arg(long = "quad-order", global = true, default_value_t = 32)]
    pub quad_order: usize,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Directory receiving <subcommand>.<csv|json>; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker cap for parallel sections.
    #[arg(long, global = true, env = "CRN_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structure report: stoichiometry, kernel, complexes, deficiency, groups.
    Analyze {
        file: PathBuf,
    },
    /// Steady states by multi-start Newton.
    Steady {
        file: PathBuf,
        #[arg(long, default_value_t = 64)]
        starts: usize,
        /// Restrict to the compatibility class of --x0.
        #[arg(long)]
        class: bool,
    },
    /// Deterministic rate equation trajectory.
    Integrate {
        file: PathBuf,
    },
    /// Gillespie simulation; ensemble statistics with --ensemble.
    Ssa {
        file: PathBuf,
        /// Points of the ensemble time grid.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Truncated master equation: stationary law, detailed balance, dissipation.
    Cme {
        file: PathBuf,
    },
    /// WKB Hamiltonian, its Legendre dual, flows and symmetry checks.
    Hamiltonian {
        file: PathBuf,
        /// Momentum, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        /// Velocity for the Lagrangian, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        s: Vec<f64>,
        /// Integrate Hamilton's equations from (x0, p) up to --t.
        #[arg(long)]
        flow: bool,
        /// Action of the relaxation path from --x0 over --t.
        #[arg(long)]
        action: bool,
        /// Symmetry residual against the network's landscape.
        #[arg(long)]
        symmetry: bool,
    },
    /// Energy landscape tables, dynamic HJE and linear response.
    Landscape {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = LandscapeMethod::Auto)]
        method: LandscapeMethod,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Reference point where ψ = 0 (1-D).
        #[arg(long = "x-ref", allow_hyphen_values = true)]
        x_ref: Option<f64>,
        /// Chemostat for --method response.
        #[arg(long)]
        param: Option<String>,
        #[arg(long, default_value_t = 1e-4, allow_hyphen_values = true)]
        delta: f64,
        #[arg(long, default_value_t = 0.9)]
        cfl: f64,
    },
    /// Transition paths and barriers.
    Path {
        file: PathBuf,
        #[arg(long, value_delimiter = ',')]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        to: Vec<f64>,
        #[arg(long, value_enum, default_value_t = PathMethod::Reverse)]
        method: PathMethod,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Saddle for --method barrier.
        #[arg(long, value_delimiter = ',')]
        saddle: Vec<f64>,
    },
    /// Entropy production along a trajectory and the decomposition at --x0.
    Entropy {
        file: PathBuf,
    },
    /// Diffusion approximations: sample paths or the invariance residual.
    Diffusion {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = DiffusionModelArg::Fd)]
        model: DiffusionModelArg,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Report the Fokker–Planck residual on the --box grid instead of sampling.
        #[arg(long)]
        residual: bool,
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
    /// Schlögl model report from a JSON parameter file or a preset.
    Scenario {
        params: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// One-parameter sweep re-running the steady-state search.
    Sweep {
        file: PathBuf,
        /// Chemostat name or `label.kplus` / `label.kminus`.
        #[arg(long)]
        param: String,
        #[arg(long, value_parser = parse_span)]
        range: Span,
        #[arg(long, default_value_t = 21)]
        steps: usize,
        #[arg(long, default_value_t = 64)]
        starts: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LandscapeMethod {
    Auto,
    Kl,
    Quad1d,
    Gmam,
    Glued,
    Hje,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathMethod {
    Reverse,
    Gmam,
    Barrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiffusionModelArg {
    Langevin,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    S1,
    S0,
}
