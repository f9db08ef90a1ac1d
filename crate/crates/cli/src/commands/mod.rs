mod deterministic;
mod energy;
mod stochastic;

use std::fs;
use std::path::{Path, PathBuf};

use crn_core::kinetics::{find_steady_states, Classification, SteadyStateReport, Stability};
use crn_core::landscape::{
    kl_landscape, landscape_1d, weak_kam_landscape, AubrySet, EnergyLandscape, GmamConfig,
};
use crn_core::netparse::{grouped_vectors, parse_network, structure, ReactionNetwork};
use nalgebra::DMatrix;
use serde_json::Value;
use thiserror::Error;

use crate::args::{Command, Common, Format, LandscapeMethod};
use crate::output::{self, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] crn_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Domain(_) | Self::Write { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Lifts any core error into a domain failure.
pub(crate) fn domain<E: Into<crn_core::Error>>(e: E) -> CliError {
    CliError::Domain(e.into())
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub enum Artifact {
    Table(Table),
    Json(Value),
    /// A table for CSV output, plus extra sections merged in for JSON.
    Both(Table, Value),
}

impl Artifact {
    fn render(&self, format: Format) -> (String, &'static str) {
        match (self, format) {
            (Self::Table(t) | Self::Both(t, _), Format::Csv) => (t.csv(), "csv"),
            (Self::Table(t), Format::Json) => (output::json(&t.to_json()), "json"),
            (Self::Both(t, extra), Format::Json) => {
                let mut v = t.to_json();
                if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
                    m.extend(e.clone());
                }
                (output::json(&v), "json")
            }
            (Self::Json(v), _) => (output::json(v), "json"),
        }
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Analyze { .. } => "analyze",
        Command::Steady { .. } => "steady",
        Command::Integrate { .. } => "integrate",
        Command::Ssa { .. } => "ssa",
        Command::Cme { .. } => "cme",
        Command::Hamiltonian { .. } => "hamiltonian",
        Command::Landscape { .. } => "landscape",
        Command::Path { .. } => "path",
        Command::Entropy { .. } => "entropy",
        Command::Diffusion { .. } => "diffusion",
        Command::Scenario { .. } => "scenario",
        Command::Sweep { .. } => "sweep",
    }
}

/// Runs one subcommand and writes its artifact to stdout or into `--out`.
pub fn execute(cmd: &Command, c: &Common) -> CliResult<()> {
    let artifact = match cmd {
        Command::Analyze { file } => deterministic::analyze(&read_network(file)?, c)?,
        Command::Steady { file, starts, class } => deterministic::steady(&read_network(file)?, c, *starts, *class)?,
        Command::Integrate { file } => deterministic::integrate(&read_network(file)?, c)?,
        Command::Sweep { file, param, range, steps, starts } => {
            deterministic::sweep(&read_network(file)?, c, param, *range, *steps, *starts)?
        }
        Command::Ssa { file, grid } => stochastic::ssa(&read_network(file)?, c, *grid)?,
        Command::Cme { file } => stochastic::cme(&read_network(file)?, c)?,
        Command::Hamiltonian { file, p, s, flow, action, symmetry } => {
            energy::hamiltonian(&read_network(file)?, c, p, s, *flow, *action, *symmetry)?
        }
        Command::Landscape { file, method, grid, x_ref, param, delta, cfl } => {
            energy::landscape(&read_network(file)?, c, *method, *grid, *x_ref, param.as_deref(), *delta, *cfl)?
        }
        Command::Path { file, from, to, method, eps, saddle } => {
            energy::path(&read_network(file)?, c, from, to, *method, *eps, saddle)?
        }
        Command::Entropy { file } => energy::entropy(&read_network(file)?, c)?,
        Command::Diffusion { file, model, dt, residual, grid } => {
            energy::diffusion(&read_network(file)?, c, *model, *dt, *residual, *grid)?
        }
        Command::Scenario { params, preset } => energy::scenario(params.as_deref(), *preset)?,
    };
    let default = match artifact {
        Artifact::Json(_) => Format::Json,
        _ => Format::Csv,
    };
    let (text, ext) = artifact.render(c.format.unwrap_or(default));
    match &c.out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(dir) => {
            let path = dir.join(format!("{}.{ext}", subcommand_name(cmd)));
            fs::create_dir_all(dir)
                .and_then(|_| fs::write(&path, text))
                .map_err(|source| CliError::Write { path: path.clone(), source })
        }
    }
}

fn read_network(path: &Path) -> CliResult<ReactionNetwork> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_network(&text).map_err(domain)
}

pub(crate) fn species_columns(net: &ReactionNetwork, prefix: &str) -> Vec<String> {
    net.species.iter().map(|s| format!("{prefix}_{s}")).collect()
}

pub(crate) fn matrix_json(m: &DMatrix<f64>) -> Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    serde_json::json!(rows)
}

pub(crate) fn require_x0(net: &ReactionNetwork, c: &Common) -> CliResult<Vec<f64>> {
    vector_arg("--x0", &c.x0, net.n_species())
}

pub(crate) fn vector_arg(flag: &str, v: &[f64], n: usize) -> CliResult<Vec<f64>> {
    if v.is_empty() {
        return Err(usage(format!("{flag} is required")));
    }
    if v.len() != n {
        return Err(usage(format!("{flag} needs {n} comma-separated values, got {}", v.len())));
    }
    Ok(v.to_vec())
}

/// Per-species box from `--box`; one span is broadcast to every species.
pub(crate) fn search_box(net: &ReactionNetwork, c: &Common, default: (f64, f64)) -> CliResult<Vec<(f64, f64)>> {
    let n = net.n_species();
    match c.bounds.len() {
        0 => Ok(vec![default; n]),
        1 => Ok(vec![(c.bounds[0].lo, c.bounds[0].hi); n]),
        k if k == n => Ok(c.bounds.iter().map(|s| (s.lo, s.hi)).collect()),
        k => Err(usage(format!("--box needs 1 or {n} spans, got {k}"))),
    }
}

pub(crate) fn final_time(c: &Common, default: f64) -> f64 {
    c.t.unwrap_or(default)
}

/// Steady states over the search box; with a conservation law and `--x0`,
/// restricted to the class of `--x0`.
pub(crate) fn steady_report(net: &ReactionNetwork, c: &Common, starts: usize) -> CliResult<SteadyStateReport> {
    let bounds = search_box(net, c, (0.0, 10.0))?;
    let conserved = structure(net).rank_s < net.n_species();
    let offset = (conserved && c.x0.len() == net.n_species()).then(|| c.x0.clone());
    find_steady_states(net, &bounds, offset.as_deref(), starts, c.tol).map_err(domain)
}

fn positive_roots(rep: &SteadyStateReport) -> Vec<&crn_core::kinetics::SteadyState> {
    rep.states.iter().filter(|s| s.x.iter().all(|v| *v > 0.0)).collect()
}

/// Landscape for analyses that need ∇ψ. `Auto` picks the 1-D quadrature for
/// one species with one reaction vector, KL under complex balance, and the
/// glued quasipotential otherwise.
pub(crate) fn build_landscape(
    net: &ReactionNetwork,
    c: &Common,
    method: LandscapeMethod,
    grid: usize,
    x_ref: Option<f64>,
) -> CliResult<EnergyLandscape> {
    let rep = steady_report(net, c, 64)?;
    let roots = positive_roots(&rep);
    if roots.is_empty() {
        return Err(usage("no positive steady state in the search box; widen --box"));
    }
    let one_d = net.n_species() == 1 && grouped_vectors(net).len() == 1;
    let method = match method {
        LandscapeMethod::Auto if one_d => LandscapeMethod::Quad1d,
        LandscapeMethod::Auto => {
            let balanced = roots
                .iter()
                .any(|s| matches!(s.classification, Classification::DetailedBalanced | Classification::ComplexBalanced));
            if balanced {
                LandscapeMethod::Kl
            } else {
                LandscapeMethod::Glued
            }
        }
        m => m,
    };
    match method {
        LandscapeMethod::Kl => {
            let xs = roots
                .iter()
                .find(|s| matches!(s.classification, Classification::DetailedBalanced | Classification::ComplexBalanced))
                .unwrap_or(&roots[0]);
            kl_landscape(net, &xs.x).map_err(domain)
        }
        LandscapeMethod::Quad1d => {
            let interval = landscape_interval(c, &rep)?;
            let reference = match x_ref {
                Some(x) => x,
                None => deepest_attractor(net, interval, grid, &rep)?,
            };
            landscape_1d(net, interval, reference, grid).map_err(domain)
        }
        LandscapeMethod::Gmam | LandscapeMethod::Glued => {
            let cfg = GmamConfig { n_images: c.images, ..GmamConfig::default() };
            weak_kam_landscape(net, &AubrySet::from_report(&rep), &cfg).map_err(domain)
        }
        LandscapeMethod::Auto | LandscapeMethod::Hje | LandscapeMethod::Response => {
            unreachable!("resolved by the caller")
        }
    }
}

/// 1-D interval: `--box` when it stays off zero, else [min root/10, 2·max root].
pub(crate) fn landscape_interval(c: &Common, rep: &SteadyStateReport) -> CliResult<(f64, f64)> {
    if let [b] = c.bounds.as_slice() {
        if b.lo > 0.0 {
            return Ok((b.lo, b.hi));
        }
    }
    let xs: Vec<f64> = positive_roots(rep).iter().map(|s| s.x[0]).collect();
    if xs.is_empty() {
        return Err(usage("no positive steady state; give an interval with --box lo:hi, lo > 0"));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(0.0, f64::max);
    Ok((lo / 10.0, 2.0 * hi))
}

/// The stable root with the lowest landscape value, so that min ψ = 0 over attractors.
fn deepest_attractor(
    net: &ReactionNetwork,
    interval: (f64, f64),
    grid: usize,
    rep: &SteadyStateReport,
) -> CliResult<f64> {
    let stable: Vec<f64> = positive_roots(rep)
        .iter()
        .filter(|s| s.stability == Stability::Stable)
        .map(|s| s.x[0])
        .filter(|x| *x >= interval.0 && *x <= interval.1)
        .collect();
    let Some(&first) = stable.first() else {
        return Ok(interval.0);
    };
    let probe = landscape_1d(net, interval, first, grid).map_err(domain)?;
    let mut best = (0.0, first);
    for &x in &stable[1..] {
        let v = probe.value(&[x]).map_err(domain)?;
        if v < best.0 {
            best = (v, x);
        }
    }
    Ok(best.1)
}
