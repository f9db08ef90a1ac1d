use std::fs;
use std::path::Path;

use crn_core::decomp::{conservative_dissipative, entropy_production, log_mean_onsager};
use crn_core::diffusion::{chemical_langevin, euler_maruyama, fd_diffusion, fd_invariance_residual, DiffusionModel};
use crn_core::hamjac::{action, hamiltonian as eval_hamiltonian, hamiltonian_flow, lagrangian, symmetry_residual};
use crn_core::kinetics::{integrate_rre, Classification};
use crn_core::landscape::{
    gmam_quasipotential, linear_response, solve_hje_dynamic_1d, EnergyLandscape, GmamConfig, HjeConfig,
};
use crn_core::netparse::{structure, Parameter, ReactionNetwork};
use crn_core::numerics::linalg::sym_eigenvalues;
use crn_core::numerics::dot;
use crn_core::path::ActionPath;
use crn_core::transition::{barrier_between, reversed_uphill, schlogl_scenario, SchloglParams};
use serde_json::{json, Value};

use super::{
    build_landscape, domain, final_time, landscape_interval, matrix_json, require_x0, search_box, species_columns,
    steady_report, usage, vector_arg, Artifact, CliResult,
};
use crate::args::{Common, DiffusionModelArg, LandscapeMethod, PathMethod, Preset};
use crate::output::{Cell, Table};

/// Snapshots reported by the dynamic HJE solver.
const HJE_SNAPSHOTS: usize = 20;
const SYMMETRY_SAMPLES: usize = 100;

fn auto_landscape(net: &ReactionNetwork, c: &Common) -> CliResult<EnergyLandscape> {
    build_landscape(net, c, LandscapeMethod::Auto, 400, None)
}

fn flow_rows(path: &ActionPath) -> Vec<Value> {
    let zeros = vec![0.0; path.dim()];
    (0..path.len())
        .map(|i| {
            let p = path.momenta.as_ref().map_or(&zeros, |m| &m[i]);
            let row: Vec<f64> = std::iter::once(path.times[i]).chain(path.states[i].iter().copied()).chain(p.iter().copied()).collect();
            json!(row)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn hamiltonian(
    net: &ReactionNetwork,
    c: &Common,
    p: &[f64],
    s: &[f64],
    flow: bool,
    with_action: bool,
    symmetry: bool,
) -> CliResult<Artifact> {
    let n = net.n_species();
    let x0 = require_x0(net, c)?;
    let p = if p.is_empty() { vec![0.0; n] } else { vector_arg("--p", p, n)? };
    let e = eval_hamiltonian(net, &p, &x0).map_err(domain)?;
    let mut report = json!({
        "x": x0,
        "p": p,
        "value": e.value,
        "grad_p": e.grad_p,
        "grad_x": e.grad_x,
        "hess_pp": matrix_json(&e.hess_pp),
        "hess_px": matrix_json(&e.hess_px),
        "overflow": e.overflow,
    });
    if !s.is_empty() {
        let s = vector_arg("--s", s, n)?;
        let l = lagrangian(net, &s, &x0, c.tol).map_err(domain)?;
        report["lagrangian"] = json!({"s": s, "value": l.value, "p_star": l.p_star, "converged": l.converged});
    }
    let t_end = final_time(c, 1.0);
    if flow {
        let f = hamiltonian_flow(net, &x0, &p, t_end, c.tol.max(1e-12)).map_err(domain)?;
        let mut columns = vec!["t".to_string()];
        columns.extend(species_columns(net, "x"));
        columns.extend(species_columns(net, "p"));
        report["flow"] = json!({"h0": f.h0, "energy_drift": f.energy_drift, "columns": columns, "samples": flow_rows(&f.path)});
    }
    if with_action {
        let path = integrate_rre(net, &x0, t_end, c.tol.max(1e-12)).map_err(domain)?;
        report["rre_action"] = json!({"t": t_end, "action": action(net, &path, c.quad_order).map_err(domain)?});
    }
    if symmetry {
        let l = auto_landscape(net, c)?;
        let sample_box = match l.domain() {
            Some(d) => d,
            None => x0.iter().map(|&v| (0.5 * v.max(1e-3), 2.0 * v.max(1e-3))).collect(),
        };
        let grad = |x: &[f64]| l.gradient(x).unwrap_or_else(|_| vec![f64::NAN; x.len()]);
        let rep = symmetry_residual(net, grad, &sample_box, SYMMETRY_SAMPLES, 1.0).map_err(domain)?;
        report["symmetry"] = json!({
            "landscape": l.kind().as_str(),
            "max_residual": rep.max_residual,
            "scale": rep.scale,
            "grouped_residual": rep.grouped_residual,
        });
    }
    Ok(Artifact::Json(report))
}

/// Points where the landscape table is sampled: a uniform grid in 1-D, the
/// line through `--x0` for a one-dimensional class, a tensor grid otherwise.
fn sample_points(net: &ReactionNetwork, c: &Common, l: &EnergyLandscape, grid: usize) -> CliResult<Vec<Vec<f64>>> {
    let n = net.n_species();
    let st = structure(net);
    if n == 1 {
        let (a, b) = match l.domain() {
            Some(d) => d[0],
            None => landscape_interval(c, &steady_report(net, c, 64)?)?,
        };
        return Ok((0..=grid).map(|i| vec![a + (b - a) * i as f64 / grid as f64]).collect());
    }
    let bounds = search_box(net, c, (0.1, 3.0))?;
    if st.rank_s < n {
        if st.rank_s != 1 {
            return Err(usage("landscape tables cover classes of dimension one; this network has larger classes"));
        }
        let x0 = require_x0(net, c).map_err(|_| usage("network has a conservation law; give --x0 to pick the class"))?;
        let v = net.stoich_f64().into_iter().find(|v| v.iter().any(|a| *a != 0.0)).unwrap_or_default();
        // τ range keeping x0 + τv inside the box
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for ((&x, &d), &(blo, bhi)) in x0.iter().zip(&v).zip(&bounds) {
            if d != 0.0 {
                let (t1, t2) = ((blo - x) / d, (bhi - x) / d);
                lo = lo.max(t1.min(t2));
                hi = hi.min(t1.max(t2));
            }
        }
        if !(hi > lo) {
            return Err(usage("the class of --x0 misses the --box"));
        }
        return Ok((0..=grid)
            .map(|i| {
                let tau = lo + (hi - lo) * i as f64 / grid as f64;
                x0.iter().zip(&v).map(|(x, d)| x + tau * d).collect()
            })
            .collect());
    }
    let mut points = vec![Vec::new()];
    for &(a, b) in &bounds {
        points = points
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                (0..=grid).map(move |i| {
                    let mut q = p.clone();
                    q.push(a + (b - a) * i as f64 / grid as f64);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

#[allow(clippy::too_many_arguments)]
pub fn landscape(
    net: &ReactionNetwork,
    c: &Common,
    method: LandscapeMethod,
    grid: usize,
    x_ref: Option<f64>,
    param: Option<&str>,
    delta: f64,
    cfl: f64,
) -> CliResult<Artifact> {
    if grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    match method {
        LandscapeMethod::Hje => return hje(net, c, grid, cfl),
        LandscapeMethod::Response => return response(net, c, param, delta),
        _ => {}
    }
    let l = build_landscape(net, c, method, grid, x_ref)?;
    let mut header = species_columns(net, "x");
    header.push("psi".into());
    header.extend(species_columns(net, "grad_psi"));
    let mut t = Table::new(header);
    for x in sample_points(net, c, &l, grid)? {
        let v = l.value(&x).map_err(domain)?;
        let g = l.gradient(&x).map_err(domain)?;
        let row: Vec<f64> = x.iter().copied().chain([v]).chain(g).collect();
        t.row(&row);
    }
    Ok(Artifact::Both(t, json!({"kind": l.kind().as_str(), "reference": l.reference_point()})))
}

fn hje(net: &ReactionNetwork, c: &Common, grid: usize, cfl: f64) -> CliResult<Artifact> {
    let x0 = require_x0(net, c)?;
    if grid % 2 != 0 {
        return Err(usage("--grid must be even for the dynamic HJE (the error estimate halves it)"));
    }
    let interval = landscape_interval(c, &steady_report(net, c, 64)?)?;
    let t_end = final_time(c, 2.0);
    let cfg = HjeConfig {
        cfl,
        snapshot_times: (1..=HJE_SNAPSHOTS).map(|k| t_end * k as f64 / HJE_SNAPSHOTS as f64).collect(),
        ..HjeConfig::default()
    };
    let initial = |panels: usize| -> Vec<f64> {
        let (a, b) = interval;
        (0..=panels).map(|i| (a + (b - a) * i as f64 / panels as f64 - x0[0]).powi(2)).collect()
    };
    let fine = solve_hje_dynamic_1d(net, &initial(grid), interval, t_end, &cfg).map_err(domain)?;
    let coarse = solve_hje_dynamic_1d(net, &initial(grid / 2), interval, t_end, &cfg).map_err(domain)?;
    let rre = integrate_rre(net, &x0, t_end, 1e-12).map_err(domain)?;
    let mut t = Table::new(["t", "argmin", "min_psi", "x_rre"]);
    t.note("h", (interval.1 - interval.0) / grid as f64);
    t.note("scheme_error", fine.scheme_error(&coarse));
    t.note("steps", fine.steps as f64);
    for k in 0..fine.times.len() {
        let time = fine.times[k];
        t.row(&[time, fine.argmin[k], fine.min_values[k], rre.state_at(time)[0]]);
    }
    Ok(Artifact::Table(t))
}

fn response(net: &ReactionNetwork, c: &Common, param: Option<&str>, delta: f64) -> CliResult<Artifact> {
    let name = param.ok_or_else(|| usage("--method response needs --param"))?;
    let p = Parameter::parse(name).ok_or_else(|| usage(format!("bad parameter `{name}`")))?;
    let x0 = require_x0(net, c)?;
    let l = auto_landscape(net, c)?;
    let traj = integrate_rre(net, &x0, final_time(c, 5.0), 1e-12).map_err(domain)?;
    let samples = linear_response(net, &l, &p, delta, &traj).map_err(domain)?;
    let mut header = vec!["t".to_string()];
    header.extend(species_columns(net, "x"));
    header.extend(["rate".to_string(), "psi_tilde".to_string()]);
    let mut t = Table::new(header);
    for s in samples {
        let row: Vec<f64> = std::iter::once(s.t).chain(s.x).chain([s.rate, s.psi_tilde]).collect();
        t.row(&row);
    }
    Ok(Artifact::Table(t))
}

fn path_header(net: &ReactionNetwork, first: &str) -> Vec<String> {
    let mut h = vec![first.to_string()];
    h.extend(species_columns(net, "x"));
    h.extend(species_columns(net, "p"));
    h.push("running_action".into());
    h
}

/// ∫ p·dx by the trapezoidal rule.
fn running_action(path: &ActionPath) -> Vec<f64> {
    let zeros = vec![0.0; path.dim()];
    let p = |i: usize| path.momenta.as_ref().map_or(&zeros, |m| &m[i]).clone();
    let mut out = vec![0.0; path.len()];
    for i in 1..path.len() {
        let dx: Vec<f64> = path.states[i].iter().zip(&path.states[i - 1]).map(|(a, b)| a - b).collect();
        let mid: Vec<f64> = p(i).iter().zip(&p(i - 1)).map(|(a, b)| 0.5 * (a + b)).collect();
        out[i] = out[i - 1] + dot(&mid, &dx);
    }
    out
}

fn path_table(net: &ReactionNetwork, first: &str, path: &ActionPath, running: &[f64]) -> Table {
    let mut t = Table::new(path_header(net, first));
    let zeros = vec![0.0; path.dim()];
    for i in 0..path.len() {
        let p = path.momenta.as_ref().map_or(&zeros, |m| &m[i]);
        let row: Vec<f64> = std::iter::once(path.times[i])
            .chain(path.states[i].iter().copied())
            .chain(p.iter().copied())
            .chain([running[i]])
            .collect();
        t.row(&row);
    }
    t
}

pub fn path(
    net: &ReactionNetwork,
    c: &Common,
    from: &[f64],
    to: &[f64],
    method: PathMethod,
    eps: f64,
    saddle: &[f64],
) -> CliResult<Artifact> {
    let n = net.n_species();
    let from = vector_arg("--from", from, n)?;
    let to = vector_arg("--to", to, n)?;
    match method {
        PathMethod::Reverse => {
            let l = auto_landscape(net, c)?;
            let rep = reversed_uphill(net, &l, &from, &to, eps, c.tol).map_err(domain)?;
            let mut t = path_table(net, "t", &rep.uphill, &running_action(&rep.uphill));
            t.note("action_uphill", rep.action_uphill);
            t.note("action_downhill", rep.action_downhill);
            t.note("delta_psi", rep.delta_psi);
            t.note("identity_residual", rep.identity_residual);
            t.note("barrier", rep.barrier);
            t.note("max_hamiltonian", rep.max_hamiltonian);
            Ok(Artifact::Table(t))
        }
        PathMethod::Gmam => {
            let cfg = GmamConfig { n_images: c.images, ..GmamConfig::default() };
            let r = gmam_quasipotential(net, &from, &to, &cfg).map_err(domain)?;
            let mut t = path_table(net, "lambda", &r.path, &r.running_action);
            t.note("value", r.value);
            t.note("converged", if r.converged { 1.0 } else { 0.0 });
            t.note("iterations", r.iterations as f64);
            t.note("max_hamiltonian", r.max_hamiltonian);
            Ok(Artifact::Table(t))
        }
        PathMethod::Barrier => {
            let saddle = vector_arg("--saddle", saddle, n)?;
            let l = auto_landscape(net, c)?;
            let b = barrier_between(net, &l, &from, &to, &saddle).map_err(domain)?;
            Ok(Artifact::Json(json!({
                "landscape": l.kind().as_str(),
                "barrier_ab": b.ab,
                "barrier_ba": b.ba,
                "action_ab": b.action_ab,
                "action_ba": b.action_ba,
            })))
        }
    }
}

pub fn entropy(net: &ReactionNetwork, c: &Common) -> CliResult<Artifact> {
    let x0 = require_x0(net, c)?;
    let l = auto_landscape(net, c)?;
    let traj = integrate_rre(net, &x0, final_time(c, 5.0), 1e-12).map_err(domain)?;
    let mut t = Table::new(["t", "s_tot", "s_na", "s_a"]);
    for (time, x) in traj.times.iter().zip(&traj.states) {
        let g = l.gradient(x).map_err(domain)?;
        let e = entropy_production(net, x, &g).map_err(domain)?;
        t.row(&[*time, e.s_tot, e.s_na, e.s_a]);
    }
    let g0 = l.gradient(&x0).map_err(domain)?;
    let d = conservative_dissipative(net, &x0, &g0, c.quad_order).map_err(domain)?;
    let e0 = entropy_production(net, &x0, &g0).map_err(domain)?;
    let k_min = sym_eigenvalues(&d.k).into_iter().fold(f64::INFINITY, f64::min);
    let mut extra = json!({
        "landscape": l.kind().as_str(),
        "at_x0": {
            "x": x0,
            "grad_psi": g0,
            "s_tot": e0.s_tot,
            "s_na": e0.s_na,
            "s_a": e0.s_a,
            "s_a_kl": e0.s_a_kl,
            "w": d.w.as_slice(),
            "k": matrix_json(&d.k),
            "a1": d.a1.as_ref().map(matrix_json),
            "a2": matrix_json(&d.a2),
            "w_dot_grad_psi": d.w.dot(&nalgebra::DVector::from_column_slice(&g0)),
            "k_min_eigenvalue": k_min,
            "quad_order": d.quad_order,
            "quad_error": d.quad_error,
            "closed_form_gap": d.closed_form_gap,
            "reconstruction_residual": d.reconstruction_residual,
        },
    });
    let rep = steady_report(net, c, 64)?;
    if let Some(xs) = rep.states.iter().find(|s| s.classification == Classification::DetailedBalanced) {
        let k = log_mean_onsager(net, &x0, &xs.x).map_err(domain)?;
        extra["at_x0"]["k_log_mean"] = matrix_json(&k);
    }
    Ok(Artifact::Both(t, extra))
}

pub fn diffusion(
    net: &ReactionNetwork,
    c: &Common,
    model: DiffusionModelArg,
    dt: f64,
    residual: bool,
    grid: usize,
) -> CliResult<Artifact> {
    let needs_landscape = residual || model == DiffusionModelArg::Fd;
    let l = if needs_landscape { Some(auto_landscape(net, c)?) } else { None };
    let m: DiffusionModel<'_> = match (model, &l) {
        (DiffusionModelArg::Fd, Some(l)) => fd_diffusion(net, l, c.volume).map_err(domain)?,
        _ => chemical_langevin(net, c.volume).map_err(domain)?,
    };
    if residual {
        let l = l.as_ref().expect("built above");
        if grid < 3 {
            return Err(usage("--grid must be at least 3"));
        }
        let (a, b) = match l.domain() {
            Some(d) if c.bounds.is_empty() => {
                // stay clear of the table ends, where one-sided slopes live
                let w = d[0].1 - d[0].0;
                (d[0].0 + 0.1 * w, d[0].1 - 0.1 * w)
            }
            _ => landscape_interval(c, &steady_report(net, c, 64)?)?,
        };
        let mut t = Table::new(["n", "h", "residual"]);
        let mut prev: Option<f64> = None;
        let mut worst_ratio = f64::INFINITY;
        for k in 0..3 {
            let pts = (grid - 1) * (1 << k) + 1;
            let r = fd_invariance_residual(&m, l, (a, b, pts)).map_err(domain)?;
            if let Some(p) = prev {
                worst_ratio = worst_ratio.min(p / r);
            }
            prev = Some(r);
            t.row_cells(vec![Cell::Int(pts as i64), Cell::Num((b - a) / (pts - 1) as f64), Cell::Num(r)]);
        }
        t.note("min_halving_ratio", worst_ratio);
        return Ok(Artifact::Table(t));
    }
    let x0 = require_x0(net, c)?;
    let sample = euler_maruyama(&m, &x0, final_time(c, 10.0), dt, c.seed).map_err(domain)?;
    let mut t = Table::new(std::iter::once("t".to_string()).chain(species_columns(net, "x")));
    t.note("regularized", if sample.regularized { 1.0 } else { 0.0 });
    for (time, x) in sample.path.times.iter().zip(&sample.path.states) {
        let row: Vec<f64> = std::iter::once(*time).chain(x.iter().copied()).collect();
        t.row(&row);
    }
    Ok(Artifact::Table(t))
}

pub fn scenario(params: Option<&Path>, preset: Option<Preset>) -> CliResult<Artifact> {
    let p = match (params, preset) {
        (Some(_), Some(_)) => return Err(usage("give either a parameter file or --preset, not both")),
        (None, None) => return Err(usage("scenario needs a parameter file or --preset")),
        (None, Some(Preset::S1)) => SchloglParams { k1p: 1.0, k1m: 1.0, k2p: 0.75, k2m: 2.75, a: 3.0, b: 1.0 },
        (None, Some(Preset::S0)) => SchloglParams { k1p: 1.0, k1m: 1.0, k2p: 1.0, k2m: 1.0, a: 1.0, b: 1.0 },
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("bad parameter file {}: {e}", path.display())))?
        }
    };
    Ok(Artifact::Json(schlogl_scenario(&p).map_err(domain)?))
}
