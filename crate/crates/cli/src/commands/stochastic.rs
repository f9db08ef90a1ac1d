use crn_core::kinetics::meso_flux;
use crn_core::mesoscale::{
    build_cme, check_markov_db, entropy_dissipation, evolve_cme, meso_to_macro_energy, ssa_ensemble, ssa_simulate,
    stationary_distribution, ClassFilter, Divergence, LatticeDistribution, DEFAULT_STATE_CAP,
};
use crn_core::netparse::{structure, ReactionNetwork};
use serde_json::{json, Value};

use super::{domain, final_time, require_x0, search_box, species_columns, usage, Artifact, CliResult};
use crate::args::Common;
use crate::output::Table;

/// Number of evolution checkpoints reported by `cme --t`.
const CHECKPOINTS: usize = 10;

pub fn ssa(net: &ReactionNetwork, c: &Common, grid: usize) -> CliResult<Artifact> {
    let x0 = require_x0(net, c)?;
    let t_end = final_time(c, 10.0);
    match c.ensemble {
        None => {
            let tr = ssa_simulate(net, c.volume, &x0, t_end, c.seed).map_err(domain)?;
            let mut t = Table::new(std::iter::once("t".to_string()).chain(species_columns(net, "x")));
            t.note("rounded", if tr.rounded { 1.0 } else { 0.0 });
            if let Some(a) = tr.absorbed_at {
                t.note("absorbed_at", a);
            }
            for i in 0..tr.times.len() {
                let row: Vec<f64> = std::iter::once(tr.times[i]).chain(tr.state(i)).collect();
                t.row(&row);
            }
            Ok(Artifact::Table(t))
        }
        Some(paths) => {
            if grid < 2 {
                return Err(usage("--grid must be at least 2"));
            }
            let times: Vec<f64> = (0..grid).map(|k| t_end * k as f64 / (grid - 1) as f64).collect();
            let stats = ssa_ensemble(net, c.volume, &x0, t_end, c.seed, paths, &times).map_err(domain)?;
            let mut header = vec!["t".to_string()];
            header.extend(species_columns(net, "mean"));
            header.extend(species_columns(net, "sd"));
            let mut t = Table::new(header);
            t.note("paths", paths as f64);
            for (k, time) in stats.times.iter().enumerate() {
                let row: Vec<f64> =
                    std::iter::once(*time).chain(stats.mean[k].iter().copied()).chain(stats.sd[k].iter().copied()).collect();
                t.row(&row);
            }
            Ok(Artifact::Table(t))
        }
    }
}

fn counts_of(x: &[f64], v: f64) -> Vec<u64> {
    x.iter().map(|xi| (xi * v).round().max(0.0) as u64).collect()
}

fn dissipation_json(d: &crn_core::mesoscale::Dissipation) -> Value {
    json!({"f": d.f, "dfdt_chain": d.dfdt_chain, "dfdt_bregman": d.dfdt_bregman, "discrepancy": d.discrepancy})
}

/// Truncated master equation; `--box` is in concentration units.
pub fn cme(net: &ReactionNetwork, c: &Common) -> CliResult<Artifact> {
    if c.bounds.is_empty() {
        return Err(usage("cme needs --box"));
    }
    let v = c.volume;
    let bounds: Vec<(u64, u64)> = search_box(net, c, (0.0, 1.0))?
        .iter()
        .map(|&(lo, hi)| ((lo * v).floor().max(0.0) as u64, (hi * v).ceil() as u64))
        .collect();
    let class = match structure(net).conservation_f64() {
        Some(w) => {
            let x0 = require_x0(net, c).map_err(|_| usage("network has a conservation law; give --x0 to pick the class"))?;
            let weights: Vec<i64> = w.iter().map(|a| a.round() as i64).collect();
            let n0 = counts_of(&x0, v);
            let total = weights.iter().zip(&n0).map(|(a, &b)| a * b as i64).sum();
            Some(ClassFilter { weights, total })
        }
        None => None,
    };
    let gen = build_cme(net, v, &bounds, class, DEFAULT_STATE_CAP).map_err(domain)?;
    let st = stationary_distribution(&gen).map_err(domain)?;
    let db = check_markov_db(&gen, &st.distribution).map_err(domain)?;
    let dist: Vec<Value> = gen
        .states
        .iter()
        .zip(&st.distribution.p)
        .map(|(n, p)| {
            let mut row: Vec<Value> = n.iter().map(|&k| json!(k)).collect();
            row.push(json!(p));
            Value::Array(row)
        })
        .collect();
    let mut report = json!({
        "volume": v,
        "states": gen.len(),
        "stationary_residual": st.residual,
        "boundary_mass": st.boundary_mass,
        "markov_db": {"grouped": db.grouped, "per_reaction": db.per_reaction},
        "columns": species_columns(net, "n").into_iter().chain(["p".to_string()]).collect::<Vec<_>>(),
        "distribution": dist,
    });
    if !c.x0.is_empty() {
        let x0 = require_x0(net, c)?;
        let n0 = counts_of(&x0, v);
        let (mp, mm) = meso_flux(net, &n0, v).map_err(domain)?;
        report["meso_flux_at_x0"] = json!({"n": n0, "plus": mp, "minus": mm});
        if let Some(t_end) = c.t {
            let i0 = gen.index_of(&n0).ok_or_else(|| usage("V·x0 lies outside the --box lattice"))?;
            let mut p = LatticeDistribution::point(gen.len(), i0);
            let pi = &st.distribution;
            let mut rows = Vec::with_capacity(CHECKPOINTS);
            let dt = t_end / CHECKPOINTS as f64;
            for k in 1..=CHECKPOINTS {
                p = evolve_cme(&gen, &p, dt, 1e-14).map_err(domain)?;
                let kl = entropy_dissipation(&gen, &p, pi, &Divergence::Kl).map_err(domain)?;
                let chi2 = entropy_dissipation(&gen, &p, pi, &Divergence::Chi2).map_err(domain)?;
                rows.push(json!({
                    "t": dt * k as f64,
                    "energy": meso_to_macro_energy(&gen, &p, pi).map_err(domain)?,
                    "kl": dissipation_json(&kl),
                    "chi2": dissipation_json(&chi2),
                }));
            }
            report["evolution"] = Value::Array(rows);
        }
    }
    Ok(Artifact::Json(report))
}
