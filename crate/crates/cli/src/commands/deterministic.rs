use crn_core::kinetics::{check_balance, integrate_rre, macro_flux, rre_rhs, SteadyStateReport};
use crn_core::netparse::{structure, Parameter, ReactionNetwork};
use serde_json::{json, Value};

use super::{domain, matrix_json, require_x0, species_columns, steady_report, usage, Artifact, CliResult};
use crate::args::{Common, Span};
use crate::output::{Cell, Table};

pub fn analyze(net: &ReactionNetwork, c: &Common) -> CliResult<Artifact> {
    let mut report = structure(net).to_json(net);
    report["canonical"] = json!(net.to_string());
    if !c.x0.is_empty() {
        let x = require_x0(net, c)?;
        let flux = macro_flux(net, &x).map_err(domain)?;
        let (r, jac) = rre_rhs(net, &x).map_err(domain)?;
        // balance flags only make sense at a steady state
        let balance = match check_balance(net, &x, c.tol) {
            Ok(f) => json!({"detailed": f.detailed, "complex": f.complex, "grouped": f.grouped}),
            Err(_) => Value::Null,
        };
        report["at_x0"] = json!({
            "x": x,
            "phi_plus": flux.phi_plus,
            "phi_minus": flux.phi_minus,
            "grouped_plus": flux.grouped_plus,
            "grouped_minus": flux.grouped_minus,
            "rre": r,
            "jacobian": matrix_json(&jac),
            "balance": balance,
        });
    }
    Ok(Artifact::Json(report))
}

fn states_json(rep: &SteadyStateReport) -> Value {
    let states: Vec<Value> = rep
        .states
        .iter()
        .map(|s| {
            let ev: Vec<Vec<f64>> = s.eigenvalues.iter().map(|&(re, im)| vec![re, im]).collect();
            json!({
                "x": s.x,
                "residual": s.residual,
                "classification": s.classification.as_str(),
                "stability": s.stability.as_str(),
                "eigenvalues": ev,
            })
        })
        .collect();
    json!({"count": rep.states.len(), "class_offset": rep.compatibility_offset, "states": states})
}

pub fn steady(net: &ReactionNetwork, c: &Common, starts: usize, class: bool) -> CliResult<Artifact> {
    if class && c.x0.is_empty() {
        return Err(usage("--class needs --x0"));
    }
    let mut local = c.clone();
    if !class {
        local.x0.clear();
    }
    let rep = steady_report(net, &local, starts)?;
    Ok(Artifact::Json(states_json(&rep)))
}

pub fn integrate(net: &ReactionNetwork, c: &Common) -> CliResult<Artifact> {
    let x0 = require_x0(net, c)?;
    let path = integrate_rre(net, &x0, super::final_time(c, 10.0), c.tol.max(1e-12)).map_err(domain)?;
    let mut t = Table::new(std::iter::once("t".to_string()).chain(species_columns(net, "x")));
    for (time, x) in path.times.iter().zip(&path.states) {
        let row: Vec<f64> = std::iter::once(*time).chain(x.iter().copied()).collect();
        t.row(&row);
    }
    Ok(Artifact::Table(t))
}

pub fn sweep(net: &ReactionNetwork, c: &Common, param: &str, range: Span, steps: usize, starts: usize) -> CliResult<Artifact> {
    let p = Parameter::parse(param).ok_or_else(|| usage(format!("bad parameter `{param}`")))?;
    if net.parameter_value(&p).is_none() {
        return Err(usage(format!("network has no parameter `{param}`")));
    }
    if steps < 2 {
        return Err(usage("--steps must be at least 2"));
    }
    let mut header = vec!["value".to_string(), "n_states".into(), "index".into()];
    header.extend(species_columns(net, "x"));
    header.push("stability".into());
    let mut t = Table::new(header);
    for k in 0..steps {
        let value = range.lo + (range.hi - range.lo) * k as f64 / (steps - 1) as f64;
        let swept = net.with_parameter(&p, value).ok_or_else(|| usage(format!("cannot set `{param}`")))?;
        let rep = steady_report(&swept, c, starts)?;
        let n = rep.states.len() as i64;
        if rep.states.is_empty() {
            let mut cells = vec![Cell::Num(value), Cell::Int(0), Cell::Int(-1)];
            cells.extend(net.species.iter().map(|_| Cell::Num(f64::NAN)));
            cells.push(Cell::Text("none".into()));
            t.row_cells(cells);
        }
        for (i, s) in rep.states.iter().enumerate() {
            let mut cells = vec![Cell::Num(value), Cell::Int(n), Cell::Int(i as i64)];
            cells.extend(s.x.iter().map(|v| Cell::Num(*v)));
            cells.push(Cell::Text(s.stability.as_str().into()));
            t.row_cells(cells);
        }
    }
    Ok(Artifact::Table(t))
}
