//! End-to-end report for the Schlögl model A + 2X ⇌ 3X, B ⇌ X.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::decomp::entropy_production;
use crate::kinetics::{check_balance, fluxes, rre_rhs};
use crate::landscape::landscape_1d;
use crate::netparse::{parse_network, ReactionNetwork};

use super::{barrier_between, TransitionError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchloglParams {
    pub k1p: f64,
    pub k1m: f64,
    pub k2p: f64,
    pub k2m: f64,
    pub a: f64,
    pub b: f64,
}

impl SchloglParams {
    pub fn network(&self) -> Result<ReactionNetwork, TransitionError> {
        let text = format!(
            "network schlogl\nspecies X\nchemostat A = {:?}, B = {:?}\n\
             reaction r1: A + 2 X <=> 3 X ; kplus = {:?}, kminus = {:?}\n\
             reaction r2: B <=> X ; kplus = {:?}, kminus = {:?}\n",
            self.a, self.b, self.k1p, self.k1m, self.k2p, self.k2m
        );
        parse_network(&text).map_err(|e| TransitionError::Invalid(e.to_string()))
    }

    /// Coefficients (c3, c2, c1, c0) of f(x) = Σ cᵢxⁱ.
    fn cubic(&self) -> [f64; 4] {
        [-self.k1m, self.k1p * self.a, -self.k2m, self.k2p * self.b]
    }
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap_or_else(BigRational::zero)
}

/// Positive real roots of f, polished by Newton and sorted.
fn positive_roots(c: [f64; 4]) -> Vec<f64> {
    let [c3, c2, c1, c0] = c;
    let comp = DMatrix::from_row_slice(3, 3, &[-c2 / c3, -c1 / c3, -c0 / c3, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let f = |x: f64| ((c3 * x + c2) * x + c1) * x + c0;
    let df = |x: f64| (3.0 * c3 * x + 2.0 * c2) * x + c1;
    let scale = comp.amax().max(1.0);
    let mut roots: Vec<f64> = comp
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-7 * scale && z.re > 0.0)
        .map(|z| {
            let mut x = z.re;
            for _ in 0..50 {
                let d = df(x);
                if d == 0.0 {
                    break;
                }
                let step = f(x) / d;
                x -= step;
                if step.abs() <= 1e-16 * x.abs() {
                    break;
                }
            }
            x
        })
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    roots
}

/// Full scenario report: double-well geometry, steady states, α table,
/// landscape, barriers, NESS entropy production and flux circulation.
pub fn schlogl_scenario(params: &SchloglParams) -> Result<Value, TransitionError> {
    let p = *params;
    let vals = [p.k1p, p.k1m, p.k2p, p.k2m, p.a, p.b];
    if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(TransitionError::Invalid("all rates and chemostats must be positive (k1m = 0 is not cubic)".into()));
    }
    let net = p.network()?;

    // f(x) = −k1m(x−θ)³ + k1m r²(x−θ) matched coefficient by coefficient
    let (k1p, k1m, k2p, k2m, a, b) = (exact(p.k1p), exact(p.k1m), exact(p.k2p), exact(p.k2m), exact(p.a), exact(p.b));
    let three = BigRational::from_integer(BigInt::from(3));
    let theta = &k1p * &a / (&three * &k1m);
    let r2 = &three * &theta * &theta - &k2m / &k1m;
    let constant_gap = &k2p * &b - &k1m * &theta * (&theta * &theta - &r2);
    let matched = constant_gap.is_zero();
    let theta_f = theta.to_f64().unwrap_or(f64::NAN);
    let r2_f = r2.to_f64().unwrap_or(f64::NAN);
    let printed_theta = p.a * p.k1p / (2.0 * p.k1m);

    let roots = positive_roots(p.cubic());
    let bistable = (p.k1p * p.a).powi(2) > 3.0 * p.k1m * p.k2m && roots.len() == 3;

    let mut states = Vec::new();
    let mut flux_rows = Vec::new();
    let mut entropy_rows = Vec::new();
    for &x in &roots {
        let (_, jac) = rre_rhs(&net, &[x])?;
        let slope = jac[(0, 0)];
        let stability = if slope < 0.0 { "stable" } else if slope > 0.0 { "unstable" } else { "marginal" };
        let class = match check_balance(&net, &[x], 1e-8) {
            Ok(f) if f.detailed => "detailed-balanced",
            Ok(f) if f.complex => "complex-balanced",
            _ => "NESS",
        };
        states.push(json!({ "x": x, "stability": stability, "classification": class }));
        let (fp, fm) = fluxes(&net, &[x]);
        flux_rows.push(json!({ "x": x, "J1": fp[0] - fm[0], "J2": fp[1] - fm[1] }));
        let e = entropy_production(&net, &[x], &[0.0]).map_err(|e| TransitionError::Invalid(e.to_string()))?;
        entropy_rows.push(json!({ "x": x, "s_tot": e.s_tot, "s_na": e.s_na, "s_a": e.s_a }));
    }

    let lo = 0.1 * roots.first().copied().unwrap_or(1.0);
    let hi = 2.0 * roots.last().copied().unwrap_or(1.0);
    let x_ref = roots.first().copied().unwrap_or(lo);
    let landscape = landscape_1d(&net, (lo, hi), x_ref, 2000)?;
    let table_n = 41;
    let mut alpha_table = Vec::with_capacity(table_n);
    let mut psi_table = Vec::with_capacity(table_n);
    for i in 0..table_n {
        let x = lo + (hi - lo) * i as f64 / (table_n - 1) as f64;
        let (fp, fm) = fluxes(&net, &[x]);
        let alpha = (fm[0] + fm[1]) / (fp[0] + fp[1]);
        alpha_table.push(json!([x, alpha]));
        psi_table.push(json!([x, landscape.value(&[x])?]));
    }

    let barriers = if bistable {
        let bar = barrier_between(&net, &landscape, &[roots[0]], &[roots[2]], &[roots[1]])?;
        json!({
            "saddle": roots[1],
            "low_to_saddle": bar.ab,
            "high_to_saddle": bar.ba,
            "uphill_action_low": bar.action_ab,
            "uphill_action_high": bar.action_ba,
        })
    } else {
        Value::Null
    };

    Ok(json!({
        "params": p,
        "derived": {
            "theta": theta_f,
            "r_squared": r2_f,
            "r": if r2_f >= 0.0 { json!(r2_f.sqrt()) } else { Value::Null },
            "double_well_match": matched,
            "constant_mismatch": constant_gap.to_f64().unwrap_or(f64::NAN),
            "bistable": bistable,
            "theta_note": format!(
                "coefficient matching gives theta = a*k1p/(3*k1m) = {theta_f}; the formula a*k1p/(2*k1m) would give {printed_theta}"
            ),
        },
        "states": states,
        "alpha": alpha_table,
        "landscape": { "x_ref": x_ref, "interval": [lo, hi], "psi": psi_table },
        "barriers": barriers,
        "entropy": entropy_rows,
        "fluxes": flux_rows,
    }))
}
