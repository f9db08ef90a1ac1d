//! First-order response of ψ to a chemostat perturbation along a trajectory.

use crate::kinetics::{fluxes, rre_vector};
use crate::netparse::{Parameter, ReactionNetwork};
use crate::numerics::{dot, gauss_legendre};
use crate::path::ActionPath;

use super::{EnergyLandscape, LandscapeError};

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSample {
    pub t: f64,
    pub x: Vec<f64>,
    /// dψ̃/dt at this point.
    pub rate: f64,
    pub psi_tilde: f64,
}

/// ∂_b H(p, x) for chemostat index `m` with concentration `b`.
fn dh_db(net: &ReactionNetwork, m: usize, b: f64, p: &[f64], x: &[f64]) -> f64 {
    let (fp, fm) = fluxes(net, x);
    net.reactions
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let c = dot(&r.nu_f64(), p);
            r.chemo_plus[m] as f64 / b * fp[j] * c.exp_m1() + r.chemo_minus[m] as f64 / b * fm[j] * (-c).exp_m1()
        })
        .sum()
}

/// ψ̃ along `trajectory` with dψ̃/dt = δ·∂_b H(∇ψ(x(t)), x(t)), ψ̃(0) = 0.
pub fn linear_response(
    net: &ReactionNetwork,
    landscape: &EnergyLandscape,
    param: &Parameter,
    delta: f64,
    trajectory: &ActionPath,
) -> Result<Vec<ResponseSample>, LandscapeError> {
    let Parameter::Chemostat(name) = param else {
        return Err(LandscapeError::NotChemostat(param.to_string()));
    };
    let m = net.chemostat_index(name).ok_or_else(|| LandscapeError::NotChemostat(name.clone()))?;
    let b = net.chemostats[m].value;
    if !(b > 0.0) {
        return Err(LandscapeError::Invalid(format!("chemostat `{name}` must be positive")));
    }
    trajectory.validate().map_err(crate::hamjac::HamJacError::from)?;
    let rate_at = |x: &[f64]| -> Result<f64, LandscapeError> {
        let g = landscape.gradient(x)?;
        Ok(delta * dh_db(net, m, b, &g, x))
    };
    let gl = gauss_legendre(3);
    let mut out = Vec::with_capacity(trajectory.len());
    let mut acc = 0.0;
    let x0 = &trajectory.states[0];
    out.push(ResponseSample { t: trajectory.times[0], x: x0.clone(), rate: rate_at(x0)?, psi_tilde: 0.0 });
    for k in 1..trajectory.len() {
        let (t0, t1) = (trajectory.times[k - 1], trajectory.times[k]);
        let (xa, xb) = (&trajectory.states[k - 1], &trajectory.states[k]);
        let (da, db) = (rre_vector(net, xa), rre_vector(net, xb));
        let dt = t1 - t0;
        for (s, w) in gl.mapped(0.0, 1.0) {
            // cubic Hermite state between the stored points, slopes from the RRE
            let (h00, h10, h01, h11) = (
                2.0 * s.powi(3) - 3.0 * s * s + 1.0,
                s.powi(3) - 2.0 * s * s + s,
                -2.0 * s.powi(3) + 3.0 * s * s,
                s.powi(3) - s * s,
            );
            let x: Vec<f64> = (0..xa.len())
                .map(|i| h00 * xa[i] + h10 * dt * da[i] + h01 * xb[i] + h11 * dt * db[i])
                .collect();
            acc += w * dt * rate_at(&x)?;
        }
        out.push(ResponseSample { t: t1, x: xb.clone(), rate: rate_at(xb)?, psi_tilde: acc });
    }
    Ok(out)
}
