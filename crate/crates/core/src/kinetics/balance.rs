use crate::netparse::{grouped_vectors, structure, ReactionNetwork};

use super::{check_state, fluxes, group_fluxes, rre_vector, KineticsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BalanceFlags {
    pub detailed: bool,
    pub complex: bool,
    pub grouped: bool,
}

/// Relative residual below which a state counts as steady for the balance tests.
const STEADY_REL_TOL: f64 = 1e-8;

fn balanced(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (a + b)
}

/// Net flux through each complex with the magnitude of its contributions.
pub fn complex_residuals(net: &ReactionNetwork, x: &[f64]) -> Vec<(f64, f64)> {
    let st = structure(net);
    let (fp, fm) = fluxes(net, x);
    let mut res = vec![(0.0, 0.0); st.n_c];
    for (j, &(reac, prod)) in st.reaction_complexes.iter().enumerate() {
        let w = fp[j] - fm[j];
        let mag = fp[j] + fm[j];
        res[reac].0 -= w;
        res[reac].1 += mag;
        res[prod].0 += w;
        res[prod].1 += mag;
    }
    res
}

/// Detailed, complex and grouped balance at a strictly positive steady state,
/// each with relative tolerance `tol`.
pub fn check_balance(net: &ReactionNetwork, xs: &[f64], tol: f64) -> Result<BalanceFlags, KineticsError> {
    check_state(net, xs)?;
    if xs.iter().any(|&v| v <= 0.0) {
        return Err(KineticsError::NotPositive);
    }
    let (fp, fm) = fluxes(net, xs);
    let r = rre_vector(net, xs);
    let scale: f64 = fp.iter().zip(&fm).map(|(a, b)| a + b).sum::<f64>().max(f64::MIN_POSITIVE);
    let residual = crate::numerics::max_abs(&r);
    if residual > STEADY_REL_TOL * scale {
        return Err(KineticsError::NotSteady { residual });
    }
    let detailed = fp.iter().zip(&fm).all(|(&a, &b)| balanced(a, b, tol));
    let complex = complex_residuals(net, xs).iter().all(|&(net_flux, mag)| net_flux.abs() <= tol * mag);
    let (gp, gm) = group_fluxes(&grouped_vectors(net), &fp, &fm);
    let grouped = gp.iter().zip(&gm).all(|(&a, &b)| balanced(a, b, tol));
    Ok(BalanceFlags { detailed, complex, grouped })
}
