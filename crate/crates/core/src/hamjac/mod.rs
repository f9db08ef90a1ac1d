//! WKB Hamiltonian, its Legendre dual, action functionals and Hamiltonian flow.

mod lagrangian;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::kinetics::{check_state, flux_gradients, fluxes, group_fluxes, KineticsError};
use crate::netparse::{grouped_vectors, ReactionNetwork};
use crate::numerics::{dot, dopri5, Halton, OdeError, OdeOptions};
use crate::path::{ActionPath, PathError};

pub use lagrangian::{action, lagrangian, LagrangianEval, ReducedBasis};
pub(crate) use lagrangian::lagrangian_with;

/// Exponents above this are treated as overflow.
pub const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamJacError {
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("momentum has {got} components, network has {expected} species")]
    Dimension { expected: usize, got: usize },
    #[error("Legendre transform did not converge at t = {t}")]
    LagrangianDiverged { t: f64 },
    #[error("Hamiltonian flow blew up at t = {t}")]
    BlowUp { t: f64 },
    #[error("integration failed: {0}")]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianEval {
    pub value: f64,
    pub grad_p: Vec<f64>,
    pub grad_x: Vec<f64>,
    pub hess_pp: DMatrix<f64>,
    /// Mixed derivatives ∂²H/∂pᵢ∂xₗ.
    pub hess_px: DMatrix<f64>,
    /// Some exponent νⱼ·p exceeded the overflow limit; `value` is +∞.
    pub overflow: bool,
}

/// H(p,x) = Σⱼ Φ⁺ⱼ(e^{νⱼ·p} − 1) + Φ⁻ⱼ(e^{−νⱼ·p} − 1) with exact derivatives.
pub fn hamiltonian(net: &ReactionNetwork, p: &[f64], x: &[f64]) -> Result<HamiltonianEval, HamJacError> {
    check_state(net, x)?;
    if p.len() != net.n_species() {
        return Err(HamJacError::Dimension { expected: net.n_species(), got: p.len() });
    }
    Ok(eval_unchecked(net, p, x))
}

pub(crate) fn eval_unchecked(net: &ReactionNetwork, p: &[f64], x: &[f64]) -> HamiltonianEval {
    let n = x.len();
    let (fp, fm) = fluxes(net, x);
    let (gp, gm) = flux_gradients(net, x);
    let mut out = HamiltonianEval {
        value: 0.0,
        grad_p: vec![0.0; n],
        grad_x: vec![0.0; n],
        hess_pp: DMatrix::zeros(n, n),
        hess_px: DMatrix::zeros(n, n),
        overflow: false,
    };
    for (j, r) in net.reactions.iter().enumerate() {
        let nu = r.nu_f64();
        let c = dot(&nu, p);
        if c.abs() > EXP_LIMIT {
            out.overflow = true;
            continue;
        }
        let (ep, em) = (c.exp_m1(), (-c).exp_m1());
        out.value += fp[j] * ep + fm[j] * em;
        let (xp, xm) = (c.exp(), (-c).exp());
        let (wp, wm) = (fp[j] * xp, fm[j] * xm);
        for i in 0..n {
            if nu[i] == 0.0 {
                continue;
            }
            out.grad_p[i] += nu[i] * (wp - wm);
            for l in 0..n {
                out.hess_pp[(i, l)] += (wp + wm) * nu[i] * nu[l];
                out.hess_px[(i, l)] += nu[i] * (gp[j][l] * xp - gm[j][l] * xm);
            }
        }
        for l in 0..n {
            out.grad_x[l] += gp[j][l] * ep + gm[j][l] * em;
        }
    }
    if out.overflow {
        out.value = f64::INFINITY;
    }
    out
}

/// Value only, for inner loops.
pub(crate) fn value_unchecked(net: &ReactionNetwork, p: &[f64], x: &[f64]) -> f64 {
    let (fp, fm) = fluxes(net, x);
    let mut h = 0.0;
    for (j, r) in net.reactions.iter().enumerate() {
        let c: f64 = r.nu_minus.iter().zip(&r.nu_plus).zip(p).map(|((&a, &b), pi)| (a as f64 - b as f64) * pi).sum();
        if c.abs() > EXP_LIMIT {
            return f64::INFINITY;
        }
        h += fp[j] * c.exp_m1() + fm[j] * (-c).exp_m1();
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    /// max |H(p,x) − H(∇ψ−p,x)| over the samples.
    pub max_residual: f64,
    /// max of |H(p,x)| + |H(∇ψ−p,x)| + 1 over the samples, for relative comparison.
    pub scale: f64,
    /// max relative residual of e^{ξ·∇ψ}Φ⁺_ξ = Φ⁻_ξ over samples and groups.
    pub grouped_residual: f64,
}

/// Probe the symmetry H(p,x) = H(∇ψ(x)−p, x) on Halton samples of
/// x ∈ `sample_box`, p ∈ [−p_radius, p_radius]ᴺ.
pub fn symmetry_residual<G>(
    net: &ReactionNetwork,
    grad_psi: G,
    sample_box: &[(f64, f64)],
    n_samples: usize,
    p_radius: f64,
) -> Result<SymmetryReport, HamJacError>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = net.n_species();
    if sample_box.len() != n {
        return Err(HamJacError::Dimension { expected: n, got: sample_box.len() });
    }
    let groups = grouped_vectors(net);
    let mut rep = SymmetryReport { max_residual: 0.0, scale: 1.0, grouped_residual: 0.0 };
    for u in Halton::new(2 * n).take(n_samples) {
        let x: Vec<f64> = u[..n].iter().zip(sample_box).map(|(t, &(lo, hi))| lo + t * (hi - lo)).collect();
        let p: Vec<f64> = u[n..].iter().map(|t| p_radius * (2.0 * t - 1.0)).collect();
        check_state(net, &x)?;
        let g = grad_psi(&x);
        let q: Vec<f64> = g.iter().zip(&p).map(|(a, b)| a - b).collect();
        let (h1, h2) = (value_unchecked(net, &p, &x), value_unchecked(net, &q, &x));
        rep.max_residual = rep.max_residual.max((h1 - h2).abs());
        rep.scale = rep.scale.max(h1.abs() + h2.abs() + 1.0);
        let (fp, fm) = fluxes(net, &x);
        let (gp, gm) = group_fluxes(&groups, &fp, &fm);
        for (k, grp) in groups.iter().enumerate() {
            let c: f64 = grp.xi.iter().zip(&g).map(|(&a, b)| a as f64 * b).sum();
            let lhs = c.exp() * gp[k];
            let denom = lhs.abs() + gm[k].abs();
            if denom > 0.0 {
                rep.grouped_residual = rep.grouped_residual.max((lhs - gm[k]).abs() / denom);
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub path: ActionPath,
    pub h0: f64,
    /// max |H(p(t),x(t)) − H(p0,x0)| along the emitted samples.
    pub energy_drift: f64,
}

/// Bicharacteristics ẋ = ∇ₚH, ṗ = −∇ₓH by adaptive Dormand–Prince.
pub fn hamiltonian_flow(
    net: &ReactionNetwork,
    x0: &[f64],
    p0: &[f64],
    t_end: f64,
    tol: f64,
) -> Result<FlowResult, HamJacError> {
    let n = net.n_species();
    let start = hamiltonian(net, p0, x0)?;
    if start.overflow {
        return Err(HamJacError::BlowUp { t: 0.0 });
    }
    let y0: Vec<f64> = x0.iter().chain(p0).copied().collect();
    let rhs = |_: f64, y: &[f64]| -> Vec<f64> {
        let x: Vec<f64> = y[..n].iter().map(|v| v.max(0.0)).collect();
        let e = eval_unchecked(net, &y[n..], &x);
        if e.overflow {
            return vec![f64::NAN; 2 * n];
        }
        e.grad_p.iter().copied().chain(e.grad_x.iter().map(|g| -g)).collect()
    };
    let sol = dopri5(rhs, 0.0, &y0, t_end, &OdeOptions::new(tol), |_, _| false).map_err(|e| match e {
        OdeError::StepUnderflow { t, .. } | OdeError::NonFinite { t } => HamJacError::BlowUp { t },
        other => HamJacError::Ode(other),
    })?;
    let mut energy_drift = 0.0_f64;
    let mut states = Vec::with_capacity(sol.states.len());
    let mut momenta = Vec::with_capacity(sol.states.len());
    for y in &sol.states {
        let x: Vec<f64> = y[..n].iter().map(|v| v.max(0.0)).collect();
        energy_drift = energy_drift.max((value_unchecked(net, &y[n..], &x) - start.value).abs());
        states.push(x);
        momenta.push(y[n..].to_vec());
    }
    Ok(FlowResult {
        path: ActionPath { times: sol.times, states, momenta: Some(momenta), action: None },
        h0: start.value,
        energy_drift,
    })
}
