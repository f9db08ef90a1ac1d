//! Conservative–dissipative splitting R = W − K∇ψ and entropy-production accounting.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::hamjac::eval_unchecked;
use crate::kinetics::{check_balance, check_state, fluxes, rre_vector, KineticsError};
use crate::netparse::{structure, ReactionNetwork};
use crate::numerics::{dot, gauss_legendre, log_mean};

pub const DEFAULT_QUAD_ORDER: usize = 32;
const CHECK_QUAD_ORDER: usize = 48;
const SERIES_CUTOFF: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecompError {
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error("gradient has {got} components, network has {expected} species")]
    Dimension { expected: usize, got: usize },
    #[error("gradient is not finite")]
    NonFinite,
    #[error("detailed balance fails at the reference state")]
    NotDetailedBalanced,
    #[error("quadrature order must be positive")]
    QuadOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub w: DVector<f64>,
    pub k: DMatrix<f64>,
    /// (W⊗m − m⊗W)/|m|² for the conservation vector m, when one exists.
    pub a1: Option<DMatrix<f64>>,
    pub a2: DMatrix<f64>,
    pub quad_order: usize,
    /// max entry change of (W, K) between `quad_order` and the check order.
    pub quad_error: f64,
    /// max |K_quadrature − K_closed_form| entrywise.
    pub closed_form_gap: f64,
    /// ‖R − (W − K∇ψ)‖∞.
    pub reconstruction_residual: f64,
}

/// (e^c − 1)/c with its limit 1 at c = 0.
fn expm1_ratio(c: f64) -> f64 {
    if c.abs() < SERIES_CUTOFF {
        1.0 + c / 2.0 + c * c / 6.0
    } else {
        c.exp_m1() / c
    }
}

/// (e^c − 1 − c)/c² with its limit ½ at c = 0.
fn expm1_curv(c: f64) -> f64 {
    if c.abs() < SERIES_CUTOFF {
        0.5 + c / 6.0 + c * c / 24.0
    } else {
        (c.exp_m1() - c) / (c * c)
    }
}

fn theta_integrals(net: &ReactionNetwork, x: &[f64], q: &[f64], order: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let mut w = DVector::zeros(n);
    let mut k = DMatrix::zeros(n, n);
    let rule = gauss_legendre(order);
    for (theta, wt) in rule.mapped(0.0, 1.0) {
        let p: Vec<f64> = q.iter().map(|v| theta * v).collect();
        let e = eval_unchecked(net, &p, x);
        w += wt * DVector::from_column_slice(&e.grad_p);
        k += (wt * (1.0 - theta)) * &e.hess_pp;
    }
    (w, k)
}

fn validate(net: &ReactionNetwork, x: &[f64], grad_psi: &[f64]) -> Result<(), DecompError> {
    check_state(net, x)?;
    if grad_psi.len() != net.n_species() {
        return Err(DecompError::Dimension { expected: net.n_species(), got: grad_psi.len() });
    }
    if grad_psi.iter().any(|v| !v.is_finite()) {
        return Err(DecompError::NonFinite);
    }
    Ok(())
}

/// K = Σⱼ [Φ⁺ⱼ(e^c−1−c) + Φ⁻ⱼ(e^{−c}−1+c)]/c² · νⱼνⱼᵀ with c = νⱼ·∇ψ,
/// the θ-integral in closed form.
pub fn onsager_closed_form(net: &ReactionNetwork, x: &[f64], grad_psi: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let (fp, fm) = fluxes(net, x);
    let mut k = DMatrix::zeros(n, n);
    for (j, r) in net.reactions.iter().enumerate() {
        let nu = DVector::from_vec(r.nu_f64());
        let c = dot(nu.as_slice(), grad_psi);
        k += (fp[j] * expm1_curv(c) + fm[j] * expm1_curv(-c)) * &nu * nu.transpose();
    }
    k
}

/// W = ∫₀¹∇ₚH(θ∇ψ)dθ and K = ∫₀¹(1−θ)∇²ₚₚH(θ∇ψ)dθ by Gauss–Legendre in θ.
pub fn conservative_dissipative(
    net: &ReactionNetwork,
    x: &[f64],
    grad_psi: &[f64],
    quad_order: usize,
) -> Result<Decomposition, DecompError> {
    validate(net, x, grad_psi)?;
    if quad_order == 0 {
        return Err(DecompError::QuadOrder);
    }
    let n = x.len();
    let (w, k) = theta_integrals(net, x, grad_psi, quad_order);
    let (w2, k2) = theta_integrals(net, x, grad_psi, CHECK_QUAD_ORDER.max(quad_order + 16));
    let quad_error = (&w - &w2).amax().max((&k - &k2).amax());

    let (fp, fm) = fluxes(net, x);
    let qv = DVector::from_column_slice(grad_psi);
    let q2 = qv.norm_squared();
    let k_closed = onsager_closed_form(net, x, grad_psi);
    let mut a2 = DMatrix::zeros(n, n);
    for (j, r) in net.reactions.iter().enumerate() {
        let nu = DVector::from_vec(r.nu_f64());
        let c = nu.dot(&qv);
        if q2 > 0.0 {
            // (Φ⁺(e^c−1) + Φ⁻(e^{−c}−1))/c
            let s = fp[j] * expm1_ratio(c) - fm[j] * expm1_ratio(-c);
            a2 += (s / q2) * (&nu * qv.transpose() - &qv * nu.transpose());
        }
    }
    let closed_form_gap = (&k - &k_closed).amax();

    let a1 = structure(net).conservation_f64().map(|m| {
        let mv = DVector::from_vec(m);
        (&w * mv.transpose() - &mv * w.transpose()) / mv.norm_squared()
    });
    let r = DVector::from_vec(rre_vector(net, x));
    let reconstruction_residual = (&r - (&w - &k * &qv)).amax();
    Ok(Decomposition { w, k, a1, a2, quad_order, quad_error, closed_form_gap, reconstruction_residual })
}

/// K = Σⱼ Λ(Φ⁺ⱼ, Φ⁻ⱼ) νⱼνⱼᵀ, valid when `xs` is detailed balanced.
pub fn log_mean_onsager(net: &ReactionNetwork, x: &[f64], xs: &[f64]) -> Result<DMatrix<f64>, DecompError> {
    check_state(net, x)?;
    if !check_balance(net, xs, 1e-8)?.detailed {
        return Err(DecompError::NotDetailedBalanced);
    }
    let n = x.len();
    let (fp, fm) = fluxes(net, x);
    let mut k = DMatrix::zeros(n, n);
    for (j, r) in net.reactions.iter().enumerate() {
        let nu = DVector::from_vec(r.nu_f64());
        k += log_mean(fp[j], fm[j]) * &nu * nu.transpose();
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRates {
    pub s_tot: f64,
    pub s_na: f64,
    /// s_tot − s_na.
    pub s_a: f64,
    /// Σⱼ KL(Φ⁺ⱼ‖Φ⁻ⱼe^{−c}) + KL(Φ⁻ⱼ‖Φ⁺ⱼe^{c}) with c = νⱼ·∇ψ.
    pub s_a_kl: f64,
    /// |s_a − s_a_kl|; equals 2|H(∇ψ, x)| up to rounding.
    pub discrepancy: f64,
}

fn kl_term(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        b
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a * (a / b).ln() - a + b
    }
}

fn flux_force(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if a == 0.0 || b == 0.0 {
        f64::INFINITY
    } else {
        (a - b) * (a / b).ln()
    }
}

/// Total, non-adiabatic and adiabatic entropy production rates (k_B·T = 1).
pub fn entropy_production(net: &ReactionNetwork, x: &[f64], grad_psi: &[f64]) -> Result<EntropyRates, DecompError> {
    validate(net, x, grad_psi)?;
    let (fp, fm) = fluxes(net, x);
    let s_tot: f64 = fp.iter().zip(&fm).map(|(&a, &b)| flux_force(a, b)).sum();
    let d = conservative_dissipative(net, x, grad_psi, DEFAULT_QUAD_ORDER)?;
    let q = DVector::from_column_slice(grad_psi);
    let s_na = (&d.k * &q).dot(&q);
    let s_a_kl: f64 = net
        .reactions
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let c = dot(&r.nu_f64(), grad_psi);
            kl_term(fp[j], fm[j] * (-c).exp()) + kl_term(fm[j], fp[j] * c.exp())
        })
        .sum();
    let s_a = s_tot - s_na;
    let discrepancy = if s_a.is_finite() && s_a_kl.is_finite() { (s_a - s_a_kl).abs() } else { 0.0 };
    Ok(EntropyRates { s_tot, s_na, s_a, s_a_kl, discrepancy })
}

/// True when every entry of `m` is antisymmetric to `tol`.
pub fn is_antisymmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    (m + m.transpose()).amax() <= tol
}
