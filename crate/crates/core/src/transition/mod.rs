//! Least-action transitions obtained by time-reversing relaxation paths.

mod schlogl;

use thiserror::Error;

use crate::hamjac::{action, hamiltonian, HamJacError};
use crate::kinetics::{check_state, integrate_rre_until, rre_rhs, KineticsError};
use crate::landscape::{EnergyLandscape, LandscapeError};
use crate::netparse::ReactionNetwork;
use crate::numerics::linalg::orthonormal_span;
use crate::path::ActionPath;

pub use schlogl::{schlogl_scenario, SchloglParams};

/// Quadrature nodes per path interval for action evaluation.
const ACTION_QUAD: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransitionError {
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    HamJac(#[from] HamJacError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error("relaxation from {from:?} does not reach {target:?} (ended at {ended:?})")]
    WrongBasin { from: Vec<f64>, target: Vec<f64>, ended: Vec<f64> },
    #[error("{0:?} is not an unstable steady state")]
    NoSaddle(Vec<f64>),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionReport {
    /// RRE trajectory from near `x_to` to near `x_from`, zero momenta.
    pub downhill: ActionPath,
    /// Time reversal of `downhill` with momenta ∇ψ(x).
    pub uphill: ActionPath,
    pub action_downhill: f64,
    pub action_uphill: f64,
    /// ψ(x_to) − ψ(x_from) at the exact endpoints.
    pub delta_psi: f64,
    pub identity_residual: f64,
    pub barrier: f64,
    /// max |H(∇ψ(x), x)| along the uphill path.
    pub max_hamiltonian: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Uphill path from the attractor `x_from` to `x_to`, built by relaxing from
/// `x_to` (shifted by `eps` towards `x_from`) and reversing time.
pub fn reversed_uphill(
    net: &ReactionNetwork,
    landscape: &EnergyLandscape,
    x_from: &[f64],
    x_to: &[f64],
    eps: f64,
    tol: f64,
) -> Result<TransitionReport, TransitionError> {
    check_state(net, x_from)?;
    check_state(net, x_to)?;
    if !(eps > 0.0) || !(tol > 0.0) {
        return Err(TransitionError::Invalid("eps and tol must be positive".into()));
    }
    let n = x_from.len();
    let gap = distance(x_from, x_to);
    if gap <= eps {
        let degenerate = ActionPath {
            times: vec![0.0, 1.0],
            states: vec![x_from.to_vec(), x_from.to_vec()],
            momenta: Some(vec![vec![0.0; n]; 2]),
            action: Some(0.0),
        };
        return Ok(TransitionReport {
            downhill: degenerate.clone(),
            uphill: degenerate,
            action_downhill: 0.0,
            action_uphill: 0.0,
            delta_psi: 0.0,
            identity_residual: 0.0,
            barrier: 0.0,
            max_hamiltonian: 0.0,
        });
    }
    let start: Vec<f64> = x_to.iter().zip(x_from).map(|(b, a)| b + eps * (a - b) / gap).collect();
    let mut down = integrate_rre_until(net, &start, 1e5, tol, |_, x| distance(x, x_from) < eps)?;
    if distance(down.last_state(), x_from) >= eps {
        return Err(TransitionError::WrongBasin {
            from: x_to.to_vec(),
            target: x_from.to_vec(),
            ended: down.last_state().to_vec(),
        });
    }
    down.momenta = Some(vec![vec![0.0; n]; down.len()]);
    let action_downhill = action(net, &down, ACTION_QUAD)?;
    down.action = Some(action_downhill);

    let mut up = down.reversed();
    let momenta = up.states.iter().map(|x| landscape.gradient(x)).collect::<Result<Vec<_>, _>>()?;
    let mut max_h = 0.0_f64;
    for (p, x) in momenta.iter().zip(&up.states) {
        max_h = max_h.max(hamiltonian(net, p, x)?.value.abs());
    }
    up.momenta = Some(momenta);
    let action_uphill = action(net, &up, ACTION_QUAD)?;
    up.action = Some(action_uphill);
    let delta_psi = landscape.value(x_to)? - landscape.value(x_from)?;
    Ok(TransitionReport {
        downhill: down,
        uphill: up,
        action_downhill,
        action_uphill,
        delta_psi,
        identity_residual: (action_uphill - action_downhill - delta_psi).abs(),
        barrier: delta_psi,
        max_hamiltonian: max_h,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Barriers {
    /// ψ(saddle) − ψ(xA).
    pub ab: f64,
    /// ψ(saddle) − ψ(xB).
    pub ba: f64,
    /// Uphill actions from each attractor to the saddle.
    pub action_ab: f64,
    pub action_ba: f64,
}

fn is_unstable_steady(net: &ReactionNetwork, x: &[f64]) -> bool {
    let Ok((r, jac)) = rre_rhs(net, x) else { return false };
    let q = orthonormal_span(&net.stoich_f64(), x.len(), 1e-10);
    let scale = 1.0 + jac.amax();
    if r.iter().any(|v| v.abs() > 1e-8 * scale) || q.ncols() == 0 {
        return false;
    }
    let j = q.transpose() * jac * &q;
    j.complex_eigenvalues().iter().any(|c| c.re > 1e-10 * scale)
}

/// Barriers out of two attractors through the saddle joining their basins,
/// checked against reversed uphill actions.
pub fn barrier_between(
    net: &ReactionNetwork,
    landscape: &EnergyLandscape,
    xa: &[f64],
    xb: &[f64],
    saddle: &[f64],
) -> Result<Barriers, TransitionError> {
    check_state(net, saddle)?;
    if !is_unstable_steady(net, saddle) {
        return Err(TransitionError::NoSaddle(saddle.to_vec()));
    }
    let ps = landscape.value(saddle)?;
    let ab = ps - landscape.value(xa)?;
    let ba = ps - landscape.value(xb)?;
    let eps = 1e-4 * (1.0 + crate::numerics::max_abs(saddle));
    let action_ab = reversed_uphill(net, landscape, xa, saddle, eps, 1e-10)?.action_uphill;
    let action_ba = reversed_uphill(net, landscape, xb, saddle, eps, 1e-10)?.action_uphill;
    Ok(Barriers { ab, ba, action_ab, action_ba })
}
