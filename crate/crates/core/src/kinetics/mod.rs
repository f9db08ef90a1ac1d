//! Mass-action fluxes, the reaction rate equation, steady states and balance tests.

mod balance;
mod steady;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::netparse::{grouped_vectors, ReactionGroup, ReactionNetwork};
use crate::numerics::{dopri5, OdeError, OdeOptions};
use crate::path::ActionPath;

pub use balance::{check_balance, complex_residuals, BalanceFlags};
pub use steady::{find_steady_states, Classification, SteadyState, SteadyStateReport, Stability};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("state has {got} components, network has {expected} species")]
    Dimension { expected: usize, got: usize },
    #[error("state must be non-negative and finite")]
    InvalidState,
    #[error("integration failed: {0}")]
    Ode(#[from] OdeError),
    #[error("state is not steady: residual {residual:e}")]
    NotSteady { residual: f64 },
    #[error("balance checks need a strictly positive state")]
    NotPositive,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Per-reaction and grouped macroscopic fluxes at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxTable {
    pub phi_plus: Vec<f64>,
    pub phi_minus: Vec<f64>,
    /// Φ⁺_ξ per group, ordered like `grouped_vectors`.
    pub grouped_plus: Vec<f64>,
    pub grouped_minus: Vec<f64>,
}

fn monomial(k: f64, x: &[f64], powers: &[u32]) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    powers.iter().zip(x).fold(k, |acc, (&a, &xi)| if a == 0 { acc } else { acc * xi.powi(a as i32) })
}

/// ∂/∂x of k·∏ x^a.
fn monomial_grad(k: f64, x: &[f64], powers: &[u32]) -> Vec<f64> {
    (0..x.len())
        .map(|l| {
            let a = powers[l];
            if a == 0 || k == 0.0 {
                return 0.0;
            }
            powers.iter().zip(x).enumerate().fold(k * a as f64, |acc, (i, (&b, &xi))| {
                let e = if i == l { b - 1 } else { b };
                if e == 0 {
                    acc
                } else {
                    acc * xi.powi(e as i32)
                }
            })
        })
        .collect()
}

/// Per-reaction fluxes (Φ⁺, Φ⁻) by the macroscopic law of mass action, 0⁰ = 1.
pub fn fluxes(net: &ReactionNetwork, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    net.reactions
        .iter()
        .map(|r| (monomial(r.k_plus_eff, x, &r.nu_plus), monomial(r.k_minus_eff, x, &r.nu_minus)))
        .unzip()
}

/// Per-reaction flux gradients (∇Φ⁺ⱼ, ∇Φ⁻ⱼ).
pub fn flux_gradients(net: &ReactionNetwork, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    net.reactions
        .iter()
        .map(|r| (monomial_grad(r.k_plus_eff, x, &r.nu_plus), monomial_grad(r.k_minus_eff, x, &r.nu_minus)))
        .unzip()
}

/// Grouped fluxes (Φ⁺_ξ, Φ⁻_ξ) from per-reaction fluxes.
pub fn group_fluxes(groups: &[ReactionGroup], phi_plus: &[f64], phi_minus: &[f64]) -> (Vec<f64>, Vec<f64>) {
    groups
        .iter()
        .map(|g| {
            g.members.iter().fold((0.0, 0.0), |(fp, fm), m| {
                let j = m.reaction;
                if m.sign > 0 {
                    (fp + phi_plus[j], fm + phi_minus[j])
                } else {
                    (fp + phi_minus[j], fm + phi_plus[j])
                }
            })
        })
        .unzip()
}

pub fn check_state(net: &ReactionNetwork, x: &[f64]) -> Result<(), KineticsError> {
    if x.len() != net.n_species() {
        return Err(KineticsError::Dimension { expected: net.n_species(), got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(KineticsError::InvalidState);
    }
    Ok(())
}

pub fn macro_flux(net: &ReactionNetwork, x: &[f64]) -> Result<FluxTable, KineticsError> {
    check_state(net, x)?;
    let (phi_plus, phi_minus) = fluxes(net, x);
    let (grouped_plus, grouped_minus) = group_fluxes(&grouped_vectors(net), &phi_plus, &phi_minus);
    Ok(FluxTable { phi_plus, phi_minus, grouped_plus, grouped_minus })
}

fn falling_ratio(n: u64, nu: u32, v: f64) -> f64 {
    if (n as u128) < nu as u128 {
        return 0.0;
    }
    (0..nu as u64).fold(1.0, |acc, i| acc * (n - i) as f64 / v)
}

/// Mesoscopic propensities φ±ⱼ(n) = k±ⱼ·V·∏ n!/(V^ν (n−ν)!).
pub fn meso_propensity(net: &ReactionNetwork, n: &[u64], v: f64) -> (Vec<f64>, Vec<f64>) {
    let side = |k: f64, nu: &[u32]| -> f64 {
        if k == 0.0 {
            return 0.0;
        }
        nu.iter().zip(n).fold(k * v, |acc, (&a, &ni)| if a == 0 { acc } else { acc * falling_ratio(ni, a, v) })
    };
    net.reactions.iter().map(|r| (side(r.k_plus_eff, &r.nu_plus), side(r.k_minus_eff, &r.nu_minus))).unzip()
}

/// Mesoscopic fluxes φ±ⱼ(n)/V, comparable with the macroscopic Φ±ⱼ(n/V).
pub fn meso_flux(net: &ReactionNetwork, n: &[u64], v: f64) -> Result<(Vec<f64>, Vec<f64>), KineticsError> {
    if n.len() != net.n_species() {
        return Err(KineticsError::Dimension { expected: net.n_species(), got: n.len() });
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(KineticsError::Invalid(format!("volume must be positive, got {v}")));
    }
    let (p, m) = meso_propensity(net, n, v);
    Ok((p.into_iter().map(|a| a / v).collect(), m.into_iter().map(|a| a / v).collect()))
}

/// R(x) = Σⱼ νⱼ(Φ⁺ⱼ − Φ⁻ⱼ) without validation, for inner loops.
pub fn rre_vector(net: &ReactionNetwork, x: &[f64]) -> Vec<f64> {
    let (fp, fm) = fluxes(net, x);
    let mut r = vec![0.0; x.len()];
    for (j, rx) in net.reactions.iter().enumerate() {
        let w = fp[j] - fm[j];
        for (ri, (&m, &p)) in r.iter_mut().zip(rx.nu_minus.iter().zip(&rx.nu_plus)) {
            *ri += (m as f64 - p as f64) * w;
        }
    }
    r
}

/// RRE vector field and its analytic Jacobian.
pub fn rre_rhs(net: &ReactionNetwork, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>), KineticsError> {
    check_state(net, x)?;
    let n = x.len();
    let (gp, gm) = flux_gradients(net, x);
    let mut jac = DMatrix::zeros(n, n);
    for (j, r) in net.reactions.iter().enumerate() {
        let nu = r.nu_f64();
        for i in 0..n {
            if nu[i] == 0.0 {
                continue;
            }
            for l in 0..n {
                jac[(i, l)] += nu[i] * (gp[j][l] - gm[j][l]);
            }
        }
    }
    Ok((rre_vector(net, x), jac))
}

/// Adaptive Dormand–Prince trajectory of the RRE on [0, T].
pub fn integrate_rre(net: &ReactionNetwork, x0: &[f64], t_end: f64, tol: f64) -> Result<ActionPath, KineticsError> {
    integrate_rre_until(net, x0, t_end, tol, |_, _| false)
}

/// As `integrate_rre`, ending early once `stop(t, x)` holds.
pub fn integrate_rre_until<S: FnMut(f64, &[f64]) -> bool>(
    net: &ReactionNetwork,
    x0: &[f64],
    t_end: f64,
    tol: f64,
    stop: S,
) -> Result<ActionPath, KineticsError> {
    check_state(net, x0)?;
    if !(t_end > 0.0) || !(tol > 0.0) {
        return Err(KineticsError::Invalid("T and tol must be positive".into()));
    }
    let opts = OdeOptions::new(tol).nonneg();
    let sol = dopri5(|_, y| rre_vector(net, y), 0.0, x0, t_end, &opts, stop)?;
    Ok(ActionPath { times: sol.times, states: sol.states, momenta: None, action: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netparse::parse_network;
    use crate::testutil::fixture;

    #[test]
    fn direct_substitution_flux() {
        let net = parse_network("species X\nreaction 2 X <=> 3 X ; kplus = 2, kminus = 0").unwrap();
        assert_eq!(macro_flux(&net, &[3.0]).unwrap().phi_plus, vec![18.0]);
    }

    #[test]
    fn schlogl_fluxes_at_one() {
        let t = macro_flux(&fixture("s1"), &[1.0]).unwrap();
        assert_eq!(t.phi_plus, vec![3.0, 0.75]);
        assert_eq!(t.phi_minus, vec![1.0, 2.75]);
        assert_eq!(t.grouped_plus, vec![3.75]);
        assert_eq!(t.grouped_minus, vec![3.75]);
    }

    #[test]
    fn zero_state_kills_consuming_fluxes() {
        for name in ["s1", "s0", "bd", "iso", "pdp"] {
            let net = fixture(name);
            let t = macro_flux(&net, &vec![0.0; net.n_species()]).unwrap();
            for (r, f) in net.reactions.iter().zip(&t.phi_plus) {
                if r.nu_plus.iter().any(|&a| a > 0) {
                    assert_eq!(*f, 0.0);
                }
            }
        }
    }

    #[test]
    fn meso_propensity_examples() {
        let net = parse_network("species X\nreaction 2 X <=> 0 ; kplus = 1, kminus = 0").unwrap();
        let (p, _) = meso_propensity(&net, &[5], 10.0);
        assert!((p[0] - 2.0).abs() < 1e-15);
        assert!((meso_flux(&net, &[5], 10.0).unwrap().0[0] - 0.2).abs() < 1e-15);
        assert_eq!(meso_propensity(&net, &[1], 10.0).0[0], 0.0);
    }

    #[test]
    fn meso_flux_approaches_macro() {
        let net = fixture("s1");
        let x = 1.3;
        let n = 1_000_000u64;
        let v = n as f64 / x;
        let (mp, mm) = meso_flux(&net, &[n], v).unwrap();
        let t = macro_flux(&net, &[x]).unwrap();
        for j in 0..2 {
            let nu2 = 9.0;
            assert!(((mp[j] - t.phi_plus[j]) / t.phi_plus[j]).abs() <= 10.0 * nu2 / n as f64);
            assert!(((mm[j] - t.phi_minus[j]) / t.phi_minus[j]).abs() <= 10.0 * nu2 / n as f64);
        }
    }

    #[test]
    fn schlogl_rre_is_cubic() {
        let net = fixture("s1");
        for x in [0.0, 0.3, 1.0, 2.0, 2.7] {
            let (r, j) = rre_rhs(&net, &[x]).unwrap();
            let f = -(x - 0.5) * (x - 1.0) * (x - 1.5);
            let df = -(3.0 * x * x - 6.0 * x + 2.75);
            assert!((r[0] - f).abs() < 1e-13, "x={x}");
            assert!((j[(0, 0)] - df).abs() < 1e-12);
        }
        assert!((rre_rhs(&net, &[2.0]).unwrap().0[0] + 0.75).abs() < 1e-14);
    }

    #[test]
    fn isomerization_linear_field() {
        let net = fixture("iso");
        let (r, j) = rre_rhs(&net, &[0.3, 1.7]).unwrap();
        assert!((r[0] - 1.4).abs() < 1e-15 && (r[1] + 1.4).abs() < 1e-15);
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
    }

    /// Exact solution of x' = −(x−½)(x−1)(x−3/2): the quantity
    /// (x−½)²(x−3/2)²/(x−1)⁴ decays like e^{−t}. Solved for x by bisection
    /// on the side of the separatrix containing x0.
    fn cubic_exact(x0: f64, t: f64) -> f64 {
        let g = |x: f64| (x - 0.5).powi(2) * (x - 1.5).powi(2) / (x - 1.0).powi(4);
        let target = g(x0) * (-t).exp();
        let (mut a, mut b) = if x0 < 1.0 { (0.5, x0) } else { (x0, 1.5) };
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            // g vanishes at the attractor and grows toward the separatrix
            if (g(m) > target) == (x0 < 1.0) {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn schlogl_trajectories_reach_stable_states() {
        let net = fixture("s1");
        let lo = integrate_rre(&net, &[0.9], 20.0, 1e-11).unwrap();
        let hi = integrate_rre(&net, &[1.1], 20.0, 1e-11).unwrap();
        let (elo, ehi) = (cubic_exact(0.9, 20.0), cubic_exact(1.1, 20.0));
        // both attractors have eigenvalue −½, so the gap at T = 20 is 6e^{−10}
        assert!((elo - 0.5 - 6.0 * (-10.0_f64).exp()).abs() < 1e-6);
        assert!((lo.last_state()[0] - elo).abs() < 1e-8, "{} {elo}", lo.last_state()[0]);
        assert!((hi.last_state()[0] - ehi).abs() < 1e-8, "{} {ehi}", hi.last_state()[0]);
        let late = integrate_rre(&net, &[0.9], 45.0, 1e-11).unwrap();
        assert!((late.last_state()[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn schlogl_trajectory_matches_fixed_step_oracle() {
        // classical RK4 with a tiny fixed step as an independent reference
        let f = |x: f64| -(x - 0.5) * (x - 1.0) * (x - 1.5);
        let (mut x, h) = (0.9, 1e-4);
        for _ in 0..(5.0 / h) as usize {
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let p = integrate_rre(&fixture("s1"), &[0.9], 5.0, 1e-11).unwrap();
        assert!((p.last_state()[0] - x).abs() < 1e-8);
    }

    #[test]
    fn isomerization_conserves_mass() {
        let p = integrate_rre(&fixture("iso"), &[2.0, 0.0], 30.0, 1e-10).unwrap();
        for s in &p.states {
            assert!((s[0] + s[1] - 2.0).abs() < 10.0 * 1e-10 * 30.0);
        }
        assert!((p.last_state()[0] - 1.0).abs() < 1e-8);
    }
}
