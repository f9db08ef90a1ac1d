//! Stationary energy landscapes ψ and the dynamic Hamilton–Jacobi equation.

mod gmam;
mod hje;
mod response;
mod weak_kam;

use thiserror::Error;

use crate::hamjac::HamJacError;
use crate::kinetics::{check_balance, check_state, fluxes, group_fluxes, KineticsError};
use crate::netparse::{grouped_vectors, ReactionNetwork};
use crate::numerics::{gauss_kronrod, max_abs, Halton, HermiteTable};

pub use gmam::{gmam_quasipotential, GmamConfig, GmamResult};
pub use hje::{solve_hje_dynamic_1d, HjeConfig, HjeSolution, NumericalHamiltonian};
pub use response::{linear_response, ResponseSample};
pub use weak_kam::{weak_kam_landscape, AubryPoint, AubrySet, WeakKamLandscape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LandscapeError {
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    HamJac(#[from] HamJacError),
    #[error("complex balance fails at the reference state (stationarity residual {residual:e})")]
    NotComplexBalanced { residual: f64 },
    #[error("one-dimensional landscape needs one species and one reaction vector")]
    NotOneDimensional,
    #[error("grouped flux vanishes at x = {x}")]
    VanishingFlux { x: f64 },
    #[error("point {x:?} lies outside the landscape domain")]
    OutsideDomain { x: Vec<f64> },
    #[error("reference point {0:?} is not a steady state")]
    NotSteady(Vec<f64>),
    #[error("endpoints lie in different compatibility classes")]
    DifferentClass,
    #[error("gMAM inner solve failed at path parameter {alpha}")]
    InnerFailure { alpha: f64 },
    #[error("weak-KAM offsets are inconsistent: {detail}")]
    InconsistentOffsets { detail: String },
    #[error("no stable steady state in the Aubry set")]
    NoAttractor,
    #[error("CFL number {0} exceeds 1")]
    Cfl(f64),
    #[error("parameter `{0}` is not a chemostat of the network")]
    NotChemostat(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandscapeKind {
    Kl,
    Quad1d,
    Gmam,
}

impl LandscapeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Kl => "kl",
            Self::Quad1d => "quad1d",
            Self::Gmam => "gmam",
        }
    }

    /// Bound on |H(∇ψ, x)| expected on the validity domain.
    pub fn stationarity_tolerance(&self) -> f64 {
        match self {
            Self::Kl => 1e-10,
            Self::Quad1d => 1e-8,
            Self::Gmam => 1e-4,
        }
    }
}

/// ψ(x) = Σ xᵢ ln(xᵢ/xsᵢ) − xᵢ + xsᵢ around a complex-balanced state.
#[derive(Debug, Clone, PartialEq)]
pub struct KlLandscape {
    pub xs: Vec<f64>,
}

/// 1-D landscape from ψ′ = ξ⁻¹ ln(Φ⁻_ξ/Φ⁺_ξ), integrated from `x_ref`.
#[derive(Debug, Clone)]
pub struct Quad1dLandscape {
    network: ReactionNetwork,
    xi: f64,
    x_ref: f64,
    table: HermiteTable,
}

impl Quad1dLandscape {
    pub fn slope(&self, x: f64) -> f64 {
        slope_1d(&self.network, self.xi, x)
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (self.table.xs(), self.table.ys())
    }
}

#[derive(Debug)]
pub enum EnergyLandscape {
    Kl(KlLandscape),
    Quad1d(Quad1dLandscape),
    Gmam(WeakKamLandscape),
}

impl EnergyLandscape {
    pub fn kind(&self) -> LandscapeKind {
        match self {
            Self::Kl(_) => LandscapeKind::Kl,
            Self::Quad1d(_) => LandscapeKind::Quad1d,
            Self::Gmam(_) => LandscapeKind::Gmam,
        }
    }

    pub fn reference_point(&self) -> Vec<f64> {
        match self {
            Self::Kl(k) => k.xs.clone(),
            Self::Quad1d(q) => vec![q.x_ref],
            Self::Gmam(g) => g.reference_point(),
        }
    }

    /// Box on which the landscape is defined; `None` means the open orthant.
    pub fn domain(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::Quad1d(q) => Some(vec![q.table.domain()]),
            _ => None,
        }
    }

    fn check_domain(&self, x: &[f64]) -> Result<(), LandscapeError> {
        let inside = match self.domain() {
            Some(d) => x.len() == d.len() && x.iter().zip(&d).all(|(v, &(lo, hi))| *v >= lo && *v <= hi),
            None => x.iter().all(|v| v.is_finite() && *v > 0.0),
        };
        if inside {
            Ok(())
        } else {
            Err(LandscapeError::OutsideDomain { x: x.to_vec() })
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, LandscapeError> {
        self.check_domain(x)?;
        match self {
            Self::Kl(k) => Ok(x.iter().zip(&k.xs).map(|(&v, &s)| v * (v / s).ln() - v + s).sum()),
            Self::Quad1d(q) => Ok(q.table.eval(x[0]).0),
            Self::Gmam(g) => g.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, LandscapeError> {
        self.check_domain(x)?;
        match self {
            Self::Kl(k) => Ok(x.iter().zip(&k.xs).map(|(v, s)| (v / s).ln()).collect()),
            Self::Quad1d(q) => Ok(vec![q.slope(x[0])]),
            Self::Gmam(g) => g.gradient(x),
        }
    }
}

/// KL landscape around `xs`, after verifying complex balance and the
/// stationary HJE on a probe set.
pub fn kl_landscape(net: &ReactionNetwork, xs: &[f64]) -> Result<EnergyLandscape, LandscapeError> {
    check_state(net, xs)?;
    let flags = check_balance(net, xs, 1e-8)?;
    let n = xs.len();
    let mut worst = 0.0_f64;
    for u in Halton::new(n).take(64) {
        let x: Vec<f64> = u.iter().zip(xs).map(|(t, s)| s * (0.1 + 2.9 * t)).collect();
        let p: Vec<f64> = x.iter().zip(xs).map(|(v, s)| (v / s).ln()).collect();
        let (fp, fm) = fluxes(net, &x);
        let scale = 1.0 + fp.iter().chain(&fm).sum::<f64>();
        let h = crate::hamjac::hamiltonian(net, &p, &x)?.value;
        worst = worst.max(h.abs() / scale);
    }
    if !flags.complex || worst > 1e-10 {
        return Err(LandscapeError::NotComplexBalanced { residual: worst });
    }
    Ok(EnergyLandscape::Kl(KlLandscape { xs: xs.to_vec() }))
}

fn slope_1d(net: &ReactionNetwork, xi: f64, x: f64) -> f64 {
    let groups = grouped_vectors(net);
    let (fp, fm) = fluxes(net, &[x]);
    let (gp, gm) = group_fluxes(&groups, &fp, &fm);
    (gm[0] / gp[0]).ln() / xi
}

/// Tabulated 1-D landscape on `interval` with `grid_n` panels, ψ(x_ref) = 0.
pub fn landscape_1d(
    net: &ReactionNetwork,
    interval: (f64, f64),
    x_ref: f64,
    grid_n: usize,
) -> Result<EnergyLandscape, LandscapeError> {
    let groups = grouped_vectors(net);
    if net.n_species() != 1 || groups.len() != 1 {
        return Err(LandscapeError::NotOneDimensional);
    }
    let (a, b) = interval;
    if !(a > 0.0 && b > a && b.is_finite()) || grid_n < 2 {
        return Err(LandscapeError::Invalid("interval must satisfy 0 < a < b and grid_n >= 2".into()));
    }
    if !(x_ref >= a && x_ref <= b) {
        return Err(LandscapeError::OutsideDomain { x: vec![x_ref] });
    }
    let xi = groups[0].xi[0] as f64;
    let mut xs: Vec<f64> = (0..=grid_n).map(|i| a + (b - a) * i as f64 / grid_n as f64).collect();
    let k_ref = xs.partition_point(|&x| x < x_ref);
    if xs[k_ref] != x_ref {
        xs.insert(k_ref, x_ref);
    }
    for &x in &xs {
        let (fp, fm) = fluxes(net, &[x]);
        let (gp, gm) = group_fluxes(&groups, &fp, &fm);
        if !(gp[0] > 0.0 && gm[0] > 0.0) {
            return Err(LandscapeError::VanishingFlux { x });
        }
    }
    let f = |x: f64| slope_1d(net, xi, x);
    let tol = 1e-10 / xs.len() as f64;
    let mut ys = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        ys[i] = ys[i - 1] + gauss_kronrod(f, xs[i - 1], xs[i], tol);
    }
    let offset = ys[k_ref];
    let ds: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let ys: Vec<f64> = ys.iter().map(|y| y - offset).collect();
    Ok(EnergyLandscape::Quad1d(Quad1dLandscape {
        network: net.clone(),
        xi,
        x_ref,
        table: HermiteTable::new(xs, ys, ds),
    }))
}

/// max |H(∇ψ(x), x)| over `points`.
pub fn stationarity_residual(
    net: &ReactionNetwork,
    landscape: &EnergyLandscape,
    points: &[Vec<f64>],
) -> Result<f64, LandscapeError> {
    let mut worst = 0.0_f64;
    for x in points {
        let g = landscape.gradient(x)?;
        worst = worst.max(crate::hamjac::hamiltonian(net, &g, x)?.value.abs());
    }
    Ok(worst)
}

pub(crate) fn is_steady(net: &ReactionNetwork, x: &[f64]) -> bool {
    let (fp, fm) = fluxes(net, x);
    let scale: f64 = 1.0 + fp.iter().chain(&fm).sum::<f64>();
    max_abs(&crate::kinetics::rre_vector(net, x)) <= 1e-8 * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::load;
    use crate::kinetics::integrate_rre;

    fn alpha(x: f64) -> f64 {
        (x * x * x + 2.75 * x) / (3.0 * x * x + 0.75)
    }

    #[test]
    fn kl_on_equilibrium_schlogl() {
        let net = load("s0");
        let l = kl_landscape(&net, &[1.0]).unwrap();
        for x in [0.2, 1.0, 2.5] {
            assert!((l.value(&[x]).unwrap() - (x * x.ln() - x + 1.0)).abs() < 1e-15);
            let g = l.gradient(&[x]).unwrap();
            assert!(crate::hamjac::hamiltonian(&net, &g, &[x]).unwrap().value.abs() < 1e-13);
        }
        assert_eq!(l.value(&[1.0]).unwrap(), 0.0);
        assert_eq!(l.gradient(&[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn kl_rejects_ness() {
        assert!(matches!(kl_landscape(&load("s1"), &[0.5]), Err(LandscapeError::NotComplexBalanced { .. })));
    }

    #[test]
    fn kl_isomerization_minimum_on_class() {
        let l = kl_landscape(&load("iso"), &[1.0, 1.0]).unwrap();
        for t in [0.3, 0.7, 1.3, 1.9] {
            assert!(l.value(&[t, 2.0 - t]).unwrap() > 0.0);
        }
        assert_eq!(l.value(&[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn schlogl_1d_landscape() {
        let net = load("s1");
        let l = landscape_1d(&net, (0.05, 3.0), 0.5, 2000).unwrap();
        for x in [0.5, 1.0, 1.5] {
            assert!(l.gradient(&[x]).unwrap()[0].abs() < 1e-14);
        }
        let v = |x: f64| l.value(&[x]).unwrap();
        assert!(v(0.5).abs() < 1e-14);
        assert!(v(1.0) - v(0.5) > 0.0 && v(1.0) - v(1.5) > 0.0);
        // independent composite Simpson oracle for the barrier
        let m = 20000;
        let h = 0.5 / m as f64;
        let simpson: f64 = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * alpha(0.5 + i as f64 * h).ln()
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((v(1.0) - simpson).abs() < 1e-12);
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![0.06 + 0.058 * i as f64]).collect();
        assert!(stationarity_residual(&net, &l, &pts).unwrap() < 1e-8);
        assert!(l.value(&[3.5]).is_err());
    }

    #[test]
    fn equilibrium_1d_matches_kl() {
        let net = load("s0");
        let q = landscape_1d(&net, (0.05, 3.0), 1.0, 2000).unwrap();
        let k = kl_landscape(&net, &[1.0]).unwrap();
        for i in 0..100 {
            let x = 0.05 + 2.95 * i as f64 / 99.0;
            assert!((q.value(&[x]).unwrap() - k.value(&[x]).unwrap()).abs() < 1e-10);
            assert!((q.gradient(&[x]).unwrap()[0] - x.ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn lyapunov_along_trajectories() {
        let net = load("s1");
        let l = landscape_1d(&net, (0.05, 3.0), 0.5, 1000).unwrap();
        for x0 in [0.1, 0.9, 1.1, 2.9] {
            let p = integrate_rre(&net, &[x0], 10.0, 1e-10).unwrap();
            let vals: Vec<f64> = p.states.iter().map(|s| l.value(s).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
