use std::fmt;
use std::sync::Arc;

use super::cme::TruncatedCME;
use super::{LatticeDistribution, MesoError};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Convex generator φ of the relative entropy Σ π φ(p/π).
#[derive(Clone)]
pub enum Divergence {
    /// u log u − u + 1
    Kl,
    /// (u − 1)²
    Chi2,
    Custom { name: String, phi: ScalarFn, dphi: ScalarFn },
}

impl fmt::Debug for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kl => write!(f, "Kl"),
            Self::Chi2 => write!(f, "Chi2"),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Divergence {
    pub fn custom<F, D>(name: &str, phi: F, dphi: D) -> Result<Self, MesoError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let d = Self::Custom { name: name.to_string(), phi: Arc::new(phi), dphi: Arc::new(dphi) };
        d.check_convex()?;
        Ok(d)
    }

    pub fn phi(&self, u: f64) -> f64 {
        match self {
            Self::Kl => {
                if u == 0.0 {
                    1.0
                } else {
                    u * u.ln() - u + 1.0
                }
            }
            Self::Chi2 => (u - 1.0) * (u - 1.0),
            Self::Custom { phi, .. } => phi(u),
        }
    }

    pub fn dphi(&self, u: f64) -> f64 {
        match self {
            Self::Kl => u.ln(),
            Self::Chi2 => 2.0 * (u - 1.0),
            Self::Custom { dphi, .. } => dphi(u),
        }
    }

    /// Bregman divergence φ(a) − φ(b) − φ'(b)(a − b) ≥ 0.
    pub fn bregman(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let d = self.dphi(b);
        if d.is_infinite() {
            return f64::INFINITY;
        }
        self.phi(a) - self.phi(b) - d * (a - b)
    }

    /// Monotone derivative and supporting tangents on a grid over [0, 20].
    fn check_convex(&self) -> Result<(), MesoError> {
        let grid: Vec<f64> = (1..=400).map(|i| i as f64 * 0.05).collect();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let scale = 1e-9 * (1.0 + self.phi(a).abs() + self.phi(b).abs());
            if self.dphi(b) < self.dphi(a) - scale || self.bregman(b, a) < -scale || self.bregman(a, b) < -scale {
                return Err(MesoError::NonConvex { at: a });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dissipation {
    /// F = Σ π φ(p/π).
    pub f: f64,
    /// dF/dt by the chain rule with Qᵀp.
    pub dfdt_chain: f64,
    /// dF/dt as minus the π-weighted Bregman double sum over edges.
    pub dfdt_bregman: f64,
    pub discrepancy: f64,
}

fn check_pair(cme: &TruncatedCME, p: &LatticeDistribution, pi: &LatticeDistribution) -> Result<(), MesoError> {
    for d in [p, pi] {
        if d.p.len() != cme.len() {
            return Err(MesoError::Dimension { expected: cme.len(), got: d.p.len() });
        }
    }
    if pi.p.iter().any(|&v| v <= 0.0) {
        return Err(MesoError::BadDistribution("π must be positive on the box".into()));
    }
    Ok(())
}

/// Relative φ-entropy of p with respect to π and its time derivative along
/// the master equation, computed two independent ways.
pub fn entropy_dissipation(
    cme: &TruncatedCME,
    p: &LatticeDistribution,
    pi: &LatticeDistribution,
    phi: &Divergence,
) -> Result<Dissipation, MesoError> {
    check_pair(cme, p, pi)?;
    if let Divergence::Custom { .. } = phi {
        phi.check_convex()?;
    }
    let u: Vec<f64> = p.p.iter().zip(&pi.p).map(|(a, b)| a / b).collect();
    let f: f64 = pi.p.iter().zip(&u).map(|(w, &ux)| w * phi.phi(ux)).sum();

    let flow = cme.apply_forward(&p.p);
    let mut chain = 0.0;
    for (x, &dx) in flow.iter().enumerate() {
        if dx == 0.0 {
            continue;
        }
        chain += phi.dphi(u[x]) * dx;
    }

    let mut bregman = 0.0;
    for (y, edges) in cme.out.iter().enumerate() {
        for &(x, rate) in edges {
            bregman += rate * pi.p[y] * phi.bregman(u[y], u[x]);
        }
    }
    let dfdt_bregman = -bregman;
    let discrepancy = if chain == dfdt_bregman { 0.0 } else { (chain - dfdt_bregman).abs() };
    Ok(Dissipation { f, dfdt_chain: chain, dfdt_bregman, discrepancy })
}

/// (1/V) Σ p log(p/π), with 0 log 0 = 0.
pub fn meso_to_macro_energy(cme: &TruncatedCME, p: &LatticeDistribution, pi: &LatticeDistribution) -> Result<f64, MesoError> {
    check_pair(cme, p, pi)?;
    let kl: f64 = p.p.iter().zip(&pi.p).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
    Ok(kl / cme.volume)
}

/// Largest uniformization exponent Λ·dt per sub-step.
const MAX_LAMBDA_DT: f64 = 50.0;

/// p(T) = exp(TQ)ᵀ p0 by uniformization: sub-steps with Λ·dt ≤ 50, each a
/// Poisson-weighted sum of powers of the stochastic matrix I + Q/Λ truncated
/// once the neglected Poisson mass is below `tol`, then renormalized.
pub fn evolve_cme(cme: &TruncatedCME, p0: &LatticeDistribution, t_end: f64, tol: f64) -> Result<LatticeDistribution, MesoError> {
    if p0.p.len() != cme.len() {
        return Err(MesoError::Dimension { expected: cme.len(), got: p0.p.len() });
    }
    if !(t_end >= 0.0) || !(tol > 0.0) {
        return Err(MesoError::Invalid("T must be non-negative and tol positive".into()));
    }
    let lambda = cme.max_exit_rate() * 1.02;
    if t_end == 0.0 || lambda == 0.0 {
        return Ok(p0.clone());
    }
    let steps = (lambda * t_end / MAX_LAMBDA_DT).ceil().max(1.0) as usize;
    let ldt = lambda * t_end / steps as f64;
    let mut p = p0.p.clone();
    let mut term = vec![0.0; p.len()];
    let mut next = vec![0.0; p.len()];
    for _ in 0..steps {
        let mut weight = (-ldt).exp();
        let mut used = weight;
        term.copy_from_slice(&p);
        let mut acc: Vec<f64> = term.iter().map(|v| v * weight).collect();
        let mut k = 0usize;
        while 1.0 - used > tol.min(1e-13) && k < 10_000 {
            k += 1;
            // next = (I + Q/Λ)ᵀ term
            for (x, v) in next.iter_mut().enumerate() {
                *v = term[x] * (1.0 + cme.diag[x] / lambda);
            }
            for (x, edges) in cme.out.iter().enumerate() {
                if term[x] == 0.0 {
                    continue;
                }
                for &(y, r) in edges {
                    next[y] += term[x] * r / lambda;
                }
            }
            std::mem::swap(&mut term, &mut next);
            weight *= ldt / k as f64;
            used += weight;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += weight * t;
            }
        }
        let total: f64 = acc.iter().sum();
        p = acc.into_iter().map(|v| (v / total).max(0.0)).collect();
    }
    let total: f64 = p.iter().sum();
    Ok(LatticeDistribution { p: p.into_iter().map(|v| v / total).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::load;
    use crate::mesoscale::{build_cme, stationary_distribution, DEFAULT_STATE_CAP};
    use crate::numerics::Halton;

    fn bd(v: f64, hi: u64) -> TruncatedCME {
        build_cme(&load("bd"), v, &[(0, hi)], None, DEFAULT_STATE_CAP).unwrap()
    }

    #[test]
    fn stationary_point_has_zero_dissipation() {
        let cme = bd(10.0, 80);
        let pi = stationary_distribution(&cme).unwrap().distribution;
        for phi in [Divergence::Kl, Divergence::Chi2] {
            let d = entropy_dissipation(&cme, &pi, &pi, &phi).unwrap();
            assert!(d.f.abs() < 1e-15);
            assert!(d.dfdt_chain.abs() < 1e-12 && d.dfdt_bregman.abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_dissipates() {
        let cme = bd(10.0, 80);
        let pi = stationary_distribution(&cme).unwrap().distribution;
        let p = LatticeDistribution::point(cme.len(), 0);
        let d = entropy_dissipation(&cme, &p, &pi, &Divergence::Chi2).unwrap();
        assert!(d.dfdt_chain < 0.0 && d.dfdt_bregman < 0.0);
        assert!(d.discrepancy < 1e-10 * d.dfdt_chain.abs());
        let k = entropy_dissipation(&cme, &p, &pi, &Divergence::Kl).unwrap();
        assert!(k.dfdt_chain < 0.0 && k.dfdt_bregman < 0.0);
    }

    #[test]
    fn chain_rule_matches_bregman_sum_on_schlogl() {
        let cme = build_cme(&load("s1"), 25.0, &[(0, 75)], None, DEFAULT_STATE_CAP).unwrap();
        let pi = stationary_distribution(&cme).unwrap().distribution;
        let mut h = Halton::new(1);
        for _ in 0..20 {
            let mut p: Vec<f64> = (0..cme.len()).map(|_| 0.05 + h.next_point()[0]).collect();
            let z: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= z);
            let p = LatticeDistribution::new(p).unwrap();
            for phi in [Divergence::Kl, Divergence::Chi2] {
                let d = entropy_dissipation(&cme, &p, &pi, &phi).unwrap();
                assert!(d.discrepancy < 1e-10 * (1.0 + d.dfdt_chain.abs()), "{d:?}");
                assert!(d.dfdt_chain <= 1e-12);
            }
        }
    }

    #[test]
    fn custom_divergence_convexity() {
        assert!(Divergence::custom("quartic", |u| (u - 1.0).powi(4), |u| 4.0 * (u - 1.0).powi(3)).is_ok());
        assert!(matches!(
            Divergence::custom("concave", |u: f64| -(u * u), |u| -2.0 * u),
            Err(MesoError::NonConvex { .. })
        ));
    }

    #[test]
    fn evolution_identity_and_relaxation() {
        let cme = bd(10.0, 80);
        let p0 = LatticeDistribution::point(cme.len(), 0);
        assert_eq!(evolve_cme(&cme, &p0, 0.0, 1e-12).unwrap(), p0);
        let pi = stationary_distribution(&cme).unwrap().distribution;
        let late = evolve_cme(&cme, &p0, 40.0, 1e-12).unwrap();
        assert!(late.total_variation(&pi) < 1e-8);
        assert!((late.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let full = evolve_cme(&cme, &p0, 1.0, 1e-12).unwrap();
        let half = evolve_cme(&cme, &evolve_cme(&cme, &p0, 0.5, 1e-12).unwrap(), 0.5, 1e-12).unwrap();
        assert!(full.total_variation(&half) < 1e-10);
    }

    #[test]
    fn meso_energy_vanishes_at_stationarity() {
        let cme = bd(10.0, 80);
        let pi = stationary_distribution(&cme).unwrap().distribution;
        assert_eq!(meso_to_macro_energy(&cme, &pi, &pi).unwrap(), 0.0);
    }
}
