use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::netparse::{structure, ReactionNetwork};
use crate::numerics::linalg::{orthonormal_span, solve};
use crate::numerics::{max_abs, Halton};

use super::{check_balance, fluxes, rre_rhs, rre_vector, KineticsError};

/// Relative tolerance used when classifying roots by balance type.
const CLASSIFY_TOL: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
const MAX_NEWTON: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    DetailedBalanced,
    ComplexBalanced,
    Ness,
    /// Some coordinate is zero; balance is not assessed there.
    Boundary,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::DetailedBalanced => "detailed-balanced",
            Self::ComplexBalanced => "complex-balanced",
            Self::Ness => "NESS",
            Self::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    /// A zero eigenvalue on the stoichiometric subspace; linearization is inconclusive.
    Marginal,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Saddle => "saddle",
            Self::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub x: Vec<f64>,
    pub residual: f64,
    pub classification: Classification,
    pub stability: Stability,
    /// Eigenvalues (re, im) of the Jacobian restricted to the stoichiometric subspace.
    pub eigenvalues: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SteadyStateReport {
    pub states: Vec<SteadyState>,
    pub compatibility_offset: Option<Vec<f64>>,
}

impl SteadyStateReport {
    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.x.clone()).collect()
    }
}

struct Subspaces {
    /// Orthonormal basis of ran(νᵀ), N×s.
    range: DMatrix<f64>,
    /// Orthonormal basis of ker(ν), N×(N−s).
    kernel: DMatrix<f64>,
}

impl Subspaces {
    fn new(net: &ReactionNetwork) -> Self {
        let n = net.n_species();
        let range = orthonormal_span(&net.stoich_f64(), n, 1e-10);
        let kernel = orthonormal_span(&structure(net).kernel_f64(), n, 1e-10);
        Self { range, kernel }
    }
}

fn residual_system(net: &ReactionNetwork, sub: &Subspaces, q: &DVector<f64>, x: &[f64]) -> DVector<f64> {
    let r = DVector::from_vec(rre_vector(net, x));
    let xv = DVector::from_column_slice(x);
    let top = sub.range.transpose() * r;
    let bottom = sub.kernel.transpose() * (xv - q);
    DVector::from_iterator(top.len() + bottom.len(), top.iter().chain(bottom.iter()).copied())
}

fn flux_scale(net: &ReactionNetwork, x: &[f64]) -> f64 {
    let (fp, fm) = fluxes(net, x);
    fp.iter().zip(&fm).map(|(a, b)| a + b).sum::<f64>().max(1.0)
}

/// Damped Newton on the class-restricted system from `x0`.
fn newton(net: &ReactionNetwork, sub: &Subspaces, q: &DVector<f64>, x0: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut f = residual_system(net, sub, q, &x);
    let mut polish = false;
    for _ in 0..MAX_NEWTON {
        let (_, jac) = rre_rhs(net, &x).ok()?;
        let top = sub.range.transpose() * jac;
        let mut jf = DMatrix::zeros(x.len(), x.len());
        jf.rows_mut(0, top.nrows()).copy_from(&top);
        jf.rows_mut(top.nrows(), sub.kernel.ncols()).copy_from(&sub.kernel.transpose());
        let step = solve(&jf, &(-&f))?;
        let f2 = f.norm_squared();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if trial.iter().all(|v| v.is_finite() && *v >= 0.0) {
                let ft = residual_system(net, sub, q, &trial);
                if ft.norm_squared() <= (1.0 - 2.0 * ARMIJO * t) * f2 || f2 == 0.0 {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            t *= 0.5;
        }
        let (xn, fnew) = accepted?;
        let moved = x.iter().zip(&xn).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        x = xn;
        f = fnew;
        if polish {
            break;
        }
        if moved <= tol * (1.0 + max_abs(&x)) {
            polish = true;
        }
    }
    let res = max_abs(&rre_vector(net, &x));
    (polish && res <= tol * flux_scale(net, &x)).then_some(x)
}

fn stability(net: &ReactionNetwork, sub: &Subspaces, x: &[f64]) -> (Stability, Vec<(f64, f64)>) {
    let (_, jac) = rre_rhs(net, x).expect("root is a valid state");
    let restricted = sub.range.transpose() * &jac * &sub.range;
    let mut ev: Vec<(f64, f64)> = restricted.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let zero = 1e-10 * (1.0 + jac.norm());
    let neg = ev.iter().filter(|e| e.0 < -zero).count();
    let pos = ev.iter().filter(|e| e.0 > zero).count();
    let kind = if neg + pos < ev.len() {
        Stability::Marginal
    } else if pos == 0 {
        Stability::Stable
    } else if neg == 0 {
        Stability::Unstable
    } else {
        Stability::Saddle
    };
    (kind, ev)
}

fn classify(net: &ReactionNetwork, x: &[f64]) -> Classification {
    if x.iter().any(|&v| v <= 0.0) {
        return Classification::Boundary;
    }
    match check_balance(net, x, CLASSIFY_TOL) {
        Ok(f) if f.detailed => Classification::DetailedBalanced,
        Ok(f) if f.complex => Classification::ComplexBalanced,
        _ => Classification::Ness,
    }
}

/// Multi-start damped Newton over a box of start points (Halton sequence),
/// optionally restricted to the compatibility class through `class_offset`.
pub fn find_steady_states(
    net: &ReactionNetwork,
    bounds: &[(f64, f64)],
    class_offset: Option<&[f64]>,
    n_starts: usize,
    tol: f64,
) -> Result<SteadyStateReport, KineticsError> {
    let n = net.n_species();
    if bounds.len() != n {
        return Err(KineticsError::Dimension { expected: n, got: bounds.len() });
    }
    if bounds.iter().any(|&(lo, hi)| !(lo >= 0.0 && hi > lo && hi.is_finite())) {
        return Err(KineticsError::Invalid("search box must satisfy 0 <= lo < hi".into()));
    }
    if !(tol > 0.0) {
        return Err(KineticsError::Invalid("tolerance must be positive".into()));
    }
    if let Some(q) = class_offset {
        super::check_state(net, q)?;
    }
    let sub = Subspaces::new(net);
    let starts: Vec<Vec<f64>> = Halton::new(n)
        .take(n_starts)
        .map(|u| u.iter().zip(bounds).map(|(t, &(lo, hi))| lo + t * (hi - lo)).collect())
        .collect();
    let found: Vec<Option<Vec<f64>>> = starts
        .par_iter()
        .map(|x0| {
            let q = DVector::from_column_slice(class_offset.unwrap_or(x0));
            newton(net, &sub, &q, x0, tol)
        })
        .collect();
    let slack = 10.0 * tol;
    let mut roots: Vec<Vec<f64>> = found
        .into_iter()
        .flatten()
        .filter(|x| x.iter().zip(bounds).all(|(v, &(lo, hi))| *v >= lo - slack && *v <= hi + slack))
        .collect();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for r in roots {
        if unique.iter().all(|u| u.iter().zip(&r).any(|(a, b)| (a - b).abs() > slack)) {
            unique.push(r);
        }
    }
    let states = unique
        .into_iter()
        .map(|x| {
            let (stab, eigenvalues) = stability(net, &sub, &x);
            SteadyState {
                residual: max_abs(&rre_vector(net, &x)),
                classification: classify(net, &x),
                stability: stab,
                eigenvalues,
                x,
            }
        })
        .collect();
    Ok(SteadyStateReport { states, compatibility_offset: class_offset.map(<[f64]>::to_vec) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::load;

    #[test]
    fn schlogl_three_roots() {
        let rep = find_steady_states(&load("s1"), &[(0.0, 3.0)], None, 64, 1e-10).unwrap();
        let xs: Vec<f64> = rep.states.iter().map(|s| s.x[0]).collect();
        assert_eq!(xs.len(), 3, "{xs:?}");
        for (x, e) in xs.iter().zip([0.5, 1.0, 1.5]) {
            assert!((x - e).abs() < 1e-10);
        }
        let stab: Vec<_> = rep.states.iter().map(|s| s.stability).collect();
        assert_eq!(stab, vec![Stability::Stable, Stability::Unstable, Stability::Stable]);
        assert!(rep.states.iter().all(|s| s.classification == Classification::Ness));
    }

    #[test]
    fn equilibrium_schlogl_unique_root() {
        let rep = find_steady_states(&load("s0"), &[(0.0, 3.0)], None, 64, 1e-10).unwrap();
        assert_eq!(rep.states.len(), 1);
        assert!((rep.states[0].x[0] - 1.0).abs() < 1e-10);
        assert_eq!(rep.states[0].classification, Classification::DetailedBalanced);
    }

    #[test]
    fn isomerization_class_restricted() {
        let rep = find_steady_states(&load("iso"), &[(0.0, 3.0), (0.0, 3.0)], Some(&[2.0, 0.0]), 32, 1e-10).unwrap();
        assert_eq!(rep.states.len(), 1);
        assert!((rep.states[0].x[0] - 1.0).abs() < 1e-10 && (rep.states[0].x[1] - 1.0).abs() < 1e-10);
        assert_eq!(rep.states[0].stability, Stability::Stable);
    }

    #[test]
    fn phosphorylation_roots_satisfy_rre() {
        let net = load("pdp");
        let rep = find_steady_states(&net, &[(0.0, 2.0), (0.0, 2.0)], Some(&[0.5, 0.5]), 64, 1e-10).unwrap();
        assert!(!rep.states.is_empty());
        for s in &rep.states {
            assert!((s.x[0] + s.x[1] - 1.0).abs() < 1e-9);
            assert!(s.residual < 1e-9);
        }
    }
}
