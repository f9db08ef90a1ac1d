use nalgebra::{DMatrix, DVector};

use crate::kinetics::{check_state, fluxes};
use crate::netparse::ReactionNetwork;
use crate::numerics::interp::{fd_slopes, HermiteTable};
use crate::numerics::linalg::{independent_subset, orthonormal_span};
use crate::numerics::{gauss_legendre, max_abs};
use crate::path::{ActionPath, PathError};

use super::{eval_unchecked, value_unchecked, HamJacError, EXP_LIMIT};

const MAX_NEWTON: usize = 100;
const MAX_HALVINGS: usize = 60;
const MAX_EXP_STEP: f64 = 20.0;
/// An accepted momentum with |νⱼ·p| beyond this signals an unbounded dual
/// problem: finite maximizers that far out would need flux ratios of e^350.
const UNBOUNDED: f64 = 0.5 * EXP_LIMIT;

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianEval {
    pub value: f64,
    pub p_star: Option<Vec<f64>>,
    pub converged: bool,
}

impl LagrangianEval {
    fn infinite() -> Self {
        Self { value: f64::INFINITY, p_star: None, converged: true }
    }
}

/// Reaction vectors of the network as floats, reused across evaluations.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    stoich: Vec<Vec<f64>>,
}

impl ReducedBasis {
    pub fn new(net: &ReactionNetwork) -> Self {
        Self { stoich: net.stoich_f64() }
    }
}

/// L(s,x) = sup_p s·p − H(p,x), by Newton on p = Bβ with B a column basis of
/// the reaction vectors whose fluxes are active at x.
pub fn lagrangian(net: &ReactionNetwork, s: &[f64], x: &[f64], tol: f64) -> Result<LagrangianEval, HamJacError> {
    check_state(net, x)?;
    if s.len() != net.n_species() {
        return Err(HamJacError::Dimension { expected: net.n_species(), got: s.len() });
    }
    Ok(lagrangian_with(net, &ReducedBasis::new(net), s, x, tol))
}

pub(crate) fn lagrangian_with(net: &ReactionNetwork, basis: &ReducedBasis, s: &[f64], x: &[f64], tol: f64) -> LagrangianEval {
    let n = x.len();
    let (fp, fm) = fluxes(net, x);
    let active: Vec<Vec<f64>> =
        basis.stoich.iter().enumerate().filter(|(j, _)| fp[*j] + fm[*j] > 0.0).map(|(_, v)| v.clone()).collect();
    let sv = DVector::from_column_slice(s);
    let q = orthonormal_span(&active, n, 1e-10);
    let proj = &q * (q.transpose() * &sv);
    let s_norm = max_abs(s);
    if (&sv - &proj).amax() > tol * (1.0 + s_norm) {
        return LagrangianEval::infinite();
    }
    if q.ncols() == 0 {
        return LagrangianEval { value: 0.0, p_star: Some(vec![0.0; n]), converged: true };
    }
    let cols: Vec<DVector<f64>> =
        independent_subset(&active, 1e-10).into_iter().map(|i| DVector::from_column_slice(&active[i])).collect();
    let b = DMatrix::from_columns(&cols);
    let objective = |p: &DVector<f64>| -> f64 { sv.dot(p) - value_unchecked(net, p.as_slice(), x) };

    let mut beta = DVector::zeros(b.ncols());
    let mut p = DVector::zeros(n);
    let mut f = 0.0;
    // ∇ₚH is a sum of flux-sized terms, so that is the scale its rounding error lives on
    let flux_scale: f64 = active.iter().zip(fp.iter().zip(&fm).filter(|(a, b)| *a + *b > 0.0)).map(|(v, (a, b))| (a + b) * max_abs(v)).sum();
    let grad_tol = tol * (1.0 + s_norm + flux_scale);
    for _ in 0..MAX_NEWTON {
        let e = eval_unchecked(net, p.as_slice(), x);
        let resid = &sv - DVector::from_column_slice(&e.grad_p);
        let g = b.transpose() * &resid;
        if resid.amax() <= grad_tol {
            return LagrangianEval { value: f, p_star: Some(p.as_slice().to_vec()), converged: true };
        }
        let hm = b.transpose() * &e.hess_pp * &b;
        let Some(mut step) = hm.cholesky().map(|c| c.solve(&g)) else {
            return LagrangianEval { value: f, p_star: Some(p.as_slice().to_vec()), converged: false };
        };
        // trust region on the exponents: no reaction exponent moves by more than MAX_EXP_STEP
        let dp = &b * &step;
        let widest = active.iter().map(|v| v.iter().zip(dp.iter()).map(|(a, c)| a * c).sum::<f64>().abs()).fold(0.0, f64::max);
        if widest > MAX_EXP_STEP {
            step *= MAX_EXP_STEP / widest;
        }
        let slope = g.dot(&step);
        // an ascent below rounding cannot be resolved by Armijo; trust the full Newton step there
        let in_noise = 0.5 * slope <= 16.0 * f64::EPSILON * (1.0 + f.abs() + flux_scale);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let beta_t = &beta + t * &step;
            let p_t = &b * &beta_t;
            let f_t = objective(&p_t);
            if f_t.is_finite() && (in_noise || f_t >= f + 1e-4 * t * slope) {
                beta = beta_t;
                p = p_t;
                f = f_t;
                moved = true;
                if active.iter().any(|v| v.iter().zip(p.iter()).map(|(a, c)| a * c).sum::<f64>().abs() > UNBOUNDED) {
                    // the supremum runs off along a direction with one-sided flux
                    return LagrangianEval::infinite();
                }
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // no further ascent possible at working precision
            let e = eval_unchecked(net, p.as_slice(), x);
            let resid = &sv - DVector::from_column_slice(&e.grad_p);
            let ok = resid.amax() <= 1e3 * grad_tol;
            return LagrangianEval { value: f, p_star: Some(p.as_slice().to_vec()), converged: ok };
        }
    }
    LagrangianEval { value: f, p_star: Some(p.as_slice().to_vec()), converged: false }
}

/// Act = ∫ L(ẋ, x) dt over the piecewise-cubic interpolant of the path,
/// composite Gauss–Legendre with `quad_order` nodes per interval.
pub fn action(net: &ReactionNetwork, path: &ActionPath, quad_order: usize) -> Result<f64, HamJacError> {
    path.validate()?;
    if path.len() < 2 {
        return Err(HamJacError::Path(PathError::TooShort(2)));
    }
    let n = net.n_species();
    if path.dim() != n {
        return Err(HamJacError::Dimension { expected: n, got: path.dim() });
    }
    let tables: Vec<HermiteTable> = (0..n)
        .map(|i| {
            let ys: Vec<f64> = path.states.iter().map(|s| s[i]).collect();
            let ds = fd_slopes(&path.times, &ys);
            HermiteTable::new(path.times.clone(), ys, ds)
        })
        .collect();
    let gl = gauss_legendre(quad_order.max(1));
    let basis = ReducedBasis::new(net);
    let mut total = 0.0;
    for w in path.times.windows(2) {
        for (t, wt) in gl.mapped(w[0], w[1]) {
            let (x, s): (Vec<f64>, Vec<f64>) = tables
                .iter()
                .map(|tb| {
                    let (v, d) = tb.eval(t);
                    (v.max(0.0), d)
                })
                .unzip();
            let l = lagrangian_with(net, &basis, &s, &x, 1e-8);
            if !l.converged {
                return Err(HamJacError::LagrangianDiverged { t });
            }
            if l.value.is_infinite() {
                return Ok(f64::INFINITY);
            }
            total += wt * l.value;
        }
    }
    Ok(total)
}
