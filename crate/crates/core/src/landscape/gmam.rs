//! Geometric minimum action method for the quasipotential.

use nalgebra::{DMatrix, DVector};

use crate::hamjac::{eval_unchecked, lagrangian_with, ReducedBasis};
use crate::kinetics::{check_state, fluxes};
use crate::netparse::ReactionNetwork;
use crate::numerics::linalg::orthonormal_span;
use crate::numerics::{dot, max_abs};
use crate::path::ActionPath;

use super::{is_steady, LandscapeError};

#[derive(Debug, Clone, PartialEq)]
pub struct GmamConfig {
    pub n_images: usize,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub outer_tol: f64,
    /// Pseudo-time step of the semi-implicit descent, relative to the local rate scale.
    pub step: f64,
}

impl Default for GmamConfig {
    fn default() -> Self {
        Self { n_images: 100, max_outer: 500, inner_tol: 1e-10, outer_tol: 1e-6, step: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmamResult {
    pub value: f64,
    /// times hold the path parameter in [0, 1]; momenta hold p̂ at each image.
    pub path: ActionPath,
    pub converged: bool,
    pub iterations: usize,
    /// max |H(p̂, φ)| along the path.
    pub max_hamiltonian: f64,
    /// Running trapezoidal action at each image.
    pub running_action: Vec<f64>,
}

/// Orthonormal basis of the stoichiometric subspace.
struct Frame {
    q: DMatrix<f64>,
    basis: ReducedBasis,
}

#[derive(Debug, Clone)]
struct Momentum {
    p: Vec<f64>,
    lambda: f64,
}

/// H(p,x) = 0 and ∇ₚH(p,x) = λ d with λ ≥ 0.
fn inner_solve(
    net: &ReactionNetwork,
    frame: &Frame,
    x: &[f64],
    d: &[f64],
    warm: Option<&Momentum>,
    tol: f64,
) -> Option<Momentum> {
    let n = x.len();
    if max_abs(d) == 0.0 {
        return Some(Momentum { p: vec![0.0; n], lambda: 0.0 });
    }
    let (fp, fm) = fluxes(net, x);
    let scale = 1.0 + fp.iter().chain(&fm).sum::<f64>();
    if let Some(w) = warm {
        if let Some(m) = newton_2cond(net, frame, x, d, w, tol * scale) {
            return Some(m);
        }
    }
    bracket_solve(net, frame, x, d, warm.map(|w| w.lambda), tol * scale)
}

fn newton_2cond(net: &ReactionNetwork, frame: &Frame, x: &[f64], d: &[f64], warm: &Momentum, tol: f64) -> Option<Momentum> {
    let q = &frame.q;
    let s = q.ncols();
    let dg = q.transpose() * DVector::from_column_slice(d);
    let residual = |c: &DVector<f64>, lam: f64| -> Option<(DVector<f64>, DMatrix<f64>)> {
        let p = q * c;
        let e = eval_unchecked(net, p.as_slice(), x);
        if e.overflow || !e.value.is_finite() {
            return None;
        }
        let g = q.transpose() * DVector::from_column_slice(&e.grad_p);
        let mut f = DVector::zeros(s + 1);
        f.rows_mut(0, s).copy_from(&(&g - lam * &dg));
        f[s] = e.value;
        let mut j = DMatrix::zeros(s + 1, s + 1);
        j.view_mut((0, 0), (s, s)).copy_from(&(q.transpose() * &e.hess_pp * q));
        for i in 0..s {
            j[(i, s)] = -dg[i];
            j[(s, i)] = g[i];
        }
        Some((f, j))
    };
    let mut c = q.transpose() * DVector::from_column_slice(&warm.p);
    let mut lam = warm.lambda;
    let (mut f, mut jac) = residual(&c, lam)?;
    for _ in 0..50 {
        if f.amax() <= tol {
            if lam < 0.0 {
                return None;
            }
            return Some(Momentum { p: (q * &c).as_slice().to_vec(), lambda: lam });
        }
        let step = jac.clone().lu().solve(&(-&f))?;
        let merit = f.norm_squared();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let c_t = &c + t * step.rows(0, s);
            let lam_t = lam + t * step[s];
            if let Some((f_t, j_t)) = residual(&c_t, lam_t) {
                if f_t.norm_squared() < (1.0 - 1e-4 * t) * merit {
                    c = c_t;
                    lam = lam_t;
                    f = f_t;
                    jac = j_t;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    None
}

/// g(λ) = H(p*(λd)) is increasing in λ with g(0) = min H ≤ 0; root by
/// safeguarded Newton inside a bracket.
fn bracket_solve(
    net: &ReactionNetwork,
    frame: &Frame,
    x: &[f64],
    d: &[f64],
    guess: Option<f64>,
    tol: f64,
) -> Option<Momentum> {
    let q = &frame.q;
    let dg = q.transpose() * DVector::from_column_slice(d);
    // (g, g′, p) at λ; g = +∞ when the dual problem is unbounded
    let probe = |lam: f64| -> (f64, f64, Option<Vec<f64>>) {
        let s: Vec<f64> = d.iter().map(|v| lam * v).collect();
        let l = lagrangian_with(net, &frame.basis, &s, x, 1e-13);
        let Some(p) = l.p_star.filter(|_| l.value.is_finite()) else {
            return (f64::INFINITY, 0.0, None);
        };
        let e = eval_unchecked(net, &p, x);
        let a = q.transpose() * &e.hess_pp * q;
        let slope = match a.cholesky() {
            Some(ch) => lam * dg.dot(&ch.solve(&dg)),
            None => 0.0,
        };
        (e.value, slope, Some(p))
    };
    let (g0, _, p0) = probe(0.0);
    let p0 = p0?;
    if g0 >= -tol {
        return Some(Momentum { p: p0, lambda: 0.0 });
    }
    let dn = max_abs(d);
    let mut lo = 0.0;
    let mut hi = guess.filter(|g| *g > 0.0).unwrap_or(1.0 / dn);
    let mut best = None;
    let mut found = false;
    for _ in 0..200 {
        let (g, _, p) = probe(hi);
        if g > 0.0 {
            found = true;
            break;
        }
        if g.abs() <= tol {
            return p.map(|p| Momentum { p, lambda: hi });
        }
        lo = hi;
        best = p;
        hi *= 2.0;
    }
    if !found {
        return None;
    }
    let mut lam = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (g, slope, p) = probe(lam);
        if g.abs() <= tol {
            return p.map(|p| Momentum { p, lambda: lam });
        }
        if g > 0.0 {
            hi = lam;
        } else {
            lo = lam;
            best = p.clone();
        }
        let newton = if g.is_finite() && slope > 0.0 { lam - g / slope } else { f64::NAN };
        lam = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let _ = best;
    let (g, _, p) = probe(lam);
    if g.abs() <= 1e3 * tol {
        return p.map(|p| Momentum { p, lambda: lam });
    }
    None
}

fn derivative(states: &[Vec<f64>], i: usize, da: f64) -> Vec<f64> {
    let n = states.len();
    let dim = states[0].len();
    (0..dim)
        .map(|k| {
            if i == 0 {
                (-3.0 * states[0][k] + 4.0 * states[1][k] - states[2][k]) / (2.0 * da)
            } else if i == n - 1 {
                (3.0 * states[n - 1][k] - 4.0 * states[n - 2][k] + states[n - 3][k]) / (2.0 * da)
            } else {
                (states[i + 1][k] - states[i - 1][k]) / (2.0 * da)
            }
        })
        .collect()
}

/// Redistributes images to equal arc length by piecewise-linear interpolation.
fn reparameterize(states: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = states.len();
    let mut s = vec![0.0; n];
    for i in 1..n {
        let seg: f64 = states[i].iter().zip(&states[i - 1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        s[i] = s[i - 1] + seg;
    }
    let total = s[n - 1];
    if total == 0.0 {
        return states.to_vec();
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let target = total * i as f64 / (n - 1) as f64;
        while k + 2 < n && s[k + 1] < target {
            k += 1;
        }
        let w = if s[k + 1] > s[k] { ((target - s[k]) / (s[k + 1] - s[k])).clamp(0.0, 1.0) } else { 0.0 };
        out.push(states[k].iter().zip(&states[k + 1]).map(|(a, b)| a + w * (b - a)).collect());
    }
    out[0] = states[0].clone();
    out[n - 1] = states[n - 1].clone();
    out
}

/// Solves (1 + 2r)u_i − r(u_{i−1} + u_{i+1}) = b_i for interior i with fixed ends.
fn implicit_smooth(prev: &[f64], rhs: &[f64], r: &[f64]) -> Vec<f64> {
    let n = prev.len();
    let m = n - 2;
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        a[k] = -r[i];
        b[k] = 1.0 + 2.0 * r[i];
        c[k] = -r[i];
        d[k] = rhs[i];
    }
    d[0] += r[1] * prev[0];
    d[m - 1] += r[n - 2] * prev[n - 1];
    for k in 1..m {
        let w = a[k] / b[k - 1];
        b[k] -= w * c[k - 1];
        d[k] -= w * d[k - 1];
    }
    let mut u = vec![0.0; n];
    u[0] = prev[0];
    u[n - 1] = prev[n - 1];
    u[m] = d[m - 1] / b[m - 1];
    for k in (0..m - 1).rev() {
        u[k + 1] = (d[k] - c[k] * u[k + 2]) / b[k];
    }
    u
}

struct Sweep {
    momenta: Vec<Momentum>,
    derivs: Vec<Vec<f64>>,
}

fn sweep(
    net: &ReactionNetwork,
    frame: &Frame,
    states: &[Vec<f64>],
    warm: Option<&[Momentum]>,
    tol: f64,
) -> Result<Sweep, LandscapeError> {
    let n = states.len();
    let da = 1.0 / (n - 1) as f64;
    let mut momenta: Vec<Momentum> = Vec::with_capacity(n);
    let mut derivs = Vec::with_capacity(n);
    for i in 0..n {
        let d = derivative(states, i, da);
        let w = warm.map(|w| &w[i]).or(momenta.last());
        let m = inner_solve(net, frame, &states[i], &d, w, tol)
            .ok_or(LandscapeError::InnerFailure { alpha: i as f64 * da })?;
        momenta.push(m);
        derivs.push(d);
    }
    Ok(Sweep { momenta, derivs })
}

fn trapezoid_action(sw: &Sweep) -> Vec<f64> {
    let n = sw.momenta.len();
    let da = 1.0 / (n - 1) as f64;
    let integrand: Vec<f64> = (0..n).map(|i| dot(&sw.momenta[i].p, &sw.derivs[i])).collect();
    let mut run = vec![0.0; n];
    for i in 1..n {
        run[i] = run[i - 1] + 0.5 * da * (integrand[i - 1] + integrand[i]);
    }
    run
}

/// Quasipotential v(y; xA) = inf over paths from the steady state `xa` to `y`.
pub fn gmam_quasipotential(
    net: &ReactionNetwork,
    xa: &[f64],
    y: &[f64],
    cfg: &GmamConfig,
) -> Result<GmamResult, LandscapeError> {
    check_state(net, xa)?;
    check_state(net, y)?;
    if cfg.n_images < 10 {
        return Err(LandscapeError::Invalid("n_images must be at least 10".into()));
    }
    if !is_steady(net, xa) {
        return Err(LandscapeError::NotSteady(xa.to_vec()));
    }
    let dim = xa.len();
    let q = orthonormal_span(&net.stoich_f64(), dim, 1e-10);
    let diff = DVector::from_iterator(dim, y.iter().zip(xa).map(|(a, b)| a - b));
    let off = &diff - &q * (q.transpose() * &diff);
    if off.amax() > 1e-9 * (1.0 + diff.amax()) {
        return Err(LandscapeError::DifferentClass);
    }
    if diff.amax() == 0.0 {
        let path = ActionPath {
            times: vec![0.0, 1.0],
            states: vec![xa.to_vec(), xa.to_vec()],
            momenta: Some(vec![vec![0.0; dim]; 2]),
            action: Some(0.0),
        };
        return Ok(GmamResult {
            value: 0.0,
            path,
            converged: true,
            iterations: 0,
            max_hamiltonian: 0.0,
            running_action: vec![0.0, 0.0],
        });
    }
    let frame = Frame { q, basis: ReducedBasis::new(net) };
    let n = cfg.n_images;
    let da = 1.0 / (n - 1) as f64;
    let mut states: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let t = i as f64 * da;
            xa.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect()
        })
        .collect();
    let mut sw = sweep(net, &frame, &states, None, cfg.inner_tol)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_outer {
        iterations += 1;
        let lam: Vec<f64> = sw.momenta.iter().map(|m| m.lambda).collect();
        // explicit part of the descent direction at each interior image
        let mut drift = vec![vec![0.0; dim]; n];
        let mut rate = vec![0.0; n];
        for i in 1..n - 1 {
            let e = eval_unchecked(net, &sw.momenta[i].p, &states[i]);
            let dlam = (lam[i + 1] - lam[i - 1]) / (2.0 * da);
            let phi1 = DVector::from_column_slice(&sw.derivs[i]);
            let v = -lam[i] * (&e.hess_px * &phi1) + &e.hess_pp * DVector::from_column_slice(&e.grad_x)
                - lam[i] * dlam * &phi1;
            drift[i] = v.as_slice().to_vec();
            let (fp, fm) = fluxes(net, &states[i]);
            rate[i] = 1.0 + fp.iter().chain(&fm).sum::<f64>();
        }
        let tau = cfg.step / rate.iter().cloned().fold(1.0, f64::max);
        let r: Vec<f64> = lam.iter().map(|l| tau * l * l / (da * da)).collect();
        let mut next = vec![vec![0.0; dim]; n];
        for k in 0..dim {
            let prev: Vec<f64> = states.iter().map(|s| s[k]).collect();
            let rhs: Vec<f64> = (0..n).map(|i| prev[i] + tau * drift[i][k]).collect();
            let u = implicit_smooth(&prev, &rhs, &r);
            for i in 0..n {
                next[i][k] = u[i];
            }
        }
        for s in next.iter_mut() {
            for v in s.iter_mut() {
                *v = v.max(1e-12);
            }
        }
        let next = reparameterize(&next);
        let moved = next
            .iter()
            .zip(&states)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        states = next;
        sw = sweep(net, &frame, &states, Some(&sw.momenta), cfg.inner_tol)?;
        if moved < cfg.outer_tol {
            converged = true;
            break;
        }
    }
    let running = trapezoid_action(&sw);
    let value = *running.last().unwrap();
    let max_h = sw
        .momenta
        .iter()
        .zip(&states)
        .map(|(m, x)| eval_unchecked(net, &m.p, x).value.abs())
        .fold(0.0, f64::max);
    let path = ActionPath {
        times: (0..n).map(|i| i as f64 * da).collect(),
        states,
        momenta: Some(sw.momenta.into_iter().map(|m| m.p).collect()),
        action: Some(value),
    };
    Ok(GmamResult { value, path, converged, iterations, max_hamiltonian: max_h, running_action: running })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::load;
    use crate::landscape::landscape_1d;

    #[test]
    fn schlogl_barrier_matches_quadrature() {
        let net = load("s1");
        let q = landscape_1d(&net, (0.05, 3.0), 0.5, 1000).unwrap();
        let exact = q.value(&[1.0]).unwrap();
        let r = gmam_quasipotential(&net, &[0.5], &[1.0], &GmamConfig::default()).unwrap();
        assert!(r.converged);
        assert!(((r.value - exact) / exact).abs() < 1e-2, "{} vs {}", r.value, exact);
        assert!(r.max_hamiltonian < 1e-4);
    }

    #[test]
    fn equilibrium_kl_value() {
        let r = gmam_quasipotential(&load("s0"), &[1.0], &[2.0], &GmamConfig::default()).unwrap();
        let exact = 2.0 * 2f64.ln() - 1.0;
        assert!((r.value - exact).abs() < 1e-3 * exact, "{}", r.value);
    }

    #[test]
    fn degenerate_and_downhill() {
        let net = load("s1");
        let r = gmam_quasipotential(&net, &[0.5], &[0.5], &GmamConfig::default()).unwrap();
        assert_eq!(r.value, 0.0);
        // crossing the saddle: the stretch past 1 costs nothing
        let a = gmam_quasipotential(&net, &[0.5], &[1.0], &GmamConfig::default()).unwrap();
        let b = gmam_quasipotential(&net, &[0.5], &[1.4], &GmamConfig::default()).unwrap();
        assert!((a.value - b.value).abs() < 1e-2 * a.value);
        assert!(b.value >= -1e-10);
        assert!(gmam_quasipotential(&net, &[0.7], &[1.0], &GmamConfig::default()).is_err());
    }

    #[test]
    fn refinement_is_monotone() {
        let net = load("s1");
        let exact = landscape_1d(&net, (0.05, 3.0), 0.5, 1000).unwrap().value(&[1.0]).unwrap();
        let errs: Vec<f64> = [25, 50, 100]
            .iter()
            .map(|&n| {
                let cfg = GmamConfig { n_images: n, ..Default::default() };
                (gmam_quasipotential(&net, &[0.5], &[1.0], &cfg).unwrap().value - exact).abs()
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    }

    #[test]
    fn isomerization_on_class() {
        // KL restricted to x1 + x2 = 2 from (1,1) to (1.5,0.5)
        let r = gmam_quasipotential(&load("iso"), &[1.0, 1.0], &[1.5, 0.5], &GmamConfig::default()).unwrap();
        let exact = 1.5 * 1.5f64.ln() + 0.5 * 0.5f64.ln();
        assert!((r.value - exact).abs() < 1e-3 * exact, "{} vs {exact}", r.value);
        assert!(gmam_quasipotential(&load("iso"), &[1.0, 1.0], &[1.5, 1.0], &GmamConfig::default()).is_err());
    }
}
