//! Time-dependent HJE ∂ₜψ + H(∂ₓψ, x) = 0 for one species on a uniform grid.

use crate::kinetics::fluxes;
use crate::netparse::ReactionNetwork;

use super::LandscapeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumericalHamiltonian {
    /// Exact Riemann solution for convex H: min over [p⁻,p⁺] or max over [p⁺,p⁻].
    Godunov,
    /// Rusanov flux with local viscosity max |∂ₚH| over the one-sided slopes.
    #[default]
    LaxFriedrichs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjeConfig {
    pub cfl: f64,
    pub flux: NumericalHamiltonian,
    /// 1: one-sided differences with forward Euler (monotone).
    /// 2: ENO2 slopes with SSP Runge–Kutta 2.
    pub order: u8,
    /// Output times in (0, T]; T itself is always included.
    pub snapshot_times: Vec<f64>,
}

impl Default for HjeConfig {
    fn default() -> Self {
        Self { cfl: 0.9, flux: NumericalHamiltonian::LaxFriedrichs, order: 2, snapshot_times: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjeSolution {
    pub xs: Vec<f64>,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// Parabolically refined argmin and minimum value per snapshot.
    pub argmin: Vec<f64>,
    pub min_values: Vec<f64>,
    pub steps: usize,
}

impl HjeSolution {
    /// Richardson estimate of the first-order error against a run on the
    /// doubled grid: max over common snapshots of |min_h − min_2h|.
    pub fn scheme_error(&self, coarse: &HjeSolution) -> f64 {
        self.times
            .iter()
            .zip(&self.min_values)
            .filter_map(|(t, m)| {
                coarse.times.iter().position(|s| (s - t).abs() < 1e-12).map(|k| (m - coarse.min_values[k]).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Precomputed (ν, Φ⁺, Φ⁻) per reaction at one node.
struct Node {
    terms: Vec<(f64, f64, f64)>,
    /// Minimizer of the convex map p ↦ H(p, x), if finite.
    p_min: Option<f64>,
}

impl Node {
    fn h(&self, p: f64) -> f64 {
        self.terms.iter().map(|(nu, a, b)| a * (nu * p).exp_m1() + b * (-nu * p).exp_m1()).sum()
    }

    fn hp(&self, p: f64) -> f64 {
        self.terms.iter().map(|(nu, a, b)| nu * (a * (nu * p).exp() - b * (-nu * p).exp())).sum()
    }

    fn new(terms: Vec<(f64, f64, f64)>) -> Self {
        let mut node = Self { terms, p_min: None };
        let (mut lo, mut hi) = (-1.0, 1.0);
        while node.hp(lo) > 0.0 && lo > -100.0 {
            lo *= 2.0;
        }
        while node.hp(hi) < 0.0 && hi < 100.0 {
            hi *= 2.0;
        }
        if node.hp(lo) <= 0.0 && node.hp(hi) >= 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if node.hp(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            node.p_min = Some(0.5 * (lo + hi));
        }
        node
    }

    fn godunov(&self, pm: f64, pp: f64) -> f64 {
        if pm <= pp {
            let p = match self.p_min {
                Some(m) => m.clamp(pm, pp),
                None if self.hp(pm) >= 0.0 => pm,
                None => pp,
            };
            self.h(p)
        } else {
            self.h(pm).max(self.h(pp))
        }
    }
}

fn eno(a: f64, b: f64) -> f64 {
    if a.abs() <= b.abs() {
        a
    } else {
        b
    }
}

/// Numerical Hamiltonian at every node; returns the largest local |∂ₚH|.
fn rhs(nodes: &[Node], cfg: &HjeConfig, h: f64, psi: &[f64], out: &mut [f64]) -> f64 {
    let n = psi.len();
    // ghost values by linear extrapolation, two on each side
    let at = |i: isize| -> f64 {
        if i < 0 {
            psi[0] + i as f64 * (psi[1] - psi[0])
        } else if i as usize >= n {
            psi[n - 1] + (i as f64 - (n - 1) as f64) * (psi[n - 1] - psi[n - 2])
        } else {
            psi[i as usize]
        }
    };
    let d2 = |i: isize| at(i + 1) - 2.0 * at(i) + at(i - 1);
    let mut amax = 0.0_f64;
    for (i, node) in nodes.iter().enumerate() {
        let k = i as isize;
        let mut pm = (at(k) - at(k - 1)) / h;
        let mut pp = (at(k + 1) - at(k)) / h;
        if cfg.order == 2 {
            pm += 0.5 * eno(d2(k - 1), d2(k)) / h;
            pp -= 0.5 * eno(d2(k), d2(k + 1)) / h;
        }
        let alpha = node.hp(pm).abs().max(node.hp(pp).abs());
        out[i] = match cfg.flux {
            NumericalHamiltonian::Godunov => node.godunov(pm, pp),
            NumericalHamiltonian::LaxFriedrichs => node.h(0.5 * (pm + pp)) - 0.5 * alpha * (pp - pm),
        };
        amax = amax.max(alpha);
    }
    amax
}

fn refine_min(xs: &[f64], psi: &[f64]) -> (f64, f64) {
    let n = psi.len();
    let i = (0..n).min_by(|&a, &b| psi[a].total_cmp(&psi[b])).unwrap_or(0);
    if i == 0 || i == n - 1 {
        return (xs[i], psi[i]);
    }
    let h = xs[1] - xs[0];
    let (l, c, r) = (psi[i - 1], psi[i], psi[i + 1]);
    let curv = l - 2.0 * c + r;
    if curv <= 0.0 {
        return (xs[i], c);
    }
    (xs[i] - 0.5 * h * (r - l) / curv, c - (r - l).powi(2) / (8.0 * curv))
}

/// Explicit finite-difference solver; flux and order are set by `cfg`.
/// `psi0` is sampled on the uniform grid from `interval.0` to `interval.1`.
pub fn solve_hje_dynamic_1d(
    net: &ReactionNetwork,
    psi0: &[f64],
    interval: (f64, f64),
    t_end: f64,
    cfg: &HjeConfig,
) -> Result<HjeSolution, LandscapeError> {
    if net.n_species() != 1 {
        return Err(LandscapeError::NotOneDimensional);
    }
    if !(cfg.cfl > 0.0) || cfg.cfl > 1.0 {
        return Err(LandscapeError::Cfl(cfg.cfl));
    }
    let n = psi0.len();
    let (a, b) = interval;
    if n < 3 || !(b > a) || !(a >= 0.0) || !(t_end > 0.0) {
        return Err(LandscapeError::Invalid("need at least 3 nodes, a valid interval and T > 0".into()));
    }
    if psi0.iter().any(|v| !v.is_finite()) {
        return Err(LandscapeError::Invalid("initial data must be finite".into()));
    }
    if !matches!(cfg.order, 1 | 2) {
        return Err(LandscapeError::Invalid(format!("order must be 1 or 2, got {}", cfg.order)));
    }
    let h = (b - a) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
    let nodes: Vec<Node> = xs
        .iter()
        .map(|&x| {
            let (fp, fm) = fluxes(net, &[x]);
            Node::new(net.reactions.iter().enumerate().map(|(j, r)| (r.nu()[0] as f64, fp[j], fm[j])).collect())
        })
        .collect();
    let mut marks: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|t| *t > 0.0 && *t < t_end).collect();
    marks.push(t_end);
    marks.sort_by(f64::total_cmp);
    marks.dedup();

    let mut psi = psi0.to_vec();
    let mut next = vec![0.0; n];
    let mut flux = vec![0.0; n];
    let mut t = 0.0;
    let mut steps = 0;
    let mut out = HjeSolution {
        xs: xs.clone(),
        times: Vec::new(),
        snapshots: Vec::new(),
        argmin: Vec::new(),
        min_values: Vec::new(),
        steps: 0,
    };
    for &mark in &marks {
        while t < mark - 1e-14 * mark {
            let amax = rhs(&nodes, cfg, h, &psi, &mut flux);
            if !amax.is_finite() || flux.iter().any(|f| !f.is_finite()) {
                return Err(LandscapeError::Invalid(format!("solution blew up at t = {t}")));
            }
            let mut dt = if amax > 0.0 { cfg.cfl * h / amax } else { mark - t };
            if t + dt > mark {
                dt = mark - t;
            }
            for i in 0..n {
                next[i] = psi[i] - dt * flux[i];
            }
            if cfg.order == 2 {
                rhs(&nodes, cfg, h, &next, &mut flux);
                for i in 0..n {
                    next[i] = 0.5 * (psi[i] + next[i] - dt * flux[i]);
                }
            }
            std::mem::swap(&mut psi, &mut next);
            t += dt;
            steps += 1;
        }
        let (xm, vm) = refine_min(&xs, &psi);
        out.times.push(mark);
        out.snapshots.push(psi.clone());
        out.argmin.push(xm);
        out.min_values.push(vm);
    }
    out.steps = steps;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::load;
    use crate::kinetics::integrate_rre;

    fn grid(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|i| f(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn argmin_tracks_rate_equation() {
        let net = load("s1");
        let h = 1e-3;
        let psi0 = grid(0.5, 1.3, 801, |x| (x - 0.9) * (x - 0.9));
        let cfg = HjeConfig { cfl: 0.9, flux: NumericalHamiltonian::LaxFriedrichs, order: 2, snapshot_times: (1..8).map(|k| 0.25 * k as f64).collect() };
        let sol = solve_hje_dynamic_1d(&net, &psi0, (0.5, 1.3), 2.0, &cfg).unwrap();
        let ode = integrate_rre(&net, &[0.9], 2.0, 1e-12).unwrap();
        for (t, xm) in sol.times.iter().zip(&sol.argmin) {
            let x = ode.state_at(*t)[0];
            assert!((xm - x).abs() < 2.0 * h, "t={t}: {xm} vs {x}");
        }
        let psi0c = grid(0.5, 1.3, 401, |x| (x - 0.9) * (x - 0.9));
        let coarse = solve_hje_dynamic_1d(&net, &psi0c, (0.5, 1.3), 2.0, &cfg).unwrap();
        let err = sol.scheme_error(&coarse);
        assert!(sol.min_values.iter().all(|m| m.abs() <= 5.0 * err), "{:?} vs {err}", sol.min_values);
    }

    #[test]
    fn monotone_scheme_is_first_order() {
        let net = load("s1");
        let ode = integrate_rre(&net, &[0.9], 1.0, 1e-12).unwrap();
        let lag: Vec<f64> = [401, 801]
            .iter()
            .map(|&n| {
                let cfg = HjeConfig { order: 1, ..Default::default() };
                let psi0 = grid(0.5, 1.3, n, |x| (x - 0.9) * (x - 0.9));
                let sol = solve_hje_dynamic_1d(&net, &psi0, (0.5, 1.3), 1.0, &cfg).unwrap();
                (sol.argmin[0] - ode.last_state()[0]).abs()
            })
            .collect();
        assert!(lag[1] < 0.7 * lag[0], "{lag:?}");
    }

    #[test]
    fn steady_argmin_is_stationary() {
        let net = load("s1");
        let psi0 = grid(0.2, 0.8, 601, |x| (x - 0.5) * (x - 0.5));
        let sol = solve_hje_dynamic_1d(&net, &psi0, (0.2, 0.8), 1.0, &HjeConfig::default()).unwrap();
        assert!((sol.argmin[0] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn cfl_is_checked() {
        let net = load("s1");
        let psi0 = vec![0.0; 10];
        let cfg = HjeConfig { cfl: 1.5, ..Default::default() };
        assert!(matches!(solve_hje_dynamic_1d(&net, &psi0, (0.5, 1.0), 1.0, &cfg), Err(LandscapeError::Cfl(_))));
        let cfg = HjeConfig { cfl: 0.0, ..Default::default() };
        assert!(matches!(solve_hje_dynamic_1d(&net, &psi0, (0.5, 1.0), 1.0, &cfg), Err(LandscapeError::Cfl(_))));
    }
}
