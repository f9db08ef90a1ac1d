//! Gluing local quasipotentials from each attractor into one landscape.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};

use crate::kinetics::{integrate_rre_until, rre_rhs, rre_vector, Stability, SteadyStateReport};
use crate::netparse::ReactionNetwork;
use crate::numerics::linalg::orthonormal_span;
use crate::numerics::max_abs;

use super::gmam::{gmam_quasipotential, GmamConfig};
use super::LandscapeError;

#[derive(Debug, Clone, PartialEq)]
pub struct AubryPoint {
    pub x: Vec<f64>,
    pub stability: Stability,
    /// ψ at this point; set for attractors once the landscape is built.
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AubrySet {
    pub points: Vec<AubryPoint>,
}

impl AubrySet {
    pub fn from_report(report: &SteadyStateReport) -> Self {
        let points = report
            .states
            .iter()
            .filter(|s| s.x.iter().all(|v| *v > 0.0))
            .map(|s| AubryPoint { x: s.x.clone(), stability: s.stability, offset: None })
            .collect();
        Self { points }
    }

    fn attractors(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| self.points[i].stability == Stability::Stable).collect()
    }
}

type Entry = (f64, Vec<f64>);

#[derive(Debug)]
pub struct WeakKamLandscape {
    network: ReactionNetwork,
    aubry: AubrySet,
    attractors: Vec<usize>,
    cfg: GmamConfig,
    memo: Mutex<HashMap<Vec<u64>, Entry>>,
}

impl WeakKamLandscape {
    pub fn aubry(&self) -> &AubrySet {
        &self.aubry
    }

    pub(crate) fn reference_point(&self) -> Vec<f64> {
        self.attractors
            .iter()
            .map(|&i| &self.aubry.points[i])
            .find(|p| p.offset == Some(0.0))
            .map(|p| p.x.clone())
            .unwrap_or_default()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Entry, LandscapeError> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(e) = self.memo.lock().expect("memo lock").get(&key) {
            return Ok(e.clone());
        }
        let mut best: Option<Entry> = None;
        for &i in &self.attractors {
            let a = &self.aubry.points[i];
            let off = a.offset.expect("offsets set at construction");
            if a.x.as_slice() == x {
                best = Some((off, vec![0.0; x.len()]));
                break;
            }
            let r = match gmam_quasipotential(&self.network, &a.x, x, &self.cfg) {
                Ok(r) => r,
                Err(LandscapeError::DifferentClass) => continue,
                Err(e) => return Err(e),
            };
            let v = off + r.value.max(0.0);
            if best.as_ref().map_or(true, |b| v < b.0) {
                let p = r.path.momenta.as_ref().and_then(|m| m.last().cloned()).unwrap_or_default();
                best = Some((v, p));
            }
        }
        let e = best.ok_or_else(|| LandscapeError::OutsideDomain { x: x.to_vec() })?;
        self.memo.lock().expect("memo lock").insert(key, e.clone());
        Ok(e)
    }

    pub(crate) fn value(&self, x: &[f64]) -> Result<f64, LandscapeError> {
        self.evaluate(x).map(|e| e.0)
    }

    /// Terminal momentum of the minimizing path.
    pub(crate) fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, LandscapeError> {
        self.evaluate(x).map(|e| e.1)
    }
}

/// Unstable direction of a non-attracting steady state, within the stoichiometric subspace.
fn unstable_direction(net: &ReactionNetwork, x: &[f64]) -> Option<Vec<f64>> {
    let (_, jac) = rre_rhs(net, x).ok()?;
    let q = orthonormal_span(&net.stoich_f64(), x.len(), 1e-10);
    let j = q.transpose() * &jac * &q;
    let mu = j.complex_eigenvalues().iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
    if !(mu > 0.0) {
        return None;
    }
    let s = j.nrows();
    let shifted = &j - DMatrix::identity(s, s) * (mu * (1.0 + 1e-8));
    let lu = shifted.lu();
    let mut w = DVector::from_element(s, 1.0);
    for _ in 0..50 {
        w = lu.solve(&w)?;
        w /= w.norm();
    }
    Some((&q * w).as_slice().to_vec())
}

/// Attractor reached by the RRE from `x0`, if any.
fn basin_of(net: &ReactionNetwork, aubry: &AubrySet, attractors: &[usize], x0: &[f64]) -> Option<usize> {
    let near = |x: &[f64]| {
        attractors.iter().copied().find(|&i| {
            let a = &aubry.points[i].x;
            a.iter().zip(x).all(|(u, v)| (u - v).abs() <= 1e-4 * (1.0 + u.abs()))
        })
    };
    let path = integrate_rre_until(net, x0, 1e4, 1e-10, |_, x| {
        near(x).is_some() && max_abs(&rre_vector(net, x)) < 1e-9
    })
    .ok()?;
    near(path.last_state())
}

/// ψ(x) = minᵢ(offsetᵢ + v(x; xᵢ)) over the attractors, offsets propagated
/// through the saddles joining neighbouring basins, deepest attractor at 0.
pub fn weak_kam_landscape(
    net: &ReactionNetwork,
    aubry: &AubrySet,
    cfg: &GmamConfig,
) -> Result<super::EnergyLandscape, LandscapeError> {
    let mut aubry = aubry.clone();
    let attractors = aubry.attractors();
    if attractors.is_empty() {
        return Err(LandscapeError::NoAttractor);
    }
    // edges (a, b, off_b − off_a)
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (si, sp) in aubry.points.iter().enumerate() {
        if matches!(sp.stability, Stability::Stable) {
            continue;
        }
        let Some(v) = unstable_direction(net, &sp.x) else { continue };
        let eps = 1e-4 * (1.0 + max_abs(&sp.x));
        let ends: Vec<Option<usize>> = [1.0, -1.0]
            .iter()
            .map(|sgn| {
                let x0: Vec<f64> = sp.x.iter().zip(&v).map(|(a, d)| a + sgn * eps * d).collect();
                if x0.iter().any(|c| *c <= 0.0) {
                    None
                } else {
                    basin_of(net, &aubry, &attractors, &x0)
                }
            })
            .collect();
        if let [Some(a), Some(b)] = ends[..] {
            if a != b {
                let va = gmam_quasipotential(net, &aubry.points[a].x, &aubry.points[si].x, cfg)?.value;
                let vb = gmam_quasipotential(net, &aubry.points[b].x, &aubry.points[si].x, cfg)?.value;
                edges.push((a, b, va - vb));
            }
        }
    }
    let mut offset: HashMap<usize, f64> = HashMap::new();
    offset.insert(attractors[0], 0.0);
    let mut queue = VecDeque::from([attractors[0]]);
    while let Some(a) = queue.pop_front() {
        for &(u, w, d) in &edges {
            let (next, val) = if u == a {
                (w, offset[&a] + d)
            } else if w == a {
                (u, offset[&a] - d)
            } else {
                continue;
            };
            if let std::collections::hash_map::Entry::Vacant(e) = offset.entry(next) {
                e.insert(val);
                queue.push_back(next);
            }
        }
    }
    for &(u, w, d) in &edges {
        let gap = offset[&w] - offset[&u] - d;
        if gap.abs() > 1e-3 * (1.0 + d.abs()) {
            return Err(LandscapeError::InconsistentOffsets {
                detail: format!("cycle through attractors {u} and {w} misses by {gap:e}"),
            });
        }
    }
    if offset.len() < attractors.len() {
        return Err(LandscapeError::InconsistentOffsets {
            detail: format!("{} of {} attractors are not joined by a saddle", attractors.len() - offset.len(), attractors.len()),
        });
    }
    let floor = offset.values().cloned().fold(f64::INFINITY, f64::min);
    for (&i, &o) in &offset {
        aubry.points[i].offset = Some(if o == floor { 0.0 } else { o - floor });
    }
    Ok(super::EnergyLandscape::Gmam(WeakKamLandscape {
        network: net.clone(),
        aubry,
        attractors,
        cfg: cfg.clone(),
        memo: Mutex::new(HashMap::new()),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::load;
    use crate::kinetics::find_steady_states;
    use crate::landscape::{kl_landscape, landscape_1d};

    fn aubry(name: &str) -> (ReactionNetwork, AubrySet) {
        let net = load(name);
        let rep = find_steady_states(&net, &[(0.01, 3.0)], None, 32, 1e-12).unwrap();
        (net, AubrySet::from_report(&rep))
    }

    #[test]
    fn schlogl_glued_matches_quadrature() {
        let (net, set) = aubry("s1");
        assert_eq!(set.points.len(), 3);
        let g = weak_kam_landscape(&net, &set, &GmamConfig::default()).unwrap();
        let q = landscape_1d(&net, (0.05, 3.0), 0.5, 1000).unwrap();
        // shift the 1-D landscape so that its global minimum is 0
        let qmin = q.value(&[0.5]).unwrap().min(q.value(&[1.5]).unwrap());
        let mut worst = 0.0_f64;
        for i in 0..16 {
            let x = 0.05 + 2.95 * i as f64 / 15.0;
            worst = worst.max((g.value(&[x]).unwrap() - (q.value(&[x]).unwrap() - qmin)).abs());
        }
        assert!(worst < 2e-2, "{worst}");
        if let crate::landscape::EnergyLandscape::Gmam(w) = &g {
            for p in w.aubry().points.iter().filter(|p| p.offset.is_some()) {
                assert_eq!(g.value(&p.x).unwrap(), p.offset.unwrap());
            }
        }
    }

    #[test]
    fn single_attractor_reduces_to_gmam() {
        let (net, set) = aubry("s0");
        let g = weak_kam_landscape(&net, &set, &GmamConfig::default()).unwrap();
        let k = kl_landscape(&net, &[1.0]).unwrap();
        for x in [0.3, 2.0] {
            let direct = gmam_quasipotential(&net, &[1.0], &[x], &GmamConfig::default()).unwrap().value;
            assert_eq!(g.value(&[x]).unwrap(), direct);
            assert!((direct - k.value(&[x]).unwrap()).abs() < 1e-3);
        }
        assert_eq!(g.reference_point(), vec![1.0]);
    }

    #[test]
    fn no_attractor_is_an_error() {
        let net = load("s1");
        let set = AubrySet { points: vec![AubryPoint { x: vec![1.0], stability: Stability::Unstable, offset: None }] };
        assert!(matches!(weak_kam_landscape(&net, &set, &GmamConfig::default()), Err(LandscapeError::NoAttractor)));
    }
}
