//! Diffusion approximations of the CME: chemical Langevin and the
//! fluctuation–dissipation-respecting drift–diffusion.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::decomp::onsager_closed_form;
use crate::kinetics::{check_state, fluxes, rre_vector, KineticsError};
use crate::landscape::{EnergyLandscape, LandscapeError};
use crate::netparse::ReactionNetwork;
use crate::path::ActionPath;

/// Relative step for the central differences of div K.
pub const DIV_STEP: f64 = 1e-5;
const REGULARIZATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffusionError {
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error("covariance is not positive semidefinite at {x:?}")]
    Cholesky { x: Vec<f64> },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionKind {
    Langevin,
    Fd,
}

impl DiffusionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Langevin => "langevin",
            Self::Fd => "fd",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiffusionModel<'a> {
    pub kind: DiffusionKind,
    pub network: &'a ReactionNetwork,
    pub volume: f64,
    landscape: Option<&'a EnergyLandscape>,
}

fn check_volume(v: f64) -> Result<(), DiffusionError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(DiffusionError::Invalid(format!("volume must be positive, got {v}")))
    }
}

/// Drift R(x), covariance (1/V)Σⱼ(Φ⁺ⱼ+Φ⁻ⱼ)νⱼνⱼᵀ.
pub fn chemical_langevin(net: &ReactionNetwork, volume: f64) -> Result<DiffusionModel<'_>, DiffusionError> {
    check_volume(volume)?;
    Ok(DiffusionModel { kind: DiffusionKind::Langevin, network: net, volume, landscape: None })
}

/// Drift −K∇ψ + (1/V) div K, covariance 2K/V.
pub fn fd_diffusion<'a>(
    net: &'a ReactionNetwork,
    landscape: &'a EnergyLandscape,
    volume: f64,
) -> Result<DiffusionModel<'a>, DiffusionError> {
    check_volume(volume)?;
    let x = landscape.reference_point();
    check_state(net, &x)?;
    Ok(DiffusionModel { kind: DiffusionKind::Fd, network: net, volume, landscape: Some(landscape) })
}

impl DiffusionModel<'_> {
    /// Onsager operator K(x) of the fd model.
    pub fn onsager(&self, x: &[f64]) -> Result<DMatrix<f64>, DiffusionError> {
        let l = self.landscape.ok_or_else(|| DiffusionError::Invalid("Langevin model has no landscape".into()))?;
        let g = l.gradient(x)?;
        Ok(onsager_closed_form(self.network, x, &g))
    }

    fn div_onsager(&self, x: &[f64]) -> Result<Vec<f64>, DiffusionError> {
        let n = x.len();
        let mut div = vec![0.0; n];
        for j in 0..n {
            let h = DIV_STEP * x[j].abs().max(1e-3);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (kp, km) = (self.onsager(&xp)?, self.onsager(&xm)?);
            for i in 0..n {
                div[i] += (kp[(i, j)] - km[(i, j)]) / (2.0 * h);
            }
        }
        Ok(div)
    }

    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>, DiffusionError> {
        check_state(self.network, x)?;
        match self.kind {
            DiffusionKind::Langevin => Ok(rre_vector(self.network, x)),
            DiffusionKind::Fd => {
                let g = self.landscape.expect("fd model carries a landscape").gradient(x)?;
                let k = self.onsager(x)?;
                let kg = &k * DVector::from_column_slice(&g);
                let div = self.div_onsager(x)?;
                Ok((0..x.len()).map(|i| -kg[i] + div[i] / self.volume).collect())
            }
        }
    }

    pub fn covariance(&self, x: &[f64]) -> Result<DMatrix<f64>, DiffusionError> {
        check_state(self.network, x)?;
        match self.kind {
            DiffusionKind::Langevin => {
                let n = x.len();
                let (fp, fm) = fluxes(self.network, x);
                let mut c = DMatrix::zeros(n, n);
                for (j, r) in self.network.reactions.iter().enumerate() {
                    let nu = DVector::from_vec(r.nu_f64());
                    c += (fp[j] + fm[j]) * &nu * nu.transpose();
                }
                Ok(c / self.volume)
            }
            DiffusionKind::Fd => Ok(self.onsager(x)? * (2.0 / self.volume)),
        }
    }

    /// H_q(p,x) = (p − ∇ψ)·K p, the quadratic Hamiltonian of the fd model.
    pub fn quadratic_hamiltonian(&self, p: &[f64], x: &[f64]) -> Result<f64, DiffusionError> {
        let l = self.landscape.ok_or_else(|| DiffusionError::Invalid("Langevin model has no landscape".into()))?;
        let g = l.gradient(x)?;
        let k = self.onsager(x)?;
        let pv = DVector::from_column_slice(p);
        let shifted = &pv - DVector::from_vec(g);
        Ok(shifted.dot(&(&k * &pv)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub path: ActionPath,
    /// Some step needed the +1e−12·I regularization for its Cholesky factor.
    pub regularized: bool,
}

fn cholesky(c: &DMatrix<f64>, x: &[f64], flagged: &mut bool) -> Result<DMatrix<f64>, DiffusionError> {
    if c.amax() == 0.0 {
        return Ok(c.clone());
    }
    if let Some(ch) = c.clone().cholesky() {
        return Ok(ch.l());
    }
    let n = c.nrows();
    *flagged = true;
    let reg = c + DMatrix::identity(n, n) * (REGULARIZATION * c.amax().max(1.0));
    reg.cholesky().map(|ch| ch.l()).ok_or_else(|| DiffusionError::Cholesky { x: x.to_vec() })
}

/// Explicit Euler–Maruyama with reflection at zero, reproducible per seed.
pub fn euler_maruyama(
    model: &DiffusionModel<'_>,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<SamplePath, DiffusionError> {
    check_state(model.network, x0)?;
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(DiffusionError::Invalid("T and dt must be positive".into()));
    }
    let steps = (t_end / dt).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x.clone());
    let mut regularized = false;
    let mut t = 0.0;
    for k in 1..=steps {
        let h = if k == steps { t_end - t } else { dt };
        if h <= 0.0 {
            break;
        }
        let b = model.drift(&x)?;
        let l = cholesky(&model.covariance(&x)?, &x, &mut regularized)?;
        let xi = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let noise = &l * xi * h.sqrt();
        for i in 0..n {
            x[i] = (x[i] + b[i] * h + noise[i]).abs();
        }
        t += h;
        times.push(t);
        states.push(x.clone());
    }
    Ok(SamplePath { path: ActionPath { times, states, momenta: None, action: None }, regularized })
}

/// Interior max-norm of the discrete Fokker–Planck operator −∂ₓ(bρ) + ∂ₓ²(Dρ),
/// D = cov/2, applied to ρ = e^{−V(ψ − min ψ)} on a uniform 1-D grid.
/// Fluxes live on the half-nodes, so the residual is second order when ρ is
/// stationary for the model.
pub fn fd_invariance_residual(
    model: &DiffusionModel<'_>,
    landscape: &EnergyLandscape,
    grid: (f64, f64, usize),
) -> Result<f64, DiffusionError> {
    invariance_residual_with(model, |x| landscape.value(&[x]).map_err(DiffusionError::from), grid)
}

fn invariance_residual_with<F>(model: &DiffusionModel<'_>, psi: F, grid: (f64, f64, usize)) -> Result<f64, DiffusionError>
where
    F: Fn(f64) -> Result<f64, DiffusionError>,
{
    if model.network.n_species() != 1 {
        return Err(DiffusionError::Invalid("invariance residual needs one species".into()));
    }
    let (a, b, n) = grid;
    if n < 3 || !(b > a) || !(a > 0.0) {
        return Err(DiffusionError::Invalid("grid needs a > 0, b > a and at least 3 nodes".into()));
    }
    let v = model.volume;
    let h = (b - a) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
    let mids: Vec<f64> = (0..n - 1).map(|i| a + h * (i as f64 + 0.5)).collect();
    let psi_nodes = xs.iter().map(|&x| psi(x)).collect::<Result<Vec<_>, _>>()?;
    let psi_mids = mids.iter().map(|&x| psi(x)).collect::<Result<Vec<_>, _>>()?;
    let floor = psi_nodes.iter().chain(&psi_mids).cloned().fold(f64::INFINITY, f64::min);
    let rho = |p: f64| (-v * (p - floor)).exp();
    let d: Vec<f64> = xs.iter().map(|&x| model.covariance(&[x]).map(|c| 0.5 * c[(0, 0)])).collect::<Result<_, _>>()?;
    let mut flux = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let bm = model.drift(&[mids[i]])?[0];
        let (r0, r1) = (rho(psi_nodes[i]), rho(psi_nodes[i + 1]));
        flux.push(-bm * rho(psi_mids[i]) + (d[i + 1] * r1 - d[i] * r0) / h);
    }
    Ok((1..n - 1).map(|i| ((flux[i] - flux[i - 1]) / h).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::load;
    use crate::hamjac::hamiltonian;
    use crate::kinetics::integrate_rre;
    use crate::landscape::{kl_landscape, landscape_1d};
    use crate::numerics::{log_mean, Halton};

    #[test]
    fn langevin_at_saddle() {
        let net = load("s1");
        let m = chemical_langevin(&net, 100.0).unwrap();
        assert_eq!(m.drift(&[1.0]).unwrap(), vec![0.0]);
        assert!((m.covariance(&[1.0]).unwrap()[(0, 0)] - 0.075).abs() < 1e-15);
        for u in Halton::new(1).take(20) {
            let x = [0.1 + 2.0 * u[0]];
            assert_eq!(m.drift(&x).unwrap(), rre_vector(&net, &x));
            let hpp = hamiltonian(&net, &[0.0], &x).unwrap().hess_pp;
            assert!((m.covariance(&x).unwrap() - hpp / 100.0).amax() < 1e-15);
        }
        assert!(chemical_langevin(&net, 0.0).is_err());
    }

    #[test]
    fn fd_drift_on_equilibrium_model() {
        let net = load("s0");
        let l = kl_landscape(&net, &[1.0]).unwrap();
        let v = 1e4;
        let m = fd_diffusion(&net, &l, v).unwrap();
        for x in [0.4, 1.7, 2.5] {
            // K = Λ(x², x³) + Λ(1, x) = (x² + 1)Λ(1, x)
            let k = (x * x + 1.0) * log_mean(1.0, x);
            let drift = m.drift(&[x]).unwrap()[0];
            assert!((drift + k * x.ln()).abs() < 50.0 / v, "{drift} vs {}", -k * x.ln());
            assert!((m.onsager(&[x]).unwrap()[(0, 0)] - k).abs() < 1e-12);
        }
        assert!(m.drift(&[1.0]).unwrap()[0].abs() < 50.0 / v);
    }

    #[test]
    fn quadratic_hamiltonian_symmetry() {
        let net = load("s1");
        let l = landscape_1d(&net, (0.05, 3.0), 0.5, 1000).unwrap();
        let m = fd_diffusion(&net, &l, 50.0).unwrap();
        for u in Halton::new(2).take(50) {
            let x = [0.1 + 2.8 * u[0]];
            let p = [6.0 * u[1] - 3.0];
            let g = l.gradient(&x).unwrap();
            let a = m.quadratic_hamiltonian(&p, &x).unwrap();
            let b = m.quadratic_hamiltonian(&[g[0] - p[0]], &x).unwrap();
            assert!((a - b).abs() < 1e-13 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn zero_noise_follows_rate_equation() {
        let net = load("s1");
        let m = chemical_langevin(&net, 1e300).unwrap();
        let s = euler_maruyama(&m, &[0.9], 2.0, 1e-3, 1).unwrap();
        let ode = integrate_rre(&net, &[0.9], 2.0, 1e-12).unwrap();
        assert!((s.path.last_state()[0] - ode.last_state()[0]).abs() < 1e-3);
    }

    #[test]
    fn birth_death_langevin_mean() {
        let net = load("bd");
        let m = chemical_langevin(&net, 100.0).unwrap();
        let s = euler_maruyama(&m, &[2.0], 200.0, 1e-2, 11).unwrap();
        let mean: f64 = s.path.states.iter().map(|x| x[0]).sum::<f64>() / s.path.len() as f64;
        assert!((1.8..=2.2).contains(&mean), "{mean}");
        let again = euler_maruyama(&m, &[2.0], 200.0, 1e-2, 11).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn fd_samples_follow_invariant_density() {
        let net = load("s1");
        let l = landscape_1d(&net, (0.01, 8.0), 0.5, 4000).unwrap();
        let v = 50.0;
        let m = fd_diffusion(&net, &l, v).unwrap();
        let s = euler_maruyama(&m, &[0.5], 8000.0, 4e-3, 5).unwrap();
        let bins = 10;
        let (lo, hi) = (0.2, 1.8);
        let w = (hi - lo) / bins as f64;
        let mut counts = vec![0.0; bins];
        for x in &s.path.states {
            if x[0] >= lo && x[0] < hi {
                counts[((x[0] - lo) / w) as usize] += 1.0;
            }
        }
        let weights: Vec<f64> = (0..bins).map(|i| (-v * l.value(&[lo + w * (i as f64 + 0.5)]).unwrap()).exp()).collect();
        let rho = spearman(&counts, &weights);
        assert!(rho > 0.9, "{rho}");
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for k in i..=j {
                r[idx[k]] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let (ra, rb) = (ranks(a), ranks(b));
        let n = a.len() as f64;
        let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
        let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn invariance_residual_is_second_order() {
        let net = load("s1");
        let l = landscape_1d(&net, (0.05, 3.0), 0.5, 4000).unwrap();
        let fd = fd_diffusion(&net, &l, 20.0).unwrap();
        let res: Vec<f64> = [41, 81, 161]
            .iter()
            .map(|&n| fd_invariance_residual(&fd, &l, (0.3, 1.8, n)).unwrap())
            .collect();
        assert!(res[0] / res[1] >= 3.0 && res[1] / res[2] >= 3.0, "{res:?}");
        let cle = chemical_langevin(&net, 20.0).unwrap();
        let res_cle: Vec<f64> = [41, 81, 161]
            .iter()
            .map(|&n| fd_invariance_residual(&cle, &l, (0.3, 1.8, n)).unwrap())
            .collect();
        assert!(res_cle[2] > 0.5 * res_cle[0] && res_cle[2] > 100.0 * res[2], "{res_cle:?}");
    }
}
