use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::kinetics::meso_propensity;
use crate::netparse::ReactionNetwork;

use super::MesoError;

#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrajectory {
    pub volume: f64,
    pub seed: u64,
    pub stream: u64,
    /// Event times, starting with 0.
    pub times: Vec<f64>,
    /// Molecule counts after each event.
    pub counts: Vec<Vec<u64>>,
    /// V·x0 was not integral and had to be rounded.
    pub rounded: bool,
    /// Time at which total propensity vanished, if the run ended early.
    pub absorbed_at: Option<f64>,
    pub t_end: f64,
}

impl JumpTrajectory {
    /// Scaled state x_V = n/V after event `i`.
    pub fn state(&self, i: usize) -> Vec<f64> {
        self.counts[i].iter().map(|&c| c as f64 / self.volume).collect()
    }

    /// Piecewise-constant scaled state at time `t`.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        self.state(i)
    }

    /// Time average of each coordinate of x_V over [a, b].
    pub fn time_average(&self, a: f64, b: f64) -> Vec<f64> {
        let n = self.counts[0].len();
        let mut acc = vec![0.0; n];
        for i in 0..self.times.len() {
            let lo = self.times[i].max(a);
            let hi = self.times.get(i + 1).copied().unwrap_or(self.t_end).min(b);
            if hi > lo {
                for (s, &c) in acc.iter_mut().zip(&self.counts[i]) {
                    *s += (hi - lo) * c as f64 / self.volume;
                }
            }
        }
        acc.iter().map(|s| s / (b - a)).collect()
    }
}

fn validate(net: &ReactionNetwork, volume: f64, x0: &[f64], t_end: f64) -> Result<(Vec<u64>, bool), MesoError> {
    if x0.len() != net.n_species() {
        return Err(MesoError::Dimension { expected: net.n_species(), got: x0.len() });
    }
    if !(volume > 0.0 && volume.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(MesoError::Invalid("volume and T must be positive".into()));
    }
    if x0.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(MesoError::Invalid("initial state must be non-negative".into()));
    }
    let scaled: Vec<f64> = x0.iter().map(|v| v * volume).collect();
    let rounded = scaled.iter().any(|s| (s - s.round()).abs() > 1e-9 * (1.0 + s.abs()));
    Ok((scaled.iter().map(|s| s.round() as u64).collect(), rounded))
}

/// Gillespie direct method on the RNG stream 0 of `seed`.
pub fn ssa_simulate(net: &ReactionNetwork, volume: f64, x0: &[f64], t_end: f64, seed: u64) -> Result<JumpTrajectory, MesoError> {
    ssa_simulate_stream(net, volume, x0, t_end, seed, 0)
}

/// Gillespie direct method on an independent ChaCha stream (seed, stream).
pub fn ssa_simulate_stream(
    net: &ReactionNetwork,
    volume: f64,
    x0: &[f64],
    t_end: f64,
    seed: u64,
    stream: u64,
) -> Result<JumpTrajectory, MesoError> {
    let (mut n, rounded) = validate(net, volume, x0, t_end)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let nus: Vec<Vec<i64>> = net.reactions.iter().map(|r| r.nu()).collect();
    let mut traj = JumpTrajectory {
        volume,
        seed,
        stream,
        times: vec![0.0],
        counts: vec![n.clone()],
        rounded,
        absorbed_at: None,
        t_end,
    };
    let mut t = 0.0;
    let mut props = Vec::with_capacity(2 * nus.len());
    loop {
        let (fp, fm) = meso_propensity(net, &n, volume);
        props.clear();
        for (j, nu) in nus.iter().enumerate() {
            // a jump that would leave the orthant is suppressed
            let fwd_ok = n.iter().zip(nu).all(|(&c, &d)| c as i64 + d >= 0);
            let bwd_ok = n.iter().zip(nu).all(|(&c, &d)| c as i64 - d >= 0);
            props.push(if fwd_ok { fp[j] } else { 0.0 });
            props.push(if bwd_ok { fm[j] } else { 0.0 });
        }
        let total: f64 = props.iter().sum();
        if total <= 0.0 {
            traj.absorbed_at = Some(t);
            break;
        }
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / total;
        if t > t_end {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = props.len() - 1;
        for (k, a) in props.iter().enumerate() {
            if target < *a {
                pick = k;
                break;
            }
            target -= a;
        }
        while props[pick] == 0.0 {
            pick -= 1;
        }
        let (j, sign) = (pick / 2, if pick % 2 == 0 { 1 } else { -1 });
        for (c, &d) in n.iter_mut().zip(&nus[j]) {
            *c = (*c as i64 + sign * d) as u64;
        }
        traj.times.push(t);
        traj.counts.push(n.clone());
    }
    Ok(traj)
}

/// Ensemble mean and standard deviation of x_V on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub sd: Vec<Vec<f64>>,
    pub paths: usize,
}

/// `n_paths` independent trajectories on streams 0..n_paths of `seed`, run in
/// parallel and reduced in stream order.
pub fn ssa_ensemble(
    net: &ReactionNetwork,
    volume: f64,
    x0: &[f64],
    t_end: f64,
    seed: u64,
    n_paths: usize,
    grid: &[f64],
) -> Result<EnsembleStats, MesoError> {
    if n_paths == 0 {
        return Err(MesoError::Invalid("ensemble needs at least one path".into()));
    }
    let samples: Vec<Vec<Vec<f64>>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            ssa_simulate_stream(net, volume, x0, t_end, seed, k).map(|tr| grid.iter().map(|&t| tr.state_at(t)).collect())
        })
        .collect::<Result<_, _>>()?;
    let dim = x0.len();
    let mut mean = vec![vec![0.0; dim]; grid.len()];
    let mut sd = vec![vec![0.0; dim]; grid.len()];
    for path in &samples {
        for (g, x) in path.iter().enumerate() {
            for i in 0..dim {
                mean[g][i] += x[i];
            }
        }
    }
    let m = n_paths as f64;
    for row in mean.iter_mut() {
        for v in row.iter_mut() {
            *v /= m;
        }
    }
    for path in &samples {
        for (g, x) in path.iter().enumerate() {
            for i in 0..dim {
                sd[g][i] += (x[i] - mean[g][i]).powi(2);
            }
        }
    }
    for row in sd.iter_mut() {
        for v in row.iter_mut() {
            *v = (*v / (m - 1.0).max(1.0)).sqrt();
        }
    }
    Ok(EnsembleStats { times: grid.to_vec(), mean, sd, paths: n_paths })
}
