use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::kinetics::meso_propensity;
use crate::netparse::{grouped_vectors, ReactionGroup, ReactionNetwork};

use super::{LatticeDistribution, MesoError};

pub const DEFAULT_STATE_CAP: usize = 2_000_000;

/// Restricts the lattice to the states with `weights · n = total`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFilter {
    pub weights: Vec<i64>,
    pub total: i64,
}

/// Master-equation generator on a box of the count lattice. Rows are
/// indexed by the source state: `out[x]` lists (y, rate of x → y), and the
/// diagonal is minus the total exit rate, so every row sums to zero.
#[derive(Debug, Clone)]
pub struct TruncatedCME {
    pub network: ReactionNetwork,
    pub volume: f64,
    pub lo: Vec<u64>,
    pub hi: Vec<u64>,
    pub class: Option<ClassFilter>,
    pub states: Vec<Vec<u64>>,
    pub out: Vec<Vec<(usize, f64)>>,
    pub diag: Vec<f64>,
    lookup: Vec<u32>,
    strides: Vec<u64>,
}

impl TruncatedCME {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, n: &[u64]) -> Option<usize> {
        let mut flat = 0u64;
        for ((&c, &lo), (&hi, &s)) in n.iter().zip(&self.lo).zip(self.hi.iter().zip(&self.strides)) {
            if c < lo || c > hi {
                return None;
            }
            flat += (c - lo) * s;
        }
        match self.lookup[flat as usize] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    fn shifted(&self, n: &[u64], d: &[i64], sign: i64) -> Option<usize> {
        let mut m = Vec::with_capacity(n.len());
        for (&c, &k) in n.iter().zip(d) {
            let v = c as i64 + sign * k;
            if v < 0 {
                return None;
            }
            m.push(v as u64);
        }
        self.index_of(&m)
    }

    /// dp/dt = Qᵀp for a distribution over the enumerated states.
    pub fn apply_forward(&self, p: &[f64]) -> Vec<f64> {
        let mut dp: Vec<f64> = p.iter().zip(&self.diag).map(|(a, d)| a * d).collect();
        for (x, edges) in self.out.iter().enumerate() {
            if p[x] == 0.0 {
                continue;
            }
            for &(y, r) in edges {
                dp[y] += p[x] * r;
            }
        }
        dp
    }

    /// Largest exit rate.
    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0_f64, |m, d| m.max(-d))
    }

    /// max over rows of |Σ_y Q(x,y)|.
    pub fn row_sum_defect(&self) -> f64 {
        self.out
            .iter()
            .zip(&self.diag)
            .map(|(e, d)| (e.iter().map(|(_, r)| r).sum::<f64>() + d).abs())
            .fold(0.0, f64::max)
    }

    /// Rescaled counts n/V of every enumerated state.
    pub fn scaled_states(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|n| n.iter().map(|&c| c as f64 / self.volume).collect()).collect()
    }
}

/// Assemble the generator on `lo ≤ n ≤ hi`, deleting every transition that
/// would leave the box (so the reverse transition disappears as well).
pub fn build_cme(
    net: &ReactionNetwork,
    volume: f64,
    bounds: &[(u64, u64)],
    class: Option<ClassFilter>,
    cap: usize,
) -> Result<TruncatedCME, MesoError> {
    let dim = net.n_species();
    if bounds.len() != dim {
        return Err(MesoError::Dimension { expected: dim, got: bounds.len() });
    }
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(MesoError::Invalid("volume must be positive".into()));
    }
    if bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Err(MesoError::Invalid("box bounds need lo <= hi".into()));
    }
    if let Some(c) = &class {
        if c.weights.len() != dim {
            return Err(MesoError::Dimension { expected: dim, got: c.weights.len() });
        }
    }
    let sizes: Vec<u64> = bounds.iter().map(|&(lo, hi)| hi - lo + 1).collect();
    let volume_count: u128 = sizes.iter().map(|&s| s as u128).product();
    let lookup_cap = (cap as u128).saturating_mul(16).max(1 << 20);
    if volume_count > lookup_cap || (class.is_none() && volume_count > cap as u128) {
        return Err(MesoError::CapExceeded { states: volume_count, cap });
    }
    // row-major: the last species varies fastest
    let mut strides = vec![1u64; dim];
    for i in (0..dim.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }
    let lo: Vec<u64> = bounds.iter().map(|b| b.0).collect();
    let hi: Vec<u64> = bounds.iter().map(|b| b.1).collect();
    let mut lookup = vec![u32::MAX; volume_count as usize];
    let mut states = Vec::new();
    for flat in 0..volume_count as u64 {
        let n: Vec<u64> = (0..dim).map(|i| lo[i] + (flat / strides[i]) % sizes[i]).collect();
        if let Some(c) = &class {
            let s: i64 = c.weights.iter().zip(&n).map(|(w, &v)| w * v as i64).sum();
            if s != c.total {
                continue;
            }
        }
        if states.len() >= cap {
            return Err(MesoError::CapExceeded { states: volume_count, cap });
        }
        lookup[flat as usize] = states.len() as u32;
        states.push(n);
    }
    let mut cme = TruncatedCME {
        network: net.clone(),
        volume,
        lo,
        hi,
        class,
        out: Vec::with_capacity(states.len()),
        diag: vec![0.0; states.len()],
        states: Vec::new(),
        lookup,
        strides,
    };
    let nus: Vec<Vec<i64>> = net.reactions.iter().map(|r| r.nu()).collect();
    let mut edges: Vec<(usize, f64)> = Vec::new();
    for (x, n) in states.iter().enumerate() {
        let (fp, fm) = meso_propensity(net, n, volume);
        edges.clear();
        for (j, nu) in nus.iter().enumerate() {
            for (rate, sign) in [(fp[j], 1), (fm[j], -1)] {
                if rate <= 0.0 {
                    continue;
                }
                if let Some(y) = cme.shifted(n, nu, sign) {
                    match edges.iter_mut().find(|e| e.0 == y) {
                        Some(e) => e.1 += rate,
                        None => edges.push((y, rate)),
                    }
                }
            }
        }
        edges.sort_by_key(|e| e.0);
        cme.diag[x] = -edges.iter().map(|e| e.1).sum::<f64>();
        cme.out.push(edges.clone());
    }
    cme.states = states;
    Ok(cme)
}

/// Stationary law together with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub distribution: LatticeDistribution,
    /// max |πᵀQ| relative to max |Q|.
    pub residual: f64,
    /// Mass on states touching an upper face of the box.
    pub boundary_mass: f64,
}

/// Stationary distribution by Grassmann–Taksar–Heyman elimination on the
/// banded generator. The elimination never subtracts, so π is accurate to
/// a few ulps entrywise, including far in the tails.
pub fn stationary_distribution(cme: &TruncatedCME) -> Result<Stationary, MesoError> {
    let n = cme.len();
    if n == 0 {
        return Err(MesoError::Invalid("empty state space".into()));
    }
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (x, e) in cme.out.iter().enumerate() {
        for &(y, _) in e {
            graph.add_edge(nodes[x], nodes[y], ());
        }
    }
    let sccs = tarjan_scc(&graph);
    if sccs.len() > 1 {
        let mut sizes: Vec<usize> = sccs.iter().map(Vec::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        return Err(MesoError::Reducible { count: sccs.len(), sizes });
    }
    let w = cme
        .out
        .iter()
        .enumerate()
        .flat_map(|(x, e)| e.iter().map(move |&(y, _)| x.abs_diff(y)))
        .max()
        .unwrap_or(0);
    // band storage: a[i][w + j − i] = Q(i, j) for |i − j| ≤ w
    let width = 2 * w + 1;
    let mut a = vec![0.0; n * width];
    let at = |i: usize, j: usize| i * width + w + j - i;
    for (x, e) in cme.out.iter().enumerate() {
        for &(y, r) in e {
            a[at(x, y)] = r;
        }
    }
    let mut exit = vec![0.0; n];
    for k in (1..n).rev() {
        let lo = k.saturating_sub(w);
        let s: f64 = (lo..k).map(|j| a[at(k, j)]).sum();
        if s <= 0.0 {
            return Err(MesoError::Reducible { count: 2, sizes: vec![k, n - k] });
        }
        exit[k] = s;
        for i in lo..k {
            let qik = a[at(i, k)];
            if qik == 0.0 {
                continue;
            }
            let f = qik / s;
            for j in lo..k {
                let qkj = a[at(k, j)];
                if qkj != 0.0 && i != j {
                    a[at(i, j)] += f * qkj;
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        let lo = k.saturating_sub(w);
        let inflow: f64 = (lo..k).map(|i| pi[i] * a[at(i, k)]).sum();
        pi[k] = inflow / exit[k];
    }
    let total: f64 = pi.iter().sum();
    for v in pi.iter_mut() {
        *v /= total;
    }
    let flow = cme.apply_forward(&pi);
    let qmax = cme.max_exit_rate().max(f64::MIN_POSITIVE);
    let residual = flow.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / qmax;
    let boundary_mass = cme
        .states
        .iter()
        .zip(&pi)
        .filter(|(s, _)| s.iter().zip(&cme.hi).any(|(c, h)| c == h))
        .map(|(_, p)| p)
        .sum();
    Ok(Stationary { distribution: LatticeDistribution { p: pi }, residual, boundary_mass })
}

/// Maximum relative edge residuals of Markov-chain detailed balance.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovDbReport {
    /// Using grouped fluxes per reaction vector ξ.
    pub grouped: f64,
    /// Using each reaction separately.
    pub per_reaction: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

fn grouped_meso(groups: &[ReactionGroup], fp: &[f64], fm: &[f64]) -> (Vec<f64>, Vec<f64>) {
    crate::kinetics::group_fluxes(groups, fp, fm)
}

/// Compare π-weighted forward and backward fluxes across every lattice edge.
pub fn check_markov_db(cme: &TruncatedCME, pi: &LatticeDistribution) -> Result<MarkovDbReport, MesoError> {
    let net = &cme.network;
    if pi.p.len() != cme.len() {
        return Err(MesoError::Dimension { expected: cme.len(), got: pi.p.len() });
    }
    if pi.p.iter().any(|&v| v <= 0.0) {
        return Err(MesoError::BadDistribution("π must be positive on the box".into()));
    }
    let groups = grouped_vectors(net);
    let v = cme.volume;
    let mut rep = MarkovDbReport { grouped: 0.0, per_reaction: 0.0 };
    for (x, n) in cme.states.iter().enumerate() {
        let (fp, fm) = meso_propensity(net, n, v);
        let (gp, _) = grouped_meso(&groups, &fp, &fm);
        for (k, g) in groups.iter().enumerate() {
            if let Some(y) = cme.shifted(n, &g.xi, 1) {
                let (yp, ym) = meso_propensity(net, &cme.states[y], v);
                let (_, gym) = grouped_meso(&groups, &yp, &ym);
                rep.grouped = rep.grouped.max(rel(gp[k] * pi.p[x], gym[k] * pi.p[y]));
            }
        }
        for (j, r) in net.reactions.iter().enumerate() {
            if let Some(y) = cme.shifted(n, &r.nu(), 1) {
                let (_, ym) = meso_propensity(net, &cme.states[y], v);
                rep.per_reaction = rep.per_reaction.max(rel(fp[j] * pi.p[x], ym[j] * pi.p[y]));
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::load;

    fn poisson(lambda: f64, k: u64) -> f64 {
        (k as f64 * lambda.ln() - lambda - (1..=k).map(|i| (i as f64).ln()).sum::<f64>()).exp()
    }

    #[test]
    fn birth_death_is_tridiagonal() {
        let cme = build_cme(&load("bd"), 10.0, &[(0, 60)], None, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(cme.len(), 61);
        for (x, e) in cme.out.iter().enumerate() {
            assert!(e.iter().all(|&(y, r)| x.abs_diff(y) == 1 && r > 0.0));
        }
        assert_eq!(cme.out[0], vec![(1, 20.0)]);
        assert_eq!(cme.out[60].len(), 1);
        assert!(cme.row_sum_defect() < 1e-14 * cme.max_exit_rate());
    }

    #[test]
    fn birth_death_stationary_is_poisson() {
        let cme = build_cme(&load("bd"), 10.0, &[(0, 120)], None, DEFAULT_STATE_CAP).unwrap();
        let st = stationary_distribution(&cme).unwrap();
        let oracle: Vec<f64> = (0..=120).map(|k| poisson(20.0, k)).collect();
        let z: f64 = oracle.iter().sum();
        for (p, q) in st.distribution.p.iter().zip(&oracle) {
            assert!(((p - q / z) / (q / z)).abs() < 1e-10);
        }
        assert!(st.residual < 1e-12);
    }

    #[test]
    fn schlogl_rates_at_zero() {
        let cme = build_cme(&load("s1"), 25.0, &[(0, 75)], None, DEFAULT_STATE_CAP).unwrap();
        // only the B → X channel fires at n = 0: φ = k₂⁺·b·V
        assert_eq!(cme.out[0], vec![(1, 0.75 * 25.0)]);
    }

    #[test]
    fn isomerization_class_is_binomial() {
        let net = load("iso");
        let full = build_cme(&net, 5.0, &[(0, 10), (0, 10)], None, DEFAULT_STATE_CAP).unwrap();
        for (x, e) in full.out.iter().enumerate() {
            let s: u64 = full.states[x].iter().sum();
            assert!(e.iter().all(|&(y, _)| full.states[y].iter().sum::<u64>() == s));
        }
        assert!(matches!(stationary_distribution(&full), Err(MesoError::Reducible { .. })));
        let class = ClassFilter { weights: vec![1, 1], total: 10 };
        let cme = build_cme(&net, 5.0, &[(0, 10), (0, 10)], Some(class), DEFAULT_STATE_CAP).unwrap();
        assert_eq!(cme.len(), 11);
        let st = stationary_distribution(&cme).unwrap();
        let binom = |k: u64| (1..=10u64).map(|i| i as f64).product::<f64>()
            / ((1..=k).map(|i| i as f64).product::<f64>() * (1..=10 - k).map(|i| i as f64).product::<f64>())
            / 1024.0;
        for (s, p) in cme.states.iter().zip(&st.distribution.p) {
            assert!((p - binom(s[0])).abs() < 1e-14);
        }
    }

    #[test]
    fn markov_detailed_balance() {
        let net = load("s1");
        let cme = build_cme(&net, 25.0, &[(0, 75)], None, DEFAULT_STATE_CAP).unwrap();
        let st = stationary_distribution(&cme).unwrap();
        let rep = check_markov_db(&cme, &st.distribution).unwrap();
        assert!(rep.grouped < 1e-8, "{rep:?}");
        assert!(rep.per_reaction > 0.1);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            build_cme(&load("bd"), 10.0, &[(0, 60)], None, 10),
            Err(MesoError::CapExceeded { .. })
        ));
    }
}
