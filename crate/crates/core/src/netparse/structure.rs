//! Rate-independent structure: stoichiometry, exact kernel, complexes, deficiency.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use petgraph::unionfind::UnionFind;
use serde_json::{json, Value};

use super::network::ReactionNetwork;

pub type Rational = BigRational;

/// Reactions sharing ±ξ as net change; `sign` is σⱼ with νⱼ = σⱼ·ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionGroup {
    pub xi: Vec<i64>,
    pub members: Vec<GroupMember>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMember {
    pub reaction: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStructure {
    pub stoich: Vec<Vec<i64>>,
    pub rank_s: usize,
    pub kernel_basis: Vec<Vec<Rational>>,
    pub conservation_vector: Option<Vec<Rational>>,
    /// Distinct reactant/product vectors over internal species, in order of first appearance.
    pub complexes: Vec<Vec<u32>>,
    /// (reactant complex, product complex) per reaction.
    pub reaction_complexes: Vec<(usize, usize)>,
    pub n_c: usize,
    pub linkage_classes: usize,
    pub deficiency: i64,
    pub weakly_reversible: bool,
    pub groups: Vec<ReactionGroup>,
}

/// Row echelon form by fraction-free (Bareiss) elimination; returns the
/// echelon rows and pivot columns.
fn bareiss_echelon(rows: &[Vec<i64>], ncols: usize) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    let mut a: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
    let m = a.len();
    let mut pivots = Vec::new();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..ncols {
        if r >= m {
            break;
        }
        let Some(p) = (r..m).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        for i in r + 1..m {
            for j in c + 1..ncols {
                let v = &a[r][c] * &a[i][j] - &a[i][c] * &a[r][j];
                a[i][j] = v / &prev;
            }
            a[i][c] = BigInt::zero();
        }
        prev = a[r][c].clone();
        pivots.push(c);
        r += 1;
    }
    a.truncate(r);
    (a, pivots)
}

/// Scale a rational vector to the primitive integer vector with the same direction.
fn primitive(v: &[Rational]) -> Vec<Rational> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Rational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return v.to_vec();
    }
    ints.into_iter().map(|x| Rational::from_integer(x / &g)).collect()
}

/// Exact rank and kernel basis of the M×N matrix `stoich` (vectors m with ν·m = 0).
pub fn rational_kernel(stoich: &[Vec<i64>], n: usize) -> (usize, Vec<Vec<Rational>>) {
    let (ech, pivots) = bareiss_echelon(stoich, n);
    let rank = pivots.len();
    // back-substitute to reduced form over the rationals
    let mut red: Vec<Vec<Rational>> =
        ech.iter().map(|row| row.iter().map(|v| Rational::from_integer(v.clone())).collect()).collect();
    for (i, &pc) in pivots.iter().enumerate().rev() {
        let piv = red[i][pc].clone();
        for v in red[i].iter_mut() {
            *v = &*v / &piv;
        }
        for k in 0..i {
            let f = red[k][pc].clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..n {
                let d = &f * &red[i][j];
                red[k][j] -= d;
            }
        }
    }
    let mut basis = Vec::new();
    for free in (0..n).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Rational::zero(); n];
        v[free] = Rational::one();
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = -red[i][free].clone();
        }
        basis.push(primitive(&v));
    }
    (rank, basis)
}

/// Exact phase-one simplex for B·λ ≥ 1 with λ free; returns a feasible λ.
fn positive_combination(basis: &[Vec<Rational>], n: usize) -> Option<Vec<Rational>> {
    let k = basis.len();
    if k == 0 {
        return None;
    }
    // columns: λ⁺ (k), λ⁻ (k), surplus (n), artificial (n), rhs
    let ncol = 2 * k + 2 * n;
    let mut t: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let mut row = vec![Rational::zero(); ncol + 1];
            for c in 0..k {
                row[c] = basis[c][i].clone();
                row[k + c] = -basis[c][i].clone();
            }
            row[2 * k + i] = -Rational::one();
            row[2 * k + n + i] = Rational::one();
            row[ncol] = Rational::one();
            row
        })
        .collect();
    let mut basic: Vec<usize> = (0..n).map(|i| 2 * k + n + i).collect();
    let cost = |j: usize| if j >= 2 * k + n { Rational::one() } else { Rational::zero() };
    loop {
        // reduced costs c_j − c_B·B⁻¹a_j; Bland's rule picks the lowest index
        let entering = (0..ncol).find(|&j| {
            let mut rc = cost(j);
            for (i, &b) in basic.iter().enumerate() {
                rc -= cost(b) * &t[i][j];
            }
            rc.is_negative()
        });
        let Some(e) = entering else { break };
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..n {
            if t[i][e].is_positive() {
                let ratio = &t[i][ncol] / &t[i][e];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basic[i] < basic[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // phase one is bounded below by zero
        let (r, _) = leave?;
        let piv = t[r][e].clone();
        for v in t[r].iter_mut() {
            *v = &*v / &piv;
        }
        for i in 0..n {
            if i != r && !t[i][e].is_zero() {
                let f = t[i][e].clone();
                for j in 0..=ncol {
                    let d = &f * &t[r][j];
                    t[i][j] -= d;
                }
            }
        }
        basic[r] = e;
    }
    let mut x = vec![Rational::zero(); ncol];
    for (i, &b) in basic.iter().enumerate() {
        x[b] = t[i][ncol].clone();
    }
    if x[2 * k + n..].iter().any(|a| !a.is_zero()) {
        return None;
    }
    Some((0..k).map(|c| &x[c] - &x[k + c]).collect())
}

/// A strictly positive vector in ker(ν), scaled to primitive integers, if any exists.
pub fn positive_conservation(basis: &[Vec<Rational>], n: usize) -> Option<Vec<Rational>> {
    let lambda = positive_combination(basis, n)?;
    let m: Vec<Rational> = (0..n)
        .map(|i| basis.iter().zip(&lambda).fold(Rational::zero(), |acc, (b, l)| acc + &b[i] * l))
        .collect();
    if m.iter().all(|v| v.is_positive()) {
        Some(primitive(&m))
    } else {
        None
    }
}

/// Canonical orientation of a reaction vector: of ±ξ, the one whose last
/// nonzero entry is positive.
pub fn canonical_orientation(nu: &[i64]) -> (Vec<i64>, i8) {
    match nu.iter().rev().find(|&&v| v != 0) {
        Some(&v) if v < 0 => (nu.iter().map(|x| -x).collect(), -1),
        _ => (nu.to_vec(), 1),
    }
}

/// Partition reactions by net change up to sign, groups ordered by first member.
pub fn grouped_vectors(net: &ReactionNetwork) -> Vec<ReactionGroup> {
    let mut groups: Vec<ReactionGroup> = Vec::new();
    for (j, r) in net.reactions.iter().enumerate() {
        let (xi, sign) = canonical_orientation(&r.nu());
        let member = GroupMember { reaction: j, sign };
        match groups.iter_mut().find(|g| g.xi == xi) {
            Some(g) => g.members.push(member),
            None => groups.push(ReactionGroup { xi, members: vec![member] }),
        }
    }
    groups
}

/// All structural invariants of the internal-species network.
pub fn structure(net: &ReactionNetwork) -> NetworkStructure {
    let n = net.n_species();
    let stoich: Vec<Vec<i64>> = net.reactions.iter().map(|r| r.nu()).collect();
    let (rank_s, kernel_basis) = rational_kernel(&stoich, n);
    let conservation_vector = positive_conservation(&kernel_basis, n);

    let mut complexes: Vec<Vec<u32>> = Vec::new();
    let mut intern = |c: &Vec<u32>| -> usize {
        if let Some(i) = complexes.iter().position(|x| x == c) {
            i
        } else {
            complexes.push(c.clone());
            complexes.len() - 1
        }
    };
    let reaction_complexes: Vec<(usize, usize)> =
        net.reactions.iter().map(|r| (intern(&r.nu_plus), intern(&r.nu_minus))).collect();
    let n_c = complexes.len();

    let mut uf = UnionFind::<usize>::new(n_c);
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n_c).map(|_| graph.add_node(())).collect();
    for (r, &(a, b)) in net.reactions.iter().zip(&reaction_complexes) {
        uf.union(a, b);
        if r.k_plus > 0.0 {
            graph.add_edge(nodes[a], nodes[b], ());
        }
        if r.k_minus > 0.0 {
            graph.add_edge(nodes[b], nodes[a], ());
        }
    }
    let mut roots: Vec<usize> = (0..n_c).map(|i| uf.find(i)).collect();
    roots.sort_unstable();
    roots.dedup();
    let linkage_classes = roots.len();
    let weakly_reversible = tarjan_scc(&graph).len() == linkage_classes;
    let deficiency = n_c as i64 - linkage_classes as i64 - rank_s as i64;

    NetworkStructure {
        stoich,
        rank_s,
        kernel_basis,
        conservation_vector,
        complexes,
        reaction_complexes,
        n_c,
        linkage_classes,
        deficiency,
        weakly_reversible,
        groups: grouped_vectors(net),
    }
}

fn complex_label(net: &ReactionNetwork, c: &[u32]) -> String {
    let terms: Vec<String> = c
        .iter()
        .zip(&net.species)
        .filter(|(&m, _)| m > 0)
        .map(|(&m, s)| if m == 1 { s.clone() } else { format!("{m} {s}") })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

impl NetworkStructure {
    pub fn kernel_f64(&self) -> Vec<Vec<f64>> {
        self.kernel_basis.iter().map(|v| v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()).collect()
    }

    pub fn conservation_f64(&self) -> Option<Vec<f64>> {
        self.conservation_vector.as_ref().map(|v| v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
    }

    /// Structure report with fixed key names.
    pub fn to_json(&self, net: &ReactionNetwork) -> Value {
        let rat = |v: &Vec<Rational>| -> Vec<String> { v.iter().map(|x| x.to_string()).collect() };
        json!({
            "network": net.name,
            "species": net.species,
            "stoich": self.stoich,
            "rank": self.rank_s,
            "kernel": self.kernel_basis.iter().map(rat).collect::<Vec<_>>(),
            "conservation": self.conservation_vector.as_ref().map(rat),
            "complexes": self.complexes.iter().map(|c| complex_label(net, c)).collect::<Vec<_>>(),
            "n_c": self.n_c,
            "linkage": self.linkage_classes,
            "deficiency": self.deficiency,
            "weakly_reversible": self.weakly_reversible,
            "groups": self.groups.iter().map(|g| json!({
                "xi": g.xi,
                "members": g.members.iter().map(|m| json!({
                    "reaction": net.reactions[m.reaction].label,
                    "sign": m.sign,
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}
