use crn_core::decomp::conservative_dissipative;
use crn_core::fixtures::{load, ALL};
use crn_core::hamjac::{hamiltonian, lagrangian};
use crn_core::mesoscale::{build_cme, evolve_cme, LatticeDistribution, DEFAULT_STATE_CAP};
use crn_core::netparse::{grouped_vectors, parse_network, structure};
use crn_core::numerics::dot;
use crn_core::numerics::linalg::sym_eigenvalues;
use proptest::prelude::*;

/// Side of a reaction as per-species coefficients.
fn side(names: &[String], coeffs: &[u32]) -> String {
    let terms: Vec<String> = names
        .iter()
        .zip(coeffs)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| if c == 1 { s.clone() } else { format!("{c} {s}") })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

prop_compose! {
    /// Reversible mass-action networks with 1–3 species and 1–4 reactions.
    fn network_text()(n in 1usize..=3)(
        n in Just(n),
        rxns in prop::collection::vec(
            (prop::collection::vec(0u32..=2, n), prop::collection::vec(0u32..=2, n), 0.1f64..5.0, 0.1f64..5.0)
                .prop_filter("net change", |(a, b, _, _)| a != b),
            1..=4,
        ),
    ) -> String {
        let names: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();
        let mut text = format!("network random\nspecies {}\n", names.join(", "));
        for (j, (lhs, rhs, kp, km)) in rxns.iter().enumerate() {
            text.push_str(&format!(
                "reaction r{j}: {} <=> {} ; kplus = {kp:?}, kminus = {km:?}\n",
                side(&names, lhs),
                side(&names, rhs)
            ));
        }
        text
    }
}

fn state(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..3.0, n)
}

fn momentum(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn fixture_and_point() -> impl Strategy<Value = (&'static str, Vec<f64>, Vec<f64>)> {
    prop::sample::select(ALL.to_vec()).prop_flat_map(|name| {
        let n = load(name).n_species();
        (Just(name), state(n), momentum(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printing_round_trips(text in network_text()) {
        let net = parse_network(&text).unwrap();
        let printed = net.to_string();
        let again = parse_network(&printed).unwrap();
        prop_assert_eq!(&again, &net);
        prop_assert_eq!(again.to_string(), printed);
    }

    #[test]
    fn structural_invariants(text in network_text()) {
        let net = parse_network(&text).unwrap();
        let st = structure(&net);
        let n = net.n_species();
        prop_assert_eq!(st.kernel_basis.len() + st.rank_s, n);
        prop_assert!(st.deficiency >= 0);
        prop_assert!(st.weakly_reversible);
        for k in st.kernel_f64() {
            for nu in net.stoich_f64() {
                prop_assert!(dot(&nu, &k).abs() < 1e-9);
            }
        }
        if let Some(m) = st.conservation_f64() {
            prop_assert!(m.iter().all(|&v| v > 0.0));
            for nu in net.stoich_f64() {
                prop_assert!(dot(&nu, &m).abs() < 1e-9);
            }
        }
        // every reaction sits in exactly one group, as ± its reaction vector
        let groups = grouped_vectors(&net);
        let mut seen = vec![0; net.n_reactions()];
        for g in &groups {
            for m in &g.members {
                seen[m.reaction] += 1;
                let nu = net.reactions[m.reaction].nu();
                let signed: Vec<i64> = g.xi.iter().map(|&v| v * m.sign as i64).collect();
                prop_assert_eq!(nu, signed);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn hamiltonian_derivatives_match_differences((name, x, p) in fixture_and_point()) {
        let net = load(name);
        let e = hamiltonian(&net, &p, &x).unwrap();
        let h = 1e-6;
        for i in 0..x.len() {
            let mut up = p.clone();
            let mut dn = p.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (hamiltonian(&net, &up, &x).unwrap().value - hamiltonian(&net, &dn, &x).unwrap().value) / (2.0 * h);
            prop_assert!((fd - e.grad_p[i]).abs() <= 1e-6 * (1.0 + e.grad_p[i].abs()));
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (hamiltonian(&net, &p, &up).unwrap().value - hamiltonian(&net, &p, &dn).unwrap().value) / (2.0 * h);
            prop_assert!((fd - e.grad_x[i]).abs() <= 1e-6 * (1.0 + e.grad_x[i].abs()));
        }
    }

    #[test]
    fn legendre_dual_is_nonnegative_and_tight((name, x, p) in fixture_and_point(), q in momentum(2)) {
        let net = load(name);
        // velocities generated by some momentum lie in the stoichiometric span
        let s = hamiltonian(&net, &p, &x).unwrap().grad_p;
        let l = lagrangian(&net, &s, &x, 1e-12).unwrap();
        prop_assert!(l.converged);
        prop_assert!(l.value >= -1e-12);
        let hp = hamiltonian(&net, &p, &x).unwrap().value;
        let exact = dot(&s, &p) - hp;
        prop_assert!((l.value - exact).abs() <= 1e-8 * (1.0 + exact.abs()));
        // Young: L(s) + H(q) ≥ s·q for any other q
        let q = &q[..x.len()];
        let hq = hamiltonian(&net, q, &x).unwrap().value;
        prop_assert!(l.value + hq >= dot(&s, q) - 1e-9 * (1.0 + hq.abs()));
    }

    #[test]
    fn onsager_operator_is_psd((name, x, p) in fixture_and_point()) {
        let net = load(name);
        let grad: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let d = conservative_dissipative(&net, &x, &grad, 32).unwrap();
        let scale = 1.0 + d.k.amax();
        prop_assert!(sym_eigenvalues(&d.k).iter().all(|&ev| ev >= -1e-12 * scale));
        prop_assert!((&d.k - d.k.transpose()).amax() <= 1e-14 * scale);
        prop_assert!(d.reconstruction_residual <= 1e-10 * scale);
    }

    #[test]
    fn equilibrium_schlogl_symmetry(x in 0.1f64..4.0, p in -2.0f64..2.0) {
        let net = load("s0");
        let q = x.ln() - p;
        let a = hamiltonian(&net, &[p], &[x]).unwrap().value;
        let b = hamiltonian(&net, &[q], &[x]).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs() + b.abs()));
    }

    #[test]
    fn master_equation_conserves_mass(volume in 3.0f64..15.0, top in 10u64..40, weights in prop::collection::vec(0.0f64..1.0, 40)) {
        let net = load("s1");
        let cme = build_cme(&net, volume, &[(0, top)], None, DEFAULT_STATE_CAP).unwrap();
        let raw: Vec<f64> = weights[..cme.len()].iter().map(|w| w + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let p = LatticeDistribution::new(raw.iter().map(|w| w / total).collect()).unwrap();
        let flow = cme.apply_forward(&p.p);
        prop_assert!(flow.iter().sum::<f64>().abs() <= 1e-12 * cme.max_exit_rate());
        prop_assert!(cme.row_sum_defect() <= 1e-12 * cme.max_exit_rate());
        let later = evolve_cme(&cme, &p, 0.5, 1e-14).unwrap();
        prop_assert!((later.p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(later.p.iter().all(|&v| v >= 0.0));
    }
}
