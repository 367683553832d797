use std::collections::HashSet;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scaffgen::chem::{
    canonical_code, check_validity, extract_scaffold, is_supergraph, parse_smiles,
    scaffold_with_map, write_smiles, Atom, BondOrder, Element, MolGraph,
};
use scaffgen::decoder::replay;
use scaffgen::nets::{Model, ModelConfig, PropertyStat};
use scaffgen::nn::Tape;
use scaffgen::props::{evaluate, molecular_weight, EvalOptions};
use scaffgen::training::{make_pairs, pair_loss, PairDataset};

const TRAIN_SMI: &str = include_str!("../data/train.smi");

fn corpus() -> &'static Vec<MolGraph> {
    static C: OnceLock<Vec<MolGraph>> = OnceLock::new();
    C.get_or_init(|| {
        TRAIN_SMI
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| parse_smiles(l.trim()).unwrap())
            .collect()
    })
}

fn pairs() -> &'static PairDataset {
    static P: OnceLock<PairDataset> = OnceLock::new();
    P.get_or_init(|| make_pairs(&corpus()[..300], &["mw".to_string()]).unwrap())
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

fn disjoint_union(a: &MolGraph, b: &MolGraph) -> MolGraph {
    let mut g = a.clone();
    let off = a.num_atoms();
    for atom in b.atoms() {
        g.add_atom(atom.clone());
    }
    for bond in b.bonds() {
        g.add_bond(bond.u + off, bond.v + off, bond.order).unwrap();
    }
    g
}

#[test]
fn corpus_scaffolds_are_idempotent_and_contained() {
    for g in corpus() {
        let (s, map) = scaffold_with_map(g);
        if s.is_empty() {
            continue;
        }
        assert_eq!(
            canonical_code(&extract_scaffold(&s)),
            canonical_code(&s),
            "{}",
            write_smiles(g)
        );
        let mut embedding = vec![usize::MAX; s.num_atoms()];
        for (a, m) in map.iter().enumerate() {
            if let Some(k) = m {
                embedding[*k] = a;
            }
        }
        assert!(
            is_supergraph(g, &s, &embedding).unwrap(),
            "{}",
            write_smiles(g)
        );
    }
}

#[test]
fn corpus_pairs_replay_exactly() {
    let d = pairs();
    assert_eq!(d.dropped_unreplayable, 0);
    for p in &d.pairs {
        assert!(!p.scaffold.is_empty());
        let g = replay(&p.scaffold, &p.actions).expect("actions apply");
        assert_eq!(
            canonical_code(&g),
            canonical_code(&scaffgen::decoder::strip_stereo(&p.molecule))
        );
    }
    let unique: HashSet<_> = d
        .pairs
        .iter()
        .map(|p| (canonical_code(&p.scaffold), canonical_code(&p.molecule)))
        .collect();
    assert_eq!(unique.len(), d.len());
}

/// Independent validity oracle: nonempty, connected by flood fill, and every
/// atom within the maximum valence of its element.
fn oracle_valid(n: usize, elements: &[Element], bonds: &[(usize, usize, u32)]) -> bool {
    if n == 0 {
        return false;
    }
    let mut sum = vec![0u32; n];
    let mut adj = vec![Vec::new(); n];
    for &(u, v, o) in bonds {
        sum[u] += o;
        sum[v] += o;
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for &b in &adj[a] {
            if !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    let max = |e: Element| match e {
        Element::C => 4,
        Element::N => 3,
        Element::O => 2,
        Element::F | Element::Cl | Element::Br => 1,
        Element::P => 5,
        Element::S => 6,
    };
    seen.iter().all(|&s| s) && (0..n).all(|a| sum[a] <= max(elements[a]))
}

fn check_all(n: usize, elements: &[Element], pairs: &[(usize, usize)]) {
    let orders = [BondOrder::Single, BondOrder::Double, BondOrder::Triple];
    for mask in 0..4usize.pow(pairs.len() as u32) {
        let mut g = MolGraph::new();
        for &e in elements {
            g.add_atom(Atom::new(e));
        }
        let mut bonds = Vec::new();
        let mut m = mask;
        for &(u, v) in pairs {
            let k = m % 4;
            m /= 4;
            if k > 0 {
                g.add_bond(u, v, orders[k - 1]).unwrap();
                bonds.push((u, v, k as u32));
            }
        }
        assert_eq!(
            check_validity(&g),
            oracle_valid(n, elements, &bonds),
            "{elements:?} {bonds:?}"
        );
    }
}

#[test]
fn validity_matches_oracle_on_small_graphs() {
    let all: Vec<Element> = (0..8).map(|i| Element::from_index(i).unwrap()).collect();
    assert!(!check_validity(&MolGraph::new()));
    for n in 1..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        // Element tuples up to n = 3 are exhaustive; larger graphs use
        // per-size samples over every bond assignment.
        let tuples: Vec<Vec<Element>> = if n <= 3 {
            (0..8usize.pow(n as u32))
                .map(|mut k| {
                    (0..n)
                        .map(|_| {
                            let e = all[k % 8];
                            k /= 8;
                            e
                        })
                        .collect()
                })
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let count = if n == 4 { 64 } else { 2 };
            (0..count)
                .map(|_| (0..n).map(|_| *all.choose(&mut rng).unwrap()).collect())
                .collect()
        };
        for els in &tuples {
            check_all(n, els, &pairs);
        }
    }
}

fn small_model(seed: u64) -> (Model, scaffgen::nn::ParameterStore) {
    let cfg = ModelConfig {
        hidden_dim: 8,
        latent_dim: 4,
        k_init: 3,
        k_build: 2,
    };
    let stats = vec![PropertyStat {
        name: "mw".into(),
        mean: 250.0,
        std: 50.0,
    }];
    Model::new(&cfg, stats, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn canonical_code_ignores_atom_order(i in 0usize..3000, seed in any::<u64>()) {
        let g = &corpus()[i % corpus().len()];
        let p = g.permuted(&shuffled(g.num_atoms(), seed));
        prop_assert_eq!(canonical_code(&p), canonical_code(g));
    }

    #[test]
    fn smiles_round_trip_preserves_code(i in 0usize..3000) {
        let g = &corpus()[i % corpus().len()];
        prop_assert_eq!(canonical_code(&parse_smiles(&write_smiles(g)).unwrap()), canonical_code(g));
    }

    #[test]
    fn molecular_weight_is_additive_and_order_free(i in 0usize..3000, j in 0usize..3000, seed in any::<u64>()) {
        let (a, b) = (&corpus()[i % corpus().len()], &corpus()[j % corpus().len()]);
        let u = disjoint_union(a, b);
        prop_assert!((molecular_weight(&u) - molecular_weight(a) - molecular_weight(b)).abs() < 1e-9);
        let p = a.permuted(&shuffled(a.num_atoms(), seed));
        prop_assert!((molecular_weight(&p) - molecular_weight(a)).abs() < 1e-9);
    }

    #[test]
    fn encoder_is_permutation_invariant(i in 0usize..3000, seed in any::<u64>()) {
        let (m, s) = small_model(3);
        let g = &corpus()[i % corpus().len()];
        let p = g.permuted(&shuffled(g.num_atoms(), seed));
        let mut tape = Tape::new(&s);
        let yt = m.ytilde(&mut tape, &[300.0], &[100.0]).unwrap();
        let (mu_g, sg_g) = m.encode_params(&mut tape, g, yt).unwrap();
        let (mu_p, sg_p) = m.encode_params(&mut tape, &p, yt).unwrap();
        for (a, b) in [(mu_g, mu_p), (sg_g, sg_p)] {
            let d = (&tape.value(a) - &tape.value(b)).mapv(f64::abs).fold(0.0f64, |x, &y| x.max(y));
            prop_assert!(d < 1e-9, "max deviation {}", d);
        }
    }

    #[test]
    fn loss_components_are_nonnegative(i in 0usize..1000, seed in any::<u64>(), beta in 0.0f64..2.0) {
        let d = pairs();
        let pair = &d.pairs[i % d.len()];
        let (m, s) = small_model(seed % 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut tape = Tape::new(&s);
        let l = pair_loss(&m, &mut tape, pair, &eps, beta).unwrap();
        let b = l.breakdown;
        prop_assert!(b.build >= 0.0 && b.isomer >= 0.0 && b.kl >= 0.0 && b.total >= 0.0);
        prop_assert_eq!(l.trace.steps.len(), pair.actions.len());
    }

    #[test]
    fn metric_ratios_lie_in_unit_interval(picks in proptest::collection::vec(0usize..200, 0..40), known in 0usize..60) {
        let gen: Vec<MolGraph> = picks.iter().map(|&k| corpus()[k].clone()).collect();
        let train: HashSet<_> = corpus()[..known].iter().map(canonical_code).collect();
        let r = evaluate(&gen, &train, &[], &[], EvalOptions::default()).unwrap();
        for v in [r.validity(), r.uniqueness(), r.novelty()].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(r.unique <= r.valid && r.novel <= r.unique && r.valid <= r.generated);
        let none = evaluate(&gen, &HashSet::new(), &[], &[], EvalOptions::default()).unwrap();
        if none.unique > 0 {
            prop_assert_eq!(none.novelty(), Some(1.0));
        }
    }
}
