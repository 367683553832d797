//! Bemis–Murcko scaffolds.

use super::element::BondOrder;
use super::graph::MolGraph;
use super::rings::{apply_aromatic_flags, ring_atoms};

/// Scaffold of `g`: ring systems plus the linkers between them. Terminal
/// non-ring atoms are pruned until none remain, except atoms held to a ring
/// atom by a double bond. Acyclic molecules give the empty graph.
pub fn extract_scaffold(g: &MolGraph) -> MolGraph {
    scaffold_with_map(g).0
}

/// As [`extract_scaffold`], also returning the map from atoms of `g` to
/// scaffold atoms (`None` for pruned atoms).
pub fn scaffold_with_map(g: &MolGraph) -> (MolGraph, Vec<Option<usize>>) {
    let n = g.num_atoms();
    let in_ring = ring_atoms(g);
    let mut keep = vec![true; n];
    loop {
        let mut changed = false;
        for a in 0..n {
            if !keep[a] || in_ring[a] {
                continue;
            }
            let live: Vec<(usize, usize)> = g
                .neighbors(a)
                .iter()
                .copied()
                .filter(|&(b, _)| keep[b])
                .collect();
            let prune = match live.as_slice() {
                [] => true,
                [(b, bond)] => !(in_ring[*b] && g.bond(*bond).order == BondOrder::Double),
                _ => false,
            };
            if prune {
                keep[a] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let (mut s, map) = g.induced_subgraph(&keep);
    for (old, new) in map.iter().enumerate() {
        if let Some(j) = *new {
            if g.neighbors(old).iter().any(|&(b, _)| !keep[b]) {
                s.atom_mut(j).hydrogens = s.default_hydrogens(j);
            }
        }
    }
    apply_aromatic_flags(&mut s);
    (s, map)
}
