//! Ring membership, small-cycle enumeration and a simple aromaticity model.
//!
//! Aromaticity is perceived on kekulized graphs with a Hückel electron count
//! over single rings, pairs of fused rings, and whole fused ring systems. It
//! is only used as a perception layer (feature flags and canonical codes); the
//! graph itself always keeps explicit single/double bonds.

use super::element::{BondOrder, Element};
use super::graph::MolGraph;

/// Largest ring size enumerated for aromaticity.
const MAX_AROMATIC_RING: usize = 7;
/// Cycle budget for perception; pathological dense graphs stop early.
const MAX_AROMATIC_CYCLES: usize = 128;

/// Per-bond flag: true when the bond lies on a cycle (is not a bridge).
pub fn ring_bonds(g: &MolGraph) -> Vec<bool> {
    let n = g.num_atoms();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; g.num_bonds()];
    let mut timer = 0usize;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // Iterative DFS: (atom, bond used to enter, next neighbor cursor).
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (a, via, ref mut cursor)) = stack.last_mut() {
            if let Some(&(b, bond)) = g.neighbors(a).get(*cursor) {
                *cursor += 1;
                if bond == via {
                    continue;
                }
                if disc[b] == usize::MAX {
                    disc[b] = timer;
                    low[b] = timer;
                    timer += 1;
                    stack.push((b, bond, 0));
                } else {
                    low[a] = low[a].min(disc[b]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[a]);
                    if low[a] > disc[parent] {
                        is_bridge[via] = true;
                    }
                }
            }
        }
    }
    is_bridge.iter().map(|&b| !b).collect()
}

/// Per-atom flag: true when the atom is incident to a ring bond.
pub fn ring_atoms(g: &MolGraph) -> Vec<bool> {
    let rb = ring_bonds(g);
    let mut out = vec![false; g.num_atoms()];
    for (i, b) in g.bonds().iter().enumerate() {
        if rb[i] {
            out[b.u] = true;
            out[b.v] = true;
        }
    }
    out
}

/// Cyclomatic number |E| - |V| + components.
pub fn ring_count(g: &MolGraph) -> usize {
    (g.num_bonds() + g.num_components()).saturating_sub(g.num_atoms())
}

/// All simple cycles of at most `max_len` atoms, each as an atom list starting
/// at its smallest index. Each cycle appears once.
pub fn simple_cycles(g: &MolGraph, max_len: usize) -> Vec<Vec<usize>> {
    simple_cycles_capped(g, max_len, usize::MAX)
}

/// As [`simple_cycles`], stopping once `cap` cycles were found.
pub fn simple_cycles_capped(g: &MolGraph, max_len: usize, cap: usize) -> Vec<Vec<usize>> {
    let rb = ring_bonds(g);
    let mut cycles = Vec::new();
    let mut path = Vec::new();
    let mut on_path = vec![false; g.num_atoms()];
    for start in 0..g.num_atoms() {
        path.clear();
        path.push(start);
        on_path[start] = true;
        extend_cycles(
            g,
            &rb,
            start,
            max_len,
            cap,
            &mut path,
            &mut on_path,
            &mut cycles,
        );
        on_path[start] = false;
        if cycles.len() >= cap {
            break;
        }
    }
    cycles
}

#[allow(clippy::too_many_arguments)]
fn extend_cycles(
    g: &MolGraph,
    rb: &[bool],
    start: usize,
    max_len: usize,
    cap: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    let last = *path.last().expect("nonempty path");
    for &(next, bond) in g.neighbors(last) {
        if out.len() >= cap {
            return;
        }
        if !rb[bond] {
            continue;
        }
        if next == start && path.len() >= 3 {
            // Keep one of the two traversal directions.
            if path[1] < path[path.len() - 1] {
                out.push(path.clone());
            }
            continue;
        }
        if next <= start || on_path[next] || path.len() >= max_len {
            continue;
        }
        path.push(next);
        on_path[next] = true;
        extend_cycles(g, rb, start, max_len, cap, path, on_path, out);
        on_path[next] = false;
        path.pop();
    }
}

/// Aromatic atom and bond flags under the Hückel model described above.
pub fn perceive_aromaticity(g: &MolGraph) -> (Vec<bool>, Vec<bool>) {
    let n = g.num_atoms();
    let mut atom_flags = vec![false; n];
    let mut bond_flags = vec![false; g.num_bonds()];
    let mut cycles = simple_cycles_capped(g, MAX_AROMATIC_RING, MAX_AROMATIC_CYCLES);
    let eligible: Vec<bool> = (0..n).map(|a| may_be_aromatic(g, a)).collect();
    cycles.retain(|c| c.iter().all(|&a| eligible[a]));
    if cycles.is_empty() {
        return (atom_flags, bond_flags);
    }
    let as_mask = |atoms: &[usize]| {
        let mut m = vec![false; n];
        for &a in atoms {
            m[a] = true;
        }
        m
    };
    let mut candidates: Vec<Vec<bool>> = cycles.iter().map(|c| as_mask(c)).collect();
    let cycle_bonds: Vec<Vec<usize>> = cycles
        .iter()
        .map(|c| {
            let mut b: Vec<usize> = (0..c.len())
                .filter_map(|i| g.bond_between(c[i], c[(i + 1) % c.len()]))
                .collect();
            b.sort_unstable();
            b
        })
        .collect();
    let singles = candidates.len();
    let mut fused = Vec::new();
    for i in 0..singles {
        for j in i + 1..singles {
            if cycle_bonds[i]
                .iter()
                .any(|b| cycle_bonds[j].binary_search(b).is_ok())
            {
                fused.push((i, j));
            }
        }
    }
    for &(i, j) in &fused {
        let union: Vec<bool> = (0..n)
            .map(|a| candidates[i][a] || candidates[j][a])
            .collect();
        candidates.push(union);
    }
    // Whole fused systems: connected components of the "shares a bond" relation.
    let mut system = (0..singles).collect::<Vec<_>>();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(i, j) in &fused {
        let (a, b) = (find(&mut system, i), find(&mut system, j));
        system[a] = b;
    }
    let mut roots: Vec<usize> = (0..singles).map(|i| find(&mut system, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    for r in roots {
        let mut m = vec![false; n];
        for i in 0..singles {
            if find(&mut system, i) == r {
                for a in 0..n {
                    m[a] |= candidates[i][a];
                }
            }
        }
        candidates.push(m);
    }

    let aromatic: Vec<&Vec<bool>> = candidates
        .iter()
        .filter(|c| huckel_aromatic(g, c))
        .collect();
    for cand in &aromatic {
        for a in 0..n {
            atom_flags[a] |= cand[a];
        }
    }
    for (i, b) in g.bonds().iter().enumerate() {
        bond_flags[i] = aromatic.iter().any(|c| c[b.u] && c[b.v]);
    }
    (atom_flags, bond_flags)
}

/// Sets each atom's `aromatic` flag from perception.
pub fn apply_aromatic_flags(g: &mut MolGraph) {
    let (atoms, _) = perceive_aromaticity(g);
    for (i, f) in atoms.into_iter().enumerate() {
        g.atom_mut(i).aromatic = f;
    }
}

fn huckel_aromatic(g: &MolGraph, members: &[bool]) -> bool {
    let mut electrons = 0u32;
    for a in 0..g.num_atoms() {
        if !members[a] {
            continue;
        }
        match pi_electrons(g, a, members) {
            Some(e) => electrons += e,
            None => return false,
        }
    }
    electrons >= 2 && electrons % 4 == 2
}

/// False when `a` cannot belong to any aromatic ring, whatever the ring.
fn may_be_aromatic(g: &MolGraph, a: usize) -> bool {
    let orders = || g.neighbors(a).iter().map(|&(_, bond)| g.bond(bond).order);
    if orders().any(|o| o == BondOrder::Triple) {
        return false;
    }
    orders().any(|o| o == BondOrder::Double) || pi_electrons(g, a, &[]).is_some()
}

fn pi_electrons(g: &MolGraph, a: usize, members: &[bool]) -> Option<u32> {
    let atom = g.atom(a);
    let mut inner_double = 0;
    let mut outer_double = None;
    for &(b, bond) in g.neighbors(a) {
        match g.bond(bond).order {
            BondOrder::Triple => return None,
            BondOrder::Double if members[b] => inner_double += 1,
            BondOrder::Double => outer_double = Some(b),
            BondOrder::Single => {}
        }
    }
    if inner_double > 1 {
        return None;
    }
    if inner_double == 1 {
        return Some(1);
    }
    if let Some(partner) = outer_double {
        // Exocyclic C=O / C=N / C=S leaves an empty p orbital in the ring.
        return match g.atom(partner).element {
            Element::O | Element::N | Element::S => Some(0),
            _ => None,
        };
    }
    let valence_used = g.bond_order_sum(a) + u32::from(atom.hydrogens);
    match (atom.element, atom.charge) {
        (Element::N | Element::P, 0) if valence_used == 3 => Some(2),
        (Element::O | Element::S, 0) if valence_used == 2 => Some(2),
        (Element::C, -1) => Some(2),
        _ => None,
    }
}
