//! Hydrogen-suppressed molecular graph.
//!
//! Stereo annotations are stored relative to atom indices:
//! * [`Parity`] of a tetrahedral atom is the SMILES `@`/`@@` sense taken over
//!   its neighbors in ascending index order, with an implicit hydrogen last.
//! * [`DoubleBondConfig`] relates the lowest-indexed heavy substituent of each
//!   double-bond endpoint.
//!
//! Index-free labels (R/S, cis/trans relative to canonical ranks) are derived
//! from these by [`crate::chem::stereo::perceive`].

use std::collections::VecDeque;

use thiserror::Error;

use super::element::{BondOrder, Element};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("atom index {0} out of range")]
    AtomOutOfRange(usize),
    #[error("self-loop on atom {0}")]
    SelfLoop(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
}

/// Tetrahedral sense relative to the index-ordered neighbor list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Parity {
    #[default]
    None,
    /// `@`: looking from the first neighbor, the rest run counter-clockwise.
    Ccw,
    /// `@@`
    Cw,
}

impl Parity {
    pub fn flipped(self) -> Parity {
        match self {
            Parity::None => Parity::None,
            Parity::Ccw => Parity::Cw,
            Parity::Cw => Parity::Ccw,
        }
    }

    /// Flip when `odd` is set.
    pub fn flip_if(self, odd: bool) -> Parity {
        if odd {
            self.flipped()
        } else {
            self
        }
    }
}

/// Double-bond geometry relative to the reference substituents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DoubleBondConfig {
    #[default]
    None,
    Cis,
    Trans,
}

impl DoubleBondConfig {
    pub fn flipped(self) -> DoubleBondConfig {
        match self {
            DoubleBondConfig::None => DoubleBondConfig::None,
            DoubleBondConfig::Cis => DoubleBondConfig::Trans,
            DoubleBondConfig::Trans => DoubleBondConfig::Cis,
        }
    }

    pub fn flip_if(self, odd: bool) -> DoubleBondConfig {
        if odd {
            self.flipped()
        } else {
            self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    /// Implicit hydrogen count.
    pub hydrogens: u8,
    pub aromatic: bool,
    pub parity: Parity,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            charge: 0,
            hydrogens: 0,
            aromatic: false,
            parity: Parity::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub u: usize,
    pub v: usize,
    pub order: BondOrder,
    pub config: DoubleBondConfig,
}

impl Bond {
    pub fn other(&self, a: usize) -> usize {
        if self.u == a {
            self.v
        } else {
            self.u
        }
    }
}

/// Undirected simple graph of heavy atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Per atom: (neighbor, bond index), in bond insertion order.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn atom_mut(&mut self, i: usize) -> &mut Atom {
        &mut self.atoms[i]
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub fn bond_mut(&mut self, i: usize) -> &mut Bond {
        &mut self.bonds[i]
    }

    pub fn neighbors(&self, a: usize) -> &[(usize, usize)] {
        &self.adjacency[a]
    }

    pub fn degree(&self, a: usize) -> usize {
        self.adjacency[a].len()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, u: usize, v: usize, order: BondOrder) -> Result<usize, GraphError> {
        for x in [u, v] {
            if x >= self.atoms.len() {
                return Err(GraphError::AtomOutOfRange(x));
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if self.bond_between(u, v).is_some() {
            return Err(GraphError::DuplicateBond(u, v));
        }
        let idx = self.bonds.len();
        self.bonds.push(Bond {
            u,
            v,
            order,
            config: DoubleBondConfig::None,
        });
        self.adjacency[u].push((v, idx));
        self.adjacency[v].push((u, idx));
        Ok(idx)
    }

    pub fn bond_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency
            .get(u)?
            .iter()
            .find(|&&(n, _)| n == v)
            .map(|&(_, b)| b)
    }

    /// Sum of bond orders at `a`.
    pub fn bond_order_sum(&self, a: usize) -> u32 {
        self.adjacency[a]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence())
            .sum()
    }

    /// Implicit hydrogen count implied by the charge-adjusted default valence.
    pub fn default_hydrogens(&self, a: usize) -> u8 {
        let atom = &self.atoms[a];
        let sum = self.bond_order_sum(a);
        let target = atom.element.target_valence(atom.charge, sum);
        target.saturating_sub(sum).min(u32::from(u8::MAX)) as u8
    }

    /// Recomputes implicit hydrogens on every atom from default valences.
    pub fn assign_implicit_hydrogens(&mut self) {
        for a in 0..self.atoms.len() {
            self.atoms[a].hydrogens = self.default_hydrogens(a);
        }
    }

    /// Number of connected components (0 for the empty graph).
    pub fn num_components(&self) -> usize {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(a) = queue.pop_front() {
                for &(b, _) in &self.adjacency[a] {
                    if !seen[b] {
                        seen[b] = true;
                        queue.push_back(b);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.num_components() <= 1
    }

    /// Neighbors of `a` in ascending index order.
    pub fn sorted_neighbors(&self, a: usize) -> Vec<usize> {
        let mut n: Vec<usize> = self.adjacency[a].iter().map(|&(x, _)| x).collect();
        n.sort_unstable();
        n
    }

    /// Lowest-indexed heavy neighbor of `a` other than `exclude`.
    pub fn reference_substituent(&self, a: usize, exclude: usize) -> Option<usize> {
        self.adjacency[a]
            .iter()
            .map(|&(x, _)| x)
            .filter(|&x| x != exclude)
            .min()
    }

    /// Relabels atoms: atom `i` of `self` becomes atom `perm[i]` of the result.
    /// Bonds are emitted in the order of their new (min, max) endpoints so the
    /// result depends only on the relabelled structure. Stereo annotations
    /// are rewritten so the geometry they describe is unchanged.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let n = self.atoms.len();
        let mut inverse = vec![usize::MAX; n];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let mut out = MolGraph::new();
        for &old in &inverse {
            out.add_atom(self.atoms[old].clone());
        }
        let mut bonds: Vec<(usize, usize, usize)> = self
            .bonds
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let (x, y) = (perm[b.u], perm[b.v]);
                (x.min(y), x.max(y), i)
            })
            .collect();
        bonds.sort_unstable();
        for (x, y, i) in bonds {
            let idx = out
                .add_bond(x, y, self.bonds[i].order)
                .expect("permutation preserves simplicity");
            out.bonds[idx].config = self.bonds[i].config;
        }
        for old in 0..n {
            let parity = self.atoms[old].parity;
            if parity == Parity::None {
                continue;
            }
            let mapped: Vec<usize> = self
                .sorted_neighbors(old)
                .iter()
                .map(|&x| perm[x])
                .collect();
            out.atoms[perm[old]].parity = parity.flip_if(permutation_is_odd(&mapped));
        }
        for b in &self.bonds {
            if b.config == DoubleBondConfig::None {
                continue;
            }
            let mut flips = 0;
            for (end, other) in [(b.u, b.v), (b.v, b.u)] {
                let old_ref = self.reference_substituent(end, other);
                let new_ref = out.reference_substituent(perm[end], perm[other]);
                if old_ref.map(|r| perm[r]) != new_ref {
                    flips += 1;
                }
            }
            let nb = out.bond_between(perm[b.u], perm[b.v]).expect("bond kept");
            out.bonds[nb].config = b.config.flip_if(flips % 2 == 1);
        }
        out
    }

    /// Subgraph induced by `keep` (ascending order preserved). Returns the
    /// subgraph and the map old index -> new index. Stereo annotations on
    /// atoms or bonds whose neighborhood changed are dropped.
    pub fn induced_subgraph(&self, keep: &[bool]) -> (MolGraph, Vec<Option<usize>>) {
        let mut map = vec![None; self.atoms.len()];
        let mut out = MolGraph::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            if keep[i] {
                map[i] = Some(out.add_atom(atom.clone()));
            }
        }
        for b in &self.bonds {
            if let (Some(x), Some(y)) = (map[b.u], map[b.v]) {
                let idx = out
                    .add_bond(x, y, b.order)
                    .expect("subgraph of simple graph");
                out.bonds[idx].config = b.config;
            }
        }
        let changed: Vec<bool> = (0..self.atoms.len())
            .map(|i| self.adjacency[i].iter().any(|&(n, _)| !keep[n]))
            .collect();
        for (i, &m) in map.iter().enumerate() {
            if let Some(j) = m {
                if changed[i] {
                    out.atoms[j].parity = Parity::None;
                }
            }
        }
        let mut back = vec![0; out.atoms.len()];
        for (i, &m) in map.iter().enumerate() {
            if let Some(j) = m {
                back[j] = i;
            }
        }
        for bond in &mut out.bonds {
            if changed[back[bond.u]] || changed[back[bond.v]] {
                bond.config = DoubleBondConfig::None;
            }
        }
        (out, map)
    }
}

/// True when sorting `seq` (distinct values) needs an odd number of swaps.
pub fn permutation_is_odd(seq: &[usize]) -> bool {
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ethane() -> MolGraph {
        let mut g = MolGraph::new();
        let a = g.add_atom(Atom::new(Element::C));
        let b = g.add_atom(Atom::new(Element::C));
        g.add_bond(a, b, BondOrder::Single).unwrap();
        g.assign_implicit_hydrogens();
        g
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        let mut g = ethane();
        assert_eq!(
            g.add_bond(0, 0, BondOrder::Single),
            Err(GraphError::SelfLoop(0))
        );
        assert_eq!(
            g.add_bond(1, 0, BondOrder::Double),
            Err(GraphError::DuplicateBond(1, 0))
        );
        assert_eq!(
            g.add_bond(0, 5, BondOrder::Single),
            Err(GraphError::AtomOutOfRange(5))
        );
    }

    #[test]
    fn hydrogens_and_components() {
        let mut g = ethane();
        assert_eq!(g.atom(0).hydrogens, 3);
        g.add_atom(Atom::new(Element::O));
        assert_eq!(g.num_components(), 2);
        assert!(!g.is_connected());
        assert!(MolGraph::new().is_connected());
    }

    #[test]
    fn odd_permutations() {
        assert!(!permutation_is_odd(&[0, 1, 2]));
        assert!(permutation_is_odd(&[1, 0, 2]));
        assert!(!permutation_is_odd(&[2, 0, 1]));
    }
}
