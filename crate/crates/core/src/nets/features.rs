//! Raw atom/bond feature vectors and message-passing topology.

use ndarray::Array2;

use crate::chem::canon::symmetry_classes;
use crate::chem::element::{NUM_BOND_ORDERS, NUM_ELEMENTS};
use crate::chem::rings::perceive_aromaticity;
use crate::chem::stereo::{perceive, BondStereo, Chirality};
use crate::chem::MolGraph;

/// Element one-hot, chirality one-hot (R, S, none), formal charge, aromatic flag.
pub const NODE_FEATURES: usize = NUM_ELEMENTS + 3 + 1 + 1;
/// Order one-hot, stereo one-hot (E, Z, cis, trans, none).
pub const EDGE_FEATURES: usize = NUM_BOND_ORDERS + 5;

/// Raw node and edge feature matrices over the extended families.
pub fn raw_features(g: &MolGraph) -> (Array2<f64>, Array2<f64>) {
    raw_features_with(g, &symmetry_classes(g), &perceive_aromaticity(g).0)
}

/// As [`raw_features`] with precomputed symmetry classes and aromatic atom
/// flags (shared by all stereoisomers of one constitution).
pub fn raw_features_with(
    g: &MolGraph,
    classes: &[u32],
    aromatic: &[bool],
) -> (Array2<f64>, Array2<f64>) {
    let labels = perceive(g, classes);
    let mut nodes = Array2::zeros((g.num_atoms(), NODE_FEATURES));
    for (i, atom) in g.atoms().iter().enumerate() {
        nodes[[i, atom.element.index()]] = 1.0;
        let chir = match labels.chirality[i] {
            Chirality::R => 0,
            Chirality::S => 1,
            Chirality::None => 2,
        };
        nodes[[i, NUM_ELEMENTS + chir]] = 1.0;
        nodes[[i, NUM_ELEMENTS + 3]] = f64::from(atom.charge);
        nodes[[i, NUM_ELEMENTS + 4]] = if aromatic[i] { 1.0 } else { 0.0 };
    }
    let mut edges = Array2::zeros((g.num_bonds(), EDGE_FEATURES));
    for (i, bond) in g.bonds().iter().enumerate() {
        edges[[i, bond.order.index()]] = 1.0;
        let st = match labels.bonds[i] {
            BondStereo::E => 0,
            BondStereo::Z => 1,
            BondStereo::Cis => 2,
            BondStereo::Trans => 3,
            BondStereo::None => 4,
        };
        edges[[i, NUM_BOND_ORDERS + st]] = 1.0;
    }
    (nodes, edges)
}

/// Directed message list: each undirected bond contributes both directions
/// with the same edge index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Topology {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub edge: Vec<usize>,
    pub num_nodes: usize,
}

impl Topology {
    pub fn of(g: &MolGraph) -> Self {
        Self::of_prefix(g, g.num_atoms(), g.num_bonds())
    }

    /// Topology of the first `atoms` atoms and `bonds` bonds; bonds must
    /// only reference atoms inside the prefix.
    pub fn of_prefix(g: &MolGraph, atoms: usize, bonds: usize) -> Self {
        let mut t = Topology {
            num_nodes: atoms,
            ..Default::default()
        };
        for (i, b) in g.bonds()[..bonds].iter().enumerate() {
            debug_assert!(b.u < atoms && b.v < atoms);
            t.src.extend([b.u, b.v]);
            t.dst.extend([b.v, b.u]);
            t.edge.extend([i, i]);
        }
        t
    }

    /// Disjoint union of `copies` identical graphs laid out block by block.
    pub fn repeated(&self, copies: usize, edges_per_copy: usize) -> Self {
        let mut t = Topology {
            num_nodes: self.num_nodes * copies,
            ..Default::default()
        };
        for c in 0..copies {
            let (no, eo) = (c * self.num_nodes, c * edges_per_copy);
            t.src.extend(self.src.iter().map(|x| x + no));
            t.dst.extend(self.dst.iter().map(|x| x + no));
            t.edge.extend(self.edge.iter().map(|x| x + eo));
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn feature_widths() {
        assert_eq!(NODE_FEATURES, 13);
        assert_eq!(EDGE_FEATURES, 8);
        let g = parse_smiles("c1ccccc1O").unwrap();
        let (n, e) = raw_features(&g);
        assert_eq!(n.dim(), (7, 13));
        assert_eq!(e.dim(), (7, 8));
        assert_eq!(n[[0, 12]], 1.0);
        assert_eq!(n[[6, 12]], 0.0);
        assert_eq!(n[[6, 2]], 1.0);
        assert!(n.rows().into_iter().all(|r| r[10] == 1.0));
    }

    #[test]
    fn chirality_channels() {
        let g = parse_smiles("F[C@H](Cl)Br").unwrap();
        let (n, _) = raw_features(&g);
        assert_eq!(n[[1, 8]] + n[[1, 9]], 1.0);
        let g = parse_smiles("F/C=C/F").unwrap();
        let (_, e) = raw_features(&g);
        assert_eq!(e[[1, 1]], 1.0);
        assert_eq!(e[[1, 6]], 1.0);
    }

    #[test]
    fn topology_directions() {
        let g = parse_smiles("CCO").unwrap();
        let t = Topology::of(&g);
        assert_eq!(t.src, vec![0, 1, 1, 2]);
        assert_eq!(t.dst, vec![1, 0, 2, 1]);
        let r = t.repeated(2, 2);
        assert_eq!(r.num_nodes, 6);
        assert_eq!(r.src[4..], [3, 4, 4, 5]);
        assert_eq!(r.edge[4..], [2, 2, 3, 3]);
    }
}
