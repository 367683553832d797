//! Chemical validity and scaffold containment checks.

use super::graph::{GraphError, MolGraph};

/// True iff the graph is nonempty, connected, and every atom's bond-order sum
/// plus implicit hydrogens stays within its (charge-adjusted) maximum valence.
/// Simplicity holds by construction of [`MolGraph`].
pub fn check_validity(g: &MolGraph) -> bool {
    if g.is_empty() || !g.is_connected() {
        return false;
    }
    (0..g.num_atoms()).all(|a| {
        let atom = g.atom(a);
        g.bond_order_sum(a) + u32::from(atom.hydrogens)
            <= atom.element.max_valence_charged(atom.charge)
    })
}

/// True iff `node_map` embeds `s` into `g`: mapped atoms share elements and
/// every bond of `s` is present in `g` with the same order.
pub fn is_supergraph(g: &MolGraph, s: &MolGraph, node_map: &[usize]) -> Result<bool, GraphError> {
    if node_map.len() != s.num_atoms() {
        return Err(GraphError::AtomOutOfRange(node_map.len()));
    }
    if let Some(&bad) = node_map.iter().find(|&&m| m >= g.num_atoms()) {
        return Err(GraphError::AtomOutOfRange(bad));
    }
    let mut used = vec![false; g.num_atoms()];
    for (a, &m) in node_map.iter().enumerate() {
        if used[m] || g.atom(m).element != s.atom(a).element {
            return Ok(false);
        }
        used[m] = true;
    }
    Ok(s.bonds().iter().all(|b| {
        g.bond_between(node_map[b.u], node_map[b.v])
            .is_some_and(|gb| g.bond(gb).order == b.order)
    }))
}

/// Identity prefix map for a scaffold whose atoms are the first atoms of `g`.
pub fn prefix_map(s: &MolGraph) -> Vec<usize> {
    (0..s.num_atoms()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::element::{BondOrder, Element};
    use crate::chem::graph::Atom;
    use crate::chem::smiles::parse_smiles;

    #[test]
    fn validity_examples() {
        assert!(check_validity(&parse_smiles("C").unwrap()));
        assert!(check_validity(&parse_smiles("c1ccccc1").unwrap()));
        let mut g = MolGraph::new();
        let c = g.add_atom(Atom::new(Element::C));
        for _ in 0..5 {
            let x = g.add_atom(Atom::new(Element::C));
            g.add_bond(c, x, BondOrder::Single).unwrap();
        }
        g.assign_implicit_hydrogens();
        assert!(!check_validity(&g));
        assert!(!check_validity(&MolGraph::new()));
    }

    #[test]
    fn supergraph_examples() {
        let toluene = parse_smiles("c1ccccc1C").unwrap();
        let benzene = parse_smiles("c1ccccc1").unwrap();
        let pyridine = parse_smiles("n1ccccc1").unwrap();
        assert_eq!(
            is_supergraph(&toluene, &benzene, &prefix_map(&benzene)),
            Ok(true)
        );
        assert_eq!(
            is_supergraph(&benzene, &benzene, &prefix_map(&benzene)),
            Ok(true)
        );
        assert_eq!(
            is_supergraph(&benzene, &pyridine, &prefix_map(&pyridine)),
            Ok(false)
        );
        assert_eq!(
            is_supergraph(&benzene, &benzene, &[0, 1, 2, 3, 4, 9]),
            Err(GraphError::AtomOutOfRange(9))
        );
    }
}
