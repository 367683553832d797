//! Scaffold/molecule training pairs and their ground-truth action sequences.

use std::collections::{HashSet, VecDeque};

use crate::chem::canon::symmetry_classes;
use crate::chem::stereo::{consistent_with, double_bond_candidates, tetrahedral_candidates};
use crate::chem::{
    canonical_code_with, enumerate_stereoisomers, scaffold_with_map, DoubleBondConfig, MolGraph,
    Parity,
};
use crate::decoder::{replay, strip_stereo, Action};
use crate::nets::PropertyStat;
use crate::props::{properties, PropertyError};

/// One `(S, G)` pair. `molecule` is relabelled so the scaffold occupies
/// atoms `0..scaffold.num_atoms()` in scaffold order.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub scaffold: MolGraph,
    pub molecule: MolGraph,
    pub actions: Vec<Action>,
    pub y: Vec<f64>,
    pub y_s: Vec<f64>,
    /// Stereoisomers of the molecule's constitution.
    pub isomers: Vec<MolGraph>,
    /// Whether each isomer agrees with the molecule's stereo labels.
    pub isomer_flags: Vec<bool>,
}

#[derive(Clone, Debug, Default)]
pub struct PairDataset {
    pub pairs: Vec<TrainingPair>,
    pub property_names: Vec<String>,
    /// Molecules with an empty scaffold.
    pub dropped_acyclic: usize,
    /// Molecules the decoder cannot reproduce (e.g. charged side-chain atoms).
    pub dropped_unreplayable: usize,
    pub duplicates: usize,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Per-property mean and standard deviation of the molecule values
    /// (standard deviation floored at 1 when degenerate).
    pub fn property_stats(&self) -> Vec<PropertyStat> {
        let n = self.pairs.len().max(1) as f64;
        self.property_names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let mean = self.pairs.iter().map(|p| p.y[j]).sum::<f64>() / n;
                let var = self
                    .pairs
                    .iter()
                    .map(|p| (p.y[j] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                let std = if var.sqrt() > 1e-8 { var.sqrt() } else { 1.0 };
                PropertyStat {
                    name: name.clone(),
                    mean,
                    std,
                }
            })
            .collect()
    }
}

/// New atom order: scaffold atoms in scaffold order, then the rest in
/// breadth-first order from the scaffold (ties by input index).
fn build_order(g: &MolGraph, map: &[Option<usize>], scaffold_size: usize) -> Vec<usize> {
    let n = g.num_atoms();
    let mut perm = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    let mut by_scaffold: Vec<usize> = (0..n).filter(|&a| map[a].is_some()).collect();
    by_scaffold.sort_by_key(|&a| map[a]);
    for &a in &by_scaffold {
        perm[a] = map[a].expect("scaffold atom");
        queue.push_back(a);
    }
    let mut next = scaffold_size;
    let mut visit = |a: usize, perm: &mut Vec<usize>, queue: &mut VecDeque<usize>| {
        if perm[a] == usize::MAX {
            perm[a] = next;
            next += 1;
            queue.push_back(a);
        }
    };
    loop {
        while let Some(u) = queue.pop_front() {
            for v in g.sorted_neighbors(u) {
                visit(v, &mut perm, &mut queue);
            }
        }
        match (0..n).find(|&a| perm[a] == usize::MAX) {
            Some(a) => visit(a, &mut perm, &mut queue),
            None => break,
        }
    }
    perm
}

/// Ground-truth actions extending the prefix `0..scaffold_size` to `g`.
pub fn extract_actions(g: &MolGraph, scaffold_size: usize) -> Vec<Action> {
    let mut actions = Vec::new();
    for w in scaffold_size..g.num_atoms() {
        actions.push(Action::AddNode(Some(g.atom(w).element)));
        let mut earlier: Vec<(usize, usize)> = g
            .neighbors(w)
            .iter()
            .copied()
            .filter(|&(u, _)| u < w)
            .collect();
        earlier.sort_unstable();
        for (u, b) in earlier {
            actions.push(Action::AddEdge(Some(g.bond(b).order)));
            actions.push(Action::SelectNode(u));
        }
        actions.push(Action::AddEdge(None));
    }
    actions.push(Action::AddNode(None));
    actions
}

/// Drops stereo labels on atoms and bonds that cannot carry stereo.
fn normalize_stereo(g: &MolGraph) -> MolGraph {
    let classes = symmetry_classes(g);
    let centers: HashSet<usize> = tetrahedral_candidates(g, &classes).into_iter().collect();
    let dbs: HashSet<usize> = double_bond_candidates(g, &classes).into_iter().collect();
    let mut out = g.clone();
    for a in 0..out.num_atoms() {
        if !centers.contains(&a) {
            out.atom_mut(a).parity = Parity::None;
        }
    }
    for b in 0..out.num_bonds() {
        if !dbs.contains(&b) {
            out.bond_mut(b).config = DoubleBondConfig::None;
        }
    }
    out
}

/// Outcome of pairing a single molecule.
#[derive(Clone, Debug)]
pub enum PairOutcome {
    Pair(Box<TrainingPair>),
    Acyclic,
    Unreplayable,
}

/// Pairs one molecule with its scaffold.
pub fn make_pair(g: &MolGraph, property_names: &[String]) -> Result<PairOutcome, PropertyError> {
    let (scaffold, map) = scaffold_with_map(g);
    if scaffold.is_empty() {
        return Ok(PairOutcome::Acyclic);
    }
    let scaffold = strip_stereo(&scaffold);
    let perm = build_order(g, &map, scaffold.num_atoms());
    let molecule = normalize_stereo(&g.permuted(&perm));
    let actions = extract_actions(&molecule, scaffold.num_atoms());
    match replay(&scaffold, &actions) {
        Some(r) if canonical_code_with(&r, false) == canonical_code_with(&molecule, false) => {}
        _ => return Ok(PairOutcome::Unreplayable),
    }
    let isomers = enumerate_stereoisomers(&strip_stereo(&molecule));
    let isomer_flags = isomers
        .iter()
        .map(|i| consistent_with(&molecule, i))
        .collect();
    Ok(PairOutcome::Pair(Box::new(TrainingPair {
        y: properties(property_names, &molecule)?,
        y_s: properties(property_names, &scaffold)?,
        scaffold,
        molecule,
        actions,
        isomers,
        isomer_flags,
    })))
}

/// Pairs every molecule with its scaffold, dropping acyclic, unreproducible
/// and duplicate molecules (counted in the result).
pub fn make_pairs(
    molecules: &[MolGraph],
    property_names: &[String],
) -> Result<PairDataset, PropertyError> {
    let mut ds = PairDataset {
        property_names: property_names.to_vec(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    for g in molecules {
        if !seen.insert(canonical_code_with(g, true)) {
            ds.duplicates += 1;
            continue;
        }
        match make_pair(g, property_names)? {
            PairOutcome::Pair(p) => ds.pairs.push(*p),
            PairOutcome::Acyclic => ds.dropped_acyclic += 1,
            PairOutcome::Unreplayable => ds.dropped_unreplayable += 1,
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{canonical_code, extract_scaffold, parse_smiles, Element};

    fn mols(s: &[&str]) -> Vec<MolGraph> {
        s.iter().map(|x| parse_smiles(x).unwrap()).collect()
    }

    #[test]
    fn toluene_benzene_hexane() {
        let ds = make_pairs(&mols(&["Cc1ccccc1", "c1ccccc1", "CCCCCC"]), &[]).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dropped_acyclic, 1);
        let benzene = canonical_code(&parse_smiles("c1ccccc1").unwrap());
        assert_eq!(canonical_code(&ds.pairs[0].scaffold), benzene);
        assert_eq!(ds.pairs[1].actions, vec![Action::AddNode(None)]);
        assert_eq!(ds.pairs[0].actions.len(), 5);
        assert_eq!(ds.pairs[0].actions[0], Action::AddNode(Some(Element::C)));
    }

    #[test]
    fn scaffold_is_prefix_and_neighbors_precede() {
        let g = parse_smiles("CC(=O)Nc1ccc(O)cc1CCN").unwrap();
        let PairOutcome::Pair(p) = make_pair(&g, &[]).unwrap() else {
            panic!("no pair")
        };
        let s = p.scaffold.num_atoms();
        assert_eq!(
            canonical_code(&p.scaffold),
            canonical_code(&extract_scaffold(&g))
        );
        for w in s..p.molecule.num_atoms() {
            assert!(
                p.molecule.neighbors(w).iter().any(|&(u, _)| u < w),
                "atom {w} starts disconnected"
            );
        }
        for (a, b) in p.scaffold.atoms().iter().zip(p.molecule.atoms()) {
            assert_eq!(a.element, b.element);
        }
    }

    #[test]
    fn duplicates_and_charges() {
        let ds = make_pairs(
            &mols(&["Oc1ccccc1", "c1ccccc1O", "[O-]c1ccccc1"]),
            &["mw".to_string()],
        )
        .unwrap();
        assert_eq!(
            (ds.len(), ds.duplicates, ds.dropped_unreplayable),
            (1, 1, 1)
        );
        assert!((ds.pairs[0].y[0] - 94.11).abs() < 0.01);
        assert!((ds.pairs[0].y_s[0] - 78.11).abs() < 0.01);
    }

    #[test]
    fn isomer_flags_follow_labels() {
        let PairOutcome::Pair(p) =
            make_pair(&parse_smiles("C/C=C/c1ccccc1").unwrap(), &[]).unwrap()
        else {
            panic!()
        };
        assert_eq!(p.isomers.len(), 2);
        assert_eq!(p.isomer_flags.iter().filter(|&&f| f).count(), 1);
        let PairOutcome::Pair(q) = make_pair(&parse_smiles("CC=Cc1ccccc1").unwrap(), &[]).unwrap()
        else {
            panic!()
        };
        assert!(q.isomer_flags.iter().all(|&f| f));
    }
}
