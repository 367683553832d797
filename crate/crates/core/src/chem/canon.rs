//! Permutation-invariant molecule codes.
//!
//! Atoms are partitioned by iterative neighborhood refinement (Morgan-style);
//! remaining ties are broken by trial individualization, keeping the
//! lexicographically smallest resulting code. Bond orders inside perceived
//! aromatic systems are folded into a single aromatic label so different
//! kekulé forms of one molecule share a code.

use std::fmt;

use super::graph::MolGraph;
use super::rings::perceive_aromaticity;
use super::stereo::{perceive, BondStereo, Chirality};

/// Leaves explored by the individualization search before falling back to
/// greedy tie-breaking.
const SEARCH_BUDGET: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalCode(pub Vec<u8>);

impl fmt::Display for CanonicalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Bond label used for refinement: 0..=2 bond order, 3 aromatic.
fn bond_labels(g: &MolGraph) -> Vec<u8> {
    bond_labels_with(g, &perceive_aromaticity(g).1)
}

fn bond_labels_with(g: &MolGraph, aromatic: &[bool]) -> Vec<u8> {
    g.bonds()
        .iter()
        .zip(aromatic)
        .map(|(b, &arom)| if arom { 3 } else { b.order.index() as u8 })
        .collect()
}

fn atom_key(g: &MolGraph, a: usize) -> Vec<i64> {
    let atom = g.atom(a);
    vec![
        atom.element.index() as i64,
        i64::from(atom.charge),
        i64::from(atom.hydrogens),
        g.degree(a) as i64,
    ]
}

/// Refines `classes` to the coarsest equitable partition below it; class
/// indices are dense and ordered by invariant keys.
fn refine(g: &MolGraph, labels: &[u8], mut classes: Vec<u32>) -> Vec<u32> {
    let n = g.num_atoms();
    let mut count = distinct(&classes);
    loop {
        let keys: Vec<(u32, Vec<(u8, u32)>)> = (0..n)
            .map(|a| {
                let mut nb: Vec<(u8, u32)> = g
                    .neighbors(a)
                    .iter()
                    .map(|&(b, bond)| (labels[bond], classes[b]))
                    .collect();
                nb.sort_unstable();
                (classes[a], nb)
            })
            .collect();
        classes = dense_ranks(&keys);
        let new_count = distinct(&classes);
        if new_count == count {
            return classes;
        }
        count = new_count;
    }
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("present") as u32)
        .collect()
}

fn distinct(classes: &[u32]) -> usize {
    let mut c = classes.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn initial_classes(g: &MolGraph, extra: Option<&[u8]>) -> Vec<u32> {
    let keys: Vec<Vec<i64>> = (0..g.num_atoms())
        .map(|a| {
            let mut k = atom_key(g, a);
            if let Some(e) = extra {
                k.push(i64::from(e[a]));
            }
            k
        })
        .collect();
    dense_ranks(&keys)
}

/// Symmetry classes from refinement over constitution only (no stereo);
/// atoms related by an automorphism always share a class. Higher class
/// index means higher priority wherever a ranking is needed.
pub fn symmetry_classes(g: &MolGraph) -> Vec<u32> {
    symmetry_classes_with(g, &perceive_aromaticity(g).1)
}

/// As [`symmetry_classes`] with precomputed aromatic bond flags.
pub fn symmetry_classes_with(g: &MolGraph, aromatic_bonds: &[bool]) -> Vec<u32> {
    refine(
        g,
        &bond_labels_with(g, aromatic_bonds),
        initial_classes(g, None),
    )
}

/// Canonical code including stereo annotations.
pub fn canonical_code(g: &MolGraph) -> CanonicalCode {
    canonical_code_with(g, true)
}

/// Canonical code; `stereo = false` ignores chirality and double-bond
/// geometry.
pub fn canonical_code_with(g: &MolGraph, stereo: bool) -> CanonicalCode {
    let n = g.num_atoms();
    if n == 0 {
        return CanonicalCode(vec![0, 0, 0, 0]);
    }
    let labels = bond_labels(g);
    let sym = refine(g, &labels, initial_classes(g, None));
    let (chir, bond_stereo) = if stereo {
        let p = perceive(g, &sym);
        (
            p.chirality
                .iter()
                .map(|c| chirality_byte(*c))
                .collect::<Vec<u8>>(),
            p.bonds
                .iter()
                .map(|s| bond_stereo_byte(*s))
                .collect::<Vec<u8>>(),
        )
    } else {
        (vec![0; n], vec![0; g.num_bonds()])
    };
    // Stereo enters refinement through atom keys and combined bond labels.
    let full_labels: Vec<u8> = labels
        .iter()
        .zip(&bond_stereo)
        .map(|(l, s)| l * 5 + s)
        .collect();
    let start = refine(g, &full_labels, initial_classes(g, Some(&chir)));
    let mut search = Search {
        g,
        labels: &full_labels,
        chir: &chir,
        budget: SEARCH_BUDGET,
        best: None,
    };
    search.run(start);
    CanonicalCode(search.best.expect("at least one leaf"))
}

fn chirality_byte(c: Chirality) -> u8 {
    match c {
        Chirality::None => 0,
        Chirality::R => 1,
        Chirality::S => 2,
    }
}

fn bond_stereo_byte(s: BondStereo) -> u8 {
    match s {
        BondStereo::None => 0,
        BondStereo::E => 1,
        BondStereo::Z => 2,
        BondStereo::Cis => 3,
        BondStereo::Trans => 4,
    }
}

struct Search<'a> {
    g: &'a MolGraph,
    labels: &'a [u8],
    chir: &'a [u8],
    budget: usize,
    best: Option<Vec<u8>>,
}

impl Search<'_> {
    fn run(&mut self, classes: Vec<u32>) {
        let n = classes.len();
        if distinct(&classes) == n {
            let code = self.encode(&classes);
            if self.best.as_ref().is_none_or(|b| code < *b) {
                self.best = Some(code);
            }
            self.budget = self.budget.saturating_sub(1);
            return;
        }
        // First (lowest) class with more than one member.
        let mut sizes = vec![0usize; n];
        for &c in &classes {
            sizes[c as usize] += 1;
        }
        let target = sizes.iter().position(|&s| s > 1).expect("a tie exists") as u32;
        let members: Vec<usize> = (0..n).filter(|&a| classes[a] == target).collect();
        for (k, &m) in members.iter().enumerate() {
            if k > 0 && self.budget == 0 {
                break;
            }
            let split: Vec<u32> = classes
                .iter()
                .enumerate()
                .map(|(a, &c)| c * 2 + u32::from(c == target && a != m))
                .collect();
            let refined = refine(self.g, self.labels, dense_ranks(&split));
            self.run(refined);
        }
    }

    fn encode(&self, order: &[u32]) -> Vec<u8> {
        let g = self.g;
        let n = g.num_atoms();
        let mut by_label = vec![0usize; n];
        for (a, &c) in order.iter().enumerate() {
            by_label[c as usize] = a;
        }
        let mut out = Vec::with_capacity(4 + n * 4 + g.num_bonds() * 5);
        out.extend_from_slice(&(n as u16).to_le_bytes());
        out.extend_from_slice(&(g.num_bonds() as u16).to_le_bytes());
        for &a in &by_label {
            let atom = g.atom(a);
            out.push(atom.element.index() as u8);
            out.push(atom.charge as u8);
            out.push(atom.hydrogens);
            out.push(self.chir[a]);
        }
        let mut edges: Vec<(u32, u32, u8)> = g
            .bonds()
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let (x, y) = (order[b.u], order[b.v]);
                (x.min(y), x.max(y), self.labels[i])
            })
            .collect();
        edges.sort_unstable();
        for (x, y, l) in edges {
            out.extend_from_slice(&(x as u16).to_le_bytes());
            out.extend_from_slice(&(y as u16).to_le_bytes());
            out.push(l);
        }
        out
    }
}
