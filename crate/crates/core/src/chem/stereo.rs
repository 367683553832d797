//! Stereo perception and stereoisomer enumeration.
//!
//! Stereocenters are detected from symmetry-class distinctness, not CIP
//! rules. R/S and cis/trans labels are assigned by ranking substituents with
//! the symmetry classes (implicit hydrogen lowest), which coincides with CIP
//! whenever class order agrees with CIP priority.

use super::canon::symmetry_classes;
use super::element::BondOrder;
use super::graph::{permutation_is_odd, DoubleBondConfig, MolGraph, Parity};
use super::rings::ring_bonds;

/// Upper bound on the number of enumerated stereoisomers.
pub const MAX_ISOMERS: usize = 32;

/// Index-free tetrahedral label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Chirality {
    None,
    R,
    S,
}

/// Index-free double-bond label. `E`/`Z` are part of the extended bond
/// family but perception only ever reports cis/trans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondStereo {
    None,
    E,
    Z,
    Cis,
    Trans,
}

pub struct StereoLabels {
    pub chirality: Vec<Chirality>,
    pub bonds: Vec<BondStereo>,
}

const HYDROGEN: usize = usize::MAX;

/// Labels for every annotated atom and bond, ranked by `classes`.
pub fn perceive(g: &MolGraph, classes: &[u32]) -> StereoLabels {
    let rank = |x: usize| -> i64 {
        if x == HYDROGEN {
            -1
        } else {
            i64::from(classes[x])
        }
    };
    let chirality = (0..g.num_atoms())
        .map(|a| {
            let parity = g.atom(a).parity;
            if parity == Parity::None {
                return Chirality::None;
            }
            let Some(reference) = tetrahedral_neighbors(g, a) else {
                return Chirality::None;
            };
            let mut ranked = reference.clone();
            ranked.sort_by_key(|&x| std::cmp::Reverse(rank(x)));
            if ranked.windows(2).any(|w| rank(w[0]) == rank(w[1])) {
                return Chirality::None;
            }
            // (lowest, highest, second, third)
            let order = [ranked[3], ranked[0], ranked[1], ranked[2]];
            let positions: Vec<usize> = order
                .iter()
                .map(|x| reference.iter().position(|y| y == x).expect("same members"))
                .collect();
            match parity.flip_if(permutation_is_odd(&positions)) {
                Parity::Ccw => Chirality::R,
                _ => Chirality::S,
            }
        })
        .collect();
    let bonds = g
        .bonds()
        .iter()
        .map(|b| {
            if b.config == DoubleBondConfig::None || b.order != BondOrder::Double {
                return BondStereo::None;
            }
            let mut config = b.config;
            for (end, other) in [(b.u, b.v), (b.v, b.u)] {
                let Some(top) = top_substituent(g, end, other, classes) else {
                    return BondStereo::None;
                };
                if g.reference_substituent(end, other) != Some(top) {
                    config = config.flipped();
                }
            }
            match config {
                DoubleBondConfig::Cis => BondStereo::Cis,
                _ => BondStereo::Trans,
            }
        })
        .collect();
    StereoLabels { chirality, bonds }
}

/// Index-ordered neighbors plus a trailing hydrogen placeholder, when the
/// atom has exactly four substituents with at most one hydrogen.
fn tetrahedral_neighbors(g: &MolGraph, a: usize) -> Option<Vec<usize>> {
    let h = g.atom(a).hydrogens as usize;
    if h > 1 || g.degree(a) + h != 4 {
        return None;
    }
    let mut n = g.sorted_neighbors(a);
    if h == 1 {
        n.push(HYDROGEN);
    }
    Some(n)
}

/// Highest-ranked heavy substituent of `end` (excluding `other`), provided
/// the substituents are distinguishable.
fn top_substituent(g: &MolGraph, end: usize, other: usize, classes: &[u32]) -> Option<usize> {
    let subs: Vec<usize> = g
        .neighbors(end)
        .iter()
        .map(|&(x, _)| x)
        .filter(|&x| x != other)
        .collect();
    match subs.as_slice() {
        [only] => Some(*only),
        [x, y] if classes[*x] != classes[*y] => {
            Some(if classes[*x] > classes[*y] { *x } else { *y })
        }
        _ => None,
    }
}

/// Candidate stereocenters: atoms with four substituents (at most one
/// implicit hydrogen) of pairwise distinct symmetry class.
pub fn tetrahedral_candidates(g: &MolGraph, classes: &[u32]) -> Vec<usize> {
    (0..g.num_atoms())
        .filter(|&a| {
            let Some(n) = tetrahedral_neighbors(g, a) else {
                return false;
            };
            let mut ranks: Vec<i64> = n
                .iter()
                .map(|&x| {
                    if x == HYDROGEN {
                        -1
                    } else {
                        i64::from(classes[x])
                    }
                })
                .collect();
            ranks.sort_unstable();
            ranks.windows(2).all(|w| w[0] != w[1])
        })
        .collect()
}

/// Candidate stereo double bonds: acyclic double bonds whose endpoints each
/// carry two substituents (heavy atoms or one hydrogen) of distinct class.
pub fn double_bond_candidates(g: &MolGraph, classes: &[u32]) -> Vec<usize> {
    let in_ring = ring_bonds(g);
    (0..g.num_bonds())
        .filter(|&i| {
            let b = g.bond(i);
            if b.order != BondOrder::Double || in_ring[i] {
                return false;
            }
            [(b.u, b.v), (b.v, b.u)].iter().all(|&(end, other)| {
                let mut ranks: Vec<i64> = g
                    .neighbors(end)
                    .iter()
                    .filter(|&&(x, _)| x != other)
                    .map(|&(x, _)| i64::from(classes[x]))
                    .collect();
                for _ in 0..g.atom(end).hydrogens {
                    ranks.push(-1);
                }
                ranks.len() == 2 && ranks[0] != ranks[1] && ranks.iter().any(|&r| r >= 0)
            })
        })
        .collect()
}

/// All stereo assignments of the unassigned candidates of `g`, keeping
/// existing annotations. Assignments count up in binary with centers (by
/// atom index) on the low bits, then bonds (by bond index); truncated to
/// [`MAX_ISOMERS`]. Returns `[g]` when there is
/// nothing to assign.
pub fn enumerate_stereoisomers(g: &MolGraph) -> Vec<MolGraph> {
    enumerate_stereoisomers_with(g, &symmetry_classes(g))
}

/// As [`enumerate_stereoisomers`] with precomputed symmetry classes.
pub fn enumerate_stereoisomers_with(g: &MolGraph, classes: &[u32]) -> Vec<MolGraph> {
    let centers: Vec<usize> = tetrahedral_candidates(g, classes)
        .into_iter()
        .filter(|&a| g.atom(a).parity == Parity::None)
        .collect();
    let dbs: Vec<usize> = double_bond_candidates(g, classes)
        .into_iter()
        .filter(|&b| g.bond(b).config == DoubleBondConfig::None)
        .collect();
    let m = centers.len() + dbs.len();
    if m == 0 {
        return vec![g.clone()];
    }
    let total = if m >= 6 {
        MAX_ISOMERS
    } else {
        (1usize << m).min(MAX_ISOMERS)
    };
    (0..total)
        .map(|k| {
            let mut iso = g.clone();
            for j in 0..m {
                let bit = j < usize::BITS as usize && (k >> j) & 1 == 1;
                if j < centers.len() {
                    iso.atom_mut(centers[j]).parity = if bit { Parity::Cw } else { Parity::Ccw };
                } else {
                    iso.bond_mut(dbs[j - centers.len()]).config = if bit {
                        DoubleBondConfig::Trans
                    } else {
                        DoubleBondConfig::Cis
                    };
                }
            }
            iso
        })
        .collect()
}

/// True when every annotation present on `data` is matched by `isomer`.
/// Unannotated stereo elements of `data` accept any assignment.
pub fn consistent_with(data: &MolGraph, isomer: &MolGraph) -> bool {
    let atoms_ok = data
        .atoms()
        .iter()
        .zip(isomer.atoms())
        .all(|(d, i)| d.parity == Parity::None || d.parity == i.parity);
    let bonds_ok = data
        .bonds()
        .iter()
        .zip(isomer.bonds())
        .all(|(d, i)| d.config == DoubleBondConfig::None || d.config == i.config);
    atoms_ok && bonds_ok
}
