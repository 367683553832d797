//! Molecular graphs: SMILES I/O, validity, canonical codes, scaffolds and
//! stereoisomers.

pub mod canon;
pub mod element;
pub mod graph;
pub mod io;
pub mod kekule;
pub mod rings;
pub mod scaffold;
pub mod smiles;
pub mod stereo;
pub mod validity;

pub use canon::{canonical_code, canonical_code_with, symmetry_classes, CanonicalCode};
pub use element::{BondOrder, Element, NUM_BOND_ORDERS, NUM_ELEMENTS};
pub use graph::{Atom, Bond, DoubleBondConfig, GraphError, MolGraph, Parity};
pub use io::{read_smiles_lines, SmilesRecord};
pub use scaffold::{extract_scaffold, scaffold_with_map};
pub use smiles::{parse_smiles, write_smiles, SmilesError};
pub use stereo::{enumerate_stereoisomers, BondStereo, Chirality, MAX_ISOMERS};
pub use validity::{check_validity, is_supergraph, prefix_map};
