//! Molecular properties used for conditioning, and generation metrics.

pub mod metrics;
pub mod table;

use thiserror::Error;

use crate::chem::element::Element;
use crate::chem::rings::ring_count;
use crate::chem::MolGraph;

pub use metrics::{
    evaluate, mean_absolute_difference, mw_target_filter, scaffold_split, EvalOptions,
    MetricsReport, ScaffoldSplit,
};
pub use table::{table_property, ContributionTable};

/// Standard atomic weight of hydrogen.
pub const HYDROGEN_WEIGHT: f64 = 1.008;

#[derive(Debug, Error, PartialEq)]
pub enum PropertyError {
    #[error("unknown property `{0}` (known: mw, heavy_atoms, rings, heteroatoms)")]
    Unknown(String),
    #[error("malformed contribution table line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error("not enough distinct scaffolds: need {needed}, have {available}")]
    InsufficientScaffolds { needed: usize, available: usize },
}

/// Heavy-atom weights plus 1.008 per implicit hydrogen.
pub fn molecular_weight(g: &MolGraph) -> f64 {
    g.atoms()
        .iter()
        .map(|a| a.element.atomic_weight() + HYDROGEN_WEIGHT * f64::from(a.hydrogens))
        .sum()
}

pub fn heavy_atom_count(g: &MolGraph) -> usize {
    g.num_atoms()
}

/// Cyclomatic number |E| − |V| + components.
pub fn rings(g: &MolGraph) -> usize {
    ring_count(g)
}

/// Atoms other than carbon.
pub fn heteroatom_count(g: &MolGraph) -> usize {
    g.atoms().iter().filter(|a| a.element != Element::C).count()
}

/// Names accepted by [`property`].
pub const PROPERTY_NAMES: [&str; 4] = ["mw", "heavy_atoms", "rings", "heteroatoms"];

pub fn check_property_name(name: &str) -> Result<(), PropertyError> {
    if PROPERTY_NAMES.contains(&name) {
        Ok(())
    } else {
        Err(PropertyError::Unknown(name.to_string()))
    }
}

/// Evaluates a named property.
pub fn property(name: &str, g: &MolGraph) -> Result<f64, PropertyError> {
    Ok(match name {
        "mw" => molecular_weight(g),
        "heavy_atoms" => heavy_atom_count(g) as f64,
        "rings" => rings(g) as f64,
        "heteroatoms" => heteroatom_count(g) as f64,
        other => return Err(PropertyError::Unknown(other.to_string())),
    })
}

/// Property vector in the order of `names`.
pub fn properties(names: &[String], g: &MolGraph) -> Result<Vec<f64>, PropertyError> {
    names.iter().map(|n| property(n, g)).collect()
}
