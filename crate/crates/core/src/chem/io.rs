//! SMILES-lines files.

use super::graph::MolGraph;
use super::smiles::{parse_smiles, SmilesError};

/// One parsed record of a SMILES-lines file.
#[derive(Debug)]
pub struct SmilesRecord {
    /// 1-based line number.
    pub line: usize,
    pub smiles: String,
    pub parsed: Result<MolGraph, SmilesError>,
}

/// Parses the first whitespace-separated field of every line. Blank lines
/// and lines starting with `#` are skipped.
pub fn read_smiles_lines(text: &str) -> Vec<SmilesRecord> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                return None;
            }
            let smiles = line.split_whitespace().next().unwrap_or("").to_string();
            let parsed = parse_smiles(&smiles);
            Some(SmilesRecord {
                line: i + 1,
                smiles,
                parsed,
            })
        })
        .collect()
}
