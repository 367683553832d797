//! Additive per-atom contribution tables (TPSA/LogP-style parameterizations
//! supplied at runtime).
//!
//! One rule per line: `element,aromatic,neighbors,hydrogens,value`.
//! `aromatic` is 0 or 1, `neighbors` is the sorted list of bonded heavy
//! neighbors written as bond symbol plus element (`-C`, `=O`, joined without
//! separators, e.g. `-C-C=O`), `hydrogens` is the implicit H count. Any of
//! the first four fields may be `*`. A line `default,<value>` sets the
//! contribution of unmatched atoms (0 when absent). `#` starts a comment.
//! The first matching rule wins.

use crate::chem::element::{BondOrder, Element};
use crate::chem::rings::perceive_aromaticity;
use crate::chem::MolGraph;

use super::PropertyError;

#[derive(Clone, Debug, PartialEq)]
struct Rule {
    element: Option<Element>,
    aromatic: Option<bool>,
    neighbors: Option<String>,
    hydrogens: Option<u8>,
    value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContributionTable {
    rules: Vec<Rule>,
    pub default: f64,
}

fn wild<T>(field: &str, parse: impl FnOnce(&str) -> Option<T>) -> Result<Option<T>, String> {
    if field == "*" {
        Ok(None)
    } else {
        parse(field)
            .map(Some)
            .ok_or_else(|| format!("bad field `{field}`"))
    }
}

impl ContributionTable {
    pub fn parse(text: &str) -> Result<Self, PropertyError> {
        let mut table = ContributionTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| PropertyError::Table { line: i + 1, msg };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields[0] == "default" {
                let [_, v] = fields[..] else {
                    return Err(err("default takes one value".into()));
                };
                table.default = v.parse().map_err(|_| err(format!("bad value `{v}`")))?;
                continue;
            }
            let [el, arom, nb, h, v] = fields[..] else {
                return Err(err(format!("expected 5 fields, found {}", fields.len())));
            };
            let rule = Rule {
                element: wild(el, Element::from_symbol).map_err(err)?,
                aromatic: wild(arom, |s| match s {
                    "0" => Some(false),
                    "1" => Some(true),
                    _ => None,
                })
                .map_err(err)?,
                neighbors: wild(nb, |s| Some(s.to_string())).map_err(err)?,
                hydrogens: wild(h, |s| s.parse().ok()).map_err(err)?,
                value: v.parse().map_err(|_| err(format!("bad value `{v}`")))?,
            };
            table.rules.push(rule);
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Neighbor signature of atom `a` as used by table rules.
pub fn neighbor_signature(g: &MolGraph, a: usize) -> String {
    let mut parts: Vec<String> = g
        .neighbors(a)
        .iter()
        .map(|&(b, bond)| {
            format!(
                "{}{}",
                bond_char(g.bond(bond).order),
                g.atom(b).element.symbol()
            )
        })
        .collect();
    parts.sort();
    parts.concat()
}

fn bond_char(order: BondOrder) -> &'static str {
    match order {
        BondOrder::Single => "-",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
    }
}

/// Sum of matched contributions over atoms.
pub fn table_property(g: &MolGraph, table: &ContributionTable) -> f64 {
    let (aromatic, _) = perceive_aromaticity(g);
    (0..g.num_atoms())
        .map(|a| {
            let atom = g.atom(a);
            let sig = neighbor_signature(g, a);
            table
                .rules
                .iter()
                .find(|r| {
                    r.element.is_none_or(|e| e == atom.element)
                        && r.aromatic.is_none_or(|x| x == aromatic[a])
                        && r.neighbors.as_ref().is_none_or(|n| *n == sig)
                        && r.hydrogens.is_none_or(|h| h == atom.hydrogens)
                })
                .map_or(table.default, |r| r.value)
        })
        .sum()
}
