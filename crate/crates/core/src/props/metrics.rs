//! Validity, uniqueness, novelty, property MAD and scaffold splits.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::chem::{canonical_code_with, check_validity, extract_scaffold, CanonicalCode, MolGraph};

use super::{molecular_weight, property, PropertyError};

/// Printed in place of ratios with a zero denominator.
pub const UNDEFINED: &str = "NA";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    /// Include stereo tags in the codes used for uniqueness and novelty.
    pub stereo: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { stereo: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyMad {
    pub name: String,
    /// Valid molecules that entered the mean.
    pub count: usize,
    pub mad: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub generated: usize,
    pub valid: usize,
    pub unique: usize,
    pub novel: usize,
    pub mad: Vec<PropertyMad>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.6}"))
}

impl MetricsReport {
    pub fn validity(&self) -> Option<f64> {
        ratio(self.valid, self.generated)
    }

    pub fn uniqueness(&self) -> Option<f64> {
        ratio(self.unique, self.valid)
    }

    pub fn novelty(&self) -> Option<f64> {
        ratio(self.novel, self.unique)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "generated   {}", self.generated);
        let _ = writeln!(s, "valid       {}", self.valid);
        let _ = writeln!(s, "unique      {}", self.unique);
        let _ = writeln!(s, "novel       {}", self.novel);
        let _ = writeln!(s, "validity    {}", show(self.validity()));
        let _ = writeln!(s, "uniqueness  {}", show(self.uniqueness()));
        let _ = writeln!(s, "novelty     {}", show(self.novelty()));
        for m in &self.mad {
            let _ = writeln!(s, "mad[{}]  {} (n={})", m.name, show(m.mad), m.count);
        }
        s
    }

    /// `metric,value,numerator,denominator` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value,numerator,denominator\n");
        let rows = [
            ("validity", self.validity(), self.valid, self.generated),
            ("uniqueness", self.uniqueness(), self.unique, self.valid),
            ("novelty", self.novelty(), self.novel, self.unique),
        ];
        for (name, v, num, den) in rows {
            let _ = writeln!(s, "{name},{},{num},{den}", show(v));
        }
        for m in &self.mad {
            let _ = writeln!(s, "mad:{},{},,{}", m.name, show(m.mad), m.count);
        }
        s
    }
}

/// Mean absolute difference, `None` for empty input.
pub fn mean_absolute_difference(targets: &[f64], achieved: &[f64]) -> Option<f64> {
    assert_eq!(
        targets.len(),
        achieved.len(),
        "target/achieved length mismatch"
    );
    let n = targets.len();
    (n > 0).then(|| {
        targets
            .iter()
            .zip(achieved)
            .map(|(t, a)| (t - a).abs())
            .sum::<f64>()
            / n as f64
    })
}

/// Metrics over `generated`. `targets[i]` holds the requested values of the
/// properties in `property_names` for molecule `i` (may be empty when no
/// MAD is wanted).
pub fn evaluate(
    generated: &[MolGraph],
    training_codes: &HashSet<CanonicalCode>,
    targets: &[Vec<f64>],
    property_names: &[String],
    opts: EvalOptions,
) -> Result<MetricsReport, PropertyError> {
    for name in property_names {
        super::check_property_name(name)?;
    }
    let valid: Vec<bool> = generated.par_iter().map(check_validity).collect();
    let codes: Vec<Option<CanonicalCode>> = generated
        .par_iter()
        .zip(&valid)
        .map(|(g, &ok)| ok.then(|| canonical_code_with(g, opts.stereo)))
        .collect();
    let unique: HashSet<&CanonicalCode> = codes.iter().flatten().collect();
    let novel = unique
        .iter()
        .filter(|c| !training_codes.contains(**c))
        .count();
    let mut mad = Vec::new();
    for (j, name) in property_names.iter().enumerate() {
        let mut t = Vec::new();
        let mut a = Vec::new();
        for (i, g) in generated.iter().enumerate() {
            if valid[i] {
                if let Some(&target) = targets.get(i).and_then(|row| row.get(j)) {
                    t.push(target);
                    a.push(property(name, g)?);
                }
            }
        }
        mad.push(PropertyMad {
            name: name.clone(),
            count: t.len(),
            mad: mean_absolute_difference(&t, &a),
        });
    }
    Ok(MetricsReport {
        generated: generated.len(),
        valid: valid.iter().filter(|&&v| v).count(),
        unique: unique.len(),
        novel,
        mad,
    })
}

/// Seen/unseen scaffold protocol over one corpus.
#[derive(Clone, Debug)]
pub struct ScaffoldSplit {
    /// Scaffolds of training molecules.
    pub seen: Vec<MolGraph>,
    /// Scaffolds whose molecules are all held out of training.
    pub unseen: Vec<MolGraph>,
    /// Indices of molecules that remain for training.
    pub train: Vec<usize>,
    /// Indices of molecules held out (their scaffolds are the unseen ones).
    pub held_out: Vec<usize>,
}

/// Groups molecules by scaffold code, holds out every molecule of
/// `n_unseen` randomly chosen scaffolds and draws `n_seen` scaffolds from
/// the rest. Acyclic molecules stay in the training part.
pub fn scaffold_split<R: Rng>(
    molecules: &[MolGraph],
    n_seen: usize,
    n_unseen: usize,
    rng: &mut R,
) -> Result<ScaffoldSplit, PropertyError> {
    let mut groups: BTreeMap<CanonicalCode, (MolGraph, Vec<usize>)> = BTreeMap::new();
    let mut acyclic = Vec::new();
    for (i, g) in molecules.iter().enumerate() {
        let s = extract_scaffold(g);
        if s.is_empty() {
            acyclic.push(i);
            continue;
        }
        groups
            .entry(canonical_code_with(&s, false))
            .or_insert_with(|| (s, Vec::new()))
            .1
            .push(i);
    }
    let needed = n_seen + n_unseen;
    if groups.len() < needed {
        return Err(PropertyError::InsufficientScaffolds {
            needed,
            available: groups.len(),
        });
    }
    let mut order: Vec<(MolGraph, Vec<usize>)> = groups.into_values().collect();
    order.shuffle(rng);
    let (unseen_part, seen_part) = order.split_at(n_unseen);
    let mut held_out: Vec<usize> = unseen_part
        .iter()
        .flat_map(|(_, m)| m.iter().copied())
        .collect();
    let mut train: Vec<usize> = seen_part
        .iter()
        .flat_map(|(_, m)| m.iter().copied())
        .chain(acyclic)
        .collect();
    held_out.sort_unstable();
    train.sort_unstable();
    Ok(ScaffoldSplit {
        seen: seen_part[..n_seen].iter().map(|(s, _)| s.clone()).collect(),
        unseen: unseen_part.iter().map(|(s, _)| s.clone()).collect(),
        train,
        held_out,
    })
}

/// Targets below the scaffold's own weight are excluded.
pub fn mw_target_filter(scaffold: &MolGraph, target_mw: f64) -> bool {
    target_mw >= molecular_weight(scaffold)
}
