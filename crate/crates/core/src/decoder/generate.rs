//! Whole-molecule generation from a scaffold and the output record format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::chem::{check_validity, parse_smiles, write_smiles, MolGraph, SmilesError};
use crate::nets::{Model, ModelError};
use crate::nn::{ParameterStore, Tape};

use super::build::{build, BuildOptions, BuildTrace, Policy, TraceStep};
use super::isomer::select_isomer;

/// One generated molecule with every decision that produced it (the last
/// step is the isomer choice).
#[derive(Clone, Debug)]
pub struct Generated {
    pub graph: MolGraph,
    pub trace: BuildTrace,
}

/// Decodes latent `z` into a molecule: build, then isomer selection.
#[allow(clippy::too_many_arguments)]
pub fn decode<R: Rng>(
    model: &Model,
    store: &ParameterStore,
    scaffold: &MolGraph,
    y: &[f64],
    y_s: &[f64],
    z: &[f64],
    rng: &mut R,
    policy: Policy,
    opts: BuildOptions,
) -> Result<Generated, ModelError> {
    let mut tape = Tape::new(store);
    let yt = model.ytilde(&mut tape, y, y_s)?;
    let zv = tape.row(z);
    let zt = model.ztilde(&mut tape, zv, yt);
    let (g, mut trace) = build(model, &mut tape, scaffold, yt, zt, rng, policy, opts)?;
    let (g, action) = select_isomer(model, &mut tape, &g, zt, rng, policy);
    trace.steps.push(TraceStep {
        action,
        truth: None,
    });
    Ok(Generated { graph: g, trace })
}

/// `n` independent draws `z ~ N(0, I)`, each decoded from `scaffold`.
/// Draw `i` uses its own stream of a generator seeded from `rng`, so results
/// do not depend on thread scheduling.
#[allow(clippy::too_many_arguments)]
pub fn generate<R: Rng>(
    model: &Model,
    store: &ParameterStore,
    scaffold: &MolGraph,
    y: &[f64],
    y_s: &[f64],
    rng: &mut R,
    n: usize,
    policy: Policy,
    opts: BuildOptions,
) -> Result<Vec<Generated>, ModelError> {
    if scaffold.is_empty() {
        return Err(ModelError::EmptyGraph);
    }
    let base: u64 = rng.random();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(base);
            r.set_stream(i as u64);
            let z: Vec<f64> = (0..model.config.latent_dim)
                .map(|_| r.sample(StandardNormal))
                .collect();
            decode(model, store, scaffold, y, y_s, &z, &mut r, policy, opts)
        })
        .collect()
}

/// One line of a generation output file.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub smiles: String,
    pub scaffold: String,
    pub targets: Vec<f64>,
    pub valid: bool,
}

impl GenerationRecord {
    pub fn new(g: &MolGraph, scaffold: &MolGraph, targets: &[f64]) -> Self {
        Self {
            smiles: write_smiles(g),
            scaffold: write_smiles(scaffold),
            targets: targets.to_vec(),
            valid: check_validity(g),
        }
    }

    /// `SMILES \t scaffold SMILES \t targets (comma-separated) \t 0|1`.
    pub fn to_line(&self) -> String {
        let targets: Vec<String> = self.targets.iter().map(|v| format!("{v}")).collect();
        format!(
            "{}\t{}\t{}\t{}",
            self.smiles,
            self.scaffold,
            targets.join(","),
            u8::from(self.valid)
        )
    }

    pub fn parse(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [smiles, scaffold, targets, valid] = fields[..] else {
            return Err(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            ));
        };
        let targets = if targets.is_empty() {
            Vec::new()
        } else {
            targets
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| format!("bad target `{t}`: {e}"))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        let valid = match valid.trim() {
            "1" => true,
            "0" => false,
            other => return Err(format!("bad validity flag `{other}`")),
        };
        Ok(Self {
            smiles: smiles.to_string(),
            scaffold: scaffold.to_string(),
            targets,
            valid,
        })
    }

    /// Re-parses the molecule; unparseable structures count as invalid.
    pub fn recompute_validity(&self) -> (Option<MolGraph>, bool) {
        match parse_smiles(&self.smiles) {
            Ok(g) => {
                let ok = check_validity(&g);
                (Some(g), ok)
            }
            Err(SmilesError::Valence { .. }) | Err(_) => (None, false),
        }
    }
}
