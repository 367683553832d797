//! Stereoisomer scoring and selection.

use ndarray::{concatenate, Array2, Axis};
use rand::Rng;

use crate::chem::canon::symmetry_classes_with;
use crate::chem::rings::perceive_aromaticity;
use crate::chem::stereo::enumerate_stereoisomers_with;
use crate::chem::{DoubleBondConfig, MolGraph, Parity};
use crate::nets::features::raw_features_with;
use crate::nets::{Model, Topology};
use crate::nn::{Tape, Var};

use super::build::{pick, ActionKind, BuildAction, Policy};

/// Copy of `g` without any stereo annotation.
pub fn strip_stereo(g: &MolGraph) -> MolGraph {
    let mut out = g.clone();
    for a in 0..out.num_atoms() {
        out.atom_mut(a).parity = Parity::None;
    }
    for b in 0..out.num_bonds() {
        out.bond_mut(b).config = DoubleBondConfig::None;
    }
    out
}

/// Raw sigmoid scores (K×1) of `isomers`, which must share one
/// constitution. All isomers are embedded and propagated as one disjoint
/// union, then mean-pooled per isomer.
pub fn isomer_scores(model: &Model, tape: &mut Tape, isomers: &[MolGraph], zt: Var) -> Var {
    assert!(!isomers.is_empty(), "no isomers to score");
    let (aromatic, aromatic_bonds) = perceive_aromaticity(&isomers[0]);
    let classes = symmetry_classes_with(&isomers[0], &aromatic_bonds);
    isomer_scores_with(model, tape, isomers, zt, &classes, &aromatic)
}

fn isomer_scores_with(
    model: &Model,
    tape: &mut Tape,
    isomers: &[MolGraph],
    zt: Var,
    classes: &[u32],
    aromatic: &[bool],
) -> Var {
    let (n, e) = (isomers[0].num_atoms(), isomers[0].num_bonds());
    let k = isomers.len();
    let raws: Vec<(Array2<f64>, Array2<f64>)> = isomers
        .iter()
        .map(|g| raw_features_with(g, classes, aromatic))
        .collect();
    let nodes = concatenate(
        Axis(0),
        &raws.iter().map(|r| r.0.view()).collect::<Vec<_>>(),
    )
    .expect("equal widths");
    let edges = concatenate(
        Axis(0),
        &raws.iter().map(|r| r.1.view()).collect::<Vec<_>>(),
    )
    .expect("equal widths");
    let f = model.embed_raw(tape, nodes, edges);
    let topo = Topology::of(&isomers[0]).repeated(k, e);
    let h = model
        .select_isomer
        .forward(tape, f.nodes, f.edges, &topo, zt);
    let mut pool = Array2::zeros((k, k * n));
    for i in 0..k {
        pool.slice_mut(ndarray::s![i, i * n..(i + 1) * n])
            .fill(1.0 / n as f64);
    }
    let pool = tape.constant(pool);
    let hi = tape.matmul(pool, h);
    let logits = model.select_isomer_mlp.forward_parts(tape, &[hi, zt]);
    tape.sigmoid(logits)
}

/// Chooses a stereoisomer of `g` (existing annotations are discarded and
/// reassigned). Scores are normalized by their sum before picking.
pub fn select_isomer<R: Rng>(
    model: &Model,
    tape: &mut Tape,
    g: &MolGraph,
    zt: Var,
    rng: &mut R,
    policy: Policy,
) -> (MolGraph, BuildAction) {
    if g.is_empty() {
        let action = BuildAction {
            kind: ActionKind::SelectIsomer,
            probs: vec![1.0],
            choice: 0,
            forced: false,
        };
        return (g.clone(), action);
    }
    let plain = strip_stereo(g);
    let (aromatic, aromatic_bonds) = perceive_aromaticity(&plain);
    let classes = symmetry_classes_with(&plain, &aromatic_bonds);
    let isomers = enumerate_stereoisomers_with(&plain, &classes);
    if isomers.len() == 1 {
        let action = BuildAction {
            kind: ActionKind::SelectIsomer,
            probs: vec![1.0],
            choice: 0,
            forced: false,
        };
        return (isomers.into_iter().next().expect("one"), action);
    }
    let scores = isomer_scores_with(model, tape, &isomers, zt, &classes, &aromatic);
    let raw: Vec<f64> = tape.value(scores).column(0).to_vec();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let choice = pick(&probs, policy, rng);
    let action = BuildAction {
        kind: ActionKind::SelectIsomer,
        probs,
        choice,
        forced: false,
    };
    (isomers.into_iter().nth(choice).expect("in range"), action)
}
