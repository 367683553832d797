//! The graph under construction and the per-step decoder modules.

use ndarray::Array2;

use crate::chem::element::{BondOrder, Element, NUM_BOND_ORDERS, NUM_ELEMENTS};
use crate::chem::{Atom, GraphError, MolGraph};
use crate::nets::{ActionHead, FeatureState, InitHead, Model, ModelError, RoundCache, Topology};
use crate::nn::{Tape, Var};

/// Transient graph `G_t`: scaffold atoms occupy the index prefix and are
/// never removed; `features` always cover exactly the current atoms/bonds.
#[derive(Clone, Debug)]
pub struct TransientGraph {
    pub graph: MolGraph,
    pub features: FeatureState,
    pub scaffold_size: usize,
    pub last_added: Option<usize>,
    /// Bond count at the moment `last_added` was appended.
    bonds_before_last: usize,
    /// Propagated pre-`w` node set, reused across one atom's edge steps.
    select_cache: Option<(usize, Var)>,
    /// First-round projections of the action heads.
    add_node_cache: RoundCache,
    add_edge_cache: RoundCache,
}

impl TransientGraph {
    /// Embeds the scaffold and runs the initial conditioned update.
    pub fn start(
        model: &Model,
        tape: &mut Tape,
        scaffold: &MolGraph,
        ytilde: Var,
    ) -> Result<Self, ModelError> {
        if tape.shape(ytilde).1 != model.ytilde_dim() {
            return Err(ModelError::ConditionLength {
                expected: model.ytilde_dim(),
                got: tape.shape(ytilde).1,
            });
        }
        let f = model.embed(tape, scaffold)?;
        let nodes =
            model
                .scaffold_init
                .forward(tape, f.nodes, f.edges, &Topology::of(scaffold), ytilde);
        Ok(Self {
            graph: scaffold.clone(),
            features: FeatureState {
                nodes,
                edges: f.edges,
            },
            scaffold_size: scaffold.num_atoms(),
            last_added: None,
            bonds_before_last: scaffold.num_bonds(),
            select_cache: None,
            add_node_cache: RoundCache::default(),
            add_edge_cache: RoundCache::default(),
        })
    }

    pub fn num_atoms(&self) -> usize {
        self.graph.num_atoms()
    }

    /// Existing atoms that may still bond to the last added atom.
    pub fn bondable(&self) -> Vec<usize> {
        match self.last_added {
            None => Vec::new(),
            Some(w) => (0..w)
                .filter(|&u| self.graph.bond_between(u, w).is_none())
                .collect(),
        }
    }
}

fn action_probs(
    tape: &mut Tape,
    t: &TransientGraph,
    zt: Var,
    head: &ActionHead,
    cache: &mut RoundCache,
) -> Var {
    let topo = Topology::of(&t.graph);
    let h =
        head.propagate
            .forward_cached(tape, t.features.nodes, t.features.edges, &topo, zt, cache);
    let r = head.readout.forward(tape, h);
    let logits = head.mlp.forward_parts(tape, &[r, zt]);
    tape.softmax_rows(logits)
}

/// Probabilities (1×9) over the atom types followed by STOP.
pub fn add_node_probs(model: &Model, tape: &mut Tape, t: &mut TransientGraph, zt: Var) -> Var {
    let mut cache = std::mem::take(&mut t.add_node_cache);
    let p = action_probs(tape, t, zt, &model.add_node, &mut cache);
    t.add_node_cache = cache;
    p
}

/// Probabilities (1×4) over the bond orders followed by STOP.
pub fn add_edge_probs(model: &Model, tape: &mut Tape, t: &mut TransientGraph, zt: Var) -> Var {
    let mut cache = std::mem::take(&mut t.add_edge_cache);
    let p = action_probs(tape, t, zt, &model.add_edge, &mut cache);
    t.add_edge_cache = cache;
    p
}

/// Partner distribution for the last added atom `w`.
#[derive(Clone, Debug)]
pub struct NodeSelection {
    /// Softmax (1×K) over `candidates`.
    pub probs: Var,
    /// Selectable atoms (not yet bonded to `w`), ascending.
    pub candidates: Vec<usize>,
    /// Number of atoms before `w`; the full vector has this length.
    pub width: usize,
}

impl NodeSelection {
    /// Full-length vector over atoms `0..w` with masked entries set to 0.
    pub fn full(&self, tape: &Tape) -> Vec<f64> {
        let p = tape.value(self.probs);
        let mut out = vec![0.0; self.width];
        for (k, &u) in self.candidates.iter().enumerate() {
            out[u] = p[[0, k]];
        }
        out
    }
}

/// Partner probabilities for `w`, or `None` when every earlier atom is
/// already bonded to it. Logits use the pre-`w` node set propagated once per
/// added atom, concatenated with the stored `h_w` and z̃.
pub fn select_node_probs(
    model: &Model,
    tape: &mut Tape,
    t: &mut TransientGraph,
    zt: Var,
    candidates: &[usize],
) -> Option<NodeSelection> {
    let w = t.last_added?;
    if candidates.is_empty() {
        return None;
    }
    let pre = match t.select_cache {
        Some((cached_w, h)) if cached_w == w => h,
        _ => {
            let idx: Vec<usize> = (0..w).collect();
            let nodes = tape.gather_rows(t.features.nodes, &idx);
            let eidx: Vec<usize> = (0..t.bonds_before_last).collect();
            let edges = tape.gather_rows(t.features.edges, &eidx);
            let topo = Topology::of_prefix(&t.graph, w, t.bonds_before_last);
            let h = model.select_node.forward(tape, nodes, edges, &topo, zt);
            t.select_cache = Some((w, h));
            h
        }
    };
    let hw = tape.gather_rows(t.features.nodes, &[w]);
    let hu = tape.gather_rows(pre, candidates);
    let logits = model.select_node_mlp.forward_parts(tape, &[hu, hw, zt]);
    let logits = tape.transpose(logits);
    Some(NodeSelection {
        probs: tape.softmax_rows(logits),
        candidates: candidates.to_vec(),
        width: w,
    })
}

fn one_hot(len: usize, i: usize) -> Array2<f64> {
    let mut a = Array2::zeros((1, len));
    a[[0, i]] = 1.0;
    a
}

fn init_vector(tape: &mut Tape, head: &InitHead, nodes: Var, kind: Array2<f64>) -> Var {
    let r = head.readout.forward(tape, nodes);
    let k = tape.constant(kind);
    let k = head.kind.forward(tape, k);
    head.combine.forward_parts(tape, &[r, k])
}

/// Appends a neutral atom of type `element` with its initialized feature.
pub fn init_node(
    model: &Model,
    tape: &mut Tape,
    t: &mut TransientGraph,
    element: Element,
) -> usize {
    let h = init_vector(
        tape,
        &model.init_node,
        t.features.nodes,
        one_hot(NUM_ELEMENTS, element.index()),
    );
    t.features.nodes = tape.stack(&[t.features.nodes, h]);
    let w = t.graph.add_atom(Atom::new(element));
    t.last_added = Some(w);
    t.bonds_before_last = t.graph.num_bonds();
    t.select_cache = None;
    w
}

/// Bonds `v` to the last added atom and appends the initialized edge feature.
pub fn init_edge(
    model: &Model,
    tape: &mut Tape,
    t: &mut TransientGraph,
    v: usize,
    order: BondOrder,
) -> Result<usize, GraphError> {
    let w = t.last_added.ok_or(GraphError::AtomOutOfRange(v))?;
    let id = t.graph.add_bond(v, w, order)?;
    let h = init_vector(
        tape,
        &model.init_edge,
        t.features.nodes,
        one_hot(NUM_BOND_ORDERS, order.index()),
    );
    t.features.edges = tape.stack(&[t.features.edges, h]);
    Ok(id)
}
