//! The sequential building loop: add atoms, then edges and partners for
//! each new atom, until STOP.

use rand::Rng;

use crate::chem::element::{BondOrder, Element, NUM_BOND_ORDERS, NUM_ELEMENTS};
use crate::chem::MolGraph;
use crate::nets::{Model, ModelError};
use crate::nn::{Tape, Var};

use super::transient::{
    add_edge_probs, add_node_probs, init_edge, init_node, select_node_probs, TransientGraph,
};

/// Index of STOP in the addNode vector.
pub const STOP_NODE: usize = NUM_ELEMENTS;
/// Index of STOP in the addEdge vector.
pub const STOP_EDGE: usize = NUM_BOND_ORDERS;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    Sample,
    Greedy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActionKind {
    AddNode,
    AddEdge,
    SelectNode,
    SelectIsomer,
}

/// One decision with the model's estimate. `choice` indexes `probs`;
/// for SelectNode, `probs` spans every atom before the new one (masked
/// entries are 0).
#[derive(Clone, Debug, PartialEq)]
pub struct BuildAction {
    pub kind: ActionKind,
    pub probs: Vec<f64>,
    pub choice: usize,
    /// STOP imposed by a limit rather than chosen by the model.
    pub forced: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub action: BuildAction,
    /// Ground-truth index under teacher forcing.
    pub truth: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuildTrace {
    pub steps: Vec<TraceStep>,
}

/// Ground-truth building step for teacher forcing; `None` payloads are STOP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    AddNode(Option<Element>),
    AddEdge(Option<BondOrder>),
    SelectNode(usize),
}

impl Action {
    pub fn kind(self) -> ActionKind {
        match self {
            Action::AddNode(_) => ActionKind::AddNode,
            Action::AddEdge(_) => ActionKind::AddEdge,
            Action::SelectNode(_) => ActionKind::SelectNode,
        }
    }

    /// Index into the action's probability vector.
    pub fn index(self) -> usize {
        match self {
            Action::AddNode(e) => e.map_or(STOP_NODE, Element::index),
            Action::AddEdge(b) => b.map_or(STOP_EDGE, BondOrder::index),
            Action::SelectNode(u) => u,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    pub max_added_atoms: usize,
    /// Mask bond orders and partners that would exceed maximum valence.
    pub valence_mask: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_added_atoms: 60,
            valence_mask: false,
        }
    }
}

/// Source of decisions for the building loop.
pub(crate) trait Chooser {
    /// Picks an index given the (masked, renormalized) probabilities.
    fn choose(&mut self, kind: ActionKind, probs: &[f64]) -> usize;
}

pub(crate) struct PolicyChooser<'r, R: Rng> {
    pub policy: Policy,
    pub rng: &'r mut R,
}

impl<R: Rng> Chooser for PolicyChooser<'_, R> {
    fn choose(&mut self, _kind: ActionKind, probs: &[f64]) -> usize {
        pick(probs, self.policy, self.rng)
    }
}

/// Argmax (first maximum) or a categorical draw.
pub fn pick<R: Rng>(probs: &[f64], policy: Policy, rng: &mut R) -> usize {
    match policy {
        Policy::Greedy => {
            let mut best = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = i;
                }
            }
            best
        }
        Policy::Sample => {
            let total: f64 = probs.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut last = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                last = i;
                if u < p {
                    return i;
                }
                u -= p;
            }
            last
        }
    }
}

/// Replays a fixed action list, failing loudly on divergence.
pub(crate) struct TeacherChooser<'a> {
    pub actions: &'a [Action],
    pub pos: usize,
}

impl Chooser for TeacherChooser<'_> {
    fn choose(&mut self, kind: ActionKind, _probs: &[f64]) -> usize {
        let a = self
            .actions
            .get(self.pos)
            .copied()
            .expect("action list exhausted");
        assert_eq!(
            a.kind(),
            kind,
            "teacher action {} has the wrong kind",
            self.pos
        );
        self.pos += 1;
        a.index()
    }
}

/// Probability var of a chosen entry (for losses); selection steps refer to
/// the candidate-restricted softmax.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ChosenProb {
    pub probs: Var,
    pub column: usize,
}

pub(crate) struct BuildRun {
    pub graph: TransientGraph,
    pub trace: BuildTrace,
    pub chosen: Vec<ChosenProb>,
}

fn renormalize(p: &mut [f64], keep: impl Fn(usize) -> bool) {
    for (i, x) in p.iter_mut().enumerate() {
        if !keep(i) {
            *x = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|x| *x /= s);
    }
}

/// Valence left before hydrogens are counted (scaffold hydrogens are given
/// up on substitution).
fn free_valence(g: &MolGraph, a: usize) -> i64 {
    let atom = g.atom(a);
    i64::from(atom.element.max_valence_charged(atom.charge)) - i64::from(g.bond_order_sum(a))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_build(
    model: &Model,
    tape: &mut Tape,
    scaffold: &MolGraph,
    ytilde: Var,
    zt: Var,
    chooser: &mut dyn Chooser,
    opts: BuildOptions,
    teacher: bool,
) -> Result<BuildRun, ModelError> {
    let mut t = TransientGraph::start(model, tape, scaffold, ytilde)?;
    let mut trace = BuildTrace::default();
    let mut chosen = Vec::new();
    let scaffold_h: Vec<u8> = scaffold.atoms().iter().map(|a| a.hydrogens).collect();
    let fv = |t: &TransientGraph, a: usize| free_valence(&t.graph, a);
    let mut added = 0usize;
    loop {
        let pv = add_node_probs(model, tape, &mut t, zt);
        let probs = tape.value(pv).row(0).to_vec();
        if !teacher && added >= opts.max_added_atoms {
            trace.steps.push(TraceStep {
                action: BuildAction {
                    kind: ActionKind::AddNode,
                    probs,
                    choice: STOP_NODE,
                    forced: true,
                },
                truth: None,
            });
            break;
        }
        let a = chooser.choose(ActionKind::AddNode, &probs);
        chosen.push(ChosenProb {
            probs: pv,
            column: a,
        });
        trace.steps.push(TraceStep {
            action: BuildAction {
                kind: ActionKind::AddNode,
                probs,
                choice: a,
                forced: false,
            },
            truth: teacher.then_some(a),
        });
        if a == STOP_NODE {
            break;
        }
        let element = Element::from_index(a).expect("atom index");
        let w = init_node(model, tape, &mut t, element);
        added += 1;
        loop {
            let ev = add_edge_probs(model, tape, &mut t, zt);
            let mut probs = tape.value(ev).row(0).to_vec();
            let bondable = t.bondable();
            if bondable.is_empty() && !teacher {
                trace.steps.push(TraceStep {
                    action: BuildAction {
                        kind: ActionKind::AddEdge,
                        probs,
                        choice: STOP_EDGE,
                        forced: true,
                    },
                    truth: None,
                });
                break;
            }
            if opts.valence_mask && !teacher {
                let free_w = fv(&t, w);
                let best_partner = bondable.iter().map(|&u| fv(&t, u)).max().unwrap_or(0);
                renormalize(&mut probs, |i| {
                    i == STOP_EDGE || ((i as i64) < free_w && (i as i64) < best_partner)
                });
            }
            let b = chooser.choose(ActionKind::AddEdge, &probs);
            chosen.push(ChosenProb {
                probs: ev,
                column: b,
            });
            trace.steps.push(TraceStep {
                action: BuildAction {
                    kind: ActionKind::AddEdge,
                    probs,
                    choice: b,
                    forced: false,
                },
                truth: teacher.then_some(b),
            });
            if b == STOP_EDGE {
                break;
            }
            let order = BondOrder::from_index(b).expect("bond index");
            let candidates: Vec<usize> = if opts.valence_mask && !teacher {
                let c: Vec<usize> = bondable
                    .iter()
                    .copied()
                    .filter(|&u| fv(&t, u) >= i64::from(order.valence()))
                    .collect();
                if c.is_empty() {
                    bondable.clone()
                } else {
                    c
                }
            } else {
                bondable.clone()
            };
            let sel = select_node_probs(model, tape, &mut t, zt, &candidates)
                .expect("nonempty candidates");
            let full = sel.full(tape);
            let u = chooser.choose(ActionKind::SelectNode, &full);
            let column = sel
                .candidates
                .iter()
                .position(|&c| c == u)
                .expect("chosen partner is selectable");
            chosen.push(ChosenProb {
                probs: sel.probs,
                column,
            });
            trace.steps.push(TraceStep {
                action: BuildAction {
                    kind: ActionKind::SelectNode,
                    probs: full,
                    choice: u,
                    forced: false,
                },
                truth: teacher.then_some(u),
            });
            init_edge(model, tape, &mut t, u, order).expect("partner is not yet bonded");
        }
    }
    finalize_hydrogens(&mut t.graph, &scaffold_h);
    Ok(BuildRun {
        graph: t,
        trace,
        chosen,
    })
}

/// Scaffold atoms give up one hydrogen per unit of added bond order; new
/// atoms get default-valence hydrogens.
pub(crate) fn finalize_hydrogens(g: &mut MolGraph, scaffold_h: &[u8]) {
    let s = scaffold_h.len();
    let mut added_order = vec![0u32; g.num_atoms()];
    for b in g.bonds() {
        if b.u >= s || b.v >= s {
            added_order[b.u] += b.order.valence();
            added_order[b.v] += b.order.valence();
        }
    }
    for a in 0..g.num_atoms() {
        g.atom_mut(a).hydrogens = if a < s {
            u32::from(scaffold_h[a]).saturating_sub(added_order[a]) as u8
        } else {
            g.default_hydrogens(a)
        };
    }
}

/// Builds one molecule from `scaffold` under the given policy.
#[allow(clippy::too_many_arguments)]
pub fn build<R: Rng>(
    model: &Model,
    tape: &mut Tape,
    scaffold: &MolGraph,
    ytilde: Var,
    zt: Var,
    rng: &mut R,
    policy: Policy,
    opts: BuildOptions,
) -> Result<(MolGraph, BuildTrace), ModelError> {
    let mut chooser = PolicyChooser { policy, rng };
    let run = run_build(model, tape, scaffold, ytilde, zt, &mut chooser, opts, false)?;
    Ok((run.graph.graph, run.trace))
}

/// Rebuilds a graph from a ground-truth action list without consulting the
/// model (structure only).
pub fn replay(scaffold: &MolGraph, actions: &[Action]) -> Option<MolGraph> {
    let mut g = scaffold.clone();
    let mut w = None;
    let mut pending: Option<BondOrder> = None;
    for &a in actions {
        match a {
            Action::AddNode(None) => break,
            Action::AddNode(Some(e)) => {
                w = Some(g.add_atom(crate::chem::Atom::new(e)));
            }
            Action::AddEdge(None) => pending = None,
            Action::AddEdge(Some(b)) => pending = Some(b),
            Action::SelectNode(u) => {
                g.add_bond(u, w?, pending.take()?).ok()?;
            }
        }
    }
    let scaffold_h: Vec<u8> = scaffold.atoms().iter().map(|a| a.hydrogens).collect();
    finalize_hydrogens(&mut g, &scaffold_h);
    Some(g)
}
