//! Conditioned message passing and gated readout.

use rand::Rng;

use crate::nn::{GruCell, Linear, NnError, ParameterStore, Tape, Var};

use super::features::Topology;

/// One propagation round: message layer over `concat(h_u, h_v, h_uv, c)`
/// followed by a GRU update of every node.
#[derive(Clone, Debug)]
pub struct PropagateRound {
    pub message: Linear,
    pub gru: GruCell,
}

/// `k` rounds with distinct parameters, named `<prefix>.<round>.*`.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub rounds: Vec<PropagateRound>,
    pub hidden: usize,
    pub cond: usize,
}

impl Propagation {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        prefix: &str,
        rounds: usize,
        hidden: usize,
        cond: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let rounds = (0..rounds)
            .map(|r| {
                Ok(PropagateRound {
                    message: Linear::new(
                        store,
                        &format!("{prefix}.{r}.message"),
                        3 * hidden + cond,
                        hidden,
                        rng,
                    )?,
                    gru: GruCell::new(store, &format!("{prefix}.{r}.gru"), hidden, hidden, rng)?,
                })
            })
            .collect::<Result<Vec<_>, NnError>>()?;
        Ok(Self {
            rounds,
            hidden,
            cond,
        })
    }

    pub fn bind(store: &ParameterStore, prefix: &str) -> Result<Self, NnError> {
        let mut rounds = Vec::new();
        while store
            .id(&format!("{prefix}.{}.message.weight", rounds.len()))
            .is_some()
        {
            let r = rounds.len();
            rounds.push(PropagateRound {
                message: Linear::bind(store, &format!("{prefix}.{r}.message"))?,
                gru: GruCell::bind(store, &format!("{prefix}.{r}.gru"))?,
            });
        }
        let first = rounds
            .first()
            .ok_or_else(|| NnError::MissingParameter(format!("{prefix}.0.message.weight")))?;
        let hidden = first.gru.dim;
        let cond = first
            .message
            .in_dim
            .checked_sub(3 * hidden)
            .ok_or_else(|| {
                NnError::Shape(format!("{prefix}: message input narrower than 3·hidden"))
            })?;
        Ok(Self {
            rounds,
            hidden,
            cond,
        })
    }

    /// Runs every round on node matrix `nodes` (N×h) with edge matrix
    /// `edges` (E×h, unchanged) and condition row `cond` (1×c).
    pub fn forward(
        &self,
        tape: &mut Tape,
        nodes: Var,
        edges: Var,
        topo: &Topology,
        cond: Var,
    ) -> Var {
        self.forward_cached(tape, nodes, edges, topo, cond, &mut RoundCache::default())
    }

    /// Runs every round; the first round reuses `cache` (see
    /// [`PropagateRound::forward_cached`]).
    pub fn forward_cached(
        &self,
        tape: &mut Tape,
        nodes: Var,
        edges: Var,
        topo: &Topology,
        cond: Var,
        cache: &mut RoundCache,
    ) -> Var {
        assert_eq!(
            tape.shape(cond).1,
            self.cond,
            "propagate: condition length mismatch"
        );
        let mut h = nodes;
        for (r, round) in self.rounds.iter().enumerate() {
            h = if r == 0 {
                round.forward_cached(tape, h, edges, topo, cond, cache)
            } else {
                round.forward(tape, h, edges, topo, cond)
            };
        }
        h
    }
}

/// Per-node and per-edge products of a first round that depend only on the
/// round's inputs. Inputs that only grow by appended rows (as in the
/// decoder's transient graph) reuse the cached rows.
#[derive(Clone, Debug, Default)]
pub struct RoundCache {
    nodes: usize,
    edges: usize,
    node_proj: Option<(Var, Var, Var)>,
    edge_proj: Option<Var>,
}

fn extend(
    tape: &mut Tape,
    cached: Option<Var>,
    input: Var,
    from: usize,
    project: impl FnOnce(&mut Tape, Var) -> Var,
) -> Var {
    let rows = tape.shape(input).0;
    match cached {
        Some(c) if from == rows => c,
        Some(c) => {
            let idx: Vec<usize> = (from..rows).collect();
            let fresh = tape.gather_rows(input, &idx);
            let p = project(tape, fresh);
            tape.stack(&[c, p])
        }
        None => project(tape, input),
    }
}

impl PropagateRound {
    pub fn forward(
        &self,
        tape: &mut Tape,
        nodes: Var,
        edges: Var,
        topo: &Topology,
        cond: Var,
    ) -> Var {
        self.forward_cached(tape, nodes, edges, topo, cond, &mut RoundCache::default())
    }

    /// As [`PropagateRound::forward`], reusing projections of the leading
    /// rows of `nodes`/`edges` seen by earlier calls with the same cache.
    /// The caller guarantees those rows are unchanged.
    pub fn forward_cached(
        &self,
        tape: &mut Tape,
        nodes: Var,
        edges: Var,
        topo: &Topology,
        cond: Var,
        cache: &mut RoundCache,
    ) -> Var {
        let hid = self.gru.dim;
        let w = tape.param(self.message.weight);
        let b = tape.param(self.message.bias);
        // Project once per node/edge, then gather per directed message.
        let (n_from, e_from) = (cache.nodes, cache.edges);
        let old = cache.node_proj;
        let p_src = extend(tape, old.map(|o| o.0), nodes, n_from, |t, x| {
            t.matmul_rows(x, w, 0)
        });
        let p_dst = extend(tape, old.map(|o| o.1), nodes, n_from, |t, x| {
            t.matmul_rows(x, w, hid)
        });
        let gh = extend(tape, old.map(|o| o.2), nodes, n_from, |t, x| {
            self.gru.project_hidden(t, x)
        });
        let p_edge = extend(tape, cache.edge_proj, edges, e_from, |t, x| {
            t.matmul_rows(x, w, 2 * hid)
        });
        *cache = RoundCache {
            nodes: tape.shape(nodes).0,
            edges: tape.shape(edges).0,
            node_proj: Some((p_src, p_dst, gh)),
            edge_proj: Some(p_edge),
        };
        let shared = if tape.shape(cond).1 > 0 {
            let pc = tape.matmul_rows(cond, w, 3 * hid);
            tape.add(pc, b)
        } else {
            b
        };
        let m_src = tape.gather_rows(p_src, &topo.src);
        let m_dst = tape.gather_rows(p_dst, &topo.dst);
        let m_edge = tape.gather_rows(p_edge, &topo.edge);
        let m = tape.add(m_src, m_dst);
        let m = tape.add(m, m_edge);
        let m = tape.add_row(m, shared);
        let m = tape.relu(m);
        let agg = tape.scatter_add_rows(m, &topo.dst, topo.num_nodes);
        self.gru.forward_projected(tape, agg, nodes, gh)
    }
}

/// `(1/|V|) Σ_v σ(gate(h_v)) ⊙ value(h_v)`.
#[derive(Clone, Debug)]
pub struct Readout {
    pub gate: Linear,
    pub value: Linear,
}

impl Readout {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        prefix: &str,
        hidden: usize,
        out: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Ok(Self {
            gate: Linear::new(store, &format!("{prefix}.gate"), hidden, out, rng)?,
            value: Linear::new(store, &format!("{prefix}.value"), hidden, out, rng)?,
        })
    }

    pub fn bind(store: &ParameterStore, prefix: &str) -> Result<Self, NnError> {
        Ok(Self {
            gate: Linear::bind(store, &format!("{prefix}.gate"))?,
            value: Linear::bind(store, &format!("{prefix}.value"))?,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.value.out_dim
    }

    pub fn forward(&self, tape: &mut Tape, nodes: Var) -> Var {
        assert!(tape.shape(nodes).0 > 0, "readout of an empty node set");
        let gate = self.gate.forward(tape, nodes);
        let gate = tape.sigmoid(gate);
        let value = self.value.forward(tape, nodes);
        let gated = tape.mul(gate, value);
        tape.mean_rows(gated)
    }
}
