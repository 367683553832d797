//! Sequential scaffold extension: the graph-building state machine, new
//! atom/bond initialization, isomer selection and generation.

pub mod build;
pub mod generate;
pub mod isomer;
pub mod transient;

pub use build::{
    build, pick, replay, Action, ActionKind, BuildAction, BuildOptions, BuildTrace, Policy,
    TraceStep, STOP_EDGE, STOP_NODE,
};
pub use generate::{decode, generate, Generated, GenerationRecord};
pub use isomer::{isomer_scores, select_isomer, strip_stereo};
pub use transient::{
    add_edge_probs, add_node_probs, init_edge, init_node, select_node_probs, NodeSelection,
    TransientGraph,
};
