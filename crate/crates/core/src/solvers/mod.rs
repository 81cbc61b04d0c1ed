//! Douglas-Rachford splitting, plain and over the graph of a linear map.

mod dr;
mod graph;

pub use dr::{
    douglas_rachford, dr_composite, CompositeDR, DRConfig, DRResult, DRState, Relaxation,
    StepDeltas, Trace, TraceEntry,
};
pub use graph::{build_graph_projector, project_graph, GraphProjector};
