//! Degree- and joint-degree-preserving edge-swap chains, their analytic
//! per-edge mixing model, and statistical checks that sampled graphs are
//! independent.

pub mod diagnostics;
pub mod edge_model;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod rewire;

pub use error::{Error, Result};
pub use graph::{degree_profile, load_graph, DegreeProfile, Graph, LoadedGraph, Vertex};
pub use rewire::{run_chain, ChainStats, Mode, StepObserver, StepOutcome};
