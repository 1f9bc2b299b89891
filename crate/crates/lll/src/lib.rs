//! A solver engine for constraint systems given as "bad events" over
//! mutually independent finite random variables.
//!
//! The engine repeatedly resamples the variables of violated events until
//! none remains, in three flavors: sequential, parallel (per-round maximal
//! independent sets), and fully deterministic (witness-tree enumeration plus
//! the method of conditional expectations). A witness-tree lab reconstructs
//! justification trees from execution logs, replays them against the same
//! random source, and scores them under a multitype branching process, which
//! lets the test suite verify the expected-resample guarantees empirically.

pub mod apps;
pub mod criteria;
pub mod derand;
pub mod io;
pub mod model;
pub mod parallel;
pub mod sample;
pub mod sequential;
pub mod witness;

pub use model::{
    build_dependency_graph, build_lopsidependency_graph, detect_lopsidependent, violated_events,
    Assignment, DependencyGraph, EventId, EventSpec, GraphKind, ModelError, ProblemInstance,
    VarId, VariableSpec,
};
