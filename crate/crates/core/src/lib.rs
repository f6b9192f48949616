//! Compact per-vertex labelings for first-order queries on colored graphs.
//!
//! The crate builds logarithmic-size bit-string labels for the vertices of a
//! colored graph and answers queries — first-order formulas with vertex and
//! vertex-set arguments — from the labels alone. Every scheme comes with a
//! brute-force oracle so answers can be cross-validated end to end.
//!
//! Modules map onto the moving parts:
//!
//! * [`graph`] — the colored-graph data model and metric utilities,
//! * [`cwd`] — clique-width terms and their evaluation,
//! * [`logic`] — formulas, oracles, distance types and query plans,
//! * [`codec`] — bit-exact label/bundle/catalog encoding,
//! * [`labeler`] — per-piece labelers shared by the cover schemes,
//! * [`scheme`] — the five labeling pipelines,
//! * [`cover`] — graph covers, kernels and colorings,
//! * [`counting`] — counting and modulo-counting pipelines,
//! * [`gen`] — seeded graph generators,
//! * [`harness`] — cross-validation and label-growth measurement drivers.

pub mod codec;
pub mod counting;
pub mod cover;
pub mod cwd;
pub mod gen;
pub mod graph;
pub mod harness;
pub mod labeler;
pub mod logic;
pub mod scheme;

pub use codec::{Catalog, LabelBundle};
pub use graph::{ColoredGraph, EColor, Orientation, VColor, Vertex};
pub use logic::{Formula, QueryPlan};
