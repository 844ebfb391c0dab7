//! Full-law identification for graphical missing-data models.
//!
//! Given a DAG or ADMG over fully observed variables, potentially missing
//! variables, missingness indicators and their proxies, this crate decides
//! whether the full data law is identified from the observed data law
//! (colluding-path criterion), reconstructs identified laws through the
//! odds-ratio parameterization, and certifies non-identified ones with
//! counterexample pairs and Moebius parameter-count gaps.

pub mod cli;
pub mod fixing;
pub mod fixtures;
pub mod graph;
pub mod identification;
pub mod moebius;
pub mod odds_ratio;
pub mod oracle;
pub mod projection;
pub mod separation;

pub use graph::{parse_graph, render_graph, validate, MissingDataGraph, MixedGraph};
