//! Extends a running planning task with objects and object types discovered
//! at execution time.
//!
//! The pipeline builds an ontology from the task's type hierarchy, enriches
//! it with knowledge-graph annotations, filters a repository of candidate
//! ontologies by term-frequency cosine, picks the most detailed ontology that
//! knows the new object (semantic variance), positions the object's type via
//! a neighbourhood-constrained alignment, and validates candidate goals with
//! a built-in temporal planner inside a timed-event simulator.

pub mod config;
pub mod enrichment;
pub mod execution;
pub mod integration;
pub mod matching;
pub mod ontology;
pub mod par;
pub mod planner;
pub mod sexpr;
pub mod task;
pub mod text;
