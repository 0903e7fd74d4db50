//! Trace-driven SQL workload synthesis.
//!
//! A workload trace records per-query structural and runtime metrics (query
//! type, arrival time, join count, scanset, bytes read, a query fingerprint)
//! without any SQL text. This crate turns such a trace into a replayable SQL
//! workload over a user-supplied support database while preserving query
//! repetitions, scansets, arrival order and read/write interleaving.
//!
//! The main pieces are:
//!
//! * [`trace`]: parsing and canonicalizing traces.
//! * [`features`]: repetition annotation (QRR/SRR and their DML-aware
//!   variants), per-table scan-size estimates and temporal profiles.
//! * [`catalog`]: support-database statistics, the join graph, trace-to-schema
//!   table mapping and staging plans for `INSERT ... SELECT` synthesis.
//! * [`matching`]: synthesis by mapping trace entries onto a pool of
//!   existing benchmark queries.
//! * [`generation`]: synthesis of new SQL via join-graph walks and
//!   histogram-driven selectivity control.
//! * [`workload`]: the emitted workload format, the round-robin baseline and
//!   idle-gap compression.
//! * [`cache_sim`]: a DML-aware result-cache simulator.
//! * [`pipeline`]: end-to-end orchestration used by the command-line driver.

pub mod backend;
pub mod cache_sim;
pub mod catalog;
pub mod features;
pub mod generation;
pub mod matching;
pub mod pipeline;
pub mod sql;
pub mod trace;
pub mod workload;

mod digest;

pub use trace::{QueryType, TableId, TraceEntry, WorkloadTrace};
pub use workload::{Provenance, QueryFlag, SynthesisMode, SynthesizedQuery, Workload};
