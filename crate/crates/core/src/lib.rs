//! Security auditing for LLM plugin stores.
//!
//! Three analysis layers run over a store corpus:
//! manifest exposure discovery ([`discovery`]), API authentication probing
//! ([`probe`]) and metadata consistency ([`consistency`]). OAuth scope risk
//! ([`scoperisk`]) and snapshot reporting/diffing ([`report`]) build on
//! their outputs.

pub mod canonical;
pub mod config;
pub mod consistency;
pub mod corpus;
pub mod discovery;
pub mod domain;
pub mod fetch;
pub mod manifest;
pub mod probe;
pub mod report;
pub mod scoperisk;
