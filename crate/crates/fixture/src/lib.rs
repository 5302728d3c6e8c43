//! Deterministic mock plugin store for offline audits.
//!
//! A [`FixturePlan`] lists store listings together with every document and
//! endpoint their hosts serve. [`generate_plan`] synthesizes plans with fixed
//! population targets per audit table, and [`serve_fixtures`]
//! runs one behind a single local HTTP listener.

pub mod generate;
pub mod plan;
pub mod server;

pub use generate::{generate_paper_plan, generate_plan};
pub use plan::{FixturePlan, FixturePlugin, PlanError, PlanProfile};
pub use server::{serve_fixtures, FixtureServer, ServeError};
