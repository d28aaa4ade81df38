//! Rich vehicle routing by route generation and set partitioning.
//!
//! Candidate routes are generated per transport mode by consolidating orders
//! that share a lane ([`consolidation`]) and extending the resulting one-drop
//! routes with further stops ([`neighborhood`]). Every candidate passes the
//! validator in [`feasibility`]. The cheapest exact partition of the orders
//! into candidates is then found by branch and bound ([`sp`]). [`pipeline`]
//! ties these together under named presets.

pub mod consolidation;
pub mod feasibility;
pub mod geometry;
pub mod model;
pub mod neighborhood;
pub mod pipeline;
pub mod sp;
pub mod tools;
