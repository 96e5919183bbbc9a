//! Lie algebroid calculus, prolongations and symplectic reduction on
//! single-chart models.

pub mod algebroid;
pub mod cli;
pub mod config;
pub mod fixtures;
pub mod hamiltonian;
pub mod liegroup;
pub mod lifts;
pub mod linalg;
pub mod model;
pub mod prolong;
pub mod reduce;
pub mod report;
pub mod sampling;
pub mod symexpr;
