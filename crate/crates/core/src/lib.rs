//! Adaptive multilevel Monte Carlo finite elements for elliptic problems and
//! obstacle problems with random data.

pub mod error;
pub mod fem;
pub mod mesh;
pub mod problems;
pub mod solve;
pub mod estimate;
pub mod mlmc;
pub mod cli;
