//! Command-line and HTTP front ends over `argweave-core`.

pub mod cli;
pub mod engine;
pub mod render;
pub mod service;
