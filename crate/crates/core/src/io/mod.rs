//! Inputs, outputs and the campaign runner.

pub mod config;
pub mod logs;
pub mod properties;
pub mod summary;
pub mod xml;
