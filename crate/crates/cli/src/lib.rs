//! Command implementations behind the `meshgcn` binary.

pub mod commands;
pub mod config;
pub mod ply;
