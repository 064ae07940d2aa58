//! Signal generators, experiment runner and oracle suite behind the `bsft` CLI.

pub mod config;
pub mod generators;
pub mod experiment;
pub mod oracle_check;
