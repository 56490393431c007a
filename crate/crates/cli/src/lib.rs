//! Experiment harness around the `qadv` library: dataset caching, roster
//! training, attack campaigns, bound queries and run reports.

pub mod commands;
pub mod config;
pub mod csv;
