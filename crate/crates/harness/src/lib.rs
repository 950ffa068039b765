//! Experiment harness for the Anderson-model level statistics: strict JSON
//! configs, one runner per experiment and byte-deterministic output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;
pub mod selftest;
