//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

pub mod brute;
pub mod fd;
pub mod fixtures;
