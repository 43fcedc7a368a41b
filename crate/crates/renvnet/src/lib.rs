//! Product-form analysis of Jackson networks under randomized rerouting.
//!
//! The crate modifies the routing chain of a queueing network with two
//! randomized transforms — *skipping* (a rejected candidate state is
//! transited through instantaneously) and *reflection* (the walker stays
//! put for another slot) — and uses the resulting kernels to rescale
//! service capacities of Jackson networks, possibly driven by a random
//! environment, while keeping an exact product-form stationary
//! distribution. Everything is backed by balance-residual checks and
//! event-driven simulation.
//!
//! See the `book/` guide for worked walkthroughs; its code snippets are
//! compiled as doc-tests through the [`guide`] module.

pub mod capacity;
pub mod chain;
pub mod commands;
pub mod environment;
pub mod error;
pub mod generator;
pub mod jackson;
pub mod randomization;
pub mod report;
pub mod simulate;
pub mod spec;

pub use error::{Error, Result};

pub use nalgebra as na;
