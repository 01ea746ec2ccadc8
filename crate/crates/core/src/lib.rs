//! Version age of information in gossip networks with distributed sensing.
//!
//! Three engines evaluate the stationary mean version age of a node subset:
//! an exact subset recursion ([`exact`]), O(n) profiles for symmetric
//! topologies ([`closed_form`]), and a discrete-event Poisson simulator
//! ([`simulator`]). [`experiments`] runs scaling sweeps and cross-checks on
//! top of them, and [`cli`] is the command-line front end.

pub mod cli;
pub mod closed_form;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod model;
pub mod numfmt;
pub mod simulator;

pub use error::{AoiError, Result};
pub use model::{NetworkSpec, NodeSubset};
