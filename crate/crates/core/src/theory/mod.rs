//! Exhaustive and exact-solve checks of the decomposition's structural claims.

pub mod checks;
pub mod mdp;
pub mod micro;

pub use checks::{CheckReport, Scope, VerifyOptions, run_suite};
pub use mdp::TinyMdp;
pub use micro::{MicroInstance, Optimum, SequentialOptimum};
