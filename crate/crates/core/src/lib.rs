//! Joint channel assignment and power allocation for coexisting terrestrial
//! and non-terrestrial downlinks, learned with constrained multi-agent PPO over
//! subset resource blocks (SRBs).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom of this file pin the common instantiations.

pub mod baselines;
pub mod channel;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod partition;
pub mod rng;
pub mod scalar;
pub mod system;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Environment64 = env::Environment<f64>;
pub type Environment32 = env::Environment<f32>;
pub type Trainer64 = trainer::Trainer<f64>;
pub type Trainer32 = trainer::Trainer<f32>;
