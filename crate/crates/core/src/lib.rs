//! Exponential families in their three parameterizations (source, natural,
//! expectation), with Bregman divergences, entropies, maximum-likelihood and
//! conjugate-prior inference, and mixture modeling by Bregman soft and hard
//! clustering.

pub mod catalog;
pub mod divergences;
pub mod error;
pub mod family;
pub mod inference;
pub mod mixtures;
pub mod numerics;
pub mod special;

pub use catalog::{Family, Hyperparams};
pub use error::{Error, Result};
pub use family::{ExponentialFamily, Observation, ParamVector, Space};
