//! Quantum circuit-like learning: classical predictors that mimic a
//! variational quantum circuit by count-sketching the exponentially large
//! tensor-product feature map, together with an exact statevector reference
//! implementation, training utilities and experiment drivers.

// negated float comparisons are used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod experiments;
pub mod optimize;
pub mod qcl_ref;
pub mod qcll;
pub mod rng;
pub mod sketch;
pub mod spectral;

pub use error::{Error, Result};
