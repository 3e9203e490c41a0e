//! Spectral simulator for the rescaled mean curvature flow of graphs over a round
//! cylinder `R^n × S^1`, with the modulation dynamics, the linearised spectrum,
//! and the fixed-point construction of the stable manifold.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fit;
pub mod frozen_solver;
pub mod integrator;
pub mod modulation;
pub mod nonlinearity;
pub mod quadrature;
pub mod rescaling;
pub mod spectral_operator;
pub mod stable_manifold;
pub mod weighted_space;

pub use error::{Error, Result};
pub use weighted_space::{SpectralField, Truncation};
