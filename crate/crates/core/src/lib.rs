//! Minimum expected distortion for Gaussian source coding when the decoder's
//! side information arrives over a fading channel that the encoder knows only
//! in distribution.
//!
//! The library covers three solution regimes:
//!
//! - [`twostate`]: the closed-form optimal rate split between a base and a
//!   top codeword layer when the side-information channel has two states;
//! - [`solver`]: the M-state expected-distortion minimization as a convex
//!   program solved by a primal-dual interior-point method, with a full KKT
//!   residual certifier and a brute-force oracle for small M;
//! - [`contfade`]: the single-layer construction for continuous quasiconcave
//!   fading distributions, with its dual certificate and the Rayleigh closed
//!   form.
//!
//! Supporting modules: [`model`] (domain types), [`hbrate`] (the layered
//! rate-distortion chain), [`discretize`] (pdf binning), and [`specfun`]
//! (self-contained special functions, quadrature, and root finding).
//!
//! Rates are in nats; all logarithms are natural.

// Validation deliberately writes `!(x > 0.0)` so NaNs fail closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contfade;
pub mod discretize;
pub mod hbrate;
pub mod model;
pub mod solver;
pub mod specfun;
pub mod twostate;

#[cfg(test)]
pub(crate) mod testutil;

pub use contfade::DistortionProfile;
pub use hbrate::VarianceChain;
pub use solver::{KktReport, SolverConfig};
pub use twostate::{ActiveBound, TwoStateSolution};

pub use model::{
    ContinuousFading, DiscreteFading, LayeredSolution, SingleLayerSolution, SourceModel,
};
