//! Threshold analysis for discrete Schrödinger operators `H = H₀ + V` on
//! graphs with half-line rays.
//!
//! The crate classifies the threshold `z = 0`, builds the generalized
//! eigenspaces with exact polynomial asymptotics, and computes the resolvent
//! expansion coefficients `G₋₂, G₋₁, G₀, G₁` along two independent routes.
//! A truncated-lattice solver checks the expansion numerically.

pub mod catalog;
pub mod expansion;
pub mod free;
pub mod graph;
pub mod linalg;
pub mod operator;
pub mod oracle;
pub mod perturbation;
pub mod scalar;
pub mod series;
pub mod threshold;
