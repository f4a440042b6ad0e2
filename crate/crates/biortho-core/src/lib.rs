//! Determinantal point processes on `[0, +inf)` with two-particle interactions
//! `Delta(lambda) * Delta(lambda^theta) * prod w(lambda_j)`, `theta >= 1`.
//!
//! The crate provides:
//!
//! * arbitrary-precision bimoments `m_{jk} = int x^{k + j theta} w(x) dx`,
//!   Hankel determinants and partition functions ([`bimoments`]);
//! * the biorthogonal families `p_j`, `q_j`, the correlation kernel `K_n`,
//!   recurrence coefficients and the Christoffel-Darboux identity for
//!   rational `theta` ([`biorthogonal`]);
//! * the rational-power conformal maps whose level curves parametrize the
//!   support of the equilibrium measure ([`conformal`]);
//! * hard-edge and soft-edge one-cut equilibrium measures, their densities,
//!   edge constants and Euler-Lagrange verification ([`equilibrium`]);
//! * a Metropolis log-gas sampler for empirical validation ([`sampler`]).
//!
//! Bimoment/polynomial algebra runs on configurable-precision MPFR floats
//! (see [`numerics::PrecisionContext`]); the equilibrium layer runs on
//! hardware doubles, which the explicit map formulas keep well conditioned.

pub mod bimoments;
pub mod biorthogonal;
pub mod conformal;
pub mod equilibrium;
pub mod numerics;
pub mod potentials;

pub use bimoments::BimomentTable;
pub use biorthogonal::{BiorthogonalSystem, RecurrenceCoeffs, Theta};
pub use conformal::{ConformalMap, CriticalData, CurveSamples};
pub use equilibrium::{EdgeRegime, EquilibriumMeasure};
pub use numerics::{PrecisionContext, QuadratureSpec};
pub use potentials::{Potential, Weight};
