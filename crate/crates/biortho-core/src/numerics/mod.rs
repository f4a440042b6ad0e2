//! Shared numerical kernels.
//!
//! Two layers live here: [`mp`] holds arbitrary-precision quadrature and
//! linear algebra for the moment/polynomial work, [`quad`] and [`roots`]
//! hold the hardware-double quadrature and solvers used by the equilibrium
//! layer. Everything is a pure function of its inputs.

pub mod mp;
pub mod quad;
pub mod roots;

use std::fmt;

use rug::Float;

pub use quad::{integrate_log_singular, integrate_semiaxis_f64, tanh_sinh_f64};
pub use roots::{find_root_monotone, newton_complex, solve_2d};

/// Precision regime for the arbitrary-precision layer.
///
/// All MPFR arithmetic performed under a given context is reproducible;
/// `target_tol` is the accuracy the quadrature routines aim for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionContext {
    pub mantissa_bits: u32,
    pub target_tol: f64,
}

impl PrecisionContext {
    pub fn new(mantissa_bits: u32, target_tol: f64) -> Self {
        assert!(mantissa_bits >= 64, "mantissa_bits must be >= 64");
        assert!(target_tol > 0.0);
        Self {
            mantissa_bits,
            target_tol,
        }
    }

    /// Default context for moment algebra: 256 bits, 1e-30 target.
    pub fn moments() -> Self {
        Self::new(256, 1e-30)
    }

    /// Context for double-precision-grade work expressed through the same API.
    pub fn equilibrium() -> Self {
        Self::new(64, 1e-12)
    }

    pub fn big(&self, v: f64) -> Float {
        Float::with_val(self.mantissa_bits, v)
    }

    pub fn big_int(&self, v: i64) -> Float {
        Float::with_val(self.mantissa_bits, v)
    }

    /// Machine epsilon of the context.
    pub fn eps(&self) -> Float {
        let mut e = Float::with_val(self.mantissa_bits, 1u32);
        e >>= self.mantissa_bits - 1;
        e
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self::moments()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadScheme {
    GaussLegendrePanels,
    TanhSinh,
    GaussLaguerre,
}

/// Quadrature request: scheme plus resolution and tolerances.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    pub scheme: QuadScheme,
    pub panel_count: usize,
    pub points_per_panel: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl QuadratureSpec {
    pub fn tanh_sinh(abs_tol: f64, rel_tol: f64) -> Self {
        assert!(abs_tol > 0.0 && rel_tol > 0.0);
        Self {
            scheme: QuadScheme::TanhSinh,
            panel_count: 1,
            points_per_panel: 0,
            abs_tol,
            rel_tol,
        }
    }

    pub fn gauss_legendre(panel_count: usize, points_per_panel: usize, abs_tol: f64) -> Self {
        assert!(panel_count >= 1);
        Self {
            scheme: QuadScheme::GaussLegendrePanels,
            panel_count,
            points_per_panel,
            abs_tol,
            rel_tol: abs_tol,
        }
    }

    pub fn gauss_laguerre(points: usize, abs_tol: f64) -> Self {
        Self {
            scheme: QuadScheme::GaussLaguerre,
            panel_count: 1,
            points_per_panel: points,
            abs_tol,
            rel_tol: abs_tol,
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::tanh_sinh(1e-30, 1e-30)
    }
}

/// Errors raised by the numerical kernels.
#[derive(Clone, Debug, PartialEq)]
pub enum NumericsError {
    /// Quadrature error estimate failed to shrink across refinement; the
    /// integrand likely violates the stated decay/singularity assumptions.
    NonConvergence {
        what: &'static str,
        achieved: f64,
        required: f64,
    },
    /// No sign change found after bounded geometric bracket expansion.
    BracketFailure { lo: f64, hi: f64 },
    /// Iterative solver ran out of iterations.
    NoConvergence { what: &'static str, iterations: usize },
    /// |f'| collapsed during Newton iteration (near a critical point).
    DegenerateDerivative,
}

impl fmt::Display for NumericsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericsError::NonConvergence {
                what,
                achieved,
                required,
            } => write!(
                f,
                "{what}: error estimate {achieved:.3e} did not reach {required:.3e}"
            ),
            NumericsError::BracketFailure { lo, hi } => {
                write!(f, "no sign change in [{lo:.6e}, {hi:.6e}] after expansion")
            }
            NumericsError::NoConvergence { what, iterations } => {
                write!(f, "{what}: no convergence after {iterations} iterations")
            }
            NumericsError::DegenerateDerivative => {
                write!(f, "derivative magnitude collapsed during Newton iteration")
            }
        }
    }
}

impl std::error::Error for NumericsError {}
