//! Bimoments `m_{jk} = int_0^inf x^{k + j theta} w(x) dx`, the Hankel-type
//! determinants `H_n` of their leading blocks, and the partition function
//! `Z_n = n! H_n`.

use std::fmt;

use rug::Float;

use crate::numerics::{self, NumericsError, PrecisionContext, QuadratureSpec};
use crate::potentials::Weight;

#[derive(Clone, Debug)]
pub enum BimomentError {
    Numerics(NumericsError),
    /// `H_n <= 0` at working precision. Positivity is guaranteed in exact
    /// arithmetic, so this signals precision exhaustion, never a value.
    NonPositive { n: usize },
    OutOfRange { n: usize, jmax: usize },
}

impl fmt::Display for BimomentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BimomentError::Numerics(e) => write!(f, "bimoment quadrature: {e}"),
            BimomentError::NonPositive { n } => {
                write!(f, "H_{n} <= 0 at working precision; raise mantissa_bits")
            }
            BimomentError::OutOfRange { n, jmax } => {
                write!(f, "order {n} exceeds table size jmax = {jmax}")
            }
        }
    }
}

impl std::error::Error for BimomentError {}

impl From<NumericsError> for BimomentError {
    fn from(e: NumericsError) -> Self {
        BimomentError::Numerics(e)
    }
}

/// Complete rectangular table of bimoments, `0 <= j, k <= jmax`.
///
/// Entries are cached at construction; determinants are recomputed per `n`
/// from the cached block. Raising `jmax` much beyond 30 at 256 bits needs
/// more mantissa (roughly 8-10 extra bits per extra degree).
#[derive(Clone, Debug)]
pub struct BimomentTable {
    pub theta: f64,
    pub weight: Weight,
    pub jmax: usize,
    pub ctx: PrecisionContext,
    entries: Vec<Vec<Float>>,
}

/// Single bimoment `m_{jk}`.
///
/// Uses the closed-form Gamma path for Laguerre-type weights
/// (`m_{jk} = Gamma(k + j theta + alpha + 1) / (n rho)^{k + j theta + alpha + 1}`),
/// quadrature otherwise.
pub fn bimoment(
    weight: &Weight,
    theta: f64,
    j: usize,
    k: usize,
    ctx: &PrecisionContext,
) -> Result<Float, BimomentError> {
    if let Some(rate) = weight.laguerre_rate() {
        Ok(laguerre_bimoment(weight.alpha, rate, theta, j, k, ctx))
    } else {
        bimoment_by_quadrature(weight, theta, j, k, ctx)
    }
}

fn exponent(theta: f64, j: usize, k: usize, alpha: f64, ctx: &PrecisionContext) -> Float {
    let bits = ctx.mantissa_bits;
    let mut e = Float::with_val(bits, theta);
    e *= j as u32;
    e += k as u32;
    e += Float::with_val(bits, alpha);
    e
}

fn laguerre_bimoment(
    alpha: f64,
    rate: f64,
    theta: f64,
    j: usize,
    k: usize,
    ctx: &PrecisionContext,
) -> Float {
    let bits = ctx.mantissa_bits;
    let e = exponent(theta, j, k, alpha, ctx);
    let gamma = (e.clone() + 1u32).gamma();
    let scale = Float::with_val(bits, rate).ln() * (e + 1u32);
    gamma / scale.exp()
}

/// `m_{jk}` by semiaxis quadrature of `x^{k + j theta} w(x)`.
pub fn bimoment_by_quadrature(
    weight: &Weight,
    theta: f64,
    j: usize,
    k: usize,
    ctx: &PrecisionContext,
) -> Result<Float, BimomentError> {
    let spec = QuadratureSpec::tanh_sinh(ctx.target_tol, ctx.target_tol);
    let e = exponent(theta, j, k, weight.alpha, ctx);
    let value = numerics::mp::integrate_semiaxis(
        |x| {
            // x^{k + j theta + alpha} e^{-n V(x)}; alpha folds into the power.
            let power = if e.is_zero() {
                Float::with_val(ctx.mantissa_bits, 1)
            } else {
                (x.clone().ln() * &e).exp()
            };
            let nv =
                weight.potential.eval_mp(x, 0) * Float::with_val(ctx.mantissa_bits, weight.n_scale);
            power * (-nv).exp()
        },
        &spec,
        ctx,
    )?;
    Ok(value)
}

impl BimomentTable {
    /// Builds the full `(jmax+1) x (jmax+1)` table.
    pub fn build(
        weight: Weight,
        theta: f64,
        jmax: usize,
        ctx: PrecisionContext,
    ) -> Result<Self, BimomentError> {
        assert!(theta >= 1.0, "theta must be >= 1");
        let mut entries = Vec::with_capacity(jmax + 1);
        for j in 0..=jmax {
            let mut row = Vec::with_capacity(jmax + 1);
            for k in 0..=jmax {
                row.push(bimoment(&weight, theta, j, k, &ctx)?);
            }
            entries.push(row);
        }
        Ok(Self {
            theta,
            weight,
            jmax,
            ctx,
            entries,
        })
    }

    pub fn entry(&self, j: usize, k: usize) -> &Float {
        &self.entries[j][k]
    }

    /// Determinant of the leading `n x n` block; must be positive.
    pub fn hankel_det(&self, n: usize) -> Result<Float, BimomentError> {
        if n > self.jmax + 1 {
            return Err(BimomentError::OutOfRange { n, jmax: self.jmax });
        }
        let block: Vec<Vec<Float>> = (0..n)
            .map(|j| (0..n).map(|k| self.entries[j][k].clone()).collect())
            .collect();
        let det = numerics::mp::det_lu(block, &self.ctx);
        if det <= 0 {
            return Err(BimomentError::NonPositive { n });
        }
        Ok(det)
    }

    /// `Z_n = n! H_n`.
    pub fn partition_function(&self, n: usize) -> Result<Float, BimomentError> {
        let h = self.hankel_det(n)?;
        let factorial = Float::with_val(self.ctx.mantissa_bits, n as u32 + 1).gamma();
        Ok(h * factorial)
    }

    /// CSV dump: `j,k,m_jk` with 40 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,k,m_jk\n");
        for j in 0..=self.jmax {
            for k in 0..=self.jmax {
                out.push_str(&format!(
                    "{},{},{}\n",
                    j,
                    k,
                    self.entries[j][k].to_string_radix(10, Some(40))
                ));
            }
        }
        out
    }
}
