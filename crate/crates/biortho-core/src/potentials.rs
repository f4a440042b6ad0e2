//! External fields `V` and weights `w(x) = x^alpha e^{-n V(x)}`.

use std::fmt;
use std::sync::Arc;

use rug::Float;

/// Callback triple for a user-supplied potential: `V`, `V'`, `V''`.
pub type PotentialCallbacks = (
    Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    Arc<dyn Fn(f64) -> f64 + Send + Sync>,
);

/// The external field `V`. Two continuous derivatives are assumed.
///
/// Polynomial kinds evaluate exactly at any precision; `Custom` potentials
/// are evaluated through their f64 callbacks and lifted, so their
/// arbitrary-precision moments are only f64-accurate.
#[derive(Clone)]
pub enum Potential {
    /// Coefficients in ascending powers; must be non-empty.
    Polynomial(Vec<f64>),
    /// `V(x) = rho x`.
    Linear { rho: f64 },
    /// `V(x) = tau x^2 + rho x` with `tau > 0`.
    Quadratic { tau: f64, rho: f64 },
    Custom(PotentialCallbacks),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            Potential::Linear { rho } => write!(f, "Linear {{ rho: {rho} }}"),
            Potential::Quadratic { tau, rho } => {
                write!(f, "Quadratic {{ tau: {tau}, rho: {rho} }}")
            }
            Potential::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Potential {
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial coefficient list is empty");
        Potential::Polynomial(coeffs)
    }

    pub fn linear(rho: f64) -> Self {
        Potential::Linear { rho }
    }

    pub fn quadratic(tau: f64, rho: f64) -> Self {
        assert!(tau > 0.0, "quadratic potential needs tau > 0");
        Potential::Quadratic { tau, rho }
    }

    /// `V`, `V'` or `V''` at `x`; exact differentiation for polynomial kinds.
    pub fn eval(&self, x: f64, order: u8) -> f64 {
        assert!(order <= 2);
        match self {
            Potential::Polynomial(coeffs) => poly_derivative_eval(coeffs, x, order),
            Potential::Linear { rho } => match order {
                0 => rho * x,
                1 => *rho,
                _ => 0.0,
            },
            Potential::Quadratic { tau, rho } => match order {
                0 => tau * x * x + rho * x,
                1 => 2.0 * tau * x + rho,
                _ => 2.0 * tau,
            },
            Potential::Custom((v, dv, ddv)) => match order {
                0 => v(x),
                1 => dv(x),
                _ => ddv(x),
            },
        }
    }

    /// Arbitrary-precision evaluation; `Custom` kinds round-trip through f64.
    pub fn eval_mp(&self, x: &Float, order: u8) -> Float {
        let bits = x.prec();
        match self {
            Potential::Polynomial(coeffs) => {
                let lifted = derivative_coeffs(coeffs, order);
                let mut acc = Float::with_val(bits, 0);
                for &c in lifted.iter().rev() {
                    acc *= x;
                    acc += c;
                }
                acc
            }
            Potential::Linear { .. } | Potential::Quadratic { .. } => {
                let coeffs = self.as_poly_coeffs();
                let lifted = derivative_coeffs(&coeffs, order);
                let mut acc = Float::with_val(bits, 0);
                for &c in lifted.iter().rev() {
                    acc *= x;
                    acc += c;
                }
                acc
            }
            Potential::Custom(_) => Float::with_val(bits, self.eval(x.to_f64(), order)),
        }
    }

    fn as_poly_coeffs(&self) -> Vec<f64> {
        match self {
            Potential::Polynomial(c) => c.clone(),
            Potential::Linear { rho } => vec![0.0, *rho],
            Potential::Quadratic { tau, rho } => vec![0.0, *rho, *tau],
            Potential::Custom(_) => unreachable!(),
        }
    }
}

fn derivative_coeffs(coeffs: &[f64], order: u8) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    for _ in 0..order {
        c = c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, v)| k as f64 * v)
            .collect();
        if c.is_empty() {
            c.push(0.0);
        }
    }
    c
}

fn poly_derivative_eval(coeffs: &[f64], x: f64, order: u8) -> f64 {
    let c = derivative_coeffs(coeffs, order);
    let mut acc = 0.0;
    for &v in c.iter().rev() {
        acc = acc * x + v;
    }
    acc
}

/// Result of probing the growth condition `V(x)/log x -> +inf`.
#[derive(Clone, Debug)]
pub struct GrowthReport {
    pub passes: bool,
    /// `V(x)/log x` at the probe points beyond `x > 1`.
    pub ratios: Vec<(f64, f64)>,
}

/// Heuristic check of the growth condition on a finite probe grid: the
/// ratio `V(x)/log x` must be increasing over the tail of the grid and
/// exceed a fixed threshold at the end. Not a proof, by construction.
pub fn check_growth(v: &Potential, probe_grid: &[f64]) -> GrowthReport {
    let ratios: Vec<(f64, f64)> = probe_grid
        .iter()
        .filter(|&&x| x > 1.5)
        .map(|&x| (x, v.eval(x, 0) / x.ln()))
        .collect();
    if ratios.len() < 3 {
        return GrowthReport {
            passes: false,
            ratios,
        };
    }
    let tail = &ratios[ratios.len() - ratios.len() / 2..];
    let increasing = tail.windows(2).all(|w| w[1].1 > w[0].1);
    let passes = increasing && tail.last().unwrap().1 > 2.0;
    GrowthReport { passes, ratios }
}

/// Default log-spaced probe grid, 1e-6 .. 1e6.
pub fn default_grid() -> Vec<f64> {
    let n = 2000;
    (0..n)
        .map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// One-cut hard-edge sufficient conditions checked on a grid:
/// (i) `V''(x) x + V'(x) > 0`, (ii) `V''(x) >= 0`.
#[derive(Clone, Debug)]
pub struct OneCutReport {
    pub cond_i: bool,
    pub cond_ii: bool,
    pub first_violation: Option<f64>,
}

pub fn check_one_cut_hard_conditions(v: &Potential, grid: &[f64]) -> OneCutReport {
    let mut cond_i = true;
    let mut cond_ii = true;
    let mut first_violation = None;
    for &x in grid.iter().filter(|&&x| x > 0.0) {
        let vi = v.eval(x, 2) * x + v.eval(x, 1);
        let vii = v.eval(x, 2);
        if vi <= 0.0 && cond_i {
            cond_i = false;
            first_violation.get_or_insert(x);
        }
        if vii < 0.0 && cond_ii {
            cond_ii = false;
            first_violation.get_or_insert(x);
        }
    }
    OneCutReport {
        cond_i,
        cond_ii,
        first_violation,
    }
}

/// The weight `w(x) = x^alpha e^{-n V(x)}`, `alpha > -1`.
#[derive(Clone, Debug)]
pub struct Weight {
    pub alpha: f64,
    pub n_scale: u32,
    pub potential: Potential,
}

impl Weight {
    pub fn new(alpha: f64, n_scale: u32, potential: Potential) -> Self {
        assert!(alpha > -1.0, "weight needs alpha > -1");
        assert!(n_scale >= 1);
        Self {
            alpha,
            n_scale,
            potential,
        }
    }

    /// The Laguerre weight `e^{-x}`.
    pub fn laguerre() -> Self {
        Self::new(0.0, 1, Potential::linear(1.0))
    }

    pub fn log_eval(&self, x: f64) -> f64 {
        debug_assert!(x > 0.0);
        self.alpha * x.ln() - self.n_scale as f64 * self.potential.eval(x, 0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return if self.alpha == 0.0 {
                (-(self.n_scale as f64) * self.potential.eval(0.0, 0)).exp()
            } else if self.alpha > 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
        }
        self.log_eval(x).exp()
    }

    pub fn eval_mp(&self, x: &Float) -> Float {
        let bits = x.prec();
        let mut log_w = Float::with_val(bits, 0);
        if self.alpha != 0.0 {
            log_w += x.clone().ln() * Float::with_val(bits, self.alpha);
        }
        log_w -= self.potential.eval_mp(x, 0) * Float::with_val(bits, self.n_scale);
        log_w.exp()
    }

    /// True when the weight is exactly `x^alpha e^{-lambda x}` (linear `V`),
    /// which admits the closed-form Gamma moments.
    pub fn laguerre_rate(&self) -> Option<f64> {
        match self.potential {
            Potential::Linear { rho } if rho > 0.0 => Some(self.n_scale as f64 * rho),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_first_derivative() {
        let v = Potential::quadratic(1.0, -3.0);
        assert_eq!(v.eval(2.0, 1), 1.0);
    }

    #[test]
    fn linear_second_derivative_vanishes() {
        let v = Potential::linear(1.0);
        assert_eq!(v.eval(7.3, 2), 0.0);
        assert_eq!(v.eval(0.1, 2), 0.0);
    }

    #[test]
    fn quadratic_value() {
        let v = Potential::quadratic(1.0, 0.0);
        assert_eq!(v.eval(3.0, 0), 9.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let v = Potential::polynomial(vec![0.5, -1.0, 2.0, 0.25]);
        let h = 1e-5;
        for &x in &[0.3, 1.0, 2.7] {
            let d1 = (v.eval(x + h, 0) - v.eval(x - h, 0)) / (2.0 * h);
            let d2 = (v.eval(x + h, 0) - 2.0 * v.eval(x, 0) + v.eval(x - h, 0)) / (h * h);
            assert!((v.eval(x, 1) - d1).abs() / d1.abs().max(1.0) < 1e-6);
            assert!((v.eval(x, 2) - d2).abs() / d2.abs().max(1.0) < 1e-4);
        }
    }

    #[test]
    fn growth_checks() {
        let grid = default_grid();
        assert!(check_growth(&Potential::linear(1.0), &grid).passes);
        assert!(!check_growth(&Potential::polynomial(vec![0.0]), &grid).passes);
        assert!(check_growth(&Potential::quadratic(1.0, -4.0), &grid).passes);
    }

    #[test]
    fn one_cut_conditions() {
        let grid = default_grid();
        let lag = check_one_cut_hard_conditions(&Potential::linear(1.0), &grid);
        assert!(lag.cond_i && lag.cond_ii);

        // 4x - 3 < 0 for x < 3/4.
        let q = check_one_cut_hard_conditions(&Potential::quadratic(1.0, -3.0), &grid);
        assert!(!q.cond_i);
        assert!(q.cond_ii);
        assert!(q.first_violation.unwrap() < 0.75);

        let q0 = check_one_cut_hard_conditions(&Potential::quadratic(1.0, 0.0), &grid);
        assert!(q0.cond_i && q0.cond_ii);
    }

    #[test]
    fn weight_positive_on_grid() {
        let w = Weight::new(0.5, 2, Potential::quadratic(1.0, -1.0));
        for &x in &[1e-6, 0.1, 1.0, 10.0] {
            assert!(w.eval(x) > 0.0);
        }
    }

    #[test]
    fn mp_weight_matches_f64() {
        let w = Weight::new(0.25, 3, Potential::quadratic(0.5, 1.5));
        let x = Float::with_val(128, 1.7);
        let got = w.eval_mp(&x).to_f64();
        assert!((got - w.eval(1.7)).abs() < 1e-14);
    }
}
