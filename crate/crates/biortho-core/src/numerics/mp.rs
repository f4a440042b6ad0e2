//! Arbitrary-precision quadrature and linear algebra on MPFR floats.
//!
//! Tanh-sinh node tables are cached per mantissa size; the semiaxis rule
//! composes the substitution `x = e^t - 1` with tanh-sinh, which handles
//! both an integrable `x^alpha` singularity at 0 and super-polynomial decay.

use std::sync::{Arc, Mutex, OnceLock};

use rug::ops::CompleteRound;
use rug::Float;

use super::{NumericsError, PrecisionContext, QuadScheme, QuadratureSpec};

const MAX_LEVEL: usize = 11;
const MIN_LEVEL: usize = 4;

struct TsNode {
    /// Distance of the abscissa from the nearer endpoint of [-1, 1],
    /// i.e. `1 - |tanh((pi/2) sinh t)|`, kept to full relative precision.
    dist: Float,
    weight: Float,
}

struct TsTable {
    /// levels[0]: nodes at t = 0, 1, 2, ...; levels[l]: odd multiples of 2^-l.
    levels: Vec<Vec<TsNode>>,
}

fn ts_tmax(bits: u32) -> f64 {
    // The node weight decays like exp(-(pi/2) e^t); the margin factor keeps
    // truncation below 2^-bits even with strong endpoint singularities.
    ((8.0 / std::f64::consts::PI) * ((bits as f64) * std::f64::consts::LN_2 + 60.0)).ln() + 1.5
}

fn build_ts_table(bits: u32) -> TsTable {
    let prec = bits + 32;
    let tmax = ts_tmax(bits);
    let half_pi = Float::with_val(prec, rug::float::Constant::Pi) / 2u32;
    let mut levels = Vec::new();
    for level in 0..=MAX_LEVEL {
        let h = 0.5f64.powi(level as i32);
        let mut nodes = Vec::new();
        let mut k = 0u64;
        loop {
            let t = if level == 0 {
                k as f64
            } else {
                (2 * k + 1) as f64 * h
            };
            if t > tmax {
                break;
            }
            let tf = Float::with_val(prec, t);
            let u = tf.clone().sinh() * &half_pi;
            let e = (-(u.clone() * 2u32)).exp();
            let dist = e.clone() * 2u32 / (e + 1u32);
            let weight = tf.cosh() * &half_pi / u.cosh().square();
            nodes.push(TsNode {
                dist: Float::with_val(bits, dist),
                weight: Float::with_val(bits, weight),
            });
            k += 1;
        }
        levels.push(nodes);
    }
    TsTable { levels }
}

fn ts_table(bits: u32) -> Arc<TsTable> {
    static CACHE: OnceLock<Mutex<Vec<(u32, Arc<TsTable>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap();
    if let Some((_, table)) = guard.iter().find(|(b, _)| *b == bits) {
        return table.clone();
    }
    let table = Arc::new(build_ts_table(bits));
    guard.push((bits, table.clone()));
    table
}

/// Tanh-sinh quadrature of `f` over the finite interval `[a, b]`.
///
/// Integrable endpoint singularities (algebraic or logarithmic) are fine;
/// non-finite integrand values are treated as zero since they can only
/// occur inside the endpoint region the weights crush.
pub fn tanh_sinh<F>(
    mut f: F,
    a: &Float,
    b: &Float,
    ctx: &PrecisionContext,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Float, NumericsError>
where
    F: FnMut(&Float) -> Float,
{
    let bits = ctx.mantissa_bits;
    let table = ts_table(bits);
    let halfwidth = (b - a).complete(bits + 8) / 2u32;
    let hw = halfwidth.to_f64();

    // Level 0: t = 0 contributes the midpoint once, the rest come in pairs.
    let mut estimate = Float::with_val(bits, 0);
    {
        let mid = (a + b).complete(bits + 8) / 2u32;
        let fm = f(&mid);
        if fm.is_finite() {
            estimate += fm * &table.levels[0][0].weight;
        }
    }

    let mut eval_pair = |node: &TsNode| -> Float {
        let off = (&halfwidth * &node.dist).complete(bits);
        let x_lo = (a + &off).complete(bits);
        let x_hi = (b - &off).complete(bits);
        let mut s = Float::with_val(bits, 0);
        let flo = f(&x_lo);
        if flo.is_finite() {
            s += flo;
        }
        let fhi = f(&x_hi);
        if fhi.is_finite() {
            s += fhi;
        }
        s * &node.weight
    };

    for node in table.levels[0].iter().skip(1) {
        estimate += eval_pair(node);
    }
    let mut last_delta = f64::INFINITY;

    for level in 1..=MAX_LEVEL {
        let mut new_sum = Float::with_val(bits, 0);
        for node in &table.levels[level] {
            new_sum += eval_pair(node);
        }
        let h = Float::with_val(bits, 0.5f64.powi(level as i32));
        let refined = estimate.clone() / 2u32 + new_sum * h;
        last_delta = (refined.clone() - &estimate).abs().to_f64() * hw.abs();
        estimate = refined;
        let mut scale = estimate.clone().abs().to_f64() * hw.abs();
        if !scale.is_finite() {
            scale = 1e300;
        }
        if level >= MIN_LEVEL && last_delta <= abs_tol.max(rel_tol * scale) {
            return Ok(estimate * halfwidth);
        }
    }
    Err(NumericsError::NonConvergence {
        what: "tanh_sinh",
        achieved: last_delta,
        required: abs_tol,
    })
}

/// `int_0^inf f(x) dx` at context precision.
///
/// The default path substitutes `x = e^t - 1` and applies [`tanh_sinh`] on a
/// truncated `t`-range grown until the integrand is dead at the cut. The
/// `GaussLaguerre` scheme is exact for `p(x) e^{-x}` integrands; the
/// `GaussLegendrePanels` scheme uses geometrically growing panels.
pub fn integrate_semiaxis<F>(
    mut f: F,
    spec: &QuadratureSpec,
    ctx: &PrecisionContext,
) -> Result<Float, NumericsError>
where
    F: FnMut(&Float) -> Float,
{
    let bits = ctx.mantissa_bits;
    match spec.scheme {
        QuadScheme::TanhSinh => {
            let mut g = |t: &Float| -> Float {
                let et = t.clone().exp();
                let x = (&et - 1u32).complete(bits);
                f(&x) * et
            };
            let zero = Float::with_val(bits, 0);
            let mut t_end = 12.0f64;
            for _ in 0..12 {
                let mut tail = 0.0f64;
                for k in 0..3 {
                    let t = Float::with_val(bits, t_end * (1.0 - 0.02 * k as f64));
                    let gt = g(&t).abs().to_f64();
                    if gt.is_finite() {
                        tail = tail.max(gt);
                    }
                }
                if tail * t_end > spec.abs_tol * 1e-2 && tail != 0.0 {
                    // Might still be fine relative to a large integral, but
                    // growing the range is cheap compared to guessing wrong.
                    t_end *= 1.7;
                    continue;
                }
                let hi = Float::with_val(bits, t_end);
                let estimate = tanh_sinh(&mut g, &zero, &hi, ctx, spec.abs_tol, spec.rel_tol)?;
                let scale = estimate.clone().abs().to_f64().max(1.0);
                if tail * t_end <= spec.abs_tol.max(spec.rel_tol * scale) * 1e-2 {
                    return Ok(estimate);
                }
                t_end *= 1.7;
            }
            Err(NumericsError::NonConvergence {
                what: "integrate_semiaxis",
                achieved: f64::INFINITY,
                required: spec.abs_tol,
            })
        }
        QuadScheme::GaussLaguerre => {
            let n = spec.points_per_panel.max(8);
            let rule = gauss_laguerre_nodes(n, ctx);
            let mut sum = Float::with_val(bits, 0);
            for (x, w_modified) in rule.iter() {
                let fx = f(x);
                if fx.is_finite() {
                    sum += fx * w_modified;
                }
            }
            Ok(sum)
        }
        QuadScheme::GaussLegendrePanels => {
            // Panels [0,1], [1,2], [2,4], ... doubling until the integrand is dead.
            let n = spec.points_per_panel.max(8);
            let rule = gauss_legendre_nodes(n, ctx);
            let mut sum = Float::with_val(bits, 0);
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            let mut dead_panels = 0;
            for _ in 0..64 {
                let a = Float::with_val(bits, lo);
                let b = Float::with_val(bits, hi);
                let mid = (&a + &b).complete(bits) / 2u32;
                let half = (&b - &a).complete(bits) / 2u32;
                let mut panel = Float::with_val(bits, 0);
                for (node, w) in rule.iter() {
                    let x = (&half * node).complete(bits) + &mid;
                    let fx = f(&x);
                    if fx.is_finite() {
                        panel += fx * w;
                    }
                }
                panel *= &half;
                let contribution = panel.clone().abs().to_f64();
                sum += panel;
                let scale = sum.clone().abs().to_f64().max(1.0);
                if contribution <= spec.abs_tol.max(spec.rel_tol * scale) * 1e-4 {
                    dead_panels += 1;
                    if dead_panels >= 2 {
                        return Ok(sum);
                    }
                } else {
                    dead_panels = 0;
                }
                lo = hi;
                hi *= 2.0;
            }
            Err(NumericsError::NonConvergence {
                what: "integrate_semiaxis (panels)",
                achieved: f64::INFINITY,
                required: spec.abs_tol,
            })
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] at context precision.
pub fn gauss_legendre_nodes(n: usize, ctx: &PrecisionContext) -> Arc<Vec<(Float, Float)>> {
    static CACHE: OnceLock<Mutex<Vec<((usize, u32), Arc<Vec<(Float, Float)>>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let key = (n, ctx.mantissa_bits);
    {
        let guard = cache.lock().unwrap();
        if let Some((_, rule)) = guard.iter().find(|(k, _)| *k == key) {
            return rule.clone();
        }
    }
    let prec = ctx.mantissa_bits + 32;
    // Returns (P_n(x), P_n'(x)).
    let legendre = |x: &Float| -> (Float, Float) {
        let mut p0 = Float::with_val(prec, 1);
        let mut p1 = x.clone();
        for k in 1..n {
            let mut next = (x * &p1).complete(prec);
            next *= (2 * k + 1) as u32;
            next -= p0.clone() * k as u32;
            next /= (k + 1) as u32;
            p0 = p1;
            p1 = next;
        }
        let mut dp = (x * &p1).complete(prec);
        dp -= &p0;
        dp *= n as u32;
        dp /= x.clone().square() - 1u32;
        (p1, dp)
    };
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = Float::with_val(prec, guess);
        let floor = Float::with_val(prec, 1) >> (2 * prec);
        for _ in 0..60 {
            let (p, dp) = legendre(&x);
            let step = p / dp;
            let step_abs = step.clone().abs();
            x -= step;
            let mut tiny = x.clone().abs() >> (prec - 8);
            if tiny < floor {
                tiny = floor.clone();
            }
            if step_abs <= tiny {
                break;
            }
        }
        let (_, dp) = legendre(&x);
        let w = Float::with_val(prec, 2u32) / ((1u32 - x.clone().square()) * dp.square());
        rule.push((
            Float::with_val(ctx.mantissa_bits, &x),
            Float::with_val(ctx.mantissa_bits, w),
        ));
    }
    let rule = Arc::new(rule);
    cache.lock().unwrap().push((key, rule.clone()));
    rule
}

/// Gauss-Laguerre abscissas with weights already multiplied by `e^{x_i}`,
/// so `sum w_i f(x_i)` approximates `int_0^inf f(x) dx` and is exact when
/// `f = p(x) e^{-x}` with `deg p <= 2n-1`.
pub fn gauss_laguerre_nodes(n: usize, ctx: &PrecisionContext) -> Arc<Vec<(Float, Float)>> {
    static CACHE: OnceLock<Mutex<Vec<((usize, u32), Arc<Vec<(Float, Float)>>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let key = (n, ctx.mantissa_bits);
    {
        let guard = cache.lock().unwrap();
        if let Some((_, rule)) = guard.iter().find(|(k, _)| *k == key) {
            return rule.clone();
        }
    }
    let prec = ctx.mantissa_bits + 32;
    // Returns (L_m(x), L_{m-1}(x)).
    let laguerre = |x: &Float, m: usize| -> (Float, Float) {
        let mut l0 = Float::with_val(prec, 1);
        let mut l1 = (1u32 - x).complete(prec);
        if m == 0 {
            return (l0, Float::with_val(prec, 0));
        }
        for k in 1..m {
            let mut next = ((2 * k + 1) as u32 - x).complete(prec);
            next *= &l1;
            next -= l0.clone() * k as u32;
            next /= (k + 1) as u32;
            l0 = l1;
            l1 = next;
        }
        (l1, l0)
    };
    let mut rule = Vec::with_capacity(n);
    let mut prev = Float::with_val(prec, 0);
    let mut prev2 = Float::with_val(prec, 0);
    for i in 0..n {
        // Stroud-Secrest style initial guesses, then Newton polishing.
        let mut x = if i == 0 {
            Float::with_val(prec, 3.0 / (1.0 + 2.4 * n as f64))
        } else if i == 1 {
            (&prev + 15.0 / (1.0 + 2.5 * n as f64)).complete(prec)
        } else {
            let ratio = (1.0 + 2.55 * (i as f64 - 1.0)) / (1.9 * (i as f64 - 1.0));
            (&prev - &prev2).complete(prec) * ratio + &prev
        };
        let floor = Float::with_val(prec, 1) >> (2 * prec);
        for _ in 0..80 {
            let (ln, lnm1) = laguerre(&x, n);
            // L_n'(x) = n (L_n(x) - L_{n-1}(x)) / x
            let dl = (ln.clone() - lnm1) * n as u32 / &x;
            let step = ln / dl;
            let step_abs = step.clone().abs();
            x -= step;
            let mut tiny = x.clone().abs() >> (prec - 8);
            if tiny < floor {
                tiny = floor.clone();
            }
            if step_abs <= tiny {
                break;
            }
        }
        let (lnp1, _) = laguerre(&x, n + 1);
        let w = x.clone() / (lnp1.square() * (n as u32 + 1).pow(2));
        let w_modified = w * x.clone().exp();
        rule.push((
            Float::with_val(ctx.mantissa_bits, &x),
            Float::with_val(ctx.mantissa_bits, w_modified),
        ));
        prev2 = prev;
        prev = x;
    }
    let rule = Arc::new(rule);
    cache.lock().unwrap().push((key, rule.clone()));
    rule
}

/// Determinant by LU with partial pivoting; consumes its working copy.
pub fn det_lu(mut mat: Vec<Vec<Float>>, ctx: &PrecisionContext) -> Float {
    let n = mat.len();
    let bits = ctx.mantissa_bits;
    if n == 0 {
        return Float::with_val(bits, 1);
    }
    let mut det = Float::with_val(bits, 1);
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = mat[col][col].clone().abs();
        for row in col + 1..n {
            let mag = mat[row][col].clone().abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag.is_zero() {
            return Float::with_val(bits, 0);
        }
        if pivot_row != col {
            mat.swap(pivot_row, col);
            det = -det;
        }
        det *= &mat[col][col];
        for row in col + 1..n {
            let factor = (&mat[row][col] / &mat[col][col]).complete(bits);
            for k in col..n {
                let delta = (&factor * &mat[col][k]).complete(bits);
                mat[row][k] -= delta;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;

    fn ctx() -> PrecisionContext {
        PrecisionContext::moments()
    }

    #[test]
    fn semiaxis_exponential_is_one() {
        let c = ctx();
        let spec = QuadratureSpec::default();
        let v = integrate_semiaxis(|x| (-x.clone()).exp(), &spec, &c).unwrap();
        let err = (v - 1u32).abs().to_f64();
        assert!(err < 1e-30, "err = {err:e}");
    }

    #[test]
    fn semiaxis_cubic_weight_is_six() {
        let c = ctx();
        let spec = QuadratureSpec::default();
        let v =
            integrate_semiaxis(|x| x.clone().square() * x * (-x.clone()).exp(), &spec, &c).unwrap();
        let err = (v - 6u32).abs().to_f64();
        assert!(err < 1e-28, "err = {err:e}");
    }

    #[test]
    fn semiaxis_half_power_matches_gamma() {
        // Gamma-function oracle: int x^{1/2} e^{-x} = Gamma(3/2).
        let c = ctx();
        let spec = QuadratureSpec::default();
        let v = integrate_semiaxis(|x| x.clone().sqrt() * (-x.clone()).exp(), &spec, &c).unwrap();
        let oracle = Float::with_val(c.mantissa_bits, 1.5).gamma();
        let err = (v - oracle).abs().to_f64();
        assert!(err < 1e-30, "err = {err:e}");
    }

    #[test]
    fn gamma_reproduction_up_to_40() {
        // Polynomials times e^{-x} reproduce k! for k <= 40 at 256 bits.
        let c = ctx();
        let spec = QuadratureSpec::tanh_sinh(1e-35, 1e-35);
        for k in [1u32, 7, 20, 40] {
            let v = integrate_semiaxis(
                |x| {
                    let p = x.clone().pow(k);
                    p * (-x.clone()).exp()
                },
                &spec,
                &c,
            )
            .unwrap();
            let oracle = Float::with_val(c.mantissa_bits, k + 1).gamma();
            let rel = ((v - &oracle) / oracle).abs().to_f64();
            assert!(rel < 1e-30, "k={k}: rel = {rel:e}");
        }
    }

    #[test]
    fn gauss_laguerre_matches_factorials() {
        let c = ctx();
        let spec = QuadratureSpec::gauss_laguerre(40, 1e-30);
        for k in [0u32, 3, 11] {
            let v = integrate_semiaxis(|x| x.clone().pow(k) * (-x.clone()).exp(), &spec, &c)
                .unwrap();
            let oracle = Float::with_val(c.mantissa_bits, k + 1).gamma();
            let rel = ((v - &oracle) / oracle).abs().to_f64();
            assert!(rel < 1e-40, "k={k}: rel = {rel:e}");
        }
    }

    #[test]
    fn gauss_legendre_panels_on_semiaxis() {
        let c = ctx();
        let spec = QuadratureSpec::gauss_legendre(8, 24, 1e-25);
        let v =
            integrate_semiaxis(|x| x.clone().square() * x * (-x.clone()).exp(), &spec, &c).unwrap();
        let err = (v - 6u32).abs().to_f64();
        assert!(err < 1e-24, "err = {err:e}");
    }

    #[test]
    fn finite_tanh_sinh_log_endpoint() {
        // int_0^1 log(x) dx = -1 despite the endpoint singularity.
        let c = ctx();
        let zero = Float::with_val(c.mantissa_bits, 0);
        let one = Float::with_val(c.mantissa_bits, 1);
        let v = tanh_sinh(|x| x.clone().ln(), &zero, &one, &c, 1e-30, 1e-30).unwrap();
        let err = (v + 1u32).abs().to_f64();
        assert!(err < 1e-29, "err = {err:e}");
    }

    #[test]
    fn det_of_known_matrix() {
        let c = ctx();
        let m = vec![vec![c.big(1.0), c.big(1.0)], vec![c.big(2.0), c.big(6.0)]];
        let d = det_lu(m, &c);
        assert!((d - 4u32).abs().to_f64() < 1e-70);
        // Empty determinant is 1 by convention.
        assert_eq!(det_lu(Vec::new(), &c).to_f64(), 1.0);
    }
}
