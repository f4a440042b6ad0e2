//! Hardware-double quadrature: tanh-sinh, Gauss-Legendre panels, the
//! log-singularity splitter and a semiaxis rule for the f64 oracles.

use std::sync::OnceLock;

use super::{NumericsError, QuadratureSpec};

const TMAX: f64 = 4.8;
const MAX_LEVEL: usize = 10;
const MIN_LEVEL: usize = 3;

/// (distance from endpoint, weight) per node, per level.
fn ts_tables() -> &'static Vec<Vec<(f64, f64)>> {
    static TABLES: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    TABLES.get_or_init(|| {
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
                if t > TMAX {
                    break;
                }
                let u = 0.5 * std::f64::consts::PI * t.sinh();
                let dist = 2.0 * (-2.0 * u).exp() / (1.0 + (-2.0 * u).exp());
                let weight = 0.5 * std::f64::consts::PI * t.cosh() / u.cosh().powi(2);
                nodes.push((dist, weight));
                k += 1;
            }
            levels.push(nodes);
        }
        levels
    })
}

/// Tanh-sinh quadrature of `f` on `[a, b]`; integrable endpoint
/// singularities are fine, non-finite samples count as zero.
pub fn tanh_sinh_f64<F>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    let tables = ts_tables();
    let hw = 0.5 * (b - a);
    let mut estimate = 0.0f64;
    for (i, (dist, weight)) in tables[0].iter().enumerate() {
        if i == 0 {
            let fm = f(0.5 * (a + b));
            if fm.is_finite() {
                estimate += fm * weight;
            }
        } else {
            let x_lo = a + hw * dist;
            let x_hi = b - hw * dist;
            let mut s = 0.0;
            let flo = f(x_lo);
            if flo.is_finite() {
                s += flo;
            }
            let fhi = f(x_hi);
            if fhi.is_finite() {
                s += fhi;
            }
            estimate += s * weight;
        }
    }
    let mut last_delta = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        let h = 0.5f64.powi(level as i32);
        let mut new_sum = 0.0f64;
        for (dist, weight) in &tables[level] {
            let x_lo = a + hw * dist;
            let x_hi = b - hw * dist;
            let mut s = 0.0;
            let flo = f(x_lo);
            if flo.is_finite() {
                s += flo;
            }
            let fhi = f(x_hi);
            if fhi.is_finite() {
                s += fhi;
            }
            new_sum += s * weight;
        }
        let refined = 0.5 * estimate + h * new_sum;
        last_delta = (refined - estimate).abs() * hw.abs();
        estimate = refined;
        let scale = (estimate * hw).abs();
        if level >= MIN_LEVEL && last_delta <= abs_tol.max(rel_tol * scale) {
            return Ok(estimate * hw);
        }
    }
    // Tanh-sinh deltas shrink roughly quadratically per level, so the final
    // delta is a pessimistic error bound; accept near-tolerance results.
    if last_delta <= 100.0 * abs_tol.max(rel_tol * (estimate * hw).abs()) {
        return Ok(estimate * hw);
    }
    Err(NumericsError::NonConvergence {
        what: "tanh_sinh_f64",
        achieved: last_delta,
        required: abs_tol,
    })
}

/// Gauss-Legendre nodes/weights on [-1, 1].
pub fn gauss_legendre_f64(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0f64;
            let mut p1 = x;
            for k in 1..n {
                let next = (((2 * k + 1) as f64) * x * p1 - (k as f64) * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = next;
            }
            dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1e-3) {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule
}

/// Fixed-panel Gauss-Legendre integration on `[a, b]`.
pub fn integrate_gl_panels<F>(mut f: F, a: f64, b: f64, panels: usize, points: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    let rule = gauss_legendre_f64(points.max(2));
    let width = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (node, w) in &rule {
            let v = f(mid + 0.5 * width * node);
            if v.is_finite() {
                sum += w * v;
            }
        }
    }
    sum * 0.5 * width
}

/// Integral of `f` over `[lo, hi]` where `f` may blow up logarithmically at
/// `x0`: the interval is split at `x0` and each side gets singularity-
/// tolerant (tanh-sinh) quadrature.
pub fn integrate_log_singular<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    x0: f64,
    spec: &QuadratureSpec,
) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    assert!(lo < hi, "integrate_log_singular needs lo < hi");
    if x0 > lo && x0 < hi {
        let left = tanh_sinh_f64(&mut f, lo, x0, spec.abs_tol * 0.5, spec.rel_tol)?;
        let right = tanh_sinh_f64(&mut f, x0, hi, spec.abs_tol * 0.5, spec.rel_tol)?;
        Ok(left + right)
    } else {
        tanh_sinh_f64(&mut f, lo, hi, spec.abs_tol, spec.rel_tol)
    }
}

/// `int_0^inf f(x) dx` in doubles, via `x = e^t - 1` plus tanh-sinh.
pub fn integrate_semiaxis_f64<F>(mut f: F, abs_tol: f64, rel_tol: f64) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    let mut g = |t: f64| {
        let et = t.exp();
        let x = et - 1.0;
        if x <= 0.0 {
            // Node distance underflowed onto the endpoint; its weight is
            // far below f64 resolution anyway.
            return 0.0;
        }
        f(x) * et
    };
    let mut t_end = 12.0f64;
    for _ in 0..10 {
        let mut tail = 0.0f64;
        for k in 0..3 {
            let gt = g(t_end * (1.0 - 0.02 * k as f64)).abs();
            if gt.is_finite() {
                tail = tail.max(gt);
            }
        }
        if tail * t_end > abs_tol * 1e-2 && tail != 0.0 {
            t_end *= 1.7;
            continue;
        }
        let estimate = tanh_sinh_f64(&mut g, 0.0, t_end, abs_tol, rel_tol)?;
        if tail * t_end <= abs_tol.max(rel_tol * estimate.abs()) * 1e-2 {
            return Ok(estimate);
        }
        t_end *= 1.7;
    }
    Err(NumericsError::NonConvergence {
        what: "integrate_semiaxis_f64",
        achieved: f64::INFINITY,
        required: abs_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::tanh_sinh(1e-12, 1e-12)
    }

    #[test]
    fn log_singularity_midpoint() {
        // Antiderivative oracle: int_0^1 log|y - 1/2| dy = -1 - log 2.
        let v = integrate_log_singular(|y| (y - 0.5).abs().ln(), 0.0, 1.0, 0.5, &spec()).unwrap();
        let oracle = -1.0 - std::f64::consts::LN_2;
        assert!((v - oracle).abs() < 1e-11, "v = {v}");
    }

    #[test]
    fn log_singularity_constant() {
        let v = integrate_log_singular(|_| 1.0, 0.0, 1.0, 0.3, &spec()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_singularity_at_endpoint() {
        // Antiderivative oracle: int_0^1 log y dy = -1.
        let v = integrate_log_singular(|y| y.ln(), 0.0, 1.0, 0.0, &spec()).unwrap();
        assert!((v + 1.0).abs() < 1e-11, "v = {v}");
    }

    #[test]
    fn split_agrees_with_plain_quadrature_on_smooth() {
        let f = |y: f64| (2.0 * y).cos() + y * y;
        let split = integrate_log_singular(f, 0.0, 2.0, 1.1, &spec()).unwrap();
        let plain = integrate_gl_panels(f, 0.0, 2.0, 8, 16);
        assert!((split - plain).abs() < 1e-11);
    }

    #[test]
    fn semiaxis_f64_gamma() {
        let v = integrate_semiaxis_f64(|x| x * x * x * (-x).exp(), 1e-12, 1e-12).unwrap();
        assert!((v - 6.0).abs() < 1e-10, "v = {v}");
    }

    #[test]
    fn inverse_sqrt_endpoint_singularity() {
        // int_0^1 y^{-1/2} dy = 2.
        let v = tanh_sinh_f64(|y| 1.0 / y.sqrt(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "v = {v}");
    }
}
