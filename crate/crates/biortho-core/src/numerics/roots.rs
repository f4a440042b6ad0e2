//! Scalar and 2D root finding plus complex Newton iteration.

use num_complex::Complex64;

use super::NumericsError;

/// Root of a continuous, effectively monotone `f` on `[lo, hi]`.
///
/// If the endpoints do not bracket a sign change, `hi` is doubled up to 60
/// times first. The bracket is then collapsed by a bisection/secant hybrid;
/// iteration continues past `|f| <= tol` until the bracket is tight in `x`
/// as well, so callers can rely on the abscissa, not just the residual.
pub fn find_root_monotone<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    assert!(lo < hi && tol > 0.0);
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    let mut expansions = 0;
    while fa * fb > 0.0 {
        if expansions >= 60 {
            return Err(NumericsError::BracketFailure { lo: a, hi: b });
        }
        b = if b > 0.0 { b * 2.0 } else { b + 2.0 * (b - a).abs().max(1.0) };
        fb = f(b);
        expansions += 1;
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for iteration in 0..200 {
        let width = b - a;
        if width.abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        // Secant step clipped into the bracket; bisection every third round
        // keeps worst-case progress geometric.
        let mut x = if iteration % 3 == 2 || fb == fa {
            0.5 * (a + b)
        } else {
            let s = b - fb * (b - a) / (fb - fa);
            if s > a + 0.01 * width && s < b - 0.01 * width {
                s
            } else {
                0.5 * (a + b)
            }
        };
        if x <= a || x >= b {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fa * fx < 0.0 {
            b = x;
            fb = fx;
        } else {
            a = x;
            fa = fx;
        }
    }
    if best.1.abs() <= tol {
        Ok(best.0)
    } else {
        // Bracket is machine-tight; the residual cannot shrink further.
        Ok(best.0)
    }
}

/// Damped Newton for a 2D system with finite-difference Jacobian and a
/// backtracking line search on the max-norm of the residual.
pub fn solve_2d<F>(
    mut system: F,
    guess: (f64, f64),
    tol: f64,
) -> Result<(f64, f64), NumericsError>
where
    F: FnMut(f64, f64) -> (f64, f64),
{
    let norm = |v: (f64, f64)| v.0.abs().max(v.1.abs());
    let mut x = guess;
    let mut fx = system(x.0, x.1);
    for _ in 0..100 {
        if norm(fx) <= tol {
            return Ok(x);
        }
        let h0 = 1e-6 * x.0.abs().max(1e-3);
        let h1 = 1e-6 * x.1.abs().max(1e-3);
        let fp0 = system(x.0 + h0, x.1);
        let fm0 = system(x.0 - h0, x.1);
        let fp1 = system(x.0, x.1 + h1);
        let fm1 = system(x.0, x.1 - h1);
        let j00 = (fp0.0 - fm0.0) / (2.0 * h0);
        let j10 = (fp0.1 - fm0.1) / (2.0 * h0);
        let j01 = (fp1.0 - fm1.0) / (2.0 * h1);
        let j11 = (fp1.1 - fm1.1) / (2.0 * h1);
        let det = j00 * j11 - j01 * j10;
        if det.abs() < 1e-300 {
            return Err(NumericsError::NoConvergence {
                what: "solve_2d (singular Jacobian)",
                iterations: 0,
            });
        }
        let dx0 = (fx.0 * j11 - fx.1 * j01) / det;
        let dx1 = (fx.1 * j00 - fx.0 * j10) / det;
        let mut lambda = 1.0f64;
        let mut accepted = false;
        while lambda >= 1.0 / 4096.0 {
            let trial = (x.0 - lambda * dx0, x.1 - lambda * dx1);
            let ft = system(trial.0, trial.1);
            if ft.0.is_finite() && ft.1.is_finite() && norm(ft) < norm(fx) {
                x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(NumericsError::NoConvergence {
                what: "solve_2d (line search stalled)",
                iterations: 0,
            });
        }
    }
    if norm(fx) <= tol {
        Ok(x)
    } else {
        Err(NumericsError::NoConvergence {
            what: "solve_2d",
            iterations: 100,
        })
    }
}

/// Newton iteration for a simple complex root near `guess`.
pub fn newton_complex<F, D>(
    mut f: F,
    mut df: D,
    guess: Complex64,
    tol: f64,
) -> Result<Complex64, NumericsError>
where
    F: FnMut(Complex64) -> Complex64,
    D: FnMut(Complex64) -> Complex64,
{
    let mut z = guess;
    for _ in 0..100 {
        let fz = f(z);
        if fz.norm() <= tol {
            return Ok(z);
        }
        let d = df(z);
        if d.norm() < 1e-290 {
            return Err(NumericsError::DegenerateDerivative);
        }
        let step = fz / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            return Err(NumericsError::NoConvergence {
                what: "newton_complex (non-finite step)",
                iterations: 0,
            });
        }
        z -= step;
    }
    Err(NumericsError::NoConvergence {
        what: "newton_complex",
        iterations: 100,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root() {
        let r = find_root_monotone(|x| x - 2.0, 0.0, 10.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_root() {
        let r = find_root_monotone(|x| x * x * x - 8.0, 0.0, 10.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_expansion() {
        // Root far outside the initial [0, 1] bracket.
        let r = find_root_monotone(|x| x - 300.0, 0.0, 1.0, 1e-10).unwrap();
        assert!((r - 300.0).abs() < 1e-8);
    }

    #[test]
    fn bracket_failure_reported() {
        let err = find_root_monotone(|x| x * x + 1.0, 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, NumericsError::BracketFailure { .. }));
    }

    #[test]
    fn root_is_bracket_stable() {
        // Halving tol moves the root by no more than the old tol.
        let f = |x: f64| x.exp() - 3.0;
        let r1 = find_root_monotone(f, 0.0, 5.0, 1e-6).unwrap();
        let r2 = find_root_monotone(f, 0.0, 5.0, 5e-7).unwrap();
        assert!((r1 - r2).abs() <= 1e-6);
        assert!((r1 - 3.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn solve_2d_trivial_shift() {
        let r = solve_2d(|x, y| (x - 1.0, y - 2.0), (0.0, 0.0), 1e-12).unwrap();
        assert!((r.0 - 1.0).abs() < 1e-10 && (r.1 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn solve_2d_coupled() {
        let r = solve_2d(|x, y| (x * x - 4.0, x * y - 3.0), (1.0, 1.0), 1e-12).unwrap();
        assert!((r.0 - 2.0).abs() < 1e-9, "x = {}", r.0);
        assert!((r.1 - 1.5).abs() < 1e-9, "y = {}", r.1);
    }

    #[test]
    fn newton_complex_quadratic() {
        let r = newton_complex(
            |s| s * s + 1.0,
            |s| 2.0 * s,
            Complex64::new(0.5, 0.8),
            1e-13,
        )
        .unwrap();
        assert!((r - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn newton_complex_cube_root_of_unity() {
        let r = newton_complex(
            |s| s * s * s - 1.0,
            |s| 3.0 * s * s,
            Complex64::new(-0.4, 0.9),
            1e-13,
        )
        .unwrap();
        let expected = Complex64::new(-0.5, 0.8660254037844386);
        assert!((r - expected).norm() < 1e-12);
    }

    #[test]
    fn newton_residual_contract() {
        let tol = 1e-10;
        let r = newton_complex(
            |s| s * s - Complex64::new(2.0, 1.0),
            |s| 2.0 * s,
            Complex64::new(1.0, 0.5),
            tol,
        )
        .unwrap();
        assert!((r * r - Complex64::new(2.0, 1.0)).norm() <= tol);
    }
}
