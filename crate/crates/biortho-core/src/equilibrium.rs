//! One-cut equilibrium measures: the hard-edge solve for the map
//! parameter `c`, the soft-edge solve for `(c0, c1)`, the density as a real
//! log-kernel integral over the support, edge constants, regime
//! classification along the hard-to-soft transition, and Euler-Lagrange
//! verification.

use std::fmt;

use num_complex::Complex64;

use crate::conformal::{
    contour_quadrature, invert, trace_curve, ConformalError, ConformalMap, CurveSamples, MapKind,
};
use crate::numerics::{self, NumericsError, QuadratureSpec};
use crate::potentials::Potential;

#[derive(Clone, Debug)]
pub enum EquilibriumError {
    Conformal(ConformalError),
    Numerics(NumericsError),
    /// Soft-edge solver returned a pair violating `c0 > c1 > 0`.
    InvalidSolution { c0: f64, c1: f64 },
    /// Neither hard- nor soft-edge construction validated; the one-cut
    /// assumption is likely false for this potential.
    Unclassifiable { detail: String },
    OutOfRange { x: f64, lo: f64, hi: f64 },
}

impl fmt::Display for EquilibriumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquilibriumError::Conformal(e) => write!(f, "{e}"),
            EquilibriumError::Numerics(e) => write!(f, "{e}"),
            EquilibriumError::InvalidSolution { c0, c1 } => {
                write!(f, "soft-edge solution ({c0}, {c1}) violates c0 > c1 > 0")
            }
            EquilibriumError::Unclassifiable { detail } => {
                write!(f, "one-cut classification failed: {detail}")
            }
            EquilibriumError::OutOfRange { x, lo, hi } => {
                write!(f, "x = {x} outside the support ({lo}, {hi})")
            }
        }
    }
}

impl std::error::Error for EquilibriumError {}

impl From<ConformalError> for EquilibriumError {
    fn from(e: ConformalError) -> Self {
        EquilibriumError::Conformal(e)
    }
}

impl From<NumericsError> for EquilibriumError {
    fn from(e: NumericsError) -> Self {
        EquilibriumError::Numerics(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRegime {
    HardEdge,
    SoftEdge,
    CriticalEdge,
}

impl fmt::Display for EdgeRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeRegime::HardEdge => write!(f, "hard"),
            EdgeRegime::SoftEdge => write!(f, "soft"),
            EdgeRegime::CriticalEdge => write!(f, "critical"),
        }
    }
}

/// `f(c) = (1/2 pi i) ∮ V'(J_c(s)) J_c(s) / s ds` for the hard map; the
/// normalization equation is `f(c) = 1 + theta`.
///
/// `J` is real on the curve, so `V'` only ever sees real arguments.
fn hard_normalization(
    v: &Potential,
    theta: f64,
    c: f64,
    curve: &CurveSamples,
    panels: usize,
) -> Result<f64, EquilibriumError> {
    let map = ConformalMap::hard(theta, c);
    let nodes = contour_quadrature(&map, curve, panels, 16)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for (z, dz) in nodes {
        let j = map.eval(z)?.re;
        let u = v.eval(j, 1) * j;
        sum += u * dz / z;
    }
    Ok(sum.im / std::f64::consts::PI)
}

/// Solves the hard-edge normalization for `c`. The trace of the curve is
/// independent of `c`, so one trace serves every evaluation.
pub fn solve_c(v: &Potential, theta: f64) -> Result<f64, EquilibriumError> {
    let curve = trace_curve(&ConformalMap::hard(theta, 1.0), 256)?;
    let target = 1.0 + theta;
    let mut captured: Option<EquilibriumError> = None;
    let f = |c: f64| -> f64 {
        match hard_normalization(v, theta, c, &curve, 14) {
            Ok(val) => val - target,
            Err(e) => {
                captured = Some(e);
                f64::NAN
            }
        }
    };
    let c = numerics::find_root_monotone(f, 1e-9, 1.0, 1e-10)?;
    if let Some(e) = captured {
        return Err(e);
    }
    let residual = hard_normalization(v, theta, c, &curve, 20)? - target;
    if residual.abs() > 1e-9 * target {
        return Err(EquilibriumError::Numerics(NumericsError::NonConvergence {
            what: "solve_c",
            achieved: residual.abs(),
            required: 1e-10,
        }));
    }
    Ok(c)
}

/// Residuals of the two soft-edge normalization equations at `(c0, c1)`;
/// the soft curve depends on `c0/c1`, so every call re-traces it.
fn soft_residuals(
    v: &Potential,
    theta: f64,
    c0: f64,
    c1: f64,
    curve_m: usize,
    panels: usize,
) -> Result<(f64, f64), EquilibriumError> {
    let map = ConformalMap::soft(theta, c0, c1);
    let curve = trace_curve(&map, curve_m)?;
    let nodes = contour_quadrature(&map, &curve, panels, 16)?;
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    for (z, dz) in nodes {
        let j = map.eval(z)?.re;
        let u = v.eval(j, 1) * j;
        s0 += u * dz / z;
        s1 += u * dz / (z + 1.0);
    }
    Ok((
        s0.im / std::f64::consts::PI - (1.0 + theta),
        s1.im / std::f64::consts::PI - 1.0,
    ))
}

/// Solves the soft-edge system for `(c0, c1)` by damped Newton from `guess`.
///
/// The system has a spurious root on the diagonal: at `c0 = c1 = c` the map
/// degenerates to the hard map and the hard-edge solution satisfies both
/// equations. That root is deflated away by dividing the residuals by the
/// distance to it, so Newton heads for the genuine `c0 > c1` branch.
pub fn solve_c0_c1(
    v: &Potential,
    theta: f64,
    guess: (f64, f64),
) -> Result<(f64, f64), EquilibriumError> {
    let diagonal_root = solve_c(v, theta).ok();
    let mut captured: Option<EquilibriumError> = None;
    let system = |c0: f64, c1: f64| -> (f64, f64) {
        if !(c0 > c1 && c1 > 0.0) {
            // Steer the line search back into the admissible cone.
            return (1e6, 1e6);
        }
        match soft_residuals(v, theta, c0, c1, 128, 12) {
            Ok((r0, r1)) => {
                if let Some(ch) = diagonal_root {
                    let dist = ((c0 - ch).powi(2) + (c1 - ch).powi(2)).sqrt().max(1e-8);
                    (r0 / dist, r1 / dist)
                } else {
                    (r0, r1)
                }
            }
            Err(e) => {
                captured = Some(e);
                (1e6, 1e6)
            }
        }
    };
    let (c0, c1) = numerics::solve_2d(system, guess, 1e-10)?;
    if let Some(e) = captured {
        return Err(e);
    }
    if !(c0 > c1 && c1 > 0.0) {
        return Err(EquilibriumError::InvalidSolution { c0, c1 });
    }
    // Independent higher-resolution verification of both residuals.
    let (r0, r1) = soft_residuals(v, theta, c0, c1, 256, 20)?;
    if r0.abs() > 1e-8 || r1.abs() > 1e-8 {
        return Err(EquilibriumError::Numerics(NumericsError::NonConvergence {
            what: "solve_c0_c1",
            achieved: r0.abs().max(r1.abs()),
            required: 1e-10,
        }));
    }
    Ok((c0, c1))
}

fn density_from_log_kernel(
    v: &Potential,
    map: &ConformalMap,
    curve: &CurveSamples,
    x: f64,
) -> Result<f64, EquilibriumError> {
    let lo = curve.image_left;
    let hi = curve.image_right;
    if x <= lo || x >= hi {
        return Err(EquilibriumError::OutOfRange { x, lo, hi });
    }
    let (ix_plus, ix_minus) = invert(map, curve, x)?;
    let spec = QuadratureSpec::tanh_sinh(1e-11, 1e-11);
    let integrand = |y: f64| -> f64 {
        if y <= lo || y >= hi {
            return 0.0;
        }
        let iy = match invert(map, curve, y) {
            Ok((ip, _)) => ip,
            Err(_) => return f64::NAN,
        };
        let field = v.eval(y, 2) * y + v.eval(y, 1);
        field * ((iy - ix_minus).norm() / (iy - ix_plus).norm()).ln()
    };
    let integral = numerics::integrate_log_singular(integrand, lo, hi, x, &spec)?;
    Ok(integral / (2.0 * std::f64::consts::PI.powi(2) * x))
}

/// Hard-edge density at `x` from the log-kernel integral over `(0, b)`,
/// split at the `y = x` singularity.
pub fn density_hard(
    v: &Potential,
    theta: f64,
    c: f64,
    curve: &CurveSamples,
    x: f64,
) -> Result<f64, EquilibriumError> {
    let map = ConformalMap::hard(theta, c);
    density_from_log_kernel(v, &map, curve, x)
}

/// Soft-edge density at `x` over `(a, b)`.
pub fn density_soft(
    v: &Potential,
    theta: f64,
    c0: f64,
    c1: f64,
    curve: &CurveSamples,
    x: f64,
) -> Result<f64, EquilibriumError> {
    let map = ConformalMap::soft(theta, c0, c1);
    density_from_log_kernel(v, &map, curve, x)
}

/// Closed-form `theta = 2` Laguerre density on `(0, 3 sqrt 3 / rho)`.
pub fn laguerre_density_closed_form(rho: f64, x: f64) -> Result<f64, EquilibriumError> {
    let b = 3.0 * 3.0f64.sqrt() / rho;
    if x <= 0.0 || x >= b {
        return Err(EquilibriumError::OutOfRange { x, lo: 0.0, hi: b });
    }
    let s = (1.0 - rho * rho * x * x / 27.0).max(0.0).sqrt();
    Ok(3.0f64.sqrt() * rho.powf(2.0 / 3.0) / (2.0 * std::f64::consts::PI * x.cbrt())
        * ((1.0 + s).cbrt() - (1.0 - s).cbrt()))
}

/// Interior part of the explicit resolvent for `V = tau x^2 + rho x` under
/// the hard-edge construction.
pub fn quadratic_n_in_hard(tau: f64, rho: f64, theta: f64, c: f64, s: Complex64) -> Complex64 {
    let tp1 = (theta + 1.0) / theta;
    2.0 * tau * c * c * s * s
        + (4.0 * tau * c * c * tp1 + rho * c) * s
        + rho * c * tp1
        + 2.0 * tau * c * c * (theta + 1.0) * (theta + 2.0) / (theta * theta)
        - 1.0
}

/// Closed-form hard-edge density for quadratic `V` via the interior
/// resolvent: `psi(x) = Im N_in(I_+(x)) / (pi x)`. Independent of the
/// log-kernel quadrature path.
pub fn quadratic_density_hard(
    tau: f64,
    rho: f64,
    theta: f64,
    c: f64,
    curve: &CurveSamples,
    x: f64,
) -> Result<f64, EquilibriumError> {
    if x <= 0.0 || x >= curve.image_right {
        return Err(EquilibriumError::OutOfRange {
            x,
            lo: 0.0,
            hi: curve.image_right,
        });
    }
    let i_plus = if theta == 2.0 {
        crate::conformal::cardano_invert(c, x)?.0
    } else {
        let map = ConformalMap::hard(theta, c);
        invert(&map, curve, x)?.0
    };
    let n_in = quadratic_n_in_hard(tau, rho, theta, c, i_plus);
    Ok(n_in.im / (std::f64::consts::PI * x))
}

/// Closed-form soft-edge density for `theta = 2`, `V = x^2 + rho x`
/// (`rho < -2`), where `N_in(s) = (2/rho^2)(4s + rho^2)(s + 1)`.
pub fn quadratic_density_soft(
    rho: f64,
    c0: f64,
    c1: f64,
    curve: &CurveSamples,
    x: f64,
) -> Result<f64, EquilibriumError> {
    if x <= curve.image_left || x >= curve.image_right {
        return Err(EquilibriumError::OutOfRange {
            x,
            lo: curve.image_left,
            hi: curve.image_right,
        });
    }
    let map = ConformalMap::soft(2.0, c0, c1);
    let (i_plus, _) = invert(&map, curve, x)?;
    let n_in = (2.0 / (rho * rho)) * (4.0 * i_plus + rho * rho) * (i_plus + 1.0);
    Ok(n_in.im / (std::f64::consts::PI * x))
}

/// Edge constants `(d1, d2)` of the hard-edge density:
/// `psi ~ d1 x^{-1/(theta+1)}` at 0 and `psi ~ d2 sqrt(b - x)` at `b`.
pub fn edge_constants(
    v: &Potential,
    theta: f64,
    c: f64,
    curve: &CurveSamples,
) -> Result<(f64, f64), EquilibriumError> {
    let map = ConformalMap::hard(theta, c);
    let b = curve.image_right;
    let s_b = curve.s_right;
    let field = |y: f64| v.eval(y, 2) * y + v.eval(y, 1);
    let im_left = |y: f64| -> f64 {
        match invert(&map, curve, y) {
            Ok((ip, _)) => field(y) * (1.0 / (ip + 1.0)).im,
            Err(_) => f64::NAN,
        }
    };
    let im_right = |y: f64| -> f64 {
        match invert(&map, curve, y) {
            Ok((ip, _)) => field(y) * (1.0 / (ip - s_b)).im,
            Err(_) => f64::NAN,
        }
    };
    let int_left = numerics::tanh_sinh_f64(im_left, 0.0, b, 1e-9, 1e-9)?;
    let int_right = numerics::tanh_sinh_f64(im_right, 0.0, b, 1e-9, 1e-9)?;
    let pi2 = std::f64::consts::PI.powi(2);
    let d1 = -c.powf(-theta / (theta + 1.0)) * (std::f64::consts::PI / (theta + 1.0)).sin()
        / pi2
        * int_left;
    let jpp = map.second_deriv_real(s_b);
    let d2 = -(2.0 / jpp).sqrt() / (pi2 * b) * int_right;
    Ok((d1, d2))
}

/// Edge-factored density cache: knots of `psi` with the known edge
/// behavior divided out, interpolated by cubic Hermite in between.
#[derive(Clone, Debug)]
struct DensityCache {
    xs: Vec<f64>,
    /// Factored values g(x); psi(x) = g(x) * edge_factor(x).
    gs: Vec<f64>,
    slopes: Vec<f64>,
    left: f64,
    right: f64,
    theta: f64,
    hard_left: bool,
    cdf_xs: Vec<f64>,
    cdf_vals: Vec<f64>,
}

impl DensityCache {
    fn edge_factor(&self, x: f64) -> f64 {
        let right_part = (self.right - x).max(0.0).sqrt();
        if self.hard_left {
            x.powf(-1.0 / (self.theta + 1.0)) * right_part
        } else {
            (x - self.left).max(0.0).sqrt() * right_part
        }
    }

    fn build<E>(
        left: f64,
        right: f64,
        theta: f64,
        hard_left: bool,
        knots: usize,
        mut psi: E,
    ) -> Result<Self, EquilibriumError>
    where
        E: FnMut(f64) -> Result<f64, EquilibriumError>,
    {
        let mut xs = Vec::with_capacity(knots);
        let mut gs = Vec::with_capacity(knots);
        let mut proto = Self {
            xs: Vec::new(),
            gs: Vec::new(),
            slopes: Vec::new(),
            left,
            right,
            theta,
            hard_left,
            cdf_xs: Vec::new(),
            cdf_vals: Vec::new(),
        };
        for i in 0..knots {
            let t = (i as f64 + 0.5) / knots as f64;
            let u = 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
            let x = left + (right - left) * u;
            let value = psi(x)?;
            xs.push(x);
            gs.push(value / proto.edge_factor(x));
        }
        // Three-point finite-difference slopes for the Hermite pieces.
        let n = xs.len();
        let mut slopes = vec![0.0; n];
        for i in 0..n {
            slopes[i] = if i == 0 {
                (gs[1] - gs[0]) / (xs[1] - xs[0])
            } else if i == n - 1 {
                (gs[n - 1] - gs[n - 2]) / (xs[n - 1] - xs[n - 2])
            } else {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let d0 = (gs[i] - gs[i - 1]) / h0;
                let d1 = (gs[i + 1] - gs[i]) / h1;
                (h1 * d0 + h0 * d1) / (h0 + h1)
            };
        }
        proto.xs = xs;
        proto.gs = gs;
        proto.slopes = slopes;
        proto.build_cdf();
        Ok(proto)
    }

    fn g_at(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.gs[0];
        }
        if x >= self.xs[n - 1] {
            return self.gs[n - 1];
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.xs[hi] - self.xs[lo];
        let t = (x - self.xs[lo]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * self.gs[lo] + h10 * h * self.slopes[lo] + h01 * self.gs[hi] + h11 * h * self.slopes[hi]
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= self.left || x >= self.right {
            return 0.0;
        }
        (self.g_at(x) * self.edge_factor(x)).max(0.0)
    }

    fn build_cdf(&mut self) {
        // Integrate the interpolant on a fine edge-regular parametrization.
        let n = 1600;
        let mut xs = Vec::with_capacity(n + 1);
        let mut vals = Vec::with_capacity(n + 1);
        let mut acc = 0.0f64;
        let mut prev_x = self.left;
        let mut prev_psi = 0.0f64;
        xs.push(self.left);
        vals.push(0.0);
        for i in 1..=n {
            let u = i as f64 / n as f64;
            let x = if self.hard_left {
                self.left + (self.right - self.left) * u.powf(self.theta + 1.0)
            } else {
                self.left
                    + (self.right - self.left)
                        * 0.5
                        * (1.0 - (std::f64::consts::PI * u).cos())
            };
            let psi = if x >= self.right { 0.0 } else { self.eval(x) };
            acc += 0.5 * (psi + prev_psi) * (x - prev_x);
            xs.push(x);
            vals.push(acc);
            prev_x = x;
            prev_psi = psi;
        }
        // Normalize so KS comparisons see a genuine distribution function.
        let total = acc.max(f64::MIN_POSITIVE);
        for v in &mut vals {
            *v /= total;
        }
        self.cdf_xs = xs;
        self.cdf_vals = vals;
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.left {
            return 0.0;
        }
        if x >= self.right {
            return 1.0;
        }
        let mut lo = 0;
        let mut hi = self.cdf_xs.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cdf_xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.cdf_xs[hi] - self.cdf_xs[lo];
        if h == 0.0 {
            return self.cdf_vals[lo];
        }
        let t = (x - self.cdf_xs[lo]) / h;
        self.cdf_vals[lo] * (1.0 - t) + self.cdf_vals[hi] * t
    }
}

/// Euler-Lagrange verification report.
#[derive(Clone, Debug)]
pub struct ElReport {
    pub max_dev_on_support: f64,
    pub min_slack_off_support: f64,
    pub ell_estimate: f64,
}

/// A solved one-cut equilibrium measure.
#[derive(Clone, Debug)]
pub struct EquilibriumMeasure {
    pub theta: f64,
    pub potential: Potential,
    pub regime: EdgeRegime,
    pub support: (f64, f64),
    pub map: ConformalMap,
    pub curve: CurveSamples,
    /// `(d1, d2)` for hard/critical regimes.
    pub edge_constants: Option<(f64, f64)>,
    pub lagrange_ell: Option<f64>,
    cache: DensityCache,
}

const CACHE_KNOTS: usize = 400;

impl EquilibriumMeasure {
    /// Hard-edge construction: solves the normalization for `c` and caches
    /// the density. Does not validate positivity; see [`classify_edge`].
    pub fn solve_hard(potential: Potential, theta: f64) -> Result<Self, EquilibriumError> {
        let c = solve_c(&potential, theta)?;
        Self::from_hard_c(potential, theta, c)
    }

    pub fn from_hard_c(potential: Potential, theta: f64, c: f64) -> Result<Self, EquilibriumError> {
        let map = ConformalMap::hard(theta, c);
        let curve = trace_curve(&map, 512)?;
        let (d1, d2) = edge_constants(&potential, theta, c, &curve)?;
        let b = curve.image_right;
        let v = potential.clone();
        let cache = DensityCache::build(0.0, b, theta, true, CACHE_KNOTS, |x| {
            density_from_log_kernel(&v, &map, &curve, x)
        })?;
        let regime = if d1.abs() <= 1e-6 * d2.abs().max(1.0) {
            EdgeRegime::CriticalEdge
        } else {
            EdgeRegime::HardEdge
        };
        Ok(Self {
            theta,
            potential,
            regime,
            support: (0.0, b),
            map,
            curve,
            edge_constants: Some((d1, d2)),
            lagrange_ell: None,
            cache,
        })
    }

    /// Soft-edge construction from an initial guess for `(c0, c1)`.
    pub fn solve_soft(
        potential: Potential,
        theta: f64,
        guess: (f64, f64),
    ) -> Result<Self, EquilibriumError> {
        let (c0, c1) = solve_c0_c1(&potential, theta, guess)?;
        Self::from_soft_pair(potential, theta, c0, c1)
    }

    pub fn from_soft_pair(
        potential: Potential,
        theta: f64,
        c0: f64,
        c1: f64,
    ) -> Result<Self, EquilibriumError> {
        let map = ConformalMap::soft(theta, c0, c1);
        let curve = trace_curve(&map, 512)?;
        let (a, b) = (curve.image_left, curve.image_right);
        let v = potential.clone();
        let cache = DensityCache::build(a, b, theta, false, CACHE_KNOTS, |x| {
            density_from_log_kernel(&v, &map, &curve, x)
        })?;
        Ok(Self {
            theta,
            potential,
            regime: EdgeRegime::SoftEdge,
            support: (a, b),
            map,
            curve,
            edge_constants: None,
            lagrange_ell: None,
            cache,
        })
    }

    pub fn soft_parameters(&self) -> Option<(f64, f64)> {
        match self.map.kind() {
            MapKind::Soft { c0, c1 } => Some((c0, c1)),
            MapKind::Hard { .. } => None,
        }
    }

    pub fn hard_parameter(&self) -> Option<f64> {
        match self.map.kind() {
            MapKind::Hard { c } => Some(c),
            MapKind::Soft { .. } => None,
        }
    }

    /// Cached density (cubic interpolation of the edge-factored values);
    /// zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        self.cache.eval(x)
    }

    /// Density by the full log-kernel quadrature.
    pub fn density_exact(&self, x: f64) -> Result<f64, EquilibriumError> {
        density_from_log_kernel(&self.potential, &self.map, &self.curve, x)
    }

    /// Normalized distribution function of the cached density.
    pub fn cdf(&self, x: f64) -> f64 {
        self.cache.cdf(x)
    }

    /// `int psi` by edge-aware substitution (`x = t^{theta+1}` at a hard
    /// edge, `x = edge -+ t^2` at soft edges) of the exact density.
    pub fn total_mass(&self) -> Result<f64, EquilibriumError> {
        let (left, right) = self.support;
        let mid = 0.5 * (left + right);
        let inset = 1e-10 * (right - left);
        let mut err: Option<EquilibriumError> = None;
        let mut psi = |x: f64| -> f64 {
            if x <= left || x >= right {
                return 0.0;
            }
            match self.density_exact(x) {
                Ok(v) => v,
                // The inversion gives up within ~1e-20 of an edge, where the
                // substituted integrand contributes nothing measurable.
                Err(_) if x < left + inset || x > right - inset => 0.0,
                Err(e) => {
                    err = Some(e);
                    f64::NAN
                }
            }
        };
        let left_half = if self.regime == EdgeRegime::SoftEdge {
            let hi = (mid - left).sqrt();
            numerics::tanh_sinh_f64(|t| 2.0 * t * psi(left + t * t), 0.0, hi, 1e-9, 1e-9)?
        } else {
            let p = self.theta + 1.0;
            let hi = (mid - left).powf(1.0 / p);
            numerics::tanh_sinh_f64(
                |t| p * t.powf(p - 1.0) * psi(left + t.powf(p)),
                0.0,
                hi,
                1e-9,
                1e-9,
            )?
        };
        let hi = (right - mid).sqrt();
        let right_half =
            numerics::tanh_sinh_f64(|t| 2.0 * t * psi(right - t * t), 0.0, hi, 1e-9, 1e-9)?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(left_half + right_half)
    }

    /// Effective potential `L(x) = int log|x-y| psi dy
    /// + int log|x^theta - y^theta| psi dy - V(x)` using the cached density.
    pub fn effective_potential(&self, x: f64) -> Result<f64, EquilibriumError> {
        assert!(x > 0.0);
        let (left, right) = self.support;
        let theta = self.theta;
        let xt = x.powf(theta);
        let integrand = |y: f64| -> f64 {
            let psi = self.cache.eval(y);
            if psi == 0.0 {
                return 0.0;
            }
            psi * ((x - y).abs().ln() + (xt - y.powf(theta)).abs().ln())
        };
        let spec = QuadratureSpec::tanh_sinh(1e-10, 1e-10);
        let value = if x > left && x < right {
            numerics::integrate_log_singular(integrand, left, right, x, &spec)?
        } else {
            numerics::integrate_log_singular(integrand, left, right, left - 1.0, &spec)?
        };
        Ok(value - self.potential.eval(x, 0))
    }

    /// Checks the Euler-Lagrange conditions: `L` constant (= ell) on the
    /// support grid, `L <= ell` outside.
    pub fn verify_euler_lagrange(
        &self,
        grid_in: &[f64],
        grid_out: &[f64],
    ) -> Result<ElReport, EquilibriumError> {
        let mut values_in = Vec::with_capacity(grid_in.len());
        for &x in grid_in {
            values_in.push(self.effective_potential(x)?);
        }
        let mut sorted = values_in.clone();
        sorted.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let ell = sorted[sorted.len() / 2];
        let max_dev = values_in
            .iter()
            .map(|v| (v - ell).abs())
            .fold(0.0f64, f64::max);
        let mut min_slack = f64::INFINITY;
        for &x in grid_out {
            let l = self.effective_potential(x)?;
            min_slack = min_slack.min(ell - l);
        }
        Ok(ElReport {
            max_dev_on_support: max_dev,
            min_slack_off_support: min_slack,
            ell_estimate: ell,
        })
    }

    /// Interior cosine-spaced grid, inset from the support edges.
    pub fn interior_grid(&self, n: usize) -> Vec<f64> {
        let (left, right) = self.support;
        (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) / n as f64;
                let u = 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
                let u = 0.03 + 0.94 * u;
                left + (right - left) * u
            })
            .collect()
    }
}

/// Builds the hard-edge candidate, inspects `d1` and density positivity,
/// and falls over to the soft-edge system when the hard-edge assumption
/// fails; the critical regime is `|d1| <= 1e-6 max(1, |d2|)`.
pub fn classify_edge(potential: &Potential, theta: f64) -> Result<EquilibriumMeasure, EquilibriumError> {
    let hard = EquilibriumMeasure::solve_hard(potential.clone(), theta)?;
    let (d1, _d2) = hard.edge_constants.unwrap();
    if hard.regime == EdgeRegime::CriticalEdge {
        return Ok(hard);
    }
    let positive = |m: &EquilibriumMeasure| -> bool {
        m.interior_grid(48)
            .iter()
            .all(|&x| m.density(x) >= -1e-10)
    };
    if d1 > 0.0 && positive(&hard) {
        return Ok(hard);
    }
    // Hard-edge construction invalid: seek the soft-edge measure by
    // continuation from the hard solution.
    let c = hard.hard_parameter().unwrap();
    let guess = (c, c * theta / (1.0 + theta));
    let soft = match EquilibriumMeasure::solve_soft(potential.clone(), theta, guess) {
        Ok(m) => m,
        Err(first_err) => match potential {
            // Quadratic potentials get a ramp in rho from the hard-edge
            // boundary down to the target.
            Potential::Quadratic { tau, rho } => {
                soft_by_rho_ramp(*tau, *rho, theta, guess).map_err(|_| first_err)?
            }
            _ => return Err(first_err),
        },
    };
    if !positive(&soft) {
        return Err(EquilibriumError::Unclassifiable {
            detail: "both hard- and soft-edge candidate densities go negative".into(),
        });
    }
    Ok(soft)
}

fn soft_by_rho_ramp(
    tau: f64,
    rho_target: f64,
    theta: f64,
    mut guess: (f64, f64),
) -> Result<EquilibriumMeasure, EquilibriumError> {
    let rho_start = -2.2 * tau.sqrt();
    let steps = 8;
    for i in 1..=steps {
        let rho = rho_start + (rho_target - rho_start) * i as f64 / steps as f64;
        let v = Potential::quadratic(tau, rho);
        guess = solve_c0_c1(&v, theta, guess)?;
    }
    EquilibriumMeasure::from_soft_pair(Potential::quadratic(tau, rho_target), theta, guess.0, guess.1)
}

/// Locates the critical `rho` (where `d1` vanishes) for `V = tau x^2 + rho x`
/// by bisection on `d1(rho)`.
pub fn critical_rho(
    theta: f64,
    tau: f64,
    rho_lo: f64,
    rho_hi: f64,
) -> Result<f64, EquilibriumError> {
    let curve = trace_curve(&ConformalMap::hard(theta, 1.0), 256)?;
    let mut captured: Option<EquilibriumError> = None;
    let d1_of = |rho: f64| -> f64 {
        let v = Potential::quadratic(tau, rho);
        let result = solve_c(&v, theta).and_then(|c| {
            let map = ConformalMap::hard(theta, c);
            let local_curve = trace_curve(&map, 256)?;
            edge_constants(&v, theta, c, &local_curve)
        });
        match result {
            Ok((d1, _)) => d1,
            Err(e) => {
                captured = Some(e);
                f64::NAN
            }
        }
    };
    let _ = &curve;
    let root = numerics::find_root_monotone(d1_of, rho_lo, rho_hi, 1e-10)?;
    if let Some(e) = captured {
        return Err(e);
    }
    Ok(root)
}

/// The explicit solution of the resolvent problem: `N_0(s)` inside/outside
/// the curve via the Cauchy transform of `U(s) = V'(J(s)) J(s)`, plus the
/// boundary checks tying it to the solved parameters.
pub struct ResolventData {
    map: ConformalMap,
    curve: CurveSamples,
    potential: Potential,
    /// (node, weighted dz, U value) along `gamma_1`.
    nodes: Vec<(Complex64, Complex64, f64)>,
    theta: f64,
}

impl ResolventData {
    pub fn new(
        v: &Potential,
        map: ConformalMap,
        curve: CurveSamples,
    ) -> Result<Self, EquilibriumError> {
        let theta = map.theta();
        let raw = contour_quadrature(&map, &curve, 24, 16)?;
        let mut nodes = Vec::with_capacity(raw.len());
        for (z, dz) in raw {
            let j = map.eval(z)?.re;
            nodes.push((z, dz, v.eval(j, 1) * j));
        }
        Ok(Self {
            map,
            curve,
            potential: v.clone(),
            nodes,
            theta,
        })
    }

    pub fn is_inside(&self, s: Complex64) -> bool {
        if s.im == 0.0 {
            return s.re > self.curve.s_left && s.re < self.curve.s_right;
        }
        let phi = s.im.abs().atan2(s.re);
        s.norm() < self.curve.radius_hint(phi)
    }

    /// Cauchy transform `(1/2 pi i) ∮ (U(xi) - u0)/(xi - s) dxi`.
    fn cauchy_subtracted(&self, s: Complex64, u0: f64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for (z, dz, u) in &self.nodes {
            let upper = (u - u0) * dz / (z - s);
            let lower = (u - u0) * dz.conj() / (z.conj() - s);
            total += upper - lower;
        }
        total / Complex64::new(0.0, 2.0 * std::f64::consts::PI)
    }

    /// `N_0(s)`: `F(s) - 1` inside the curve, `-F(s) + 1` outside, with
    /// `F` the Cauchy transform of `U`.
    pub fn n0(&self, s: Complex64) -> f64 {
        let inside = self.is_inside(s);
        // Subtracting U at the nearest curve point keeps the Cauchy kernel
        // benign when s drifts toward the curve.
        let phi = s.im.abs().atan2(s.re).clamp(1e-6, std::f64::consts::PI - 1e-6);
        let r = self.curve.radius_hint(phi);
        let near = Complex64::from_polar(r, phi);
        let u_near = match self.map.eval(near) {
            Ok(j) => self.potential.eval(j.re, 1) * j.re,
            Err(_) => 0.0,
        };
        let f = self.cauchy_subtracted(s, u_near) + u_near * if inside { 1.0 } else { 0.0 };
        let f = f.re;
        if inside {
            f - 1.0
        } else {
            -f + 1.0
        }
    }

    /// Residual of the boundary relation `N_+ + N_- = U` at curve node
    /// `idx`, probing both one-sided limits at radial offset `delta`.
    pub fn boundary_relation_residual(&self, idx: usize, delta: f64) -> f64 {
        let (z, _, u) = self.nodes[idx];
        let s_in = z * (1.0 - delta);
        let s_out = z * (1.0 + delta);
        self.n0(s_in) + self.n0(s_out) - u
    }

    /// `N_0(0) - theta`: zero exactly when the map parameters solve the
    /// normalization equations.
    pub fn normalization_residual_at_zero(&self) -> f64 {
        self.n0(Complex64::new(0.0, 0.0)) - self.theta
    }

    /// Soft maps only: `N_0(-1)`, zero at the solved (c0, c1).
    pub fn normalization_residual_at_minus_one(&self) -> f64 {
        self.n0(Complex64::new(-1.0, 0.0))
    }

    /// `N_0` far out: tends to 1.
    pub fn far_field_residual(&self) -> f64 {
        self.n0(Complex64::new(80.0, 35.0)) - 1.0
    }
}
