//! The rational-power conformal maps behind the one-cut equilibrium
//! measures: the hard-edge map `J_c(s) = c (s+1) ((s+1)/s)^{1/theta}` and
//! the soft-edge map `J~(s) = (c1 s + c0) ((s+1)/s)^{1/theta}`, both with
//! branch cut on `[-1, 0]` and linear growth at infinity.
//!
//! The level curve `gamma_1` of real images in the upper half plane is
//! traced by solving the defining argument equation for `r(phi)`; inverses
//! `I_+/I_-` come from Newton refinement seeded off the traced curve.

use std::fmt;

use num_complex::Complex64;

use crate::numerics::{self, NumericsError};

#[derive(Clone, Debug)]
pub enum ConformalError {
    /// `s` within 1e-14 of the branch cut `[-1, 0]`.
    OnBranchCut,
    /// Argument outside the image interval of the curve.
    OutOfRange { x: f64, lo: f64, hi: f64 },
    Numerics(NumericsError),
    /// Traced node failed the `Im J = 0` / monotone-image validation.
    InvalidCurve { detail: String },
}

impl fmt::Display for ConformalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConformalError::OnBranchCut => write!(f, "point is on the branch cut [-1, 0]"),
            ConformalError::OutOfRange { x, lo, hi } => {
                write!(f, "x = {x} outside the image interval ({lo}, {hi})")
            }
            ConformalError::Numerics(e) => write!(f, "{e}"),
            ConformalError::InvalidCurve { detail } => write!(f, "curve validation: {detail}"),
        }
    }
}

impl std::error::Error for ConformalError {}

impl From<NumericsError> for ConformalError {
    fn from(e: NumericsError) -> Self {
        ConformalError::Numerics(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MapKind {
    Hard { c: f64 },
    Soft { c0: f64, c1: f64 },
}

/// Critical points of the map on the real line and their images.
/// Hard maps also have the critical point -1 mapping to 0.
#[derive(Clone, Copy, Debug)]
pub struct CriticalData {
    pub s_a: Option<f64>,
    pub s_b: f64,
    pub image_a: Option<f64>,
    pub image_b: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ConformalMap {
    theta: f64,
    kind: MapKind,
}

impl ConformalMap {
    /// Hard-edge map `J_c`. `theta = 1` is allowed (the curve degenerates to
    /// the unit circle).
    pub fn hard(theta: f64, c: f64) -> Self {
        assert!(theta >= 1.0, "hard map needs theta >= 1");
        assert!(c > 0.0, "hard map needs c > 0");
        Self {
            theta,
            kind: MapKind::Hard { c },
        }
    }

    /// Soft-edge map `J~_{c0,c1}` with `c0 > c1 > 0`.
    pub fn soft(theta: f64, c0: f64, c1: f64) -> Self {
        assert!(theta > 1.0, "soft map needs theta > 1");
        assert!(c0 > c1 && c1 > 0.0, "soft map needs c0 > c1 > 0");
        Self {
            theta,
            kind: MapKind::Soft { c0, c1 },
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    fn near_branch_cut(s: Complex64) -> bool {
        s.im.abs() < 1e-14 && s.re > -1.0 - 1e-14 && s.re < 1e-14
    }

    /// Principal-branch `((s+1)/s)^{1/theta}`, analytic off `[-1, 0]`.
    fn root_factor(&self, s: Complex64) -> Complex64 {
        (((s + 1.0).ln() - s.ln()) / self.theta).exp()
    }

    /// Map value and first derivative; errors within 1e-14 of the cut.
    pub fn map_eval(&self, s: Complex64, derivative_order: u8) -> Result<Complex64, ConformalError> {
        assert!(derivative_order <= 1);
        if derivative_order == 0 {
            self.eval(s)
        } else {
            self.deriv(s)
        }
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64, ConformalError> {
        if Self::near_branch_cut(s) {
            return Err(ConformalError::OnBranchCut);
        }
        let prefactor = match self.kind {
            MapKind::Hard { c } => c * (s + 1.0),
            MapKind::Soft { c0, c1 } => c1 * s + c0,
        };
        Ok(prefactor * self.root_factor(s))
    }

    pub fn deriv(&self, s: Complex64) -> Result<Complex64, ConformalError> {
        let j = self.eval(s)?;
        Ok(j * self.log_deriv(s))
    }

    /// `J'(s)/J(s)`.
    fn log_deriv(&self, s: Complex64) -> Complex64 {
        let inv_theta = 1.0 / self.theta;
        match self.kind {
            MapKind::Hard { .. } => (1.0 + inv_theta) / (s + 1.0) - inv_theta / s,
            MapKind::Soft { c0, c1 } => {
                c1 / (c1 * s + c0) + inv_theta * (1.0 / (s + 1.0) - 1.0 / s)
            }
        }
    }

    /// `J''` at a real point where `J` is real (critical points, the real
    /// axis beyond them).
    pub fn second_deriv_real(&self, s: f64) -> f64 {
        let z = Complex64::new(s, 0.0);
        let inv_theta = 1.0 / self.theta;
        let ld = self.log_deriv(z);
        let ldd = match self.kind {
            MapKind::Hard { .. } => {
                -(1.0 + inv_theta) / ((z + 1.0) * (z + 1.0)) + inv_theta / (z * z)
            }
            MapKind::Soft { c0, c1 } => {
                -(c1 * c1) / ((c1 * z + c0) * (c1 * z + c0))
                    + inv_theta * (-1.0 / ((z + 1.0) * (z + 1.0)) + 1.0 / (z * z))
            }
        };
        let j = self.eval(z).expect("second_deriv_real off the cut");
        (j * (ld * ld + ldd)).re
    }

    /// Closed-form critical points and images.
    pub fn critical_points(&self) -> CriticalData {
        match self.kind {
            MapKind::Hard { c } => {
                let theta = self.theta;
                let s_b = 1.0 / theta;
                let image_b = c * (1.0 + theta).powf(1.0 + 1.0 / theta) / theta;
                CriticalData {
                    s_a: None,
                    s_b,
                    image_a: None,
                    image_b,
                }
            }
            MapKind::Soft { c0, c1 } => {
                let theta = self.theta;
                let disc = (4.0 * c0 * c1 * theta + c1 * c1 * (theta - 1.0).powi(2)).sqrt();
                let s_a = -(theta - 1.0) / (2.0 * theta) - disc / (2.0 * theta * c1);
                let s_b = -(theta - 1.0) / (2.0 * theta) + disc / (2.0 * theta * c1);
                let image_a = self.eval(Complex64::new(s_a, 0.0)).unwrap().re;
                let image_b = self.eval(Complex64::new(s_b, 0.0)).unwrap().re;
                CriticalData {
                    s_a: Some(s_a),
                    s_b,
                    image_a: Some(image_a),
                    image_b,
                }
            }
        }
    }

    /// Defining equation for the curve radius at angle `phi`, increasing in
    /// `r`; its root places `r e^{i phi}` on `gamma_1`.
    fn arg_equation(&self, phi: f64, r: f64) -> f64 {
        let sin = phi.sin();
        let cos = phi.cos();
        let inv_theta = 1.0 / self.theta;
        match self.kind {
            MapKind::Hard { .. } => {
                (1.0 + inv_theta) * (r * sin).atan2(1.0 + r * cos) - inv_theta * phi
            }
            MapKind::Soft { c0, c1 } => {
                let k = c0 / c1;
                (r * sin).atan2(k + r * cos) + inv_theta * (r * sin).atan2(1.0 + r * cos)
                    - inv_theta * phi
            }
        }
    }

    /// `d r / d phi` along the curve by implicit differentiation.
    fn radius_derivative(&self, phi: f64, r: f64) -> f64 {
        let sin = phi.sin();
        let cos = phi.cos();
        let inv_theta = 1.0 / self.theta;
        let term = |k: f64| {
            let norm2 = (k + r * cos).powi(2) + (r * sin).powi(2);
            (k * sin / norm2, (r * k * cos + r * r) / norm2)
        };
        let (f_r, f_phi) = match self.kind {
            MapKind::Hard { .. } => {
                let (dr, dphi) = term(1.0);
                ((1.0 + inv_theta) * dr, (1.0 + inv_theta) * dphi - inv_theta)
            }
            MapKind::Soft { c0, c1 } => {
                let (dr1, dphi1) = term(c0 / c1);
                let (dr2, dphi2) = term(1.0);
                (dr1 + inv_theta * dr2, dphi1 + inv_theta * dphi2 - inv_theta)
            }
        };
        -f_phi / f_r
    }

    /// Solves the defining equation for `r(phi)`, `0 < phi < pi`.
    pub fn curve_radius(&self, phi: f64) -> Result<f64, ConformalError> {
        assert!(phi > 0.0 && phi < std::f64::consts::PI);
        let hi = match self.kind {
            MapKind::Hard { .. } => 1.2,
            MapKind::Soft { .. } => {
                let cp = self.critical_points();
                1.5 * cp.s_a.unwrap().abs()
            }
        };
        let r = numerics::find_root_monotone(|r| self.arg_equation(phi, r), 1e-12, hi, 1e-14)?;
        Ok(r)
    }
}

/// Discretized `gamma_1` (the upper arc; `gamma_2` is its conjugate):
/// angles, radii, nodes and their real images, plus the real endpoints.
#[derive(Clone, Debug)]
pub struct CurveSamples {
    pub phis: Vec<f64>,
    pub radii: Vec<f64>,
    pub nodes: Vec<Complex64>,
    /// `J(node)`, strictly decreasing along increasing `phi`.
    pub images: Vec<f64>,
    pub s_left: f64,
    pub s_right: f64,
    pub image_left: f64,
    pub image_right: f64,
}

impl CurveSamples {
    /// Interpolated radius at `phi` from the stored grid (seed for solves).
    pub fn radius_hint(&self, phi: f64) -> f64 {
        match self.phis.binary_search_by(|p| p.partial_cmp(&phi).unwrap()) {
            Ok(i) => self.radii[i],
            Err(0) => self.radii[0],
            Err(i) if i >= self.phis.len() => *self.radii.last().unwrap(),
            Err(i) => {
                let t = (phi - self.phis[i - 1]) / (self.phis[i] - self.phis[i - 1]);
                self.radii[i - 1] * (1.0 - t) + self.radii[i] * t
            }
        }
    }

    /// Node whose image interpolates to `x`; seed for Newton inversion.
    fn invert_seed(&self, x: f64) -> Option<Complex64> {
        // images decrease with the index.
        if x > self.images[0] || x < *self.images.last().unwrap() {
            return None;
        }
        let mut lo = 0usize;
        let mut hi = self.images.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.images[mid] >= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (self.images[lo] - x) / (self.images[lo] - self.images[hi]);
        Some(self.nodes[lo] * (1.0 - t) + self.nodes[hi] * t)
    }

    /// CSV export: `phi,re_s,im_s,J_of_s`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phi,re_s,im_s,J_of_s\n");
        for i in 0..self.phis.len() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.phis[i], self.nodes[i].re, self.nodes[i].im, self.images[i]
            ));
        }
        out
    }
}

/// Traces `gamma_1` on `M` angles clustered toward both real-axis contacts.
pub fn trace_curve(map: &ConformalMap, m: usize) -> Result<CurveSamples, ConformalError> {
    assert!(m >= 64, "trace_curve needs M >= 64");
    let cp = map.critical_points();
    let (s_left, image_left) = match map.kind() {
        MapKind::Hard { .. } => (-1.0, 0.0),
        MapKind::Soft { .. } => (cp.s_a.unwrap(), cp.image_a.unwrap()),
    };
    let mut phis = Vec::with_capacity(m);
    let mut radii = Vec::with_capacity(m);
    let mut nodes = Vec::with_capacity(m);
    let mut images = Vec::with_capacity(m);
    let scale = cp.image_b.max(1.0);
    for i in 0..m {
        let t = (i as f64 + 0.5) / m as f64;
        let phi = 0.5 * std::f64::consts::PI * (1.0 - (std::f64::consts::PI * t).cos());
        let r = map.curve_radius(phi)?;
        let node = Complex64::from_polar(r, phi);
        let image = map.eval(node)?;
        if image.im.abs() > 1e-10 * scale {
            return Err(ConformalError::InvalidCurve {
                detail: format!("Im J = {:.3e} at phi = {phi}", image.im),
            });
        }
        phis.push(phi);
        radii.push(r);
        nodes.push(node);
        images.push(image.re);
    }
    for w in images.windows(2) {
        if w[1] >= w[0] {
            return Err(ConformalError::InvalidCurve {
                detail: "images not strictly monotone along the curve".into(),
            });
        }
    }
    if images[0] >= cp.image_b || *images.last().unwrap() <= image_left {
        return Err(ConformalError::InvalidCurve {
            detail: "images escape the endpoint interval".into(),
        });
    }
    Ok(CurveSamples {
        phis,
        radii,
        nodes,
        images,
        s_left,
        s_right: cp.s_b,
        image_left,
        image_right: cp.image_b,
    })
}

/// Inverse images `I_+(x)` (upper half plane) and `I_-(x) = conj(I_+)` for
/// `x` strictly inside the image interval.
pub fn invert(
    map: &ConformalMap,
    curve: &CurveSamples,
    x: f64,
) -> Result<(Complex64, Complex64), ConformalError> {
    if x <= curve.image_left || x >= curve.image_right {
        return Err(ConformalError::OutOfRange {
            x,
            lo: curve.image_left,
            hi: curve.image_right,
        });
    }
    let b = curve.image_right;
    let seed = curve.invert_seed(x).unwrap_or_else(|| {
        if x > curve.images[0] {
            // Close to the right critical point: J ~ b + J''(s_b)(s-s_b)^2/2.
            let jpp = map.second_deriv_real(curve.s_right);
            let offset = (2.0 * (b - x) / jpp).abs().sqrt();
            Complex64::new(curve.s_right, offset.max(1e-300))
        } else {
            match map.kind() {
                MapKind::Hard { c } => {
                    // Remark-level expansion at the hard edge:
                    // I_+ = -1 + c^{-theta/(theta+1)} e^{i pi/(theta+1)} x^{theta/(theta+1)}.
                    let theta = map.theta();
                    let p = theta / (theta + 1.0);
                    let rad = c.powf(-p) * x.powf(p);
                    let phase = std::f64::consts::PI / (theta + 1.0);
                    Complex64::new(-1.0, 0.0) + Complex64::from_polar(rad, phase)
                }
                MapKind::Soft { .. } => {
                    let jpp = map.second_deriv_real(curve.s_left);
                    let offset = (2.0 * (x - curve.image_left) / jpp.abs()).sqrt();
                    Complex64::new(curve.s_left, offset.max(1e-300))
                }
            }
        }
    });
    let tol = 1e-12 * b.max(1.0);
    let root = numerics::newton_complex(
        |s| map.eval(s).map(|j| j - x).unwrap_or(Complex64::new(f64::MAX, 0.0)),
        |s| map.deriv(s).unwrap_or(Complex64::new(f64::MIN_POSITIVE, 0.0)),
        seed,
        tol,
    )?;
    let i_plus = if root.im >= 0.0 { root } else { root.conj() };
    Ok((i_plus, i_plus.conj()))
}

/// Closed-form Cardano inverses for the hard map at `theta = 2`:
/// `J_c(s) = x` reduces to `s^3 + 3 s^2 + (3 - x^2/c^2) s + 1 = 0`, whose
/// complex-conjugate roots are
/// `(x^2/(2c^2))^{1/3} (u chi_-+ conj(u) chi_+) - 1` with
/// `chi_\pm = (1 \pm sqrt(1 - 4x^2/27c^2))^{1/3}`, `u = (1 + i sqrt 3)/2`.
pub fn cardano_invert(c: f64, x: f64) -> Result<(Complex64, Complex64), ConformalError> {
    let b = c * 3.0f64.powf(1.5) / 2.0;
    if x <= 0.0 || x >= b {
        return Err(ConformalError::OutOfRange { x, lo: 0.0, hi: b });
    }
    let k = x * x / (c * c);
    let disc = (1.0 - 4.0 * k / 27.0).max(0.0).sqrt();
    let chi_plus = (1.0 + disc).cbrt();
    let chi_minus = (1.0 - disc).cbrt();
    let u = Complex64::new(0.5, 0.5 * 3.0f64.sqrt());
    let scale = (k / 2.0).cbrt();
    let root = scale * (u * chi_minus + u.conj() * chi_plus) - 1.0;
    let i_plus = if root.im >= 0.0 { root } else { root.conj() };
    Ok((i_plus, i_plus.conj()))
}

/// Quadrature nodes `(z, dz)` along `gamma_1` (upper arc, traversed from
/// `s_b` toward the left endpoint), panelwise Gauss-Legendre in an
/// endpoint-clustered angle parameter; `dz` carries the quadrature weight.
/// `dz = (r'(phi) + i r(phi)) e^{i phi} dphi` with `r'` from the implicit
/// derivative of the defining equation.
pub fn contour_quadrature(
    map: &ConformalMap,
    curve: &CurveSamples,
    panels: usize,
    points: usize,
) -> Result<Vec<(Complex64, Complex64)>, ConformalError> {
    let rule = numerics::quad::gauss_legendre_f64(points);
    let width = std::f64::consts::PI / panels as f64;
    let mut out = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        for (node, w) in &rule {
            let t = mid + 0.5 * width * node;
            // phi(t) clusters quadratically at both endpoints.
            let phi = 0.5 * std::f64::consts::PI * (1.0 - t.cos());
            let dphi_dt = 0.5 * std::f64::consts::PI * t.sin();
            if phi <= 0.0 || phi >= std::f64::consts::PI {
                continue;
            }
            let hint = curve.radius_hint(phi);
            let r = refine_radius(map, phi, hint)?;
            let rp = map.radius_derivative(phi, r);
            let e = Complex64::from_polar(1.0, phi);
            let z = r * e;
            let dz = Complex64::new(rp, r) * e * (dphi_dt * w * 0.5 * width);
            out.push((z, dz));
        }
    }
    Ok(out)
}

/// `(1/2 pi i) ∮_gamma g(s) ds` over the closed counterclockwise curve
/// `gamma_1 ∪ gamma_2`. Both halves are evaluated explicitly so arbitrary
/// (non-conjugate-symmetric) integrands work; two resolutions guard the
/// result.
pub fn contour_integral<F>(
    map: &ConformalMap,
    curve: &CurveSamples,
    mut g: F,
) -> Result<Complex64, ConformalError>
where
    F: FnMut(Complex64) -> Complex64,
{
    let mut evaluate = |panels: usize, points: usize| -> Result<Complex64, ConformalError> {
        let mut total = Complex64::new(0.0, 0.0);
        for (z, dz) in contour_quadrature(map, curve, panels, points)? {
            let upper = g(z) * dz;
            let lower = g(z.conj()) * dz.conj();
            total += upper - lower;
        }
        Ok(total / Complex64::new(0.0, 2.0 * std::f64::consts::PI))
    };
    let coarse = evaluate(12, 16)?;
    let fine = evaluate(18, 16)?;
    let scale = fine.norm().max(1.0);
    if (fine - coarse).norm() > 1e-9 * scale {
        return Err(ConformalError::Numerics(NumericsError::NonConvergence {
            what: "contour_integral",
            achieved: (fine - coarse).norm(),
            required: 1e-9 * scale,
        }));
    }
    Ok(fine)
}

/// Newton-polish of the curve radius from an interpolated hint; falls back
/// to the bracketing solver when the hint is not in the basin.
fn refine_radius(map: &ConformalMap, phi: f64, hint: f64) -> Result<f64, ConformalError> {
    let mut r = hint.max(1e-12);
    for _ in 0..40 {
        let f = map.arg_equation(phi, r);
        let sin = phi.sin();
        let cos = phi.cos();
        let inv_theta = 1.0 / map.theta();
        let df = match map.kind() {
            MapKind::Hard { .. } => {
                let norm2 = (1.0 + r * cos).powi(2) + (r * sin).powi(2);
                (1.0 + inv_theta) * sin / norm2
            }
            MapKind::Soft { c0, c1 } => {
                let k = c0 / c1;
                let n1 = (k + r * cos).powi(2) + (r * sin).powi(2);
                let n2 = (1.0 + r * cos).powi(2) + (r * sin).powi(2);
                k * sin / n1 + inv_theta * sin / n2
            }
        };
        let step = f / df;
        r -= step;
        if !(r.is_finite() && r > 0.0) {
            return map.curve_radius(phi);
        }
        if step.abs() <= 1e-15 * r.max(1e-12) {
            return Ok(r);
        }
    }
    map.curve_radius(phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_map_spot_value() {
        // J_2(1) = 2 * 2 * sqrt(2) at theta = 2.
        let map = ConformalMap::hard(2.0, 2.0);
        let v = map.eval(Complex64::new(1.0, 0.0)).unwrap();
        assert!((v.re - 4.0 * 2.0f64.sqrt()).abs() < 1e-14);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn hard_map_critical_image() {
        let map = ConformalMap::hard(2.0, 2.0);
        let cp = map.critical_points();
        assert_eq!(cp.s_b, 0.5);
        let at_sb = map.eval(Complex64::new(cp.s_b, 0.0)).unwrap();
        assert!((at_sb.re - cp.image_b).abs() < 1e-12 * cp.image_b);
        // 3 sqrt(3) for c = 2: b = c (1+theta)^{3/2} / theta.
        assert!((cp.image_b - 2.0 * 27.0f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn hard_map_real_beyond_critical_point() {
        let map = ConformalMap::hard(2.0, 2.0);
        for &s in &[0.6, 1.0, 5.0, 40.0] {
            let v = map.eval(Complex64::new(s, 0.0)).unwrap();
            assert!(v.im.abs() < 1e-13 * v.re.abs(), "Im J({s}) = {}", v.im);
        }
        // and real on (-inf, -1] too
        let v = map.eval(Complex64::new(-2.0, 0.0)).unwrap();
        assert!(v.im.abs() < 1e-13);
    }

    #[test]
    fn branch_cut_rejected() {
        let map = ConformalMap::hard(2.0, 1.0);
        assert!(matches!(
            map.eval(Complex64::new(-0.5, 0.0)),
            Err(ConformalError::OnBranchCut)
        ));
        assert!(map.eval(Complex64::new(-0.5, 1e-6)).is_ok());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let map = ConformalMap::soft(2.0, 1.5, 2.0 / 3.0);
        let s = Complex64::new(0.3, 0.7);
        let h = 1e-6;
        let fd = (map.eval(s + h).unwrap() - map.eval(s - h).unwrap()) / (2.0 * h);
        let an = map.deriv(s).unwrap();
        assert!((fd - an).norm() < 1e-8 * an.norm());
    }

    #[test]
    fn second_derivative_hard_closed_form() {
        // J''(s_b) = b theta^2 / (theta + 1).
        for &(theta, c) in &[(2.0, 2.0), (1.5, 0.7), (3.0, 1.0)] {
            let map = ConformalMap::hard(theta, c);
            let cp = map.critical_points();
            let expected = cp.image_b * theta * theta / (theta + 1.0);
            let got = map.second_deriv_real(cp.s_b);
            assert!(
                (got - expected).abs() < 1e-9 * expected,
                "theta={theta}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn soft_critical_points_against_oracle() {
        // theta=2, c0=3/2, c1=2/3: s_a = -(1+sqrt(19))/4, s_b = (-1+sqrt(19))/4,
        // endpoint images frozen from a 30-digit evaluation.
        let map = ConformalMap::soft(2.0, 1.5, 2.0 / 3.0);
        let cp = map.critical_points();
        let sqrt19 = 19.0f64.sqrt();
        assert!((cp.s_a.unwrap() + (1.0 + sqrt19) / 4.0).abs() < 1e-14);
        assert!((cp.s_b - (-1.0 + sqrt19) / 4.0).abs() < 1e-14);
        assert!((cp.image_a.unwrap() - 0.30558869168351859).abs() < 1e-13);
        assert!((cp.image_b - 3.04885297126707051).abs() < 1e-13);
        assert!(cp.s_a.unwrap() < -1.0 && cp.s_b > 0.0);
    }

    #[test]
    fn unit_circle_at_theta_one() {
        let map = ConformalMap::hard(1.0, 1.0);
        let curve = trace_curve(&map, 256).unwrap();
        let max_dev = curve
            .radii
            .iter()
            .map(|r| (r - 1.0).abs())
            .fold(0.0f64, f64::max);
        assert!(max_dev <= 1e-10, "max |r-1| = {max_dev:e}");
    }

    #[test]
    fn radius_at_right_angle_closed_form() {
        // (3/2) arctan r = pi/4 at theta=2, phi=pi/2: r = tan(pi/6).
        let map = ConformalMap::hard(2.0, 1.0);
        let r = map.curve_radius(std::f64::consts::FRAC_PI_2).unwrap();
        assert!((r - (std::f64::consts::PI / 6.0).tan()).abs() < 1e-13);
    }

    #[test]
    fn radii_inside_unit_circle_for_theta_above_one() {
        for &theta in &[1.5, 2.0, 3.0] {
            let map = ConformalMap::hard(theta, 1.0);
            let curve = trace_curve(&map, 128).unwrap();
            assert!(curve.radii.iter().all(|&r| r < 1.0), "theta = {theta}");
        }
    }

    #[test]
    fn soft_curve_traces_and_validates() {
        let map = ConformalMap::soft(2.0, 1.5, 2.0 / 3.0);
        let curve = trace_curve(&map, 256).unwrap();
        assert!(curve.image_left > 0.0);
        assert!(curve.image_right > curve.image_left);
        // left end of the curve approaches s_a with |s_a| > 1.
        assert!(curve.radii.last().unwrap() > &1.0);
    }

    #[test]
    fn inversion_round_trip() {
        let map = ConformalMap::hard(2.0, 2.0);
        let curve = trace_curve(&map, 512).unwrap();
        let b = curve.image_right;
        for i in 1..100 {
            let x = b * i as f64 / 100.0;
            let (ip, im) = invert(&map, &curve, x).unwrap();
            assert!(ip.im >= 0.0);
            assert_eq!(im, ip.conj());
            let back = map.eval(ip).unwrap();
            assert!(
                (back - x).norm() <= 1e-11 * b,
                "x = {x}: J(I+) = {back}"
            );
        }
    }

    #[test]
    fn inversion_limits_at_endpoints() {
        let map = ConformalMap::hard(2.0, 2.0);
        let curve = trace_curve(&map, 512).unwrap();
        let b = curve.image_right;
        // x -> b: both inverses approach s_b.
        let (ip, _) = invert(&map, &curve, b * (1.0 - 1e-10)).unwrap();
        assert!((ip - Complex64::new(0.5, 0.0)).norm() < 1e-4);
        // x -> 0: inverses leave -1 at phase +- pi/(theta+1).
        let (ip, _) = invert(&map, &curve, 1e-8).unwrap();
        let dep = ip + 1.0;
        let expected = std::f64::consts::PI / 3.0;
        assert!(
            (dep.arg() - expected).abs() < 1e-3,
            "phase = {} vs {expected}",
            dep.arg()
        );
    }

    #[test]
    fn cardano_against_newton() {
        let c = 2.0;
        let map = ConformalMap::hard(2.0, c);
        let curve = trace_curve(&map, 512).unwrap();
        let b = curve.image_right;
        let mut max_diff = 0.0f64;
        for i in 0..50 {
            let x = b * 10f64.powf(-6.0 + 6.0 * i as f64 / 49.0) * 0.999;
            let (newton, _) = invert(&map, &curve, x).unwrap();
            let (card, _) = cardano_invert(c, x).unwrap();
            max_diff = max_diff.max((newton - card).norm());
        }
        assert!(max_diff <= 1e-10, "max diff = {max_diff:e}");
    }

    #[test]
    fn cardano_inverse_property_and_confluence() {
        let c = 2.0;
        let map = ConformalMap::hard(2.0, c);
        let (ip, _) = cardano_invert(c, 0.5).unwrap();
        let back = map.eval(ip).unwrap();
        assert!((back - 0.5).norm() < 1e-12);
        // x -> b: both roots collapse onto s_b = 1/2.
        let b = c * 27.0f64.sqrt() / 2.0;
        let (ip, im) = cardano_invert(c, b * (1.0 - 1e-12)).unwrap();
        assert!((ip - Complex64::new(0.5, 0.0)).norm() < 1e-5);
        assert!((im - Complex64::new(0.5, 0.0)).norm() < 1e-5);
    }

    #[test]
    fn contour_residues() {
        let map = ConformalMap::hard(2.0, 2.0);
        let curve = trace_curve(&map, 512).unwrap();
        // Pole inside gamma (the region encloses [-1, 0]).
        let inside = Complex64::new(-0.4, 0.05);
        let v = contour_integral(&map, &curve, |s| 1.0 / (s - inside)).unwrap();
        assert!((v - 1.0).norm() < 1e-10, "inside: {v}");
        let outside = Complex64::new(1.0, 0.8);
        let v = contour_integral(&map, &curve, |s| 1.0 / (s - outside)).unwrap();
        assert!(v.norm() < 1e-10, "outside: {v}");
    }

    #[test]
    fn contour_of_analytic_function_vanishes() {
        let map = ConformalMap::hard(1.5, 1.0);
        let curve = trace_curve(&map, 512).unwrap();
        let v = contour_integral(&map, &curve, |s| s * s + 3.0 * s - 1.0).unwrap();
        assert!(v.norm() < 1e-10, "polynomial: {v}");
    }

    #[test]
    fn contour_linear_field_normalization() {
        // V = x: (1/2pi i) ∮ J(s)/s ds = c (1 + 1/theta); with c = theta/rho
        // this is the 1 + theta normalization.
        let theta = 2.0;
        let map = ConformalMap::hard(theta, theta / 1.0);
        let curve = trace_curve(&map, 512).unwrap();
        let v = contour_integral(&map, &curve, |s| map.eval(s).unwrap() / s).unwrap();
        assert!((v.re - (1.0 + theta)).abs() < 1e-9, "got {v}");
        assert!(v.im.abs() < 1e-10);
    }

    #[test]
    fn invert_rejects_out_of_range() {
        let map = ConformalMap::hard(2.0, 1.0);
        let curve = trace_curve(&map, 128).unwrap();
        assert!(matches!(
            invert(&map, &curve, curve.image_right * 1.5),
            Err(ConformalError::OutOfRange { .. })
        ));
    }

    #[test]
    fn curve_csv_schema() {
        let map = ConformalMap::hard(2.0, 1.0);
        let curve = trace_curve(&map, 64).unwrap();
        let csv = curve.to_csv();
        assert!(csv.starts_with("phi,re_s,im_s,J_of_s\n"));
        assert_eq!(csv.lines().count(), 65);
    }
}
