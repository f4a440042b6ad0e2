//! The biorthogonal families `p_j`, `q_j` with
//! `int p_j(x) q_k(x^theta) w(x) dx = delta_{jk}`, their correlation kernel,
//! and — for rational `theta = a/b` — recurrence coefficients and the
//! Christoffel-Darboux identity.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rug::ops::{CompleteRound, Pow};
use rug::Float;

use crate::bimoments::{BimomentError, BimomentTable};
use crate::numerics::{self, NumericsError, PrecisionContext, QuadratureSpec};
use crate::potentials::Weight;

/// `theta` as supplied: either a plain real or an exact fraction `a/b`.
///
/// Recurrence and Christoffel-Darboux features require the fraction; no
/// floating-point rationalization is ever attempted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Theta {
    Real(f64),
    Rational { a: u32, b: u32 },
}

impl Theta {
    pub fn real(value: f64) -> Self {
        assert!(value >= 1.0, "theta must be >= 1");
        Theta::Real(value)
    }

    pub fn rational(a: u32, b: u32) -> Self {
        assert!(a >= b && b >= 1, "rational theta needs a >= b >= 1");
        let g = gcd(a, b);
        Theta::Rational { a: a / g, b: b / g }
    }

    /// Parses `"2"`, `"2.5"` or `"3/2"`.
    pub fn parse(text: &str) -> Result<Self, String> {
        if let Some((num, den)) = text.split_once('/') {
            let a: u32 = num.trim().parse().map_err(|_| format!("bad theta: {text}"))?;
            let b: u32 = den.trim().parse().map_err(|_| format!("bad theta: {text}"))?;
            if b == 0 || a < b {
                return Err(format!("theta must be a fraction a/b >= 1, got {text}"));
            }
            Ok(Theta::rational(a, b))
        } else {
            let v: f64 = text.trim().parse().map_err(|_| format!("bad theta: {text}"))?;
            if v < 1.0 {
                return Err(format!("theta must be >= 1, got {text}"));
            }
            Ok(Theta::Real(v))
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Theta::Real(v) => *v,
            Theta::Rational { a, b } => *a as f64 / *b as f64,
        }
    }

    pub fn rational_parts(&self) -> Option<(u32, u32)> {
        match self {
            Theta::Real(_) => None,
            Theta::Rational { a, b } => Some((*a, *b)),
        }
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[derive(Clone, Debug)]
pub enum BiorthogonalError {
    Bimoments(BimomentError),
    Numerics(NumericsError),
    /// Orthogonality residual of the built system exceeded 1e-10.
    PrecisionExhausted { residual: f64 },
    /// Recurrence/CD features need theta supplied as an exact fraction.
    IrrationalTheta,
    /// `|x^a - y^a|` below 1e-12: the CD denominator is degenerate.
    DegeneratePoint,
    /// Quadrature and bimoment-combination inner products disagree.
    CrossCheckFailed { what: &'static str, diff: f64 },
    OutOfRange { what: &'static str },
}

impl fmt::Display for BiorthogonalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiorthogonalError::Bimoments(e) => write!(f, "{e}"),
            BiorthogonalError::Numerics(e) => write!(f, "{e}"),
            BiorthogonalError::PrecisionExhausted { residual } => write!(
                f,
                "orthogonality residual {residual:.3e} exceeds 1e-10; raise mantissa_bits or lower jmax"
            ),
            BiorthogonalError::IrrationalTheta => {
                write!(f, "recurrence features need theta as an exact fraction a/b")
            }
            BiorthogonalError::DegeneratePoint => write!(
                f,
                "|x^a - y^a| < 1e-12: Christoffel-Darboux denominator degenerate"
            ),
            BiorthogonalError::CrossCheckFailed { what, diff } => {
                write!(f, "{what}: quadrature and bimoment paths differ by {diff:.3e}")
            }
            BiorthogonalError::OutOfRange { what } => write!(f, "index out of range: {what}"),
        }
    }
}

impl std::error::Error for BiorthogonalError {}

impl From<BimomentError> for BiorthogonalError {
    fn from(e: BimomentError) -> Self {
        BiorthogonalError::Bimoments(e)
    }
}

impl From<NumericsError> for BiorthogonalError {
    fn from(e: NumericsError) -> Self {
        BiorthogonalError::Numerics(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyKind {
    P,
    Q,
}

/// Recurrence coefficients of
/// `x^a p_k = sum_j u_j(k) p_{k+a-j}`, `x^b q_k = sum_j v_j(k) q_{k+b-j}`,
/// `j = 0..a+b`, with polynomials of negative index identically zero.
#[derive(Clone, Debug)]
pub struct RecurrenceCoeffs {
    pub k: usize,
    pub u: Vec<Float>,
    pub v: Vec<Float>,
}

impl RecurrenceCoeffs {
    pub fn u_f64(&self) -> Vec<f64> {
        self.u.iter().map(|c| c.to_f64()).collect()
    }

    pub fn v_f64(&self) -> Vec<f64> {
        self.v.iter().map(|c| c.to_f64()).collect()
    }
}

/// Both polynomial families up to degree `jmax`, built from the bimoment
/// table by a balanced LDU factorization, normalized so that `p_j` and `q_j`
/// share the positive leading coefficient `kappa_j = sqrt(H_j / H_{j+1})`.
#[derive(Clone, Debug)]
pub struct BiorthogonalSystem {
    pub theta: f64,
    pub theta_rational: Option<(u32, u32)>,
    pub table: BimomentTable,
    /// Row `j`: coefficients of `p_j` in ascending powers.
    pub p_coeffs: Vec<Vec<Float>>,
    pub q_coeffs: Vec<Vec<Float>>,
    pub kappa: Vec<Float>,
    p_f64: Vec<Vec<f64>>,
    q_f64: Vec<Vec<f64>>,
    /// Max |<p_j, q_k> - delta_jk| via bimoment combination, from the build.
    pub algebraic_residual: f64,
    recurrence_memo: Arc<Mutex<HashMap<usize, RecurrenceCoeffs>>>,
}

fn horner_mp(coeffs: &[Float], x: &Float) -> Float {
    let mut acc = Float::with_val(x.prec(), 0);
    for c in coeffs.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}

fn horner_f64(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Builds the system. `theta` as a fraction unlocks the recurrence ops.
pub fn build_system(
    weight: Weight,
    theta: Theta,
    jmax: usize,
    ctx: PrecisionContext,
) -> Result<BiorthogonalSystem, BiorthogonalError> {
    let table = BimomentTable::build(weight, theta.value(), jmax, ctx)?;
    build_system_from_table(table, theta)
}

pub fn build_system_from_table(
    table: BimomentTable,
    theta: Theta,
) -> Result<BiorthogonalSystem, BiorthogonalError> {
    let ctx = table.ctx;
    let bits = ctx.mantissa_bits;
    let n = table.jmax + 1;

    // Pairing matrix A[r][t] = <x^r, x^t> = m_{t r}: LDU of A yields both
    // families at once, since S_p A S_q^T = I.
    let a_mat: Vec<Vec<Float>> = (0..n)
        .map(|r| (0..n).map(|t| table.entry(t, r).clone()).collect())
        .collect();

    // Doolittle LDU: A = L D U, L/U unit-triangular. Pivots are H_{j+1}/H_j,
    // positive in exact arithmetic; a non-positive pivot means the mantissa
    // is exhausted.
    let zero = || Float::with_val(bits, 0);
    let mut lower = vec![vec![zero(); n]; n];
    let mut upper = vec![vec![zero(); n]; n];
    let mut diag: Vec<Float> = Vec::with_capacity(n);
    for k in 0..n {
        let mut d = a_mat[k][k].clone();
        for m in 0..k {
            d -= (&lower[k][m] * &diag[m]).complete(bits) * &upper[m][k];
        }
        if d <= 0 {
            return Err(BiorthogonalError::Bimoments(BimomentError::NonPositive {
                n: k + 1,
            }));
        }
        lower[k][k] = Float::with_val(bits, 1);
        upper[k][k] = Float::with_val(bits, 1);
        for j in k + 1..n {
            let mut s = a_mat[k][j].clone();
            for m in 0..k {
                s -= (&lower[k][m] * &diag[m]).complete(bits) * &upper[m][j];
            }
            upper[k][j] = s / &d;
            let mut s = a_mat[j][k].clone();
            for m in 0..k {
                s -= (&lower[j][m] * &diag[m]).complete(bits) * &upper[m][k];
            }
            lower[j][k] = s / &d;
        }
        diag.push(d);
    }

    let kappa: Vec<Float> = diag.iter().map(|d| d.clone().recip().sqrt()).collect();

    // p rows: kappa_j * (L^-1)_j; q rows: kappa_j * ((U^T)^-1)_j.
    let l_inv = invert_unit_lower(&lower, bits);
    let ut: Vec<Vec<Float>> = (0..n)
        .map(|i| (0..n).map(|j| upper[j][i].clone()).collect())
        .collect();
    let ut_inv = invert_unit_lower(&ut, bits);

    let p_coeffs: Vec<Vec<Float>> = (0..n)
        .map(|j| {
            (0..=j)
                .map(|r| (&kappa[j] * &l_inv[j][r]).complete(bits))
                .collect()
        })
        .collect();
    let q_coeffs: Vec<Vec<Float>> = (0..n)
        .map(|j| {
            (0..=j)
                .map(|t| (&kappa[j] * &ut_inv[j][t]).complete(bits))
                .collect()
        })
        .collect();

    // Algebraic orthogonality residual by bimoment combination.
    let mut residual = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let mut s = Float::with_val(bits, 0);
            for (r, pc) in p_coeffs[j].iter().enumerate() {
                let mut row = Float::with_val(bits, 0);
                for (t, qc) in q_coeffs[k].iter().enumerate() {
                    row += (qc * table.entry(t, r)).complete(bits);
                }
                s += row * pc;
            }
            if j == k {
                s -= 1u32;
            }
            residual = residual.max(s.abs().to_f64());
        }
    }
    if residual > 1e-10 {
        return Err(BiorthogonalError::PrecisionExhausted { residual });
    }

    let p_f64 = p_coeffs
        .iter()
        .map(|row| row.iter().map(|c| c.to_f64()).collect())
        .collect();
    let q_f64 = q_coeffs
        .iter()
        .map(|row| row.iter().map(|c| c.to_f64()).collect())
        .collect();

    Ok(BiorthogonalSystem {
        theta: theta.value(),
        theta_rational: theta.rational_parts(),
        table,
        p_coeffs,
        q_coeffs,
        kappa,
        p_f64,
        q_f64,
        algebraic_residual: residual,
        recurrence_memo: Arc::new(Mutex::new(HashMap::new())),
    })
}

fn invert_unit_lower(l: &[Vec<Float>], bits: u32) -> Vec<Vec<Float>> {
    let n = l.len();
    let mut inv = vec![vec![Float::with_val(bits, 0); n]; n];
    for i in 0..n {
        inv[i][i] = Float::with_val(bits, 1);
        for r in (0..i).rev() {
            let mut s = Float::with_val(bits, 0);
            for m in r..i {
                s += (&l[i][m] * &inv[m][r]).complete(bits);
            }
            inv[i][r] = -s;
        }
    }
    inv
}

impl BiorthogonalSystem {
    pub fn jmax(&self) -> usize {
        self.kappa.len() - 1
    }

    pub fn weight(&self) -> &Weight {
        &self.table.weight
    }

    fn coeffs(&self, kind: PolyKind, j: usize) -> &[Float] {
        match kind {
            PolyKind::P => &self.p_coeffs[j],
            PolyKind::Q => &self.q_coeffs[j],
        }
    }

    fn coeffs_f64(&self, kind: PolyKind, j: usize) -> &[f64] {
        match kind {
            PolyKind::P => &self.p_f64[j],
            PolyKind::Q => &self.q_f64[j],
        }
    }

    /// Horner evaluation at working precision.
    pub fn eval_poly(&self, kind: PolyKind, j: usize, x: &Float) -> Float {
        horner_mp(self.coeffs(kind, j), x)
    }

    pub fn eval_poly_f64(&self, kind: PolyKind, j: usize, x: f64) -> f64 {
        horner_f64(self.coeffs_f64(kind, j), x)
    }

    pub fn eval_poly_complex(&self, kind: PolyKind, j: usize, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs_f64(kind, j).iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Correlation kernel `K_n(x, y) = sum_{j<n} p_j(x) q_j(y^theta) sqrt(w(x) w(y))`.
    pub fn kernel(&self, n: usize, x: f64, y: f64) -> f64 {
        assert!(n <= self.jmax() + 1, "kernel order exceeds jmax+1");
        assert!(x > 0.0 && y > 0.0);
        let w = self.weight();
        let yt = y.powf(self.theta);
        let mut s = 0.0;
        for j in 0..n {
            s += self.eval_poly_f64(PolyKind::P, j, x) * self.eval_poly_f64(PolyKind::Q, j, yt);
        }
        s * (0.5 * (w.log_eval(x) + w.log_eval(y))).exp()
    }

    /// Max `|<p_j, q_k> - delta_jk|` over the table, inner products by
    /// quadrature in the original variable.
    pub fn verify_orthogonality(&self) -> Result<f64, BiorthogonalError> {
        let ctx = self.table.ctx;
        let spec = QuadratureSpec::tanh_sinh(ctx.target_tol, ctx.target_tol);
        let theta = ctx.big(self.theta);
        let w = self.weight().clone();
        let mut max_residual = 0.0f64;
        for j in 0..=self.jmax() {
            for k in 0..=self.jmax() {
                let pj = &self.p_coeffs[j];
                let qk = &self.q_coeffs[k];
                let inner = numerics::mp::integrate_semiaxis(
                    |x| {
                        let xt = x.clone().pow(&theta);
                        horner_mp(pj, x) * horner_mp(qk, &xt) * w.eval_mp(x)
                    },
                    &spec,
                    &ctx,
                )?;
                let mut r = inner;
                if j == k {
                    r -= 1u32;
                }
                max_residual = max_residual.max(r.abs().to_f64());
            }
        }
        Ok(max_residual)
    }

    /// Substituted-variable inner product
    /// `<f, g> = int f(u^b) g(u^a) b u^{b-1} w(u^b) du`, where `f` stands for
    /// `x^{shift_f} * (polynomial with f_coeffs)` and likewise `g`.
    fn inner_substituted(
        &self,
        f_coeffs: &[Float],
        shift_f: u32,
        g_coeffs: &[Float],
        shift_g: u32,
    ) -> Result<Float, BiorthogonalError> {
        let (a, b) = self
            .theta_rational
            .ok_or(BiorthogonalError::IrrationalTheta)?;
        let ctx = self.table.ctx;
        let spec = QuadratureSpec::tanh_sinh(ctx.target_tol, ctx.target_tol);
        let w = self.weight().clone();
        let value = numerics::mp::integrate_semiaxis(
            |u| {
                let ub = u.clone().pow(b);
                let ua = u.clone().pow(a);
                let mut f_val = horner_mp(f_coeffs, &ub);
                if shift_f > 0 {
                    f_val *= ub.clone().pow(shift_f);
                }
                let mut g_val = horner_mp(g_coeffs, &ua);
                if shift_g > 0 {
                    g_val *= ua.clone().pow(shift_g);
                }
                let jac = u.clone().pow(b - 1) * b;
                f_val * g_val * jac * w.eval_mp(&ub)
            },
            &spec,
            &ctx,
        )?;
        Ok(value)
    }

    /// Same pairing assembled from cached bimoments: `<x^i, x^j> = m_{j i}`.
    fn inner_algebraic(
        &self,
        f_coeffs: &[Float],
        shift_f: usize,
        g_coeffs: &[Float],
        shift_g: usize,
    ) -> Float {
        let bits = self.table.ctx.mantissa_bits;
        let mut s = Float::with_val(bits, 0);
        for (r, fc) in f_coeffs.iter().enumerate() {
            let mut row = Float::with_val(bits, 0);
            for (t, gc) in g_coeffs.iter().enumerate() {
                row += (gc * self.table.entry(t + shift_g, r + shift_f)).complete(bits);
            }
            s += row * fc;
        }
        s
    }

    /// All recurrence coefficients `u_j(k)`, `v_j(k)`, `j = 0..a+b`.
    ///
    /// Primary path is quadrature in the substituted variable; each value is
    /// cross-checked against the bimoment combination.
    pub fn recurrence_coeffs(&self, k: usize) -> Result<RecurrenceCoeffs, BiorthogonalError> {
        let (a, b) = self
            .theta_rational
            .ok_or(BiorthogonalError::IrrationalTheta)?;
        let (a_us, b_us) = (a as usize, b as usize);
        if k + a_us > self.jmax() {
            return Err(BiorthogonalError::OutOfRange {
                what: "recurrence_coeffs needs k + a <= jmax",
            });
        }
        if let Some(hit) = self.recurrence_memo.lock().unwrap().get(&k) {
            return Ok(hit.clone());
        }
        let bits = self.table.ctx.mantissa_bits;
        let mut u = Vec::with_capacity(a_us + b_us + 1);
        let mut v = Vec::with_capacity(a_us + b_us + 1);
        for j in 0..=(a_us + b_us) {
            // u_j(k) = <x^a p_k, q_{k+a-j}>
            let coeff = if k + a_us >= j {
                let m = k + a_us - j;
                let quad = self.inner_substituted(&self.p_coeffs[k], a, &self.q_coeffs[m], 0)?;
                let alg = self.inner_algebraic(&self.p_coeffs[k], a_us, &self.q_coeffs[m], 0);
                cross_check(&quad, &alg, "u_j(k)")?;
                quad
            } else {
                Float::with_val(bits, 0)
            };
            u.push(coeff);
            // v_j(k) = <p_{k+b-j}, x^b q_k>
            let coeff = if k + b_us >= j {
                let m = k + b_us - j;
                let quad = self.inner_substituted(&self.p_coeffs[m], 0, &self.q_coeffs[k], b)?;
                let alg = self.inner_algebraic(&self.p_coeffs[m], 0, &self.q_coeffs[k], b_us);
                cross_check(&quad, &alg, "v_j(k)")?;
                quad
            } else {
                Float::with_val(bits, 0)
            };
            v.push(coeff);
        }
        let rc = RecurrenceCoeffs { k, u, v };
        self.recurrence_memo
            .lock()
            .unwrap()
            .insert(k, rc.clone());
        Ok(rc)
    }

    /// `|LHS - RHS|` of the Christoffel-Darboux identity at `(x, y)`,
    /// `LHS = sum_{k<n} p_k(x) q_k(y^theta)`.
    pub fn verify_cd(&self, n: usize, x: f64, y: f64) -> Result<f64, BiorthogonalError> {
        let (a, b) = self
            .theta_rational
            .ok_or(BiorthogonalError::IrrationalTheta)?;
        let (a_us, b_us) = (a as usize, b as usize);
        assert!(n >= 1);
        if n + a_us + b_us - 1 > self.jmax() {
            return Err(BiorthogonalError::OutOfRange {
                what: "verify_cd needs n + a + b - 1 <= jmax",
            });
        }
        if (x.powi(a as i32) - y.powi(a as i32)).abs() < 1e-12 {
            return Err(BiorthogonalError::DegeneratePoint);
        }
        let ctx = self.table.ctx;
        let bits = ctx.mantissa_bits;
        let xf = ctx.big(x);
        let yf = ctx.big(y);
        // y^theta = (y^a)^(1/b), evaluated exactly from the fraction.
        let yt = yf.clone().pow(a).pow(&Float::with_val(bits, b).recip());

        let mut lhs = Float::with_val(bits, 0);
        for k in 0..n {
            lhs += self.eval_poly(PolyKind::P, k, &xf) * self.eval_poly(PolyKind::Q, k, &yt);
        }

        let mut numerator = Float::with_val(bits, 0);
        for ell in 1..=a_us {
            for k in n.saturating_sub(ell)..n {
                let coeff = self.recurrence_coeffs(k)?.u[a_us - ell].clone();
                numerator += coeff
                    * self.eval_poly(PolyKind::P, k + ell, &xf)
                    * self.eval_poly(PolyKind::Q, k, &yt);
            }
        }
        for ell in 1..=b_us {
            for k in n.saturating_sub(ell)..n {
                let coeff = self.recurrence_coeffs(k + ell)?.u[a_us + ell].clone();
                numerator -= coeff
                    * self.eval_poly(PolyKind::P, k, &xf)
                    * self.eval_poly(PolyKind::Q, k + ell, &yt);
            }
        }
        let denom = xf.pow(a) - yf.pow(a);
        let rhs = numerator / denom;
        Ok((lhs - rhs).abs().to_f64())
    }
}

fn cross_check(quad: &Float, alg: &Float, what: &'static str) -> Result<(), BiorthogonalError> {
    let scale = quad
        .clone()
        .abs()
        .to_f64()
        .max(alg.clone().abs().to_f64())
        .max(1.0);
    let diff = (quad.clone() - alg).abs().to_f64();
    if diff > 1e-12 * scale {
        return Err(BiorthogonalError::CrossCheckFailed { what, diff });
    }
    Ok(())
}

/// Bordered-determinant evaluation of `p_j` / `q_j` at `x`: the independent
/// oracle for [`build_system`].
pub fn poly_via_determinant(
    table: &BimomentTable,
    kind: PolyKind,
    j: usize,
    x: &Float,
) -> Result<Float, BiorthogonalError> {
    let ctx = table.ctx;
    let bits = ctx.mantissa_bits;
    if j > table.jmax {
        return Err(BiorthogonalError::OutOfRange {
            what: "poly_via_determinant needs j <= jmax",
        });
    }
    let hj = table.hankel_det(j)?;
    let hj1 = table.hankel_det(j + 1)?;
    let norm = (hj * hj1).sqrt();
    let size = j + 1;
    let mut mat = Vec::with_capacity(size);
    match kind {
        PolyKind::P => {
            for i in 0..j {
                mat.push((0..size).map(|c| table.entry(i, c).clone()).collect());
            }
            let mut row = Vec::with_capacity(size);
            let mut power = Float::with_val(bits, 1);
            for _ in 0..size {
                row.push(power.clone());
                power *= x;
            }
            mat.push(row);
        }
        PolyKind::Q => {
            let mut power = Float::with_val(bits, 1);
            for i in 0..size {
                let mut row: Vec<Float> = (0..j).map(|c| table.entry(i, c).clone()).collect();
                row.push(power.clone());
                power *= x;
                mat.push(row);
            }
        }
    }
    Ok(numerics::mp::det_lu(mat, &ctx) / norm)
}

/// Multiple-integral representation of `p_j(x)` (resp. `q_j(x^theta)`),
/// available for `j <= 2` via tensor-product semiaxis quadrature; the second
/// independent oracle.
pub fn poly_via_integral(
    weight: &Weight,
    theta: f64,
    kind: PolyKind,
    j: usize,
    x: f64,
) -> Result<f64, BiorthogonalError> {
    assert!(j == 1 || j == 2, "integral representation used for j in {{1, 2}}");
    let ctx = PrecisionContext::moments();
    let table = BimomentTable::build(weight.clone(), theta, j, ctx)?;
    let hj = table.hankel_det(j)?.to_f64();
    let hj1 = table.hankel_det(j + 1)?.to_f64();
    let factorial = if j == 1 { 1.0 } else { 2.0 };
    let norm = factorial * (hj * hj1).sqrt();
    let xt = x.powf(theta);
    let value = if j == 1 {
        numerics::integrate_semiaxis_f64(
            |t| {
                let factor = match kind {
                    PolyKind::P => x - t,
                    PolyKind::Q => xt - t.powf(theta),
                };
                factor * weight.eval(t)
            },
            1e-12,
            1e-12,
        )?
    } else {
        numerics::integrate_semiaxis_f64(
            |t1| {
                numerics::integrate_semiaxis_f64(
                    |t2| {
                        let face = match kind {
                            PolyKind::P => (x - t1) * (x - t2),
                            PolyKind::Q => (xt - t1.powf(theta)) * (xt - t2.powf(theta)),
                        };
                        face * (t2 - t1)
                            * (t2.powf(theta) - t1.powf(theta))
                            * weight.eval(t1)
                            * weight.eval(t2)
                    },
                    1e-13,
                    1e-13,
                )
                .unwrap_or(f64::NAN)
            },
            1e-11,
            1e-11,
        )?
    };
    Ok(value / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Potential;

    fn laguerre_system(theta: Theta, jmax: usize) -> BiorthogonalSystem {
        build_system(Weight::laguerre(), theta, jmax, PrecisionContext::moments()).unwrap()
    }

    #[test]
    fn degree_zero_is_constant_kappa() {
        let sys = laguerre_system(Theta::rational(2, 1), 4);
        // m00 = 1 so kappa_0 = 1 and p_0 = q_0 = 1.
        assert!((sys.kappa[0].clone() - 1u32).abs().to_f64() < 1e-70);
        let x = sys.table.ctx.big(17.0);
        let v = sys.eval_poly(PolyKind::P, 0, &x);
        assert!((v - &sys.kappa[0]).abs().to_f64() < 1e-70);
    }

    #[test]
    fn laguerre_degree_one_polynomials() {
        let sys = laguerre_system(Theta::rational(2, 1), 4);
        // p_1 = (x - 1)/2, q_1 = (x - 2)/2, kappa_1 = 1/2.
        assert!((sys.kappa[1].clone() - 0.5f64).abs().to_f64() < 1e-70);
        assert!(sys.eval_poly_f64(PolyKind::P, 1, 1.0).abs() < 1e-70);
        assert!(sys.eval_poly_f64(PolyKind::Q, 1, 2.0).abs() < 1e-70);
        assert!((sys.eval_poly_f64(PolyKind::P, 1, 3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonality_by_quadrature() {
        let sys = laguerre_system(Theta::rational(2, 1), 6);
        let residual = sys.verify_orthogonality().unwrap();
        assert!(residual < 1e-20, "residual = {residual:e}");
    }

    #[test]
    fn orthogonality_sensitive_to_perturbation() {
        // Deliberate fault injection: a 1e-3 bump on one coefficient of p_3
        // must push the residual above 1e-4.
        let mut sys = laguerre_system(Theta::rational(2, 1), 5);
        let bits = sys.table.ctx.mantissa_bits;
        sys.p_coeffs[3][1] += Float::with_val(bits, 1e-3);
        let residual = sys.verify_orthogonality().unwrap();
        assert!(residual > 1e-4, "residual = {residual:e}");
    }

    #[test]
    fn determinant_oracle_matches_build() {
        let sys = laguerre_system(Theta::rational(2, 1), 8);
        for j in [0usize, 1, 2, 5, 8] {
            for &x in &[0.0, 0.7, 3.0] {
                let xf = sys.table.ctx.big(x);
                for kind in [PolyKind::P, PolyKind::Q] {
                    let via_det = poly_via_determinant(&sys.table, kind, j, &xf).unwrap();
                    let direct = sys.eval_poly(kind, j, &xf);
                    let scale = direct.clone().abs().to_f64().max(1e-30);
                    let rel = (via_det - &direct).abs().to_f64() / scale;
                    assert!(rel < 1e-18, "{kind:?}_{j}({x}): rel = {rel:e}");
                }
            }
        }
    }

    #[test]
    fn determinant_oracle_spot_values() {
        let sys = laguerre_system(Theta::rational(2, 1), 2);
        // p_1(3) = (3-1)/2 = 1; q_1(0) = -1.
        let x = sys.table.ctx.big(3.0);
        let p = poly_via_determinant(&sys.table, PolyKind::P, 1, &x).unwrap();
        assert!((p - 1u32).abs().to_f64() < 1e-60);
        let x = sys.table.ctx.big(0.0);
        let q = poly_via_determinant(&sys.table, PolyKind::Q, 1, &x).unwrap();
        assert!((q + 1u32).abs().to_f64() < 1e-60);
    }

    #[test]
    fn integral_oracle_degree_one_and_two() {
        let w = Weight::laguerre();
        // Root of p_1 at the centroid m01/m00 = 1.
        let v = poly_via_integral(&w, 2.0, PolyKind::P, 1, 1.0).unwrap();
        assert!(v.abs() < 1e-10, "v = {v:e}");
        let sys = laguerre_system(Theta::rational(2, 1), 3);
        for &x in &[0.0, 1.3] {
            let oracle = poly_via_integral(&w, 2.0, PolyKind::P, 2, x).unwrap();
            let direct = sys.eval_poly_f64(PolyKind::P, 2, x);
            let rel = (oracle - direct).abs() / direct.abs().max(1e-6);
            assert!(rel < 1e-6, "p_2({x}): {oracle} vs {direct}");
        }
        // q-side at j = 1: value is q_1(x^theta).
        let oracle = poly_via_integral(&w, 2.0, PolyKind::Q, 1, 1.1).unwrap();
        let direct = sys.eval_poly_f64(PolyKind::Q, 1, 1.1f64.powi(2));
        assert!((oracle - direct).abs() < 1e-9);
    }

    #[test]
    fn kernel_order_one_is_weight_product() {
        let sys = laguerre_system(Theta::rational(2, 1), 2);
        let k = sys.kernel(1, 1.3, 0.4);
        let expected = (0.5 * (-1.3f64 - 0.4)).exp();
        assert!((k - expected).abs() < 1e-14);
    }

    #[test]
    fn kernel_trace_is_n() {
        let sys = laguerre_system(Theta::rational(2, 1), 4);
        let n = 3;
        let trace =
            numerics::integrate_semiaxis_f64(|x| sys.kernel(n, x, x), 1e-11, 1e-11).unwrap();
        assert!((trace - n as f64).abs() / n as f64 <= 1e-8, "trace = {trace}");
    }

    #[test]
    fn kernel_reproduces_itself() {
        let sys = laguerre_system(Theta::rational(2, 1), 5);
        let n = 4;
        for &(x, y) in &[(0.8, 1.9), (2.5, 0.3)] {
            let direct = sys.kernel(n, x, y);
            let reproduced = numerics::integrate_semiaxis_f64(
                |z| sys.kernel(n, x, z) * sys.kernel(n, z, y),
                1e-12,
                1e-12,
            )
            .unwrap();
            let rel = (reproduced - direct).abs() / direct.abs().max(1e-12);
            assert!(rel < 1e-6, "K_n at ({x},{y}): {reproduced} vs {direct}");
        }
    }

    #[test]
    fn recurrence_u0_is_kappa_ratio() {
        let sys = laguerre_system(Theta::rational(2, 1), 8);
        for k in 0..=4 {
            let rc = sys.recurrence_coeffs(k).unwrap();
            let expected = (&sys.kappa[k] / &sys.kappa[k + 2]).complete(256);
            let rel = ((rc.u[0].clone() - &expected) / expected).abs().to_f64();
            assert!(rel < 1e-25, "k={k}: rel = {rel:e}");
        }
    }

    fn recurrence_residual(sys: &BiorthogonalSystem, k: usize, kind: PolyKind) -> f64 {
        // Coefficient-wise residual of the recurrence as a polynomial
        // identity, relative to the largest participating coefficient.
        let (a, b) = sys.theta_rational.unwrap();
        let (a_us, b_us) = (a as usize, b as usize);
        let bits = sys.table.ctx.mantissa_bits;
        let rc = sys.recurrence_coeffs(k).unwrap();
        let (shift, coeffs, weights): (usize, &Vec<Vec<Float>>, &Vec<Float>) = match kind {
            PolyKind::P => (a_us, &sys.p_coeffs, &rc.u),
            PolyKind::Q => (b_us, &sys.q_coeffs, &rc.v),
        };
        let deg = k + shift;
        let mut lhs = vec![Float::with_val(bits, 0); deg + 1];
        for (r, c) in coeffs[k].iter().enumerate() {
            lhs[r + shift] = c.clone();
        }
        let mut rhs = vec![Float::with_val(bits, 0); deg + 1];
        for j in 0..=(a_us + b_us) {
            if k + shift < j {
                continue;
            }
            let m = k + shift - j;
            for (r, c) in coeffs[m].iter().enumerate() {
                rhs[r] += (c * &weights[j]).complete(bits);
            }
        }
        let scale = lhs
            .iter()
            .map(|c| c.clone().abs().to_f64())
            .fold(0.0f64, f64::max);
        lhs.iter()
            .zip(&rhs)
            .map(|(l, r)| (l.clone() - r).abs().to_f64())
            .fold(0.0f64, f64::max)
            / scale
    }

    #[test]
    fn recurrence_is_polynomial_identity() {
        let sys = laguerre_system(Theta::rational(2, 1), 9);
        for k in 0..=4 {
            let r = recurrence_residual(&sys, k, PolyKind::P);
            assert!(r < 1e-18, "p-recurrence k={k}: {r:e}");
            let r = recurrence_residual(&sys, k, PolyKind::Q);
            assert!(r < 1e-18, "q-recurrence k={k}: {r:e}");
        }
    }

    #[test]
    fn recurrence_identity_rational_theta() {
        let sys = laguerre_system(Theta::rational(3, 2), 9);
        for k in 0..=3 {
            let r = recurrence_residual(&sys, k, PolyKind::P);
            assert!(r < 1e-18, "theta=3/2 p-recurrence k={k}: {r:e}");
            let r = recurrence_residual(&sys, k, PolyKind::Q);
            assert!(r < 1e-18, "theta=3/2 q-recurrence k={k}: {r:e}");
        }
    }

    #[test]
    fn u_v_symmetry() {
        // u_j(k) = v_{a+b-j}(k+a-j) wherever both sides are defined.
        let sys = laguerre_system(Theta::rational(2, 1), 9);
        let (a, b) = (2usize, 1usize);
        let k = 3;
        let rc = sys.recurrence_coeffs(k).unwrap();
        for j in 0..=(a + b) {
            if k + a < j {
                continue;
            }
            let other_k = k + a - j;
            if other_k + a > sys.jmax() {
                continue;
            }
            let other = sys.recurrence_coeffs(other_k).unwrap();
            let u = rc.u[j].clone();
            let v = other.v[a + b - j].clone();
            let scale = u
                .clone()
                .abs()
                .to_f64()
                .max(v.clone().abs().to_f64())
                .max(1e-30);
            let diff = (u - v).abs().to_f64() / scale;
            assert!(diff < 1e-18, "j={j}: diff = {diff:e}");
        }
    }

    #[test]
    fn cd_identity_small_orders() {
        let sys = laguerre_system(Theta::rational(2, 1), 8);
        let r = sys.verify_cd(5, 2.0, 1.0).unwrap();
        assert!(r < 1e-20, "residual = {r:e}");
        // n = 1 reduces to the boundary terms exactly.
        let r = sys.verify_cd(1, 0.9, 2.2).unwrap();
        assert!(r < 1e-25, "n=1 residual = {r:e}");
    }

    #[test]
    fn cd_identity_theta_three_halves() {
        let sys = laguerre_system(Theta::rational(3, 2), 12);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..25 {
            let x = 5.0 * next().max(1e-3);
            let y = 5.0 * next().max(1e-3);
            if (x.powi(3) - y.powi(3)).abs() < 1e-9 {
                continue;
            }
            let r = sys.verify_cd(8, x, y).unwrap();
            assert!(r < 1e-16, "({x},{y}): residual = {r:e}");
        }
    }

    #[test]
    fn cd_degenerate_point_rejected() {
        let sys = laguerre_system(Theta::rational(2, 1), 5);
        let err = sys.verify_cd(2, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, BiorthogonalError::DegeneratePoint));
    }

    #[test]
    fn irrational_theta_rejected_for_recurrence() {
        let sys = laguerre_system(Theta::real(2.0), 5);
        let err = sys.recurrence_coeffs(0).unwrap_err();
        assert!(matches!(err, BiorthogonalError::IrrationalTheta));
    }

    fn poly_zeros(sys: &BiorthogonalSystem, j: usize, hi: f64) -> Vec<f64> {
        let n_grid = 6000;
        let mut zeros = Vec::new();
        let mut prev_x = 1e-9;
        let mut prev = sys.eval_poly_f64(PolyKind::P, j, prev_x);
        for i in 1..=n_grid {
            let x = hi * i as f64 / n_grid as f64;
            let v = sys.eval_poly_f64(PolyKind::P, j, x);
            if v == 0.0 {
                zeros.push(x);
            } else if prev * v < 0.0 {
                let root = numerics::find_root_monotone(
                    |t| sys.eval_poly_f64(PolyKind::P, j, t),
                    prev_x,
                    x,
                    1e-13,
                )
                .unwrap();
                zeros.push(root);
            }
            prev = v;
            prev_x = x;
        }
        zeros
    }

    #[test]
    fn zeros_positive_simple_interlacing() {
        let sys = laguerre_system(Theta::rational(2, 1), 8);
        let mut prev_zeros: Option<Vec<f64>> = None;
        for j in 1..=8 {
            let zeros = poly_zeros(&sys, j, 60.0);
            assert_eq!(zeros.len(), j, "p_{j} zero count");
            assert!(zeros.iter().all(|&z| z > 0.0));
            if let Some(prev) = &prev_zeros {
                for (i, z) in prev.iter().enumerate() {
                    assert!(
                        zeros[i] < *z && *z < zeros[i + 1],
                        "interlacing fails at p_{j}, zero {i}"
                    );
                }
            }
            prev_zeros = Some(zeros);
        }
    }

    #[test]
    fn theta_parsing() {
        assert_eq!(Theta::parse("2").unwrap(), Theta::Real(2.0));
        assert_eq!(Theta::parse("3/2").unwrap(), Theta::Rational { a: 3, b: 2 });
        assert_eq!(Theta::parse("6/4").unwrap(), Theta::Rational { a: 3, b: 2 });
        assert!(Theta::parse("1/2").is_err());
        assert!(Theta::parse("0.5").is_err());
        assert_eq!(Theta::parse("2/1").unwrap().rational_parts(), Some((2, 1)));
    }

    #[test]
    fn nonlaguerre_weight_system_builds() {
        let w = Weight::new(0.0, 1, Potential::quadratic(0.5, 0.2));
        let sys = build_system(w, Theta::rational(2, 1), 4, PrecisionContext::moments()).unwrap();
        assert!(sys.algebraic_residual < 1e-20);
        let r = sys.verify_cd(2, 1.4, 0.6).unwrap();
        assert!(r < 1e-15, "residual = {r:e}");
    }
}
