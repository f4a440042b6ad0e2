use biortho_core::conformal::{trace_curve, contour_quadrature, ConformalMap};
use biortho_core::potentials::Potential;
use biortho_core::numerics::solve_2d;
use num_complex::Complex64;

fn residuals(v: &Potential, theta: f64, c0: f64, c1: f64) -> Result<(f64, f64), String> {
    if !(c0 > c1 && c1 > 0.0) { return Err(format!("cone violation ({c0},{c1})")); }
    let map = ConformalMap::soft(theta, c0, c1);
    let curve = trace_curve(&map, 128).map_err(|e| format!("{e}"))?;
    let nodes = contour_quadrature(&map, &curve, 12, 16).map_err(|e| format!("{e}"))?;
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    for (z, dz) in &nodes {
        let j = map.eval(*z).map_err(|e| format!("{e}"))?.re;
        let u = v.eval(j, 1) * j;
        s0 += u * dz / z;
        s1 += u * dz / (z + 1.0);
    }
    Ok((s0.im / std::f64::consts::PI - (1.0 + theta), s1.im / std::f64::consts::PI - 1.0))
}

fn main() {
    let theta = 2.0;
    let v = Potential::quadratic(1.0, -3.0);
    let mut calls = 0;
    let res = solve_2d(|c0, c1| {
        calls += 1;
        match residuals(&v, theta, c0, c1) {
            Ok(r) => { if calls < 40 { println!("call {calls}: F({c0:.8}, {c1:.8}) = ({:.3e}, {:.3e})", r.0, r.1); } r }
            Err(e) => { if calls < 40 { println!("call {calls}: ({c0:.8}, {c1:.8}) ERR {e}"); } (1e6, 1e6) }
        }
    }, (1.2, 0.8), 1e-10);
    println!("result: {res:?} after {calls} calls");
}
