//! Real roots of polynomials up to degree three.
//!
//! Closed-form (Cardano / trigonometric) roots followed by Newton polishing
//! on the original coefficients.

use std::f64::consts::PI;

/// Coefficients below this fraction of the largest one are treated as zero
/// when choosing the effective degree.
const DEGREE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootError {
    /// Every coefficient vanishes: the polynomial is zero everywhere.
    Degenerate,
}

/// Evaluates `c[0] + c[1]x + c[2]x² + c[3]x³`.
#[inline]
pub fn eval_cubic(c: &[f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

#[inline]
fn eval_derivative(c: &[f64; 4], x: f64) -> f64 {
    (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1]
}

/// Real roots of `c[0] + c[1]x + c[2]x² + c[3]x³`, sorted ascending.
///
/// `scale` is the magnitude against which a coefficient counts as zero; pass
/// the size of the terms before cancellation. Returns `Degenerate` when every
/// coefficient is negligible at that scale.
pub fn cubic_roots(c: &[f64; 4], scale: f64) -> Result<Vec<f64>, RootError> {
    let largest = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let reference = scale.max(largest);
    if largest <= DEGREE_TOL * reference || largest == 0.0 {
        return Err(RootError::Degenerate);
    }
    let n: Vec<f64> = c.iter().map(|x| x / largest).collect();
    let negligible = |x: f64| x.abs() <= DEGREE_TOL;

    let mut roots = if !negligible(n[3]) {
        depressed_cubic(n[2] / n[3], n[1] / n[3], n[0] / n[3])
    } else if !negligible(n[2]) {
        quadratic(n[2], n[1], n[0])
    } else if !negligible(n[1]) {
        vec![-n[0] / n[1]]
    } else {
        Vec::new()
    };

    for r in roots.iter_mut() {
        *r = polish(c, *r);
    }
    roots.retain(|r| r.is_finite());
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

fn quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        // A touching double root can land just below zero after rounding.
        if disc > -1e-14 * (b * b).max((4.0 * a * c).abs()) {
            return vec![-b / (2.0 * a)];
        }
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0, 0.0];
    }
    vec![q / a, c / q]
}

/// Roots of the monic cubic `x³ + a x² + b x + c`.
fn depressed_cubic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;

    let mut ys = Vec::with_capacity(3);
    if p == 0.0 {
        ys.push((-q).cbrt());
    } else if disc > 0.0 {
        // One real root; pick the sign that avoids cancellation.
        let s = disc.sqrt();
        let w = -half_q - half_q.signum() * s;
        let u = w.cbrt();
        let y = if u == 0.0 { 0.0 } else { u - third_p / u };
        ys.push(y);
        // A nearly double root makes the discriminant positive by rounding
        // only; keep the tangent point so that polishing can settle it.
        let touch_tol = 1e-12 * (half_q * half_q).max((third_p * third_p * third_p).abs());
        if disc <= touch_tol && third_p < 0.0 {
            ys.push(-y / 2.0);
        }
    } else {
        let r = (-third_p).sqrt();
        let cos_arg = (-half_q / (r * r * r)).clamp(-1.0, 1.0);
        let phi = cos_arg.acos();
        for k in 0..3 {
            ys.push(2.0 * r * ((phi - 2.0 * PI * k as f64) / 3.0).cos());
        }
    }
    ys.into_iter().map(|y| y - shift).collect()
}

/// A few guarded Newton steps on the original polynomial.
fn polish(c: &[f64; 4], mut x: f64) -> f64 {
    let mut fx = eval_cubic(c, x);
    for _ in 0..8 {
        let d = eval_derivative(c, x);
        if d == 0.0 || fx == 0.0 {
            break;
        }
        let next = x - fx / d;
        let fnext = eval_cubic(c, next);
        if !(fnext.abs() < fx.abs()) {
            break;
        }
        x = next;
        fx = fnext;
    }
    x
}
