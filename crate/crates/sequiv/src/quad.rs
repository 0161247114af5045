//! Adaptive quadrature for the velocity integrals in the derived-Lagrangian
//! construction.
//!
//! Bisecting Simpson with Richardson error control: each interval is accepted
//! when |S_fine - S_coarse| / 15 falls below its share of the absolute
//! tolerance. Simpson integrates cubics exactly, so the quadratic integrands
//! of the worked Sigma family converge on the first probe; general maps get
//! genuine adaptivity.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

const MAX_DEPTH: u32 = 48;

/// Integrate f over [a, b] (either orientation) to absolute tolerance tol.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!("quadrature limits must be finite, got [{a}, {b}]")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("quadrature tolerance must be > 0, got {tol}")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut evals = 0usize;
    let mut eval = |x: f64| -> Result<f64> {
        evals += 1;
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::Quadrature(format!("integrand non-finite at x = {x}")));
        }
        Ok(y)
    };
    let flo = eval(lo)?;
    let fhi = eval(hi)?;
    let (value, error_estimate) = simpson_branch(&mut eval, lo, hi, flo, fhi, tol, 0)?;
    Ok(QuadResult { value: sign * value, error_estimate, evaluations: evals })
}

fn simpson_branch<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    tol: f64,
    depth: u32,
) -> Result<(f64, f64)> {
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let ml = 0.5 * (a + m);
    let mr = 0.5 * (m + b);
    let fml = f(ml)?;
    let fmr = f(mr)?;
    let h = b - a;
    let coarse = h / 6.0 * (fa + 4.0 * fm + fb);
    let left = h / 12.0 * (fa + 4.0 * fml + fm);
    let right = h / 12.0 * (fm + 4.0 * fmr + fb);
    let fine = left + right;
    let err = (fine - coarse).abs() / 15.0;
    if err <= tol || h.abs() <= 1e-14 * (1.0 + a.abs() + b.abs()) {
        return Ok((fine + (fine - coarse) / 15.0, err));
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] after depth {MAX_DEPTH}, local error {err:e}"
        )));
    }
    let (vl, el) = simpson_branch(f, a, m, fa, fm, 0.5 * tol, depth + 1)?;
    let (vr, er) = simpson_branch(f, m, b, fm, fb, 0.5 * tol, depth + 1)?;
    Ok((vl + vr, el + er))
}
