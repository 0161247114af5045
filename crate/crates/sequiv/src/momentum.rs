//! The conjugate momentum of the quartic derived Lagrangian and its
//! inversion.
//!
//! With L' = v^4/24 + v^2 V/2 - V^2/2 the momentum is
//!
//! ```text
//! p' = dL'/dv = v^3/6 + v V,
//! ```
//!
//! strictly increasing in v whenever V > 0, so v(p') is single valued; the
//! companion complex pair +-i sqrt(6V) of the cubic never enters. Around
//! p' = 0 the inverse has the odd series
//!
//! ```text
//! v = u - (1/6)(1/V) u^3 + (1/12)(1/V^2) u^5 - (1/18)(1/V^3) u^7 + ...,
//! u = p'/V,
//! ```
//!
//! and for large p' it grows like (6p')^(1/3). The derived Hamiltonian in
//! momentum form, H'(p') = (v^2/2 + V)^2 / 2 with v = v(p'), satisfies
//!
//! ```text
//! d2H'/dp'^2 = (2H')^(-1/2),
//! ```
//!
//! a relation this module exposes as a testable residual together with its
//! scale-free particular solution (81/32)^(1/3) p'^(4/3).

use crate::error::{Error, Result};

/// Coefficients a_k of v = sum a_k u^(2k+1) / V^k with u = p'/V.
pub const VELOCITY_SERIES_COEFFICIENTS: [f64; 4] =
    [1.0, -1.0 / 6.0, 1.0 / 12.0, -1.0 / 18.0];

/// Leading coefficient of the power-law solution of the momentum-space
/// relation, (81/32)^(1/3).
pub fn power_law_coefficient() -> f64 {
    (81.0 / 32.0f64).cbrt()
}

/// p'(v) = v^3/6 + v V at fixed V = V(x).
pub fn conjugate_momentum(v: f64, v_pot: f64) -> f64 {
    v * v * v / 6.0 + v * v_pot
}

/// Invert p' = v^3/6 + v V for the unique real root. Requires V > 0.
///
/// A closed-form Cardano root seeds a short Newton polish; the polish is
/// what carries the result to full double precision for extreme p'.
pub fn invert_momentum(p: f64, v_pot: f64) -> Result<f64> {
    if !(v_pot.is_finite() && v_pot > 0.0) {
        return Err(Error::NonPositivePotential(v_pot));
    }
    if !p.is_finite() {
        return Err(Error::InvalidParameter(format!("momentum must be finite, got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    // Odd symmetry: solve for |p'| and restore the sign at the end, which
    // makes v(-p') = -v(p') exact in floating point.
    let pp = p.abs();
    let mut v = cardano_positive_root(pp, v_pot);
    for _ in 0..4 {
        let g = v * v * v / 6.0 + v * v_pot - pp;
        let dg = 0.5 * v * v + v_pot;
        let step = g / dg;
        v -= step;
        if step.abs() <= 1e-16 * (1.0 + v.abs()) {
            break;
        }
    }
    Ok(p.signum() * v)
}

/// Positive root of t^3/6 + t V = p for p > 0, via the depressed cubic
/// t^3 + 6V t - 6p = 0. The discriminant is positive for V > 0, so there
/// is exactly one real root and no trigonometric branch is needed.
fn cardano_positive_root(p: f64, v_pot: f64) -> f64 {
    let q_half = 3.0 * p;
    let p3 = 2.0 * v_pot;
    let disc = q_half * q_half + p3 * p3 * p3;
    let s = disc.sqrt();
    // q_half > 0, so u has no cancellation; the second Cardano term is
    // -p3/u, which stays stable as well.
    let u = (q_half + s).cbrt();
    u - p3 / u
}

/// Odd truncated series for v(p') up to the given order (1, 3, 5, or 7).
pub fn series_velocity(p: f64, v_pot: f64, order: usize) -> Result<f64> {
    if !(v_pot.is_finite() && v_pot > 0.0) {
        return Err(Error::NonPositivePotential(v_pot));
    }
    let terms = match order {
        1 => 1,
        3 => 2,
        5 => 3,
        7 => 4,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "series order must be one of 1, 3, 5, 7, got {order}"
            )))
        }
    };
    let u = p / v_pot;
    let u2 = u * u;
    let mut acc = 0.0;
    // Horner in u^2/V, highest kept term first.
    for k in (0..terms).rev() {
        acc = acc * u2 / v_pot + VELOCITY_SERIES_COEFFICIENTS[k];
    }
    Ok(u * acc)
}

/// Compact logarithmic resummation of the small-momentum series,
/// (p'/V)(1 + ln(1 - p'^2/V^3)/6). It reproduces the series only through
/// third order; from fifth order on the coefficients disagree, so this is
/// a diagnostic curve rather than a substitute for `series_velocity`.
pub fn log_approx_velocity(p: f64, v_pot: f64) -> Result<f64> {
    if !(v_pot.is_finite() && v_pot > 0.0) {
        return Err(Error::NonPositivePotential(v_pot));
    }
    let u = p / v_pot;
    let arg = 1.0 - u * u / v_pot;
    if arg <= 0.0 {
        return Err(Error::LogFormDomain(arg));
    }
    Ok(u * (1.0 + arg.ln() / 6.0))
}

/// H'(x, p') evaluated exactly through the momentum inversion.
pub fn hprime_exact(p: f64, v_pot: f64) -> Result<f64> {
    let v = invert_momentum(p, v_pot)?;
    let h = 0.5 * v * v + v_pot;
    Ok(0.5 * h * h)
}

/// Truncated momentum-space expansion of the derived Hamiltonian,
/// V^2/2 + p'^2/(2V) - p'^4/(24 V^4); the first omitted term is of order
/// (p'/V)^6.
pub fn hprime_series(p: f64, v_pot: f64) -> Result<f64> {
    if !(v_pot.is_finite() && v_pot > 0.0) {
        return Err(Error::NonPositivePotential(v_pot));
    }
    let p2 = p * p;
    Ok(0.5 * v_pot * v_pot + 0.5 * p2 / v_pot - p2 * p2 / (24.0 * v_pot.powi(4)))
}

/// Residual of d2H'/dp'^2 - (2H')^(-1/2) at p', with the second derivative
/// taken by a central difference of step h on the exact H'. The relation
/// itself is an identity, so the residual is pure differencing error and
/// shrinks as h^2.
pub fn pde_residual(v_pot: f64, p: f64, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("differencing step must be > 0, got {h}")));
    }
    let f_p = hprime_exact(p + h, v_pot)?;
    let f_0 = hprime_exact(p, v_pot)?;
    let f_m = hprime_exact(p - h, v_pot)?;
    let second = (f_p - 2.0 * f_0 + f_m) / (h * h);
    Ok(second - 1.0 / (2.0 * f_0).sqrt())
}

/// Residual of the momentum-space relation for the pure power law
/// A p'^(4/3) with A = (81/32)^(1/3), evaluated analytically. Zero up to
/// rounding for every p' > 0.
pub fn power_law_residual(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidParameter(format!("power law needs p' > 0, got {p}")));
    }
    let a = power_law_coefficient();
    let second = a * (4.0 / 3.0) * (1.0 / 3.0) * p.powf(-2.0 / 3.0);
    let rhs = 1.0 / (2.0 * a * p.powf(4.0 / 3.0)).sqrt();
    Ok(second - rhs)
}

/// Large-momentum velocity (6p')^(1/3) - 2(6p')^(-1/3) V, extended to
/// negative p' by oddness. The expansion point p' = 0 is outside its
/// domain.
pub fn asymptotic_velocity(p: f64, v_pot: f64) -> Result<f64> {
    if p == 0.0 {
        return Err(Error::InvalidParameter("large-momentum form undefined at p' = 0".into()));
    }
    if !p.is_finite() || !v_pot.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite input p' = {p}, V = {v_pot}")));
    }
    let pp = p.abs();
    let lead = (6.0 * pp).cbrt();
    Ok(p.signum() * (lead - 2.0 * v_pot / lead))
}

/// Two readings of the subleading large-momentum coefficient for H'.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticHprime {
    /// A p'^(4/3) - ((9/2)^(1/2) V + a) p'^(2/3), keeping the square-root
    /// reading of the subleading coefficient.
    pub printed: f64,
    /// Same with (9/2)^(1/3), which is what substituting the asymptotic
    /// velocity into H' = H^2/2 actually produces; (9/2)^(1/3) = 6^(2/3)/2.
    pub derived: f64,
}

/// Large-momentum expansion of H' with free additive knob `a` in the
/// subleading coefficient. H' is even in p', so |p'| enters; p' = 0 is
/// rejected. Both coefficient readings are returned side by side because
/// they disagree and the discrepancy is one of the measurements this crate
/// exists to surface.
pub fn asymptotic_hprime(p: f64, v_pot: f64, a: f64) -> Result<AsymptoticHprime> {
    if p == 0.0 {
        return Err(Error::InvalidParameter("large-momentum form undefined at p' = 0".into()));
    }
    if !p.is_finite() || !v_pot.is_finite() || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "non-finite input p' = {p}, V = {v_pot}, a = {a}"
        )));
    }
    let pp = p.abs();
    let lead = power_law_coefficient() * pp.powf(4.0 / 3.0);
    let sub = pp.powf(2.0 / 3.0);
    Ok(AsymptoticHprime {
        printed: lead - ((4.5f64).sqrt() * v_pot + a) * sub,
        derived: lead - ((4.5f64).cbrt() * v_pot + a) * sub,
    })
}
