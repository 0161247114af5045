//! Classical motion of a Lagrangian system in normal form.
//!
//! Any regular L(x, v) determines the acceleration
//!
//! ```text
//! a(x, v) = (dL/dx - v * d2L/dxdv) / (d2L/dv2),
//! ```
//!
//! and two Lagrangians built from the same base share this normal form
//! even though their Euler-Lagrange equations look different term by
//! term. The integrator here is an adaptive Dormand-Prince 5(4) pair;
//! trajectories are recorded on a caller-chosen uniform time comb so runs
//! from different Lagrangians can be compared sample by sample.

use crate::error::{Error, Result};
use crate::lagrangian::{legendre_energy, Lagrangian};
use crate::model::PhasePoint;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A solution curve sampled on the requested time comb.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sampled states, including the initial condition; `t` fields carry
    /// the sample times.
    pub points: Vec<PhasePoint>,
    /// Accepted integrator steps.
    pub steps_accepted: usize,
    /// Rejected trial steps.
    pub steps_rejected: usize,
}

impl Trajectory {
    /// State at the last sample time.
    pub fn final_state(&self) -> PhasePoint {
        *self.points.last().expect("a trajectory holds at least its initial condition")
    }
}

/// Acceleration of the system described by `l` at the phase point (x, v).
pub fn normal_form(l: &Lagrangian, x: f64, v: f64) -> Result<f64> {
    let l_vv = l.d2_dv2(x, v)?;
    if l_vv.abs() < 1e-10 {
        return Err(Error::DegenerateHessian(l_vv));
    }
    let l_x = l.d_dx(x, v)?;
    let l_xv = l.d2_dxdv(x, v)?;
    Ok((l_x - v * l_xv) / l_vv)
}

/// Integrate the normal-form dynamics of `l` from `ic` to `t_final`,
/// recording `n_samples` uniformly spaced states (endpoints included).
pub fn integrate(
    l: &Lagrangian,
    ic: PhasePoint,
    t_final: f64,
    n_samples: usize,
    tol: f64,
) -> Result<Trajectory> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples to span an interval, got {n_samples}"
        )));
    }
    if !(t_final.is_finite() && t_final > ic.t) {
        return Err(Error::InvalidParameter(format!(
            "final time {t_final} must exceed initial time {}",
            ic.t
        )));
    }
    if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be in (0, 1), got {tol}")));
    }
    let span = t_final - ic.t;
    let samples: Vec<f64> = (0..n_samples)
        .map(|i| ic.t + span * i as f64 / (n_samples - 1) as f64)
        .collect();
    dopri5(l, ic, &samples, tol)
}

/// Integrate a batch of initial conditions, one trajectory each. With the
/// `parallel` feature the batch is distributed across threads; results are
/// identical to the serial path either way.
pub fn integrate_batch(
    l: &Lagrangian,
    ics: &[PhasePoint],
    t_final: f64,
    n_samples: usize,
    tol: f64,
) -> Result<Vec<Trajectory>> {
    #[cfg(feature = "parallel")]
    {
        ics.par_iter()
            .map(|&ic| integrate(l, ic, t_final, n_samples, tol))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        integrate_batch_serial(l, ics, t_final, n_samples, tol)
    }
}

/// Sequential form of [`integrate_batch`], kept callable in all builds so
/// the two execution paths can be benchmarked against each other.
pub fn integrate_batch_serial(
    l: &Lagrangian,
    ics: &[PhasePoint],
    t_final: f64,
    n_samples: usize,
    tol: f64,
) -> Result<Vec<Trajectory>> {
    ics.iter().map(|&ic| integrate(l, ic, t_final, n_samples, tol)).collect()
}

/// Largest pointwise trajectory gap, max over samples and initial
/// conditions of |x1 - x2| + |v1 - v2|, between the motions generated by
/// two Lagrangians.
pub fn s_equivalence_distance(
    l1: &Lagrangian,
    l2: &Lagrangian,
    ics: &[PhasePoint],
    t_final: f64,
    n_samples: usize,
    tol: f64,
) -> Result<f64> {
    let runs1 = integrate_batch(l1, ics, t_final, n_samples, tol)?;
    let runs2 = integrate_batch(l2, ics, t_final, n_samples, tol)?;
    let mut worst = 0.0f64;
    for (a, b) in runs1.iter().zip(&runs2) {
        for (p, q) in a.points.iter().zip(&b.points) {
            worst = worst.max((p.x - q.x).abs() + (p.v - q.v).abs());
        }
    }
    Ok(worst)
}

/// Largest excursion of the conserved energy H = v dL/dv - L along a
/// recorded trajectory, relative to its value at the first sample.
pub fn conservation_drift(l: &Lagrangian, trajectory: &Trajectory) -> Result<f64> {
    let first = trajectory.points.first().ok_or_else(|| {
        Error::InvalidParameter("cannot measure drift on an empty trajectory".into())
    })?;
    let h0 = legendre_energy(l, first.x, first.v)?;
    let mut worst = 0.0f64;
    for p in &trajectory.points {
        let h = legendre_energy(l, p.x, p.v)?;
        worst = worst.max((h - h0).abs());
    }
    Ok(worst)
}

// Dormand-Prince 5(4) coefficients.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] =
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

fn dopri5(l: &Lagrangian, ic: PhasePoint, samples: &[f64], tol: f64) -> Result<Trajectory> {
    let rhs = |t: f64, y: [f64; 2]| -> Result<[f64; 2]> {
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::Integration {
                t,
                x: y[0],
                v: y[1],
                message: "state left the finite range".into(),
            });
        }
        Ok([y[1], normal_form(l, y[0], y[1])?])
    };

    let mut t = samples[0];
    let mut y = [ic.x, ic.v];
    let mut points = Vec::with_capacity(samples.len());
    points.push(PhasePoint::new(y[0], y[1], t)?);
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    let span = samples[samples.len() - 1] - samples[0];
    let mut h = (span / 100.0).min(samples[1] - samples[0]);
    let mut next = 1usize;

    while next < samples.len() {
        let h_min = 1e-12 * (1.0 + t.abs());
        // Land exactly on the next sample time when within reach.
        let mut step = h;
        let mut hit_sample = false;
        if t + step >= samples[next] - h_min {
            step = samples[next] - t;
            hit_sample = true;
        }

        let k1 = rhs(t, y)?;
        let k2 = rhs(t + C[1] * step, axpy(&y, step, &[(A2[0], &k1)]))?;
        let k3 = rhs(t + C[2] * step, axpy(&y, step, &[(A3[0], &k1), (A3[1], &k2)]))?;
        let k4 = rhs(
            t + C[3] * step,
            axpy(&y, step, &[(A4[0], &k1), (A4[1], &k2), (A4[2], &k3)]),
        )?;
        let k5 = rhs(
            t + C[4] * step,
            axpy(&y, step, &[(A5[0], &k1), (A5[1], &k2), (A5[2], &k3), (A5[3], &k4)]),
        )?;
        let k6 = rhs(
            t + C[5] * step,
            axpy(
                &y,
                step,
                &[(A6[0], &k1), (A6[1], &k2), (A6[2], &k3), (A6[3], &k4), (A6[4], &k5)],
            ),
        )?;
        let ks = [&k1, &k2, &k3, &k4, &k5, &k6];
        let mut y5 = y;
        for (i, k) in ks.iter().enumerate() {
            y5[0] += step * B5[i] * k[0];
            y5[1] += step * B5[i] * k[1];
        }
        let k7 = rhs(t + step, y5)?;
        let mut y4 = y;
        for (i, k) in ks.iter().enumerate() {
            y4[0] += step * B4[i] * k[0];
            y4[1] += step * B4[i] * k[1];
        }
        y4[0] += step * B4[6] * k7[0];
        y4[1] += step * B4[6] * k7[1];

        // Scaled RMS error with atol = rtol = tol.
        let mut err = 0.0f64;
        for i in 0..2 {
            let scale = tol * (1.0 + y[i].abs().max(y5[i].abs()));
            let e = (y5[i] - y4[i]) / scale;
            err += e * e;
        }
        err = (err / 2.0).sqrt();

        if err <= 1.0 {
            t += step;
            y = y5;
            accepted += 1;
            if hit_sample {
                t = samples[next];
                points.push(PhasePoint::new(y[0], y[1], t)?);
                next += 1;
            }
        } else {
            rejected += 1;
            if step <= h_min {
                return Err(Error::Integration {
                    t,
                    x: y[0],
                    v: y[1],
                    message: format!("step size underflow at h = {step:e} with error {err:e}"),
                });
            }
        }
        let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h = (step * factor).max(h_min);
    }

    Ok(Trajectory { points, steps_accepted: accepted, steps_rejected: rejected })
}

fn axpy(y: &[f64; 2], h: f64, terms: &[(f64, &[f64; 2])]) -> [f64; 2] {
    let mut out = *y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}
