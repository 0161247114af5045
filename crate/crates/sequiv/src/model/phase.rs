//! Phase-space points and rectangular sampling regions.

use crate::error::{Error, Result};

/// A point (x, v) at time t. The dynamics here are autonomous, so t is
/// carried for bookkeeping only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub v: f64,
    pub t: f64,
}

impl PhasePoint {
    pub fn new(x: f64, v: f64, t: f64) -> Result<Self> {
        if !(x.is_finite() && v.is_finite() && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite phase point ({x}, {v}, {t})")));
        }
        Ok(Self { x, v, t })
    }
}

/// Rectangle in (x, v) used for sampled equivalence checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl PhaseRegion {
    pub fn new(x_min: f64, x_max: f64, v_min: f64, v_max: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max)
            || !(v_min.is_finite() && v_max.is_finite() && v_min < v_max)
        {
            return Err(Error::InvalidParameter(format!(
                "phase region needs finite x_min < x_max and v_min < v_max, got x [{x_min}, {x_max}], v [{v_min}, {v_max}]"
            )));
        }
        Ok(Self { x_min, x_max, v_min, v_max })
    }

    /// Uniform nx-by-nv sample of the rectangle, endpoints included.
    pub fn samples(&self, nx: usize, nv: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(nx * nv);
        for i in 0..nx {
            let fx = if nx > 1 { i as f64 / (nx - 1) as f64 } else { 0.5 };
            let x = self.x_min + fx * (self.x_max - self.x_min);
            for j in 0..nv {
                let fv = if nv > 1 { j as f64 / (nv - 1) as f64 } else { 0.5 };
                out.push((x, self.v_min + fv * (self.v_max - self.v_min)));
            }
        }
        out
    }
}
