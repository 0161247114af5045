//! Uniform position grids and time lattices.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Wavefunctions vanish beyond the end nodes; kinetic terms use
    /// central differences.
    Dirichlet,
    /// Node n wraps to node 0; the box length is n_points * dx and
    /// kinetic terms use Fourier differentiation.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    RealTime,
    Euclidean,
}

impl TimeMode {
    pub fn label(self) -> &'static str {
        match self {
            TimeMode::RealTime => "real-time",
            TimeMode::Euclidean => "euclidean",
        }
    }
}

/// Uniform grid of n_points nodes on [x_min, x_max], spacing
/// dx = (x_max - x_min)/(n_points - 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_points: usize, boundary: Boundary) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidParameter(format!(
                "grid needs finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2 nodes, got {n_points}")));
        }
        Ok(Self { x_min, x_max, n_points, boundary })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points as f64 - 1.0)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + self.dx() * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    /// Periodic box length n * dx, so that node n is identified with node 0.
    pub fn box_length(&self) -> f64 {
        self.n_points as f64 * self.dx()
    }

    /// Index of the node closest to x, together with the snap distance.
    pub fn nearest_node(&self, x: f64) -> (usize, f64) {
        let raw = (x - self.x_min) / self.dx();
        let i = raw.round().clamp(0.0, self.n_points as f64 - 1.0) as usize;
        (i, (x - self.node(i)).abs())
    }
}

/// Uniform slicing of a total propagation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeLattice {
    t_total: f64,
    n_steps: usize,
    pub mode: TimeMode,
}

impl TimeLattice {
    pub fn new(t_total: f64, n_steps: usize, mode: TimeMode) -> Result<Self> {
        if !(t_total.is_finite() && t_total > 0.0) {
            return Err(Error::InvalidParameter(format!("time lattice needs t_total > 0, got {t_total}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("time lattice needs n_steps >= 1".into()));
        }
        Ok(Self { t_total, n_steps, mode })
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_total / self.n_steps as f64
    }
}
