//! Scalar potentials V(x) on the line.
//!
//! The derived-Lagrangian construction and the cubic momentum inversion
//! both need V > 0 on the working domain, so alongside the evaluation
//! channels this module provides `shift_to_positive`, which adds the
//! smallest constant that lifts the sampled minimum to a requested margin.

use crate::error::{Error, Result};
use crate::model::grid::GridSpec;

/// Potential on the line: a closed-form family or a tabulated curve with
/// cubic-spline interpolation, plus an additive shift.
#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    shift: f64,
}

#[derive(Debug, Clone)]
enum PotentialKind {
    /// V(x) = omega^2 x^2 / 2
    Harmonic { omega: f64 },
    /// V(x) = lambda x^4
    QuarticWell { lambda: f64 },
    /// V(x) = omega^2 x^2 / 2 + offset
    ShiftedHarmonic { omega: f64, offset: f64 },
    Constant { value: f64 },
    Tabulated(Spline),
}

impl Potential {
    pub fn harmonic(omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "harmonic potential needs omega > 0, got {omega}"
            )));
        }
        Ok(Self { kind: PotentialKind::Harmonic { omega }, shift: 0.0 })
    }

    /// Quartic well lambda x^4. Negative lambda is accepted at construction
    /// so the unboundedness check in `shift_to_positive` has a live target.
    pub fn quartic_well(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quartic well needs nonzero finite lambda, got {lambda}"
            )));
        }
        Ok(Self { kind: PotentialKind::QuarticWell { lambda }, shift: 0.0 })
    }

    pub fn shifted_harmonic(omega: f64, offset: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0 && offset.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "shifted harmonic needs omega > 0 and finite offset, got omega = {omega}, offset = {offset}"
            )));
        }
        Ok(Self { kind: PotentialKind::ShiftedHarmonic { omega, offset }, shift: 0.0 })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("constant potential must be finite, got {value}")));
        }
        Ok(Self { kind: PotentialKind::Constant { value }, shift: 0.0 })
    }

    /// Tabulated potential with natural cubic-spline interpolation between
    /// the knots. Evaluation outside [xs[0], xs[last]] is a domain error.
    pub fn tabulated(xs: &[f64], values: &[f64]) -> Result<Self> {
        Ok(Self { kind: PotentialKind::Tabulated(Spline::new(xs, values)?), shift: 0.0 })
    }

    /// Additive shift currently applied on top of the raw kind.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Tabulated domain, if any. Closed-form kinds evaluate everywhere.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match &self.kind {
            PotentialKind::Tabulated(s) => Some((s.xs[0], *s.xs.last().unwrap())),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.eval_raw(x))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.derivative_raw(x))
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!("potential argument must be finite, got {x}")));
        }
        if let Some((lo, hi)) = self.domain() {
            if x < lo || x > hi {
                return Err(Error::OutOfDomain { x, lo, hi });
            }
        }
        Ok(())
    }

    /// Infallible evaluation; tabulated kinds clamp to the end knots.
    /// Callers that pre-validate coverage (grid builders, kernel assembly)
    /// use this in inner loops.
    pub(crate) fn eval_raw(&self, x: f64) -> f64 {
        let raw = match &self.kind {
            PotentialKind::Harmonic { omega } => 0.5 * omega * omega * x * x,
            PotentialKind::QuarticWell { lambda } => lambda * x.powi(4),
            PotentialKind::ShiftedHarmonic { omega, offset } => 0.5 * omega * omega * x * x + offset,
            PotentialKind::Constant { value } => *value,
            PotentialKind::Tabulated(s) => s.eval(x),
        };
        raw + self.shift
    }

    pub(crate) fn derivative_raw(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Harmonic { omega } => omega * omega * x,
            PotentialKind::QuarticWell { lambda } => 4.0 * lambda * x.powi(3),
            PotentialKind::ShiftedHarmonic { omega, .. } => omega * omega * x,
            PotentialKind::Constant { .. } => 0.0,
            PotentialKind::Tabulated(s) => s.derivative(x),
        }
    }

    /// True when every node of `grid` lies inside the evaluable domain.
    pub fn covers(&self, grid: &GridSpec) -> bool {
        match self.domain() {
            None => true,
            Some((lo, hi)) => grid.x_min() >= lo && grid.x_max() <= hi,
        }
    }

    /// Return a copy shifted by the smallest constant that makes
    /// min V >= margin on the sampled domain. Potentials already at or
    /// above the margin come back unchanged. A minimum that sits on the
    /// domain boundary and keeps dropping when the window is widened is
    /// treated as unbounded below and rejected.
    pub fn shift_to_positive(&self, domain: &GridSpec, margin: f64) -> Result<Potential> {
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(Error::InvalidParameter(format!("margin must be >= 0, got {margin}")));
        }
        if !self.covers(domain) {
            let (lo, hi) = self.domain().unwrap();
            return Err(Error::OutOfDomain { x: domain.x_min(), lo, hi });
        }
        let (min, argmin_idx) = self.grid_min(domain);
        let n = domain.n_points();
        if (argmin_idx == 0 || argmin_idx == n - 1) && self.domain().is_none() {
            // Widen the window by 20 percent; a boundary minimum that keeps
            // falling marks an unbounded direction.
            let span = domain.x_max() - domain.x_min();
            let wide = GridSpec::new(
                domain.x_min() - 0.2 * span,
                domain.x_max() + 0.2 * span,
                n,
                domain.boundary(),
            )?;
            let (wide_min, _) = self.grid_min(&wide);
            if wide_min < min - 1e-9 * (1.0 + min.abs()) {
                return Err(Error::UnboundedPotential);
            }
        }
        let mut out = self.clone();
        if min < margin {
            out.shift += margin - min;
        }
        Ok(out)
    }

    fn grid_min(&self, domain: &GridSpec) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut best_i = 0;
        for i in 0..domain.n_points() {
            let v = self.eval_raw(domain.node(i));
            if v < best {
                best = v;
                best_i = i;
            }
        }
        (best, best_i)
    }
}

/// Natural cubic spline through (xs, ys): C2, zero second derivative at
/// the end knots.
#[derive(Debug, Clone)]
struct Spline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl Spline {
    fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::ShapeMismatch(format!(
                "tabulated potential: {} knots vs {} values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 3 {
            return Err(Error::InvalidParameter("tabulated potential needs at least 3 knots".into()));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("tabulated potential: non-finite entry".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("tabulated potential: knots must be strictly increasing".into()));
        }
        let n = xs.len();
        // Tridiagonal system for the interior second derivatives
        // (Thomas algorithm), natural end conditions m[0] = m[n-1] = 0.
        let mut m = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        for i in 2..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let w = h0 / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
        }
        Ok(Self { xs: xs.to_vec(), ys: ys.to_vec(), m })
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.clamp(1, self.xs.len() - 1) - 1,
        }
    }

    /// Clamps to the end knots; the public entry points reject x outside
    /// the table before getting here.
    fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.xs[0], *self.xs.last().unwrap());
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn derivative(&self, x: f64) -> f64 {
        let x = x.clamp(self.xs[0], *self.xs.last().unwrap());
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0
    }
}
