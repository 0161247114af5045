//! Time-sliced kernels: one-step transfer matrices built directly from a
//! discretized action, and their composition into finite-time amplitudes.
//!
//! Each step weight is exp(i L dt) in real time or exp(-L_E dt) in
//! Euclidean time, with the velocity read off the node displacement. The
//! real-time slices optionally rotate dt to dt(1 - i*eps); the rotation
//! is applied everywhere dt appears, velocities included, so a two-step
//! composition still equals one double step analytically and the residual
//! measures pure discretization.
//!
//! The derived action in real time is v^4/24 + v^2 V/2 - V^2/2. Its
//! Euclidean counterpart is taken as v^4/24 + v^2 V/2 + V^2/2: rotating a
//! quartic velocity term leaves a sign choice, and this module fixes it
//! so the step weight decays in the displacement. What that definition
//! converges to under refinement is measured, not assumed.
//!
//! Normalization of the slice measure is exactly the ambiguity the
//! experiments probe, so it is a knob: the flat Gaussian constant, a
//! stationary-phase factor carrying the velocity Hessian of the action,
//! or a calibration that rescales each source column of the kinetic
//! factor to unit mass.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Boundary, GridSpec, Potential, TimeMode};

/// Smallest grid the kernel builders accept.
const MIN_POINTS: usize = 8;

/// Which action the slices exponentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeLagrangian {
    /// v^2/2 - V.
    Base,
    /// The derived quartic family member, v^4/24 + v^2 V/2 - V^2/2.
    Derived,
}

/// Per-slice measure factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelNormalization {
    /// (2 pi i dt)^(-1/2) in real time, (2 pi dt)^(-1/2) in Euclidean
    /// time; exact for the free base action.
    GaussianConstant,
    /// (G / (2 pi i dt))^(1/2) with G the velocity Hessian of the action
    /// at the step. Reduces to the constant for the base action.
    StationaryPhase,
    /// Kinetic factor rescaled so every source column has unit mass,
    /// times the potential-only factor. Reduces to the free result when
    /// the potential vanishes.
    ColumnSumCalibrated,
}

/// Where the potential is read within a step from x_from to x_to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialSampling {
    /// V((x_from + x_to)/2). The default; same first-order convergence
    /// as the endpoint rule but with a smaller constant.
    Midpoint,
    /// V(x_from), matching the factorization that evolves with the
    /// potential of the slice's starting point.
    LeftEndpoint,
    /// (V(x_from) + V(x_to))/2, which splits the potential weight
    /// symmetrically across the step ends. The step matrix becomes the
    /// exact product of a half potential factor, the kinetic factor,
    /// and another half potential factor, so its error is second order
    /// in the slice width.
    EndpointAverage,
}

/// Shape of the kinetic exponent and prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KineticConvention {
    Standard,
    /// Drops the 1/2 from the velocity-square exponent and inverts the
    /// square-root prefactor. A deliberately wrong convention, kept
    /// because a formula of this shape circulates and its failure is
    /// worth demonstrating; base action and real time only.
    UnhalvedSqrtPrefactor,
}

/// Everything that defines one time slice.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub lagrangian: LatticeLagrangian,
    pub potential: Potential,
    pub dt: f64,
    pub mode: TimeMode,
    pub normalization: KernelNormalization,
    /// Dimensionless rotation of dt into the lower half plane; 0 means
    /// none. Real time only.
    pub regulator: f64,
    pub potential_sampling: PotentialSampling,
    pub kinetic_convention: KineticConvention,
}

impl KernelSpec {
    /// A slice spec with the conventional choices: constant
    /// normalization, midpoint sampling, no regulator.
    pub fn new(
        lagrangian: LatticeLagrangian,
        potential: Potential,
        dt: f64,
        mode: TimeMode,
    ) -> Self {
        KernelSpec {
            lagrangian,
            potential,
            dt,
            mode,
            normalization: KernelNormalization::GaussianConstant,
            regulator: 0.0,
            potential_sampling: PotentialSampling::Midpoint,
            kinetic_convention: KineticConvention::Standard,
        }
    }

    /// Check every rule a slice must satisfy on this grid: positive
    /// finite dt, regulator range and mode compatibility, the unhalved
    /// convention's restrictions, grid size, and potential coverage.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "slice duration must be positive, got {}",
                self.dt
            )));
        }
        if !(self.regulator.is_finite() && self.regulator >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regulator must be finite and nonnegative, got {}",
                self.regulator
            )));
        }
        if self.mode == TimeMode::Euclidean && self.regulator != 0.0 {
            return Err(Error::InvalidParameter(
                "the regulator rotates real time; Euclidean slices take none".into(),
            ));
        }
        if self.kinetic_convention == KineticConvention::UnhalvedSqrtPrefactor
            && (self.lagrangian != LatticeLagrangian::Base || self.mode != TimeMode::RealTime)
        {
            return Err(Error::InvalidParameter(
                "the unhalved convention is defined for the base action in real time only".into(),
            ));
        }
        if grid.n_points() < MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "grid has {} points, need at least {MIN_POINTS}",
                grid.n_points()
            )));
        }
        if !self.potential.covers(grid) {
            return Err(Error::OutOfDomain {
                x: grid.x_min(),
                lo: grid.x_min(),
                hi: grid.x_max(),
            });
        }
        Ok(())
    }

    /// dt as it enters every formula: rotated for regulated real time.
    fn complex_dt(&self) -> Complex64 {
        match self.mode {
            TimeMode::RealTime => Complex64::new(self.dt, -self.dt * self.regulator),
            TimeMode::Euclidean => Complex64::new(self.dt, 0.0),
        }
    }
}

/// A composed finite-time kernel, stored as a density: entry (i, j) is
/// the amplitude density for reaching node i from node j.
#[derive(Debug, Clone)]
pub struct LatticeAmplitude {
    pub matrix: DMatrix<Complex64>,
    pub grid: GridSpec,
    pub n_steps: usize,
    pub dt: f64,
    pub mode: TimeMode,
    /// Largest fraction of column mass (sources from the central three
    /// quarters of the grid) that ends in the outermost twentieth of rows
    /// on either edge.
    pub boundary_mass: f64,
    /// Set when `boundary_mass` exceeds 1e-3: the box is influencing the
    /// answer and the amplitude should not be trusted quantitatively.
    pub unreliable: bool,
}

impl LatticeAmplitude {
    pub fn total_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// Amplitude density between the nodes nearest the two positions.
    pub fn amplitude(&self, x_from: f64, x_to: f64) -> Complex64 {
        let (i_from, off_from) = self.grid.nearest_node(x_from);
        let (i_to, off_to) = self.grid.nearest_node(x_to);
        let dx = self.grid.dx();
        if off_from.abs() > 1e-9 * dx || off_to.abs() > 1e-9 * dx {
            log::warn!(
                "amplitude arguments ({x_from}, {x_to}) snapped to nodes ({}, {})",
                self.grid.node(i_from),
                self.grid.node(i_to)
            );
        }
        self.matrix[(i_to, i_from)]
    }
}

/// Exact free-particle kernel density for one real-time step.
pub fn free_kernel_density(dt: f64, dxi: f64) -> Complex64 {
    let prefactor = (Complex64::i() * 2.0 * std::f64::consts::PI * dt).sqrt().inv();
    prefactor * (Complex64::i() * dxi * dxi / (2.0 * dt)).exp()
}

/// Signed displacement from node j to node i, minimal-image on periodic
/// grids.
fn displacement(grid: &GridSpec, i: usize, j: usize) -> f64 {
    match grid.boundary() {
        Boundary::Dirichlet => grid.node(i) - grid.node(j),
        Boundary::Periodic => {
            let n = grid.n_points() as isize;
            let mut d = i as isize - j as isize;
            if d > n / 2 {
                d -= n;
            } else if d < -(n / 2) {
                d += n;
            }
            d as f64 * grid.dx()
        }
    }
}

/// Potential value entering the step j -> i.
fn potential_sample(spec: &KernelSpec, grid: &GridSpec, i: usize, j: usize) -> f64 {
    match spec.potential_sampling {
        PotentialSampling::LeftEndpoint => spec.potential.eval_raw(grid.node(j)),
        PotentialSampling::Midpoint => {
            let x = grid.node(j) + 0.5 * displacement(grid, i, j);
            let folded = match grid.boundary() {
                Boundary::Dirichlet => x,
                // Fold midpoints that crossed the seam back into the box.
                Boundary::Periodic => {
                    grid.x_min() + (x - grid.x_min()).rem_euclid(grid.box_length())
                }
            };
            spec.potential.eval_raw(folded)
        }
        PotentialSampling::EndpointAverage => {
            0.5 * (spec.potential.eval_raw(grid.node(i)) + spec.potential.eval_raw(grid.node(j)))
        }
    }
}

/// Exponent of one step weight: the kernel entry is N * exp(W). In real
/// time W = i S with S the slice action at the (possibly rotated) dt; in
/// Euclidean time W = -S_E. The displacement is taken as given, with no
/// wrapping.
pub fn step_exponent(spec: &KernelSpec, x_from: f64, x_to: f64) -> Result<Complex64> {
    if !(x_from.is_finite() && x_to.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "positions must be finite, got {x_from} and {x_to}"
        )));
    }
    let v_pot = match spec.potential_sampling {
        PotentialSampling::LeftEndpoint => spec.potential.eval(x_from)?,
        PotentialSampling::Midpoint => spec.potential.eval(0.5 * (x_from + x_to))?,
        PotentialSampling::EndpointAverage => {
            0.5 * (spec.potential.eval(x_from)? + spec.potential.eval(x_to)?)
        }
    };
    Ok(exponent_parts(spec, x_to - x_from, v_pot).total())
}

struct ExponentParts {
    kinetic: Complex64,
    potential: Complex64,
}

impl ExponentParts {
    fn total(&self) -> Complex64 {
        self.kinetic + self.potential
    }
}

/// Split the step exponent into a velocity-dependent part and a
/// velocity-independent part; the calibrated normalization rescales the
/// former only.
fn exponent_parts(spec: &KernelSpec, dxi: f64, v_pot: f64) -> ExponentParts {
    let dt = spec.complex_dt();
    let v = Complex64::new(dxi, 0.0) / dt;
    let v2 = v * v;
    match spec.mode {
        TimeMode::RealTime => {
            let i = Complex64::i();
            match spec.lagrangian {
                LatticeLagrangian::Base => {
                    let kin = match spec.kinetic_convention {
                        KineticConvention::Standard => i * dt * v2 / 2.0,
                        KineticConvention::UnhalvedSqrtPrefactor => i * dt * v2,
                    };
                    ExponentParts { kinetic: kin, potential: -i * dt * v_pot }
                }
                LatticeLagrangian::Derived => ExponentParts {
                    kinetic: i * dt * (v2 * v2 / 24.0 + v2 * v_pot / 2.0),
                    potential: -i * dt * v_pot * v_pot / 2.0,
                },
            }
        }
        TimeMode::Euclidean => match spec.lagrangian {
            LatticeLagrangian::Base => ExponentParts {
                kinetic: -dt * v2 / 2.0,
                potential: -dt * v_pot,
            },
            LatticeLagrangian::Derived => ExponentParts {
                kinetic: -dt * (v2 * v2 / 24.0 + v2 * v_pot / 2.0),
                potential: -dt * v_pot * v_pot / 2.0,
            },
        },
    }
}

/// Velocity Hessian of the slice action at complex velocity v.
fn velocity_hessian(spec: &KernelSpec, v: Complex64, v_pot: f64) -> Complex64 {
    match spec.lagrangian {
        LatticeLagrangian::Base => Complex64::new(1.0, 0.0),
        LatticeLagrangian::Derived => v * v / 2.0 + v_pot,
    }
}

/// One-step evolution matrix: column j holds the weights for moving node
/// j's amplitude across one slice.
pub fn step_matrix(spec: &KernelSpec, grid: &GridSpec) -> Result<DMatrix<Complex64>> {
    spec.validate(grid)?;
    let n = grid.n_points();
    let dx = grid.dx();
    let dt = spec.complex_dt();
    let two_pi = 2.0 * std::f64::consts::PI;
    let gaussian_norm = match spec.mode {
        TimeMode::RealTime => match spec.kinetic_convention {
            KineticConvention::Standard => (Complex64::i() * two_pi * dt).sqrt().inv(),
            KineticConvention::UnhalvedSqrtPrefactor => (Complex64::i() * two_pi * dt).sqrt(),
        },
        TimeMode::Euclidean => Complex64::new(1.0 / (two_pi * spec.dt).sqrt(), 0.0),
    };

    let mut kinetic = DMatrix::<Complex64>::zeros(n, n);
    let mut potential = DMatrix::<Complex64>::zeros(n, n);
    let mut hessian_floor = f64::INFINITY;
    for j in 0..n {
        for i in 0..n {
            let dxi = displacement(grid, i, j);
            let v_pot = potential_sample(spec, grid, i, j);
            let parts = exponent_parts(spec, dxi, v_pot);
            kinetic[(i, j)] = parts.kinetic.exp();
            potential[(i, j)] = parts.potential.exp();
            if spec.normalization == KernelNormalization::StationaryPhase {
                let g = velocity_hessian(spec, Complex64::new(dxi, 0.0) / dt, v_pot);
                hessian_floor = hessian_floor.min(g.norm());
                kinetic[(i, j)] *= g.sqrt();
            }
        }
    }
    if spec.normalization == KernelNormalization::StationaryPhase && hessian_floor < 1e-12 {
        return Err(Error::Normalization(format!(
            "velocity Hessian reaches {hessian_floor:e}; the stationary-phase factor is \
             degenerate on this grid"
        )));
    }

    let mut m = DMatrix::<Complex64>::zeros(n, n);
    match spec.normalization {
        KernelNormalization::GaussianConstant | KernelNormalization::StationaryPhase => {
            for j in 0..n {
                for i in 0..n {
                    m[(i, j)] = gaussian_norm * kinetic[(i, j)] * potential[(i, j)] * dx;
                }
            }
        }
        KernelNormalization::ColumnSumCalibrated => {
            for j in 0..n {
                let mut mass = Complex64::new(0.0, 0.0);
                let mut abs_mass = 0.0f64;
                for i in 0..n {
                    mass += kinetic[(i, j)];
                    abs_mass += kinetic[(i, j)].norm();
                }
                if mass.norm() < 1e-12 * abs_mass {
                    return Err(Error::Normalization(format!(
                        "kinetic column {j} sums to {:e} against absolute mass {abs_mass:e}; \
                         calibration is ill conditioned here",
                        mass.norm()
                    )));
                }
                for i in 0..n {
                    m[(i, j)] = kinetic[(i, j)] / mass * potential[(i, j)];
                }
            }
        }
    }
    Ok(m)
}

/// Compose `n_steps` identical slices into a finite-time kernel density.
pub fn compose(spec: &KernelSpec, grid: &GridSpec, n_steps: usize) -> Result<LatticeAmplitude> {
    spec.validate(grid)?;
    let n = grid.n_points();
    let dx = grid.dx();
    let power = if n_steps == 0 {
        DMatrix::identity(n, n)
    } else {
        let step = step_matrix(spec, grid)?;
        linalg::matpow(&step, n_steps)?
    };
    let matrix = power / Complex64::new(dx, 0.0);
    let boundary_mass = boundary_mass_fraction(&matrix);
    Ok(LatticeAmplitude {
        matrix,
        grid: *grid,
        n_steps,
        dt: spec.dt,
        mode: spec.mode,
        boundary_mass,
        unreliable: boundary_mass > 1e-3,
    })
}

/// Largest fraction of |column| mass landing in the outer rows, over
/// source columns from the central three quarters of the grid.
fn boundary_mass_fraction(density: &DMatrix<Complex64>) -> f64 {
    let n = density.nrows();
    let band = n / 20;
    if band == 0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for j in n / 8..n - n / 8 {
        let mut outer = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            let a = density[(i, j)].norm();
            total += a;
            if i < band || i >= n - band {
                outer += a;
            }
        }
        if total > 0.0 {
            worst = worst.max(outer / total);
        }
    }
    worst
}

/// One refinement point of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub dt: f64,
    /// Interior max-abs gap between the composed density and the
    /// reference density.
    pub error: f64,
}

/// Errors against a fixed reference across slice refinements, with the
/// observed order fitted on the log-log points.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of ln(error) against ln(dt); `None` when the
    /// errors do not decrease monotonically under refinement, which is
    /// itself a finding.
    pub fitted_order: Option<f64>,
}

/// Run `template` at each step count in `n_list` over the same total
/// time and compare against `reference` (a kernel density on the same
/// grid), clipping `margin` of each edge.
pub fn convergence_study(
    template: &KernelSpec,
    grid: &GridSpec,
    t_total: f64,
    n_list: &[usize],
    reference: &DMatrix<Complex64>,
    margin: f64,
) -> Result<ConvergenceStudy> {
    if n_list.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a convergence study needs at least two step counts, got {}",
            n_list.len()
        )));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(Error::InvalidParameter(
            "step counts must be positive and strictly increasing".into(),
        ));
    }
    if !(t_total.is_finite() && t_total > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "total time must be positive, got {t_total}"
        )));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &steps in n_list {
        let mut spec = template.clone();
        spec.dt = t_total / steps as f64;
        let amp = compose(&spec, grid, steps)?;
        let error = linalg::interior_max_abs_diff(&amp.matrix, reference, margin)?;
        rows.push(ConvergenceRow { n_steps: steps, dt: spec.dt, error });
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.dt, r.error)).collect();
    Ok(ConvergenceStudy { rows, fitted_order: fit_log_order(&pairs) })
}

/// Least-squares slope of ln(error) against ln(dt) over (dt, error)
/// pairs ordered by decreasing dt. Returns `None` for fewer than two
/// points, a nonpositive error, or errors that fail to decrease
/// monotonically as dt shrinks.
pub fn fit_log_order(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    if pairs.iter().any(|&(dt, e)| !(dt > 0.0) || !(e > 0.0)) {
        return None;
    }
    if pairs.windows(2).any(|w| w[1].0 >= w[0].0 || w[1].1 >= w[0].1) {
        return None;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    Some(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, GridSpec};
    use crate::quantum;
    use approx::assert_relative_eq;

    fn periodic_grid(half_width: f64, n: usize) -> GridSpec {
        GridSpec::new(-half_width, half_width, n, Boundary::Periodic).unwrap()
    }

    fn dirichlet_grid(half_width: f64, n: usize) -> GridSpec {
        GridSpec::new(-half_width, half_width, n, Boundary::Dirichlet).unwrap()
    }

    fn free_spec(dt: f64) -> KernelSpec {
        KernelSpec::new(
            LatticeLagrangian::Base,
            Potential::constant(0.0).unwrap(),
            dt,
            TimeMode::RealTime,
        )
    }

    #[test]
    fn free_magnitude_is_flat() {
        let grid = dirichlet_grid(10.0, 64);
        let spec = free_spec(0.3);
        let amp = compose(&spec, &grid, 1).unwrap();
        let expect = 1.0 / (2.0 * std::f64::consts::PI * 0.3).sqrt();
        for z in amp.matrix.iter() {
            assert!(
                (z.norm() - expect).abs() <= 1e-13 * expect,
                "modulus {} vs {expect}",
                z.norm()
            );
        }
        // Phase and modulus both match the closed form.
        let x = grid.node(30);
        let y = grid.node(37);
        let direct = free_kernel_density(0.3, y - x);
        let got = amp.amplitude(x, y);
        assert!((got - direct).norm() <= 1e-12);
    }

    #[test]
    fn step_exponent_matches_the_lagrangian_calculus() {
        use crate::lagrangian::{build_sprime_lagrangian, Lagrangian};
        use crate::model::SigmaMap;
        let pot = Potential::shifted_harmonic(1.0, 1.0).unwrap();
        let base = Lagrangian::base(pot.clone());
        let derived = build_sprime_lagrangian(&base, SigmaMap::HalfSquare, 0.0).unwrap();
        let dt = 0.2;
        for (lagrangian, reference) in
            [(LatticeLagrangian::Base, &base), (LatticeLagrangian::Derived, &derived)]
        {
            let spec = KernelSpec::new(lagrangian, pot.clone(), dt, TimeMode::RealTime);
            for (x_from, x_to) in [(0.3, 0.9), (-1.2, -0.7), (1.5, -0.4)] {
                let w = step_exponent(&spec, x_from, x_to).unwrap();
                let x_bar = 0.5 * (x_from + x_to);
                let v = (x_to - x_from) / dt;
                let expect = reference.evaluate(x_bar, v).unwrap() * dt;
                assert_relative_eq!(w.im, expect, epsilon = 1e-10 * (1.0 + expect.abs()));
                assert!(w.re.abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
        // Euclidean base slice carries v^2/2 + V.
        let spec =
            KernelSpec::new(LatticeLagrangian::Base, pot.clone(), dt, TimeMode::Euclidean);
        let w = step_exponent(&spec, 0.0, 0.6).unwrap();
        let v = 3.0f64;
        let expect = -(v * v / 2.0 + pot.eval(0.3).unwrap()) * dt;
        assert_relative_eq!(w.re, expect, epsilon = 1e-12);
        assert_eq!(w.im, 0.0);
    }

    #[test]
    fn stationary_phase_collapses_for_the_base_action() {
        let grid = dirichlet_grid(6.0, 48);
        let pot = Potential::shifted_harmonic(1.0, 1.0).unwrap();
        let mut spec =
            KernelSpec::new(LatticeLagrangian::Base, pot, 0.2, TimeMode::RealTime);
        let flat = step_matrix(&spec, &grid).unwrap();
        spec.normalization = KernelNormalization::StationaryPhase;
        let sp = step_matrix(&spec, &grid).unwrap();
        let gap = (&flat - &sp).norm() / flat.norm();
        assert!(gap <= 1e-14, "gap {gap:e}");
    }

    #[test]
    fn regulated_two_step_composition_matches_one_double_step() {
        let grid = periodic_grid(15.0, 256);
        let mut fine = free_spec(0.25);
        fine.regulator = 0.1;
        let mut coarse = free_spec(0.5);
        coarse.regulator = 0.1;
        let two = compose(&fine, &grid, 2).unwrap();
        let one = compose(&coarse, &grid, 1).unwrap();
        let gap = linalg::interior_max_abs_diff(&two.matrix, &one.matrix, 0.125).unwrap();
        assert!(gap <= 1e-6, "composition gap {gap:e}");
        // The same identity with a potential present picks up genuine
        // slicing error, orders of magnitude above the free residual.
        let pot = Potential::shifted_harmonic(1.0, 1.0).unwrap();
        let mut fine_v = fine.clone();
        fine_v.potential = pot.clone();
        let mut coarse_v = coarse.clone();
        coarse_v.potential = pot;
        let two_v = compose(&fine_v, &grid, 2).unwrap();
        let one_v = compose(&coarse_v, &grid, 1).unwrap();
        let gap_v =
            linalg::interior_max_abs_diff(&two_v.matrix, &one_v.matrix, 0.125).unwrap();
        assert!(gap_v > 100.0 * gap, "potential slicing error {gap_v:e} vs free {gap:e}");
    }

    #[test]
    fn euclidean_weights_are_positive() {
        let grid = dirichlet_grid(8.0, 64);
        let pot = Potential::shifted_harmonic(1.0, 1.0).unwrap();
        for lagrangian in [LatticeLagrangian::Base, LatticeLagrangian::Derived] {
            let spec = KernelSpec::new(lagrangian, pot.clone(), 0.1, TimeMode::Euclidean);
            let amp = compose(&spec, &grid, 4).unwrap();
            // Far off-diagonal entries underflow to zero; nothing may go
            // negative or pick up a phase.
            for z in amp.matrix.iter() {
                assert!(z.re >= 0.0 && z.im == 0.0, "entry {z} not a nonnegative weight");
            }
            for i in 0..grid.n_points() {
                assert!(amp.matrix[(i, i)].re > 0.0, "diagonal entry {i} vanished");
            }
        }
    }

    #[test]
    fn euclidean_trace_finds_the_ground_energy() {
        let grid = periodic_grid(10.0, 256);
        let mut spec = KernelSpec::new(
            LatticeLagrangian::Base,
            Potential::harmonic(1.0).unwrap(),
            5.0 / 64.0,
            TimeMode::Euclidean,
        );
        spec.potential_sampling = PotentialSampling::LeftEndpoint;
        let step = step_matrix(&spec, &grid).unwrap();
        let power = linalg::matpow(&step, 64).unwrap();
        let z: Complex64 = (0..grid.n_points()).map(|i| power[(i, i)]).sum();
        let e0 = -z.re.ln() / 5.0;
        assert!((e0 - 0.5).abs() <= 0.01, "trace estimate {e0}");
    }

    #[test]
    fn euclidean_refinement_is_first_order_with_endpoint_sampling() {
        let grid = periodic_grid(8.0, 128);
        let pot = Potential::shifted_harmonic(1.0, 1.0).unwrap();
        let h = quantum::build_hamiltonian(&pot, &grid).unwrap();
        let reference = quantum::spectral_propagator(&h, 1.0, TimeMode::Euclidean)
            .unwrap()
            .kernel_density();
        let mut template =
            KernelSpec::new(LatticeLagrangian::Base, pot, 1.0, TimeMode::Euclidean);
        template.potential_sampling = PotentialSampling::LeftEndpoint;
        let study =
            convergence_study(&template, &grid, 1.0, &[8, 16, 32], &reference, 0.125).unwrap();
        let p = study.fitted_order.expect("errors should decrease monotonically");
        assert!((0.7..=1.3).contains(&p), "fitted order {p}, rows {:?}", study.rows);
    }

    #[test]
    fn midpoint_sampling_shrinks_the_error_constant() {
        let grid = periodic_grid(8.0, 128);
        let pot = Potential::shifted_harmonic(1.0, 1.0).unwrap();
        let h = quantum::build_hamiltonian(&pot, &grid).unwrap();
        let reference = quantum::spectral_propagator(&h, 1.0, TimeMode::Euclidean)
            .unwrap()
            .kernel_density();
        let mid = KernelSpec::new(LatticeLagrangian::Base, pot, 1.0, TimeMode::Euclidean);
        let study =
            convergence_study(&mid, &grid, 1.0, &[8, 16, 32], &reference, 0.125).unwrap();
        // Still first order: reading V between the nodes misses the
        // line average of the potential by a term of the same order as
        // the endpoint rule's.
        let p = study.fitted_order.expect("errors should decrease monotonically");
        assert!((0.7..=1.3).contains(&p), "fitted order {p}, rows {:?}", study.rows);
        // But the constant beats the endpoint rule at every refinement.
        let mut left = mid.clone();
        left.potential_sampling = PotentialSampling::LeftEndpoint;
        let study_left =
            convergence_study(&left, &grid, 1.0, &[8, 16, 32], &reference, 0.125).unwrap();
        for (m, l) in study.rows.iter().zip(&study_left.rows) {
            assert!(
                m.error < l.error,
                "midpoint {:e} not below endpoint {:e} at {} steps",
                m.error,
                l.error,
                m.n_steps
            );
        }
    }

    #[test]
    fn symmetric_splitting_is_second_order() {
        let grid = periodic_grid(8.0, 128);
        let pot = Potential::shifted_harmonic(1.0, 1.0).unwrap();
        let h = quantum::build_hamiltonian(&pot, &grid).unwrap();
        let reference = quantum::spectral_propagator(&h, 1.0, TimeMode::Euclidean)
            .unwrap()
            .kernel_density();
        let mut template =
            KernelSpec::new(LatticeLagrangian::Base, pot, 1.0, TimeMode::Euclidean);
        template.potential_sampling = PotentialSampling::EndpointAverage;
        let study =
            convergence_study(&template, &grid, 1.0, &[8, 16, 32], &reference, 0.125).unwrap();
        let p = study.fitted_order.expect("errors should decrease monotonically");
        assert!(p >= 1.7, "fitted order {p}, rows {:?}", study.rows);
    }

    #[test]
    fn real_time_error_decreases_under_refinement() {
        let grid = periodic_grid(6.0, 128);
        let pot = Potential::harmonic(1.0).unwrap();
        let h = quantum::build_hamiltonian(&pot, &grid).unwrap();
        let eps = 0.2;
        let reference =
            quantum::spectral_propagator_damped(&h, 1.0, eps).unwrap().kernel_density();
        let mut template = KernelSpec::new(LatticeLagrangian::Base, pot, 1.0, TimeMode::RealTime);
        template.regulator = eps;
        template.potential_sampling = PotentialSampling::LeftEndpoint;
        let errs: Vec<f64> = [8usize, 32]
            .iter()
            .map(|&n| {
                let mut spec = template.clone();
                spec.dt = 1.0 / n as f64;
                let amp = compose(&spec, &grid, n).unwrap();
                linalg::interior_max_abs_diff(&amp.matrix, &reference, 0.125).unwrap()
            })
            .collect();
        assert!(
            errs[1] < 0.5 * errs[0],
            "refinement did not help: e(8) = {:e}, e(32) = {:e}",
            errs[0],
            errs[1]
        );
    }

    #[test]
    fn zero_steps_give_the_discrete_delta() {
        let grid = dirichlet_grid(5.0, 32);
        let amp = compose(&free_spec(0.1), &grid, 0).unwrap();
        let dx = grid.dx();
        for i in 0..32 {
            for j in 0..32 {
                let expect = if i == j { 1.0 / dx } else { 0.0 };
                assert_eq!(amp.matrix[(i, j)].re, expect);
                assert_eq!(amp.matrix[(i, j)].im, 0.0);
            }
        }
        assert!(!amp.unreliable);
    }

    #[test]
    fn unregulated_free_spreading_trips_the_reliability_flag() {
        let grid = dirichlet_grid(4.0, 64);
        let amp = compose(&free_spec(0.5), &grid, 4).unwrap();
        assert!(amp.unreliable, "boundary mass {:e}", amp.boundary_mass);
        // A Euclidean harmonic run over the same horizon stays confined.
        let spec = KernelSpec::new(
            LatticeLagrangian::Base,
            Potential::harmonic(1.0).unwrap(),
            0.125,
            TimeMode::Euclidean,
        );
        let grid2 = dirichlet_grid(10.0, 128);
        let tame = compose(&spec, &grid2, 8).unwrap();
        assert!(!tame.unreliable, "boundary mass {:e}", tame.boundary_mass);
    }

    #[test]
    fn wrong_free_normalization_is_loud() {
        let grid = periodic_grid(15.0, 256);
        let mut spec = free_spec(0.25);
        spec.regulator = 0.1;
        spec.kinetic_convention = KineticConvention::UnhalvedSqrtPrefactor;
        let amp = compose(&spec, &grid, 1).unwrap();
        // The prefactor inversion scales every modulus by 2 pi dt.
        let wrong = amp.amplitude(0.0, 0.0).norm();
        let right = free_kernel_density(0.25, 0.0).norm();
        let ratio = wrong / right;
        let expect = 2.0 * std::f64::consts::PI * 0.25 * (1.0f64 + 0.01).sqrt();
        assert!(
            (ratio / expect - 1.0).abs() <= 0.02,
            "modulus ratio {ratio} vs {expect}"
        );
        // And the doubled exponent wrecks the two-step identity that the
        // standard convention satisfies to 1e-6.
        let two = compose(&spec, &grid, 2).unwrap();
        let mut coarse = spec.clone();
        coarse.dt = 0.5;
        let one = compose(&coarse, &grid, 1).unwrap();
        let gap = linalg::interior_max_abs_diff(&two.matrix, &one.matrix, 0.125).unwrap();
        assert!(gap > 0.1, "composition gap only {gap:e}");
        // The wrong convention refuses the derived action and Euclidean
        // time.
        let mut bad = spec.clone();
        bad.lagrangian = LatticeLagrangian::Derived;
        assert!(step_matrix(&bad, &grid).is_err());
        let mut bad2 = spec.clone();
        bad2.mode = TimeMode::Euclidean;
        bad2.regulator = 0.0;
        assert!(step_matrix(&bad2, &grid).is_err());
    }

    #[test]
    fn calibrated_free_columns_have_unit_mass() {
        let grid = periodic_grid(15.0, 256);
        let mut spec = free_spec(0.25);
        spec.regulator = 0.1;
        spec.normalization = KernelNormalization::ColumnSumCalibrated;
        let step = step_matrix(&spec, &grid).unwrap();
        for j in 0..grid.n_points() {
            let sum: Complex64 = (0..grid.n_points()).map(|i| step[(i, j)]).sum();
            assert!((sum - Complex64::new(1.0, 0.0)).norm() <= 1e-12, "column {j}: {sum}");
        }
        // Regulated, the calibration agrees with the exact free constant.
        let mut flat = spec.clone();
        flat.normalization = KernelNormalization::GaussianConstant;
        let a = compose(&spec, &grid, 1).unwrap();
        let b = compose(&flat, &grid, 1).unwrap();
        let gap = linalg::interior_max_abs_diff(&a.matrix, &b.matrix, 0.125).unwrap();
        assert!(gap <= 1e-6, "calibrated vs exact free gap {gap:e}");
    }

    #[test]
    fn derived_regulated_kernel_is_tame() {
        let grid = periodic_grid(10.0, 160);
        let mut spec = KernelSpec::new(
            LatticeLagrangian::Derived,
            Potential::shifted_harmonic(1.0, 1.0).unwrap(),
            0.125,
            TimeMode::RealTime,
        );
        spec.regulator = 0.2;
        spec.normalization = KernelNormalization::StationaryPhase;
        let amp = compose(&spec, &grid, 8).unwrap();
        let peak = amp.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(peak.is_finite() && peak > 0.0);
        assert!(!amp.unreliable, "boundary mass {:e}", amp.boundary_mass);
    }

    #[test]
    fn parameter_validation() {
        let grid = dirichlet_grid(5.0, 32);
        let mut spec = free_spec(0.0);
        assert!(step_matrix(&spec, &grid).is_err());
        spec.dt = 0.1;
        spec.mode = TimeMode::Euclidean;
        spec.regulator = 0.1;
        assert!(step_matrix(&spec, &grid).is_err());
        spec.regulator = 0.0;
        let reference = DMatrix::<Complex64>::zeros(32, 32);
        assert!(convergence_study(&spec, &grid, 1.0, &[4], &reference, 0.125).is_err());
        assert!(convergence_study(&spec, &grid, 1.0, &[4, 4], &reference, 0.125).is_err());
        assert!(convergence_study(&spec, &grid, 0.0, &[4, 8], &reference, 0.125).is_err());
        let tiny = dirichlet_grid(1.0, 8);
        assert!(step_matrix(&spec, &tiny).is_ok());
    }

    #[test]
    fn order_fit_recovers_power_laws() {
        let pairs: Vec<(f64, f64)> =
            [0.2f64, 0.1, 0.05].iter().map(|&dt| (dt, 3.0 * dt * dt)).collect();
        let p = fit_log_order(&pairs).unwrap();
        assert_relative_eq!(p, 2.0, epsilon = 1e-12);
        assert!(fit_log_order(&pairs[..1]).is_none());
        let flat = [(0.2, 1.0), (0.1, 1.0)];
        assert!(fit_log_order(&flat).is_none());
        let rising = [(0.2, 1.0), (0.1, 2.0)];
        assert!(fit_log_order(&rising).is_none());
    }
}
