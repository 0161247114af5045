//! Grid quantization: Hamiltonian operators on spatial grids, their
//! spectra, and reference propagators.
//!
//! The base system is quantized as H = p^2/2 + V with the momentum square
//! discretized by a three-point stencil (Dirichlet) or exactly on the
//! plane-wave basis (periodic). The derived system H' = H^2/2 admits two
//! inequivalent quantizations and both are built here:
//!
//! * spectral: half the square of the base operator, formed on its
//!   eigenbasis, so it shares eigenvectors with H by construction;
//! * ordered: a direct symmetric-ordering quantization of the derived
//!   momentum form V^2/2 + p'^2/(2V), which does not commute with H.
//!
//! How far apart these land, and which one the time-sliced kernels of the
//! `lattice` module approach, is the measurement the crate is built
//! around.
//!
//! All operators are real symmetric; the complex matrix type is interface
//! convention for the propagators built from them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Boundary, GridSpec, Potential, TimeMode};

/// Smallest grid that resolves anything worth measuring.
const MIN_POINTS: usize = 8;

/// Above this max-entry asymmetry an operator is rejected as not
/// self-adjoint.
const HERMITICITY_TOL: f64 = 1e-10;

/// Which operator a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// H = p^2/2 + V.
    Base,
    /// H' = H^2/2 on the eigenbasis of H.
    HalfSquareSpectral,
    /// Symmetric-ordering quantization of the derived momentum form.
    HalfSquareOrdered,
}

/// A discretized self-adjoint operator on a grid.
#[derive(Debug, Clone)]
pub struct WaveOperator {
    /// Matrix acting on node-value vectors.
    pub matrix: DMatrix<Complex64>,
    pub grid: GridSpec,
    pub kind: OperatorKind,
}

/// Eigenvalues and eigenvectors of a [`WaveOperator`].
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column j is the eigenvector of `eigenvalues[j]`, normalized so that
    /// sum_i psi_i^2 dx = 1, with its largest-magnitude entry positive.
    pub eigenvectors: DMatrix<f64>,
    pub grid: GridSpec,
    pub kind: OperatorKind,
}

/// Discrete time evolution matrix mapping node values at time 0 to node
/// values at time `t`. The matrix itself is the evolution map; divide by
/// dx (see [`PropagatorMatrix::kernel_density`]) to read it as a sampled
/// kernel.
#[derive(Debug, Clone)]
pub struct PropagatorMatrix {
    pub matrix: DMatrix<Complex64>,
    pub grid: GridSpec,
    pub t: f64,
    pub mode: TimeMode,
    /// Dimensionless damping of the real-time phase, 0 when undamped.
    pub damping: f64,
    pub kind: OperatorKind,
}

impl WaveOperator {
    /// Largest entry of |A - A^dagger|.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Full eigendecomposition. Fails on operators that are not real
    /// symmetric to within tight tolerances.
    pub fn spectral_decomposition(&self) -> Result<SpectralDecomposition> {
        let defect = self.hermiticity_defect();
        if defect > HERMITICITY_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let max_re = self.matrix.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let max_im = self.matrix.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if max_im > 1e-12 * (1.0 + max_re) {
            return Err(Error::Eigen(format!(
                "operator has imaginary entries up to {max_im:e}; only real symmetric operators \
                 are decomposed here"
            )));
        }
        let real = self.matrix.map(|z| z.re);
        let eig = nalgebra::SymmetricEigen::new(real);
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .expect("symmetric eigenvalues are finite")
        });
        let dx = self.grid.dx();
        let mut eigenvalues = Vec::with_capacity(n);
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            eigenvalues.push(eig.eigenvalues[src]);
            let mut v = eig.eigenvectors.column(src).clone_owned();
            let norm = v.norm();
            if norm == 0.0 {
                return Err(Error::Eigen(format!("eigenvector {src} has zero norm")));
            }
            v /= norm * dx.sqrt();
            let peak = v.iter().enumerate().fold((0usize, 0.0f64), |acc, (i, &x)| {
                if x.abs() > acc.1.abs() {
                    (i, x)
                } else {
                    acc
                }
            });
            if peak.1 < 0.0 {
                v = -v;
            }
            eigenvectors.set_column(col, &v);
        }
        Ok(SpectralDecomposition { eigenvalues, eigenvectors, grid: self.grid, kind: self.kind })
    }
}

impl SpectralDecomposition {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Ground-state node values.
    pub fn ground_state(&self) -> DVector<f64> {
        self.eigenvectors.column(0).clone_owned()
    }

    /// Rebuild the matrix of f(operator) on the grid.
    pub fn function_operator(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let dx = self.grid.dx();
        let phi = &self.eigenvectors;
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&e| f(e)),
        ));
        phi * diag * phi.transpose() * dx
    }

    /// Evolution matrix for time `t` in the given mode.
    pub fn propagator(&self, t: f64, mode: TimeMode) -> Result<PropagatorMatrix> {
        self.build_propagator(t, mode, 0.0)
    }

    /// Real-time evolution with the spectrum rotated to E(1 - i*damping),
    /// which suppresses the highest modes the grid carries. Comparisons
    /// against time-sliced kernels use this as the matched reference.
    pub fn propagator_damped(&self, t: f64, damping: f64) -> Result<PropagatorMatrix> {
        if !(damping.is_finite() && damping >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must be finite and nonnegative, got {damping}"
            )));
        }
        self.build_propagator(t, TimeMode::RealTime, damping)
    }

    fn build_propagator(&self, t: f64, mode: TimeMode, damping: f64) -> Result<PropagatorMatrix> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "propagation time must be finite and nonnegative, got {t}"
            )));
        }
        let n = self.eigenvalues.len();
        let dx = self.grid.dx();
        let phases: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&e| match mode {
                TimeMode::RealTime => (-Complex64::new(damping, 1.0) * e * t).exp(),
                TimeMode::Euclidean => Complex64::new((-e * t).exp(), 0.0),
            })
            .collect();
        // U = dx * Phi diag(phase) Phi^T with the dx-weighted eigenvectors.
        let phi = self.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let scaled = DMatrix::from_fn(n, n, |i, j| phi[(i, j)] * phases[j]);
        let matrix = &scaled * phi.transpose() * Complex64::new(dx, 0.0);
        Ok(PropagatorMatrix { matrix, grid: self.grid, t, mode, damping, kind: self.kind })
    }
}

impl PropagatorMatrix {
    /// Transition amplitude density from `x_from` to `x_to`, both snapped
    /// to the nearest grid nodes. Off-node arguments are accepted with a
    /// logged warning since the snap changes the question being asked.
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
        self.matrix[(i_to, i_from)] / dx
    }

    /// The evolution matrix read as a sampled kernel K(x_to, x_from), so
    /// that integrating K * psi * dx reproduces the matrix action. At
    /// t = 0 this is the discrete delta, identity / dx.
    pub fn kernel_density(&self) -> DMatrix<Complex64> {
        &self.matrix / Complex64::new(self.grid.dx(), 0.0)
    }
}

/// p^2 as a matrix on the grid: three-point stencil for Dirichlet walls,
/// exact plane-wave multiplier for the periodic box.
pub fn momentum_squared(grid: &GridSpec) -> DMatrix<f64> {
    let n = grid.n_points();
    let dx = grid.dx();
    match grid.boundary() {
        Boundary::Dirichlet => {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = 2.0 / (dx * dx);
                if i + 1 < n {
                    m[(i, i + 1)] = -1.0 / (dx * dx);
                    m[(i + 1, i)] = -1.0 / (dx * dx);
                }
            }
            m
        }
        Boundary::Periodic => {
            // Circulant with symbol k^2, k = 2 pi m / (n dx) on the
            // aliased range, Nyquist included.
            let len = n as f64 * dx;
            let mut symbol = vec![0.0f64; n];
            for (m, s) in symbol.iter_mut().enumerate() {
                let m_signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                let k = 2.0 * std::f64::consts::PI * m_signed / len;
                *s = k * k;
            }
            let mut first_row = vec![0.0f64; n];
            for (d, r) in first_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (m, s) in symbol.iter().enumerate() {
                    acc += s
                        * (2.0 * std::f64::consts::PI * m as f64 * d as f64 / n as f64).cos();
                }
                *r = acc / n as f64;
            }
            DMatrix::from_fn(n, n, |i, j| {
                let d = (i + n - j) % n;
                first_row[d]
            })
        }
    }
}

/// d/dx as a real antisymmetric matrix: central difference for Dirichlet,
/// plane-wave multiplier without the Nyquist mode for periodic (keeping
/// Nyquist would make the matrix complex).
pub fn first_derivative(grid: &GridSpec) -> DMatrix<f64> {
    let n = grid.n_points();
    let dx = grid.dx();
    match grid.boundary() {
        Boundary::Dirichlet => {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                if i + 1 < n {
                    m[(i, i + 1)] = 1.0 / (2.0 * dx);
                    m[(i + 1, i)] = -1.0 / (2.0 * dx);
                }
            }
            m
        }
        Boundary::Periodic => {
            let len = n as f64 * dx;
            let top = n.div_ceil(2);
            let mut first_col = vec![0.0f64; n];
            for (d, c) in first_col.iter_mut().enumerate() {
                let mut acc = 0.0;
                for m in 1..top {
                    let k = 2.0 * std::f64::consts::PI * m as f64 / len;
                    acc -= 2.0 * k
                        * (2.0 * std::f64::consts::PI * m as f64 * d as f64 / n as f64).sin();
                }
                *c = acc / n as f64;
            }
            // first_col[d] is the entry at row offset d below the
            // diagonal; antisymmetry gives the upper triangle.
            DMatrix::from_fn(n, n, |i, j| {
                let d = (i + n - j) % n;
                first_col[d]
            })
        }
    }
}

fn validate_grid(potential: &Potential, grid: &GridSpec) -> Result<Vec<f64>> {
    if grid.n_points() < MIN_POINTS {
        return Err(Error::InvalidParameter(format!(
            "grid has {} points, need at least {MIN_POINTS}",
            grid.n_points()
        )));
    }
    if !potential.covers(grid) {
        return Err(Error::OutOfDomain {
            x: grid.x_min(),
            lo: grid.x_min(),
            hi: grid.x_max(),
        });
    }
    Ok(grid.nodes().iter().map(|&x| potential.eval_raw(x)).collect())
}

/// H = p^2/2 + V on the grid.
pub fn build_hamiltonian(potential: &Potential, grid: &GridSpec) -> Result<WaveOperator> {
    let values = validate_grid(potential, grid)?;
    let mut m = momentum_squared(grid) * 0.5;
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] += v;
    }
    Ok(WaveOperator {
        matrix: m.map(|x| Complex64::new(x, 0.0)),
        grid: *grid,
        kind: OperatorKind::Base,
    })
}

/// H' = H^2/2 formed on the eigenbasis of the base operator. Commutes
/// with the base by construction.
pub fn build_hprime_spectral(base: &WaveOperator) -> Result<WaveOperator> {
    if base.kind != OperatorKind::Base {
        return Err(Error::InvalidParameter(
            "spectral half-square starts from the base operator".into(),
        ));
    }
    let decomp = base.spectral_decomposition()?;
    let m = decomp.function_operator(|e| 0.5 * e * e);
    Ok(WaveOperator {
        matrix: m.map(|x| Complex64::new(x, 0.0)),
        grid: base.grid,
        kind: OperatorKind::HalfSquareSpectral,
    })
}

/// Direct quantization of the derived momentum form, truncated at
/// quadratic order in the momentum and symmetrized over the three
/// orderings of p^2/V:
///
/// ```text
/// H'_ord = V^2/2 + (1/6) (V^-1 p^2 + p^2 V^-1 + p V^-1 p).
/// ```
///
/// Requires V > 0 everywhere on the grid. For constant V = c the kinetic
/// part collapses to p^2/(2c) on every resolved plane wave.
pub fn build_hprime_ordered(potential: &Potential, grid: &GridSpec) -> Result<WaveOperator> {
    let values = validate_grid(potential, grid)?;
    let min_v = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_v <= 0.0 {
        return Err(Error::NonPositivePotential(min_v));
    }
    let n = grid.n_points();
    let p2 = momentum_squared(grid);
    let d1 = first_derivative(grid);
    let w = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        values.iter().map(|&v| 1.0 / v),
    ));
    let wp = &w * &p2;
    let pw = &p2 * &w;
    // p V^-1 p with p = -i d/dx is -D1 W D1 for real antisymmetric D1.
    let dwd = &d1 * &w * &d1;
    let mut m = (wp + pw - dwd) / 6.0;
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] += 0.5 * v * v;
    }
    Ok(WaveOperator {
        matrix: m.map(|x| Complex64::new(x, 0.0)),
        grid: *grid,
        kind: OperatorKind::HalfSquareOrdered,
    })
}

/// Decompose `op` and exponentiate in one call.
pub fn spectral_propagator(op: &WaveOperator, t: f64, mode: TimeMode) -> Result<PropagatorMatrix> {
    op.spectral_decomposition()?.propagator(t, mode)
}

/// Decompose `op` and build the damped real-time reference.
pub fn spectral_propagator_damped(
    op: &WaveOperator,
    t: f64,
    damping: f64,
) -> Result<PropagatorMatrix> {
    op.spectral_decomposition()?.propagator_damped(t, damping)
}

/// Relative size of the commutator [A, B] against the product of norms.
pub fn relative_commutator(a: &WaveOperator, b: &WaveOperator) -> Result<f64> {
    let ab = linalg::matmul(&a.matrix, &b.matrix)?;
    let ba = linalg::matmul(&b.matrix, &a.matrix)?;
    let scale = a.matrix.norm() * b.matrix.norm();
    Ok((ab - ba).norm() / scale)
}
