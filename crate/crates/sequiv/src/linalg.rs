//! Dense complex matrix helpers shared by the quantum and lattice
//! modules.
//!
//! Transfer-matrix composition is the hot path of the whole crate, so the
//! product here splits the left factor into row blocks and multiplies the
//! blocks on the rayon pool, falling back to the plain nalgebra product
//! when the `parallel` feature is off. The serial entry point stays
//! available in all builds so both paths can be timed against each other.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Fraction of rows and columns stripped from each edge by
/// [`interior_max_abs_diff`] unless the caller chooses otherwise.
pub const DEFAULT_INTERIOR_MARGIN: f64 = 0.125;

fn check_product_shapes(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<()> {
    if a.ncols() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// a * b, dispatched to the row-blocked parallel product when the
/// `parallel` feature is enabled.
pub fn matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        check_product_shapes(a, b)?;
        let n = a.nrows();
        let threads = rayon::current_num_threads().max(1);
        let chunk = n.div_ceil(threads).max(16);
        if n <= chunk {
            return Ok(a * b);
        }
        let starts: Vec<usize> = (0..n).step_by(chunk).collect();
        let blocks: Vec<(usize, DMatrix<Complex64>)> = starts
            .into_par_iter()
            .map(|r0| {
                let len = chunk.min(n - r0);
                (r0, a.rows(r0, len) * b)
            })
            .collect();
        let mut out = DMatrix::zeros(n, b.ncols());
        for (r0, block) in blocks {
            out.rows_mut(r0, block.nrows()).copy_from(&block);
        }
        Ok(out)
    }
    #[cfg(not(feature = "parallel"))]
    {
        matmul_serial(a, b)
    }
}

/// Single-threaded a * b, kept callable in all builds for benchmarking.
pub fn matmul_serial(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    check_product_shapes(a, b)?;
    Ok(a * b)
}

/// a^n by repeated squaring; a^0 is the identity.
pub fn matpow(a: &DMatrix<Complex64>, n: usize) -> Result<DMatrix<Complex64>> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "matrix power needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut result = DMatrix::identity(a.nrows(), a.ncols());
    let mut square = a.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = matmul(&result, &square)?;
        }
        k >>= 1;
        if k > 0 {
            square = matmul(&square, &square)?;
        }
    }
    Ok(result)
}

/// Largest entrywise |a - b| over the index window that survives clipping
/// `margin` of the rows and columns from each edge. Grid operators carry
/// boundary artifacts in their outer bands, so comparisons use the
/// interior by default.
pub fn interior_max_abs_diff(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    margin: f64,
) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "cannot compare {}x{} with {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::InvalidParameter(format!(
            "margin fraction must lie in [0, 0.5), got {margin}"
        )));
    }
    let skip_r = (a.nrows() as f64 * margin).floor() as usize;
    let skip_c = (a.ncols() as f64 * margin).floor() as usize;
    let mut worst = 0.0f64;
    for j in skip_c..a.ncols() - skip_c {
        for i in skip_r..a.nrows() - skip_r {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    Ok(worst)
}
