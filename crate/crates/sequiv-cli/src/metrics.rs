//! Distance measures between two kernel matrices on the same grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use sequiv::linalg;
use sequiv::model::TimeMode;

use crate::{CliError, CliResult};

/// How far one amplitude matrix sits from another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMetrics {
    /// Largest entry difference away from the grid edges.
    pub max_abs_interior: f64,
    /// Frobenius norm of the difference.
    pub raw_frobenius: f64,
    /// Frobenius difference over the Frobenius norm of `b`.
    pub rel_frobenius: f64,
    /// Frobenius distance after the best global phase rotation of `b`,
    /// which separates "wrong by an overall phase" from "wrong". Only
    /// meaningful for oscillatory amplitudes, so Euclidean comparisons
    /// leave it unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_aligned: Option<f64>,
}

/// Compare amplitude matrix `a` against reference `b`. `margin` is the
/// fraction of nodes clipped from each edge for the interior metric.
pub fn compare_amplitudes(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    mode: TimeMode,
    margin: f64,
) -> CliResult<ComparisonMetrics> {
    let max_abs_interior = linalg::interior_max_abs_diff(a, b, margin)?;
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Err(CliError::Numeric("reference matrix is identically zero".into()));
    }
    let raw_frobenius = (a - b).norm();
    let rel_frobenius = raw_frobenius / b_norm;
    let phase_aligned = match mode {
        TimeMode::RealTime => {
            // min over theta of |a - e^{i theta} b| in the Frobenius
            // inner product; the optimum aligns theta with <b, a>. The
            // identity rotation is always admissible, so the result
            // never exceeds the raw distance.
            let overlap: Complex64 =
                b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
            let rotation = if overlap.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, overlap.arg())
            };
            let aligned = (a - b * rotation).norm();
            Some(aligned.min(raw_frobenius))
        }
        TimeMode::Euclidean => None,
    };
    Ok(ComparisonMetrics { max_abs_interior, raw_frobenius, rel_frobenius, phase_aligned })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_matrix(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn identical_matrices_have_zero_distance() {
        let a = random_matrix(12, 3);
        let m = compare_amplitudes(&a, &a, TimeMode::RealTime, 0.125).unwrap();
        assert_eq!(m.max_abs_interior, 0.0);
        assert_eq!(m.raw_frobenius, 0.0);
        assert_eq!(m.rel_frobenius, 0.0);
        assert_eq!(m.phase_aligned, Some(0.0));
    }

    #[test]
    fn pure_phase_offsets_vanish_after_alignment() {
        let b = random_matrix(12, 4);
        let a = &b * Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_3);
        let m = compare_amplitudes(&a, &b, TimeMode::RealTime, 0.0).unwrap();
        assert!(m.raw_frobenius > 0.1);
        assert!(m.phase_aligned.unwrap() <= 1e-12);
    }

    #[test]
    fn phase_aligned_never_exceeds_raw_distance() {
        for seed in 0..5 {
            let a = random_matrix(10, seed);
            let b = random_matrix(10, seed + 100);
            let m = compare_amplitudes(&a, &b, TimeMode::RealTime, 0.1).unwrap();
            assert!(m.phase_aligned.unwrap() <= m.raw_frobenius + 1e-12);
        }
    }

    #[test]
    fn alignment_is_invariant_under_unit_rescaling_of_either_side() {
        let a = random_matrix(10, 9);
        let b = random_matrix(10, 10);
        let base = compare_amplitudes(&a, &b, TimeMode::RealTime, 0.0).unwrap();
        let u = Complex64::from_polar(1.0, 1.234);
        let m1 = compare_amplitudes(&(&a * u), &b, TimeMode::RealTime, 0.0).unwrap();
        let m2 = compare_amplitudes(&a, &(&b * u), TimeMode::RealTime, 0.0).unwrap();
        assert_relative_eq!(
            m1.phase_aligned.unwrap(),
            base.phase_aligned.unwrap(),
            epsilon = 1e-10
        );
        assert_relative_eq!(
            m2.phase_aligned.unwrap(),
            base.phase_aligned.unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn euclidean_mode_reports_no_phase_metric() {
        let a = random_matrix(8, 1);
        let b = random_matrix(8, 2);
        let m = compare_amplitudes(&a, &b, TimeMode::Euclidean, 0.125).unwrap();
        assert!(m.phase_aligned.is_none());
        assert!(m.rel_frobenius > 0.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = random_matrix(8, 1);
        let b = random_matrix(9, 1);
        assert!(compare_amplitudes(&a, &b, TimeMode::RealTime, 0.125).is_err());
    }
}
