//! Sub-experiment runners.
//!
//! Each runner takes the validated config and produces its slice of the
//! report, writing CSV artifacts along the way. [`run`] strings them
//! together: a failing section is recorded in the report and the rest
//! still execute, so one bad parameter does not cost the whole run.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sequiv::classical;
use sequiv::lagrangian::{self, Lagrangian};
use sequiv::lattice::{self, KernelSpec, LatticeAmplitude, LatticeLagrangian};
use sequiv::model::{GridSpec, PhasePoint, Potential, TimeMode};
use sequiv::momentum;
use sequiv::quantum;

use crate::config::{
    ClassicalConfig, ControlConfig, ExperimentConfig, KernelConfig, LprimeConfig, MomentumConfig,
    NormalizationConfig, OperatorConfig, ReferenceConfig, SpectrumConfig,
};
use crate::metrics;
use crate::report::{
    ClassicalReport, ControlReport, DistanceRow, KernelReport, LprimeReport,
    MomentumPotentialReport, MomentumReport, OperatorSpectrum, OrderCheck, ReferenceTable, Report,
    SpectrumReport,
};
use crate::{csvio, CliError, CliResult};

/// Which sections a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionFilter {
    All,
    Classical,
    Momentum,
    Spectrum,
    Kernels,
    Lprime,
}

/// Execute the selected sections and write `report.json` plus CSV
/// artifacts under `out_dir`.
///
/// With [`SectionFilter::All`], sections absent from the config are
/// skipped; with a specific filter, a missing section is a config
/// error. Runtime failures inside a section are captured in the report,
/// which is then marked partial.
pub fn run(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed: u64,
    filter: SectionFilter,
) -> CliResult<Report> {
    let mut report = Report::new(cfg.clone());
    let wants = |s: SectionFilter| filter == SectionFilter::All || filter == s;
    let missing = |name: &str| CliError::Config(format!("config has no [{name}] section"));

    if wants(SectionFilter::Classical) {
        match &cfg.classical {
            Some(c) => match run_classical(cfg, c, out_dir, seed) {
                Ok(r) => report.classical = Some(r),
                Err(e) => report.record_error("classical", e),
            },
            None if filter == SectionFilter::Classical => return Err(missing("classical")),
            None => {}
        }
    }
    if wants(SectionFilter::Momentum) {
        match &cfg.momentum {
            Some(m) => match run_momentum(m) {
                Ok(r) => report.momentum = Some(r),
                Err(e) => report.record_error("momentum", e),
            },
            None if filter == SectionFilter::Momentum => return Err(missing("momentum")),
            None => {}
        }
    }
    if wants(SectionFilter::Spectrum) {
        match &cfg.spectrum {
            Some(s) => match run_spectrum(cfg, s, out_dir) {
                Ok(r) => report.spectrum = Some(r),
                Err(e) => report.record_error("spectrum", e),
            },
            None if filter == SectionFilter::Spectrum => return Err(missing("spectrum")),
            None => {}
        }
    }
    if wants(SectionFilter::Kernels) {
        if cfg.kernels.is_empty() && filter == SectionFilter::Kernels {
            return Err(missing("[kernels]"));
        }
        for k in &cfg.kernels {
            match run_kernel(cfg, k, out_dir) {
                Ok(r) => report.kernels.push(r),
                Err(e) => report.record_error(&format!("kernels.{}", k.name), e),
            }
        }
    }
    if wants(SectionFilter::Lprime) {
        match &cfg.lprime {
            Some(l) => match run_lprime(cfg, l, out_dir) {
                Ok(r) => report.lprime = Some(r),
                Err(e) => report.record_error("lprime", e),
            },
            None if filter == SectionFilter::Lprime => return Err(missing("lprime")),
            None => {}
        }
    }

    csvio::write_atomic(&out_dir.join("report.json"), &report.to_json()?)?;
    Ok(report)
}

/// Integrate the same random initial conditions under both members of
/// the constructed pair and measure how far the trajectories separate.
pub fn run_classical(
    cfg: &ExperimentConfig,
    c: &ClassicalConfig,
    out_dir: &Path,
    seed: u64,
) -> CliResult<ClassicalReport> {
    let potential = cfg.potential.build()?;
    let sigma = cfg.sigma.build()?;
    let base = Lagrangian::base(potential);
    let derived = lagrangian::build_sprime_lagrangian(&base, sigma, 0.0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ics = Vec::with_capacity(c.n_initial_conditions);
    for _ in 0..c.n_initial_conditions {
        let x = rng.gen_range(c.x_range[0]..c.x_range[1]);
        let v = rng.gen_range(c.v_range[0]..c.v_range[1]);
        ics.push(PhasePoint::new(x, v, 0.0)?);
    }

    let max_deviation =
        classical::s_equivalence_distance(&base, &derived, &ics, c.t_final, c.n_samples, c.tolerance)?;

    let traj_base = classical::integrate(&base, ics[0], c.t_final, c.n_samples, c.tolerance)?;
    let traj_derived = classical::integrate(&derived, ics[0], c.t_final, c.n_samples, c.tolerance)?;
    let base_energy_drift = classical::conservation_drift(&base, &traj_base)?;
    let derived_energy_drift = classical::conservation_drift(&derived, &traj_derived)?;

    if c.write_trajectories {
        csvio::write_atomic(
            &out_dir.join("trajectory_base.csv"),
            &csvio::trajectory_to_csv(&traj_base),
        )?;
        csvio::write_atomic(
            &out_dir.join("trajectory_derived.csv"),
            &csvio::trajectory_to_csv(&traj_derived),
        )?;
    }

    Ok(ClassicalReport {
        n_initial_conditions: c.n_initial_conditions,
        t_final: c.t_final,
        tolerance: c.tolerance,
        max_deviation,
        threshold: c.max_deviation,
        passed: max_deviation <= c.max_deviation,
        base_energy_drift,
        derived_energy_drift,
    })
}

/// Round-trip, truncation-order, and large-momentum checks on the
/// momentum inversion.
pub fn run_momentum(m: &MomentumConfig) -> CliResult<MomentumReport> {
    let mut per_potential = Vec::with_capacity(m.v_values.len());
    for &v_pot in &m.v_values {
        per_potential.push(momentum_potential_report(m, v_pot)?);
    }

    let r_h = momentum::pde_residual(m.pde_v, m.pde_p, m.pde_step)?;
    let r_half = momentum::pde_residual(m.pde_v, m.pde_p, m.pde_step / 2.0)?;
    if r_half == 0.0 {
        return Err(CliError::Numeric(
            "halved-step residual vanished; cannot form the refinement ratio".into(),
        ));
    }

    let v0 = m.v_values[0];
    let asymptotic = momentum::asymptotic_hprime(m.asymptotic_p, v0, 0.0)?;
    let exact = momentum::hprime_exact(m.asymptotic_p, v0)?;

    Ok(MomentumReport {
        per_potential,
        pde_residual_ratio: r_h / r_half,
        power_law_p: m.power_law_p,
        power_law_residual: momentum::power_law_residual(m.power_law_p)?,
        asymptotic_p: m.asymptotic_p,
        asymptotic_coefficient_printed: (4.5f64).sqrt(),
        asymptotic_coefficient_derived: (4.5f64).cbrt(),
        asymptotic_gap_printed: (asymptotic.printed - exact).abs(),
        asymptotic_gap_derived: (asymptotic.derived - exact).abs(),
    })
}

fn momentum_potential_report(
    m: &MomentumConfig,
    v_pot: f64,
) -> CliResult<MomentumPotentialReport> {
    let mut max_round_trip_residual = 0.0f64;
    for i in 0..m.n_points {
        let frac = i as f64 / (m.n_points - 1) as f64;
        let p = -m.p_max + 2.0 * m.p_max * frac;
        let v = momentum::invert_momentum(p, v_pot)?;
        let back = momentum::conjugate_momentum(v, v_pot);
        max_round_trip_residual = max_round_trip_residual.max((back - p).abs());
    }

    let series_residual = |ratio: f64| -> CliResult<f64> {
        let p = ratio * v_pot;
        Ok((momentum::invert_momentum(p, v_pot)? - momentum::series_velocity(p, v_pot, 7)?).abs())
    };
    let hprime_residual = |ratio: f64| -> CliResult<f64> {
        let p = ratio * v_pot;
        Ok((momentum::hprime_exact(p, v_pot)? - momentum::hprime_series(p, v_pot)?).abs())
    };
    let scale = m.probe_ratios[0] / m.probe_ratios[1];
    let series_order_estimate = residual_order(
        series_residual(m.probe_ratios[0])?,
        series_residual(m.probe_ratios[1])?,
        scale,
    )?;
    let hprime_series_order_estimate = residual_order(
        hprime_residual(m.probe_ratios[0])?,
        hprime_residual(m.probe_ratios[1])?,
        scale,
    )?;

    // Fifth-order coefficient, extracted from values alone so the same
    // probe applies to the exact inversion and the log resummation. With
    // w = p^2/V^3 and u = p/V, both curves are u (1 - w/6 + c w^2 + ...),
    // so c = (f/u - 1 + w/6)/w^2 up to O(w).
    let w = 1e-2;
    let p5 = (w * v_pot.powi(3)).sqrt();
    let u = p5 / v_pot;
    let series_c5 = (momentum::invert_momentum(p5, v_pot)? / u - 1.0 + w / 6.0) / (w * w);
    let log_form_c5 = (momentum::log_approx_velocity(p5, v_pot)? / u - 1.0 + w / 6.0) / (w * w);

    Ok(MomentumPotentialReport {
        v_pot,
        max_round_trip_residual,
        series_order_estimate,
        hprime_series_order_estimate,
        series_c5,
        log_form_c5,
        c5_signs_differ: series_c5 * log_form_c5 < 0.0,
    })
}

fn residual_order(r1: f64, r2: f64, scale: f64) -> CliResult<f64> {
    if !(r1 > 0.0 && r2 > 0.0 && r1.is_finite() && r2.is_finite()) {
        return Err(CliError::Numeric(format!(
            "residuals must be positive and finite to estimate an order, got {r1} and {r2}"
        )));
    }
    Ok((r1 / r2).ln() / scale.ln())
}

/// Diagonalize the requested grid operators and record their low-lying
/// levels.
pub fn run_spectrum(
    cfg: &ExperimentConfig,
    s: &SpectrumConfig,
    out_dir: &Path,
) -> CliResult<SpectrumReport> {
    let grid = cfg.section_grid(&s.grid)?;
    let potential = cfg.section_potential(&None, &grid)?;

    let mut operators = Vec::with_capacity(s.operators.len());
    for op_cfg in &s.operators {
        let op = match op_cfg {
            OperatorConfig::Base => quantum::build_hamiltonian(&potential, &grid)?,
            OperatorConfig::HprimeSpectral => {
                let base = quantum::build_hamiltonian(&potential, &grid)?;
                quantum::build_hprime_spectral(&base)?
            }
            OperatorConfig::HprimeOrdered => quantum::build_hprime_ordered(&potential, &grid)?,
        };
        let hermiticity_defect = op.hermiticity_defect();
        let decomp = op.spectral_decomposition()?;
        let levels: Vec<f64> = decomp.eigenvalues.iter().take(s.n_levels).copied().collect();
        operators.push(OperatorSpectrum {
            operator: op_cfg.label().to_string(),
            hermiticity_defect,
            ground: decomp.ground_energy(),
            levels,
        });
    }

    if s.write_csv {
        let mut text = String::from("operator,level,energy\n");
        for op in &operators {
            for (i, e) in op.levels.iter().enumerate() {
                text.push_str(&format!("{},{i},{e:.17e}\n", op.operator));
            }
        }
        csvio::write_atomic(&out_dir.join("spectrum.csv"), &text)?;
    }

    Ok(SpectrumReport { operators })
}

/// Spectral reference kernel for one comparison target, as a density
/// matrix matching the lattice convention.
fn reference_density(
    r: ReferenceConfig,
    potential: &Potential,
    grid: &GridSpec,
    t_total: f64,
    mode: TimeMode,
    regulator: f64,
) -> CliResult<DMatrix<Complex64>> {
    let op = match r {
        ReferenceConfig::SpectralBase => quantum::build_hamiltonian(potential, grid)?,
        ReferenceConfig::SpectralHprime => {
            let base = quantum::build_hamiltonian(potential, grid)?;
            quantum::build_hprime_spectral(&base)?
        }
        ReferenceConfig::OrderedHprime => quantum::build_hprime_ordered(potential, grid)?,
    };
    let prop = match mode {
        TimeMode::RealTime if regulator > 0.0 => {
            quantum::spectral_propagator_damped(&op, t_total, regulator)?
        }
        _ => quantum::spectral_propagator(&op, t_total, mode)?,
    };
    Ok(prop.kernel_density())
}

struct KernelMeasurement {
    amplitudes: Vec<LatticeAmplitude>,
    tables: Vec<ReferenceTable>,
    boundary_mass: f64,
    unreliable: bool,
}

fn measure_against_references(
    specs: &[(usize, KernelSpec)],
    grid: &GridSpec,
    mode: TimeMode,
    references: &[(&'static str, DMatrix<Complex64>)],
    margin: f64,
) -> CliResult<KernelMeasurement> {
    let mut amplitudes = Vec::with_capacity(specs.len());
    for (n, spec) in specs {
        amplitudes.push(lattice::compose(spec, grid, *n)?);
    }
    let mut tables = Vec::with_capacity(references.len());
    for (label, reference) in references {
        let mut rows = Vec::with_capacity(amplitudes.len());
        for amp in &amplitudes {
            let m = metrics::compare_amplitudes(&amp.matrix, reference, mode, margin)?;
            rows.push(DistanceRow { n_steps: amp.n_steps, dt: amp.dt, metrics: m });
        }
        let pairs: Vec<(f64, f64)> =
            rows.iter().map(|r| (r.dt, r.metrics.max_abs_interior)).collect();
        let fitted_order = lattice::fit_log_order(&pairs);
        let monotone = pairs.windows(2).all(|w| w[1].1 < w[0].1);
        tables.push(ReferenceTable {
            reference: (*label).to_string(),
            rows,
            fitted_order,
            monotone,
        });
    }
    let boundary_mass = amplitudes.last().map_or(0.0, |a| a.boundary_mass);
    let unreliable = amplitudes.iter().any(|a| a.unreliable);
    Ok(KernelMeasurement { amplitudes, tables, boundary_mass, unreliable })
}

fn write_kernel_csvs(
    out_dir: &Path,
    stem: &str,
    measured: &KernelMeasurement,
    references: &[(&'static str, DMatrix<Complex64>)],
    grid: &GridSpec,
    mode: TimeMode,
    write_matrices: bool,
) -> CliResult<()> {
    let mut rows: Vec<(usize, f64, &str)> = Vec::new();
    for table in &measured.tables {
        for r in &table.rows {
            rows.push((r.n_steps, r.metrics.max_abs_interior, table.reference.as_str()));
        }
    }
    if !rows.is_empty() {
        csvio::write_atomic(
            &out_dir.join(format!("{stem}_convergence.csv")),
            &csvio::convergence_to_csv(&rows),
        )?;
    }
    if write_matrices {
        for amp in &measured.amplitudes {
            csvio::write_atomic(
                &out_dir.join(format!("{stem}_n{}.csv", amp.n_steps)),
                &csvio::matrix_to_csv(&amp.matrix, grid, mode),
            )?;
        }
        for (label, reference) in references {
            csvio::write_atomic(
                &out_dir.join(format!("{stem}_reference_{label}.csv")),
                &csvio::matrix_to_csv(reference, grid, mode),
            )?;
        }
    }
    Ok(())
}

/// Compose one configured kernel at each step count and compare it
/// against its spectral references.
pub fn run_kernel(
    cfg: &ExperimentConfig,
    k: &KernelConfig,
    out_dir: &Path,
) -> CliResult<KernelReport> {
    let grid = cfg.section_grid(&k.grid)?;
    let potential = cfg.section_potential(&k.potential, &grid)?;
    let mode: TimeMode = k.mode.into();

    let mut references = Vec::with_capacity(k.references.len());
    for r in &k.references {
        references.push((
            r.label(),
            reference_density(*r, &potential, &grid, k.t_total, mode, k.regulator)?,
        ));
    }

    let specs: Vec<(usize, KernelSpec)> =
        k.n_steps.iter().map(|&n| (n, k.to_kernel_spec(potential.clone(), n))).collect();
    let measured =
        measure_against_references(&specs, &grid, mode, &references, cfg.interior_margin)?;
    write_kernel_csvs(
        out_dir,
        &format!("kernel_{}", k.name),
        &measured,
        &references,
        &grid,
        mode,
        k.write_matrices || cfg.output.write_matrices,
    )?;

    let fitted_first = measured.tables.first().and_then(|t| t.fitted_order);
    let monotone_first = measured.tables.first().map_or(false, |t| t.monotone);
    let order_check = k.expect_order.map(|window| OrderCheck {
        window,
        fitted_order: fitted_first,
        passed: fitted_first.map_or(false, |p| window[0] <= p && p <= window[1]),
    });
    let monotone_check = if k.expect_monotone { Some(monotone_first) } else { None };

    Ok(KernelReport {
        name: k.name.clone(),
        lagrangian: k.lagrangian.label().to_string(),
        mode: k.mode.label().to_string(),
        normalization: k.normalization.label().to_string(),
        sampling: k.sampling.label().to_string(),
        regulator: k.regulator,
        t_total: k.t_total,
        boundary_mass: measured.boundary_mass,
        unreliable: measured.unreliable,
        tables: measured.tables,
        order_check,
        monotone_check,
    })
}

/// The headline measurement: the derived-action lattice under every
/// normalization, against every reference, with a known-good base-action
/// control in the same report. No pass/fail is attached to the derived
/// rows; the numbers are the result.
pub fn run_lprime(
    cfg: &ExperimentConfig,
    l: &LprimeConfig,
    out_dir: &Path,
) -> CliResult<LprimeReport> {
    let grid = cfg.section_grid(&l.grid)?;
    let potential = cfg.section_potential(&l.potential, &grid)?;

    let mut references = Vec::with_capacity(l.references.len());
    for r in &l.references {
        references.push((
            r.label(),
            reference_density(*r, &potential, &grid, l.t_total, TimeMode::RealTime, l.regulator)?,
        ));
    }

    let all_normalizations = [
        NormalizationConfig::GaussianConstant,
        NormalizationConfig::StationaryPhase,
        NormalizationConfig::ColumnSumCalibrated,
    ];
    let mut normalizations = Vec::with_capacity(all_normalizations.len());
    for norm in all_normalizations {
        let specs: Vec<(usize, KernelSpec)> = l
            .n_steps
            .iter()
            .map(|&n| {
                let mut spec = KernelSpec::new(
                    LatticeLagrangian::Derived,
                    potential.clone(),
                    l.t_total / n as f64,
                    TimeMode::RealTime,
                );
                spec.normalization = norm.into();
                spec.regulator = l.regulator;
                spec.potential_sampling = l.sampling.into();
                (n, spec)
            })
            .collect();
        let measured = measure_against_references(
            &specs,
            &grid,
            TimeMode::RealTime,
            &references,
            cfg.interior_margin,
        )?;
        write_kernel_csvs(
            out_dir,
            &format!("lprime_{}", norm.label()),
            &measured,
            &references,
            &grid,
            TimeMode::RealTime,
            l.write_matrices || cfg.output.write_matrices,
        )?;
        normalizations.push(KernelReport {
            name: norm.label().to_string(),
            lagrangian: "derived".to_string(),
            mode: "real_time".to_string(),
            normalization: norm.label().to_string(),
            sampling: l.sampling.label().to_string(),
            regulator: l.regulator,
            t_total: l.t_total,
            boundary_mass: measured.boundary_mass,
            unreliable: measured.unreliable,
            tables: measured.tables,
            order_check: None,
            monotone_check: None,
        });
    }

    let control = match &l.control {
        Some(c) => Some(run_control(c, cfg.interior_margin)?),
        None => None,
    };

    Ok(LprimeReport { normalizations, control })
}

/// Base-action companion run with known behavior: the Euclidean kernel
/// must refine at its expected order and the regulated real-time kernel
/// must improve at every refinement. If these fail, the pipeline is
/// broken and the derived-action numbers in the same report mean
/// nothing.
fn run_control(c: &ControlConfig, margin: f64) -> CliResult<ControlReport> {
    let potential = c.potential.build()?;

    let euclid_grid = c.euclid_grid.build()?;
    let h_euclid = quantum::build_hamiltonian(&potential, &euclid_grid)?;
    let euclid_reference =
        quantum::spectral_propagator(&h_euclid, c.t_total, TimeMode::Euclidean)?.kernel_density();
    let mut euclid_rows = Vec::with_capacity(c.n_steps.len());
    for &n in &c.n_steps {
        let spec = KernelSpec::new(
            LatticeLagrangian::Base,
            potential.clone(),
            c.t_total / n as f64,
            TimeMode::Euclidean,
        );
        let amp = lattice::compose(&spec, &euclid_grid, n)?;
        let m =
            metrics::compare_amplitudes(&amp.matrix, &euclid_reference, TimeMode::Euclidean, margin)?;
        euclid_rows.push(DistanceRow { n_steps: n, dt: spec.dt, metrics: m });
    }
    let pairs: Vec<(f64, f64)> =
        euclid_rows.iter().map(|r| (r.dt, r.metrics.max_abs_interior)).collect();
    let euclid_fitted_order = lattice::fit_log_order(&pairs);
    let order_passed =
        euclid_fitted_order.map_or(false, |p| c.order_window[0] <= p && p <= c.order_window[1]);

    let realtime_grid = c.realtime_grid.build()?;
    let h_realtime = quantum::build_hamiltonian(&potential, &realtime_grid)?;
    let realtime_reference =
        quantum::spectral_propagator_damped(&h_realtime, c.t_total, c.regulator)?.kernel_density();
    let mut realtime_errors = Vec::with_capacity(c.n_steps.len());
    for &n in &c.n_steps {
        let mut spec = KernelSpec::new(
            LatticeLagrangian::Base,
            potential.clone(),
            c.t_total / n as f64,
            TimeMode::RealTime,
        );
        spec.regulator = c.regulator;
        let amp = lattice::compose(&spec, &realtime_grid, n)?;
        let m = metrics::compare_amplitudes(
            &amp.matrix,
            &realtime_reference,
            TimeMode::RealTime,
            margin,
        )?;
        realtime_errors.push(DistanceRow { n_steps: n, dt: spec.dt, metrics: m });
    }
    let monotone_passed = realtime_errors
        .windows(2)
        .all(|w| w[1].metrics.max_abs_interior < w[0].metrics.max_abs_interior);

    Ok(ControlReport {
        euclid_rows,
        euclid_fitted_order,
        order_window: c.order_window,
        order_passed,
        realtime_errors,
        monotone_passed,
        passed: order_passed && monotone_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::minimal_config_for_tests;

    #[test]
    fn momentum_runner_recovers_the_truncation_orders() {
        let m = MomentumConfig::default();
        let r = run_momentum(&m).unwrap();
        assert_eq!(r.per_potential.len(), 1);
        let p = &r.per_potential[0];
        assert!(p.max_round_trip_residual <= 1e-10, "round trip {}", p.max_round_trip_residual);
        assert!((p.series_order_estimate - 9.0).abs() <= 0.5, "order {}", p.series_order_estimate);
        assert!(
            (p.hprime_series_order_estimate - 6.0).abs() <= 0.5,
            "order {}",
            p.hprime_series_order_estimate
        );
        assert!(p.series_c5 > 0.0 && p.log_form_c5 < 0.0);
        assert!(p.c5_signs_differ);
        assert!((r.pde_residual_ratio - 4.0).abs() <= 0.5, "ratio {}", r.pde_residual_ratio);
        assert!(r.power_law_residual <= 1e-10);
        assert!(r.asymptotic_gap_derived < r.asymptotic_gap_printed);
    }

    #[test]
    fn classical_runner_reports_matching_trajectories() {
        let mut cfg = minimal_config_for_tests();
        cfg.potential.kind = crate::config::PotentialKind::ShiftedHarmonic;
        cfg.potential.offset = Some(1.0);
        let c = ClassicalConfig {
            t_final: 2.0,
            n_samples: 40,
            tolerance: 1e-10,
            n_initial_conditions: 3,
            x_range: [-1.0, 1.0],
            v_range: [-1.0, 1.0],
            max_deviation: 1e-6,
            write_trajectories: true,
        };
        let dir = tempfile::tempdir().unwrap();
        let r = run_classical(&cfg, &c, dir.path(), 7).unwrap();
        assert!(r.passed, "deviation {}", r.max_deviation);
        assert!(r.base_energy_drift <= 1e-7);
        assert!(r.derived_energy_drift <= 1e-7);
        assert!(dir.path().join("trajectory_base.csv").exists());
        assert!(dir.path().join("trajectory_derived.csv").exists());
    }

    #[test]
    fn failing_section_is_captured_and_the_rest_still_runs() {
        let mut cfg = minimal_config_for_tests();
        // Ordered form needs V > 0; a negative constant passes config
        // validation and fails at operator build time.
        cfg.potential = crate::config::PotentialConfig {
            kind: crate::config::PotentialKind::Constant,
            omega: None,
            offset: None,
            lambda: None,
            value: Some(-1.0),
            xs: None,
            vs: None,
            margin: 0.0,
        };
        cfg.spectrum = Some(crate::config::SpectrumConfig {
            n_levels: 3,
            operators: vec![OperatorConfig::HprimeOrdered],
            write_csv: false,
            grid: None,
        });
        cfg.momentum = Some(MomentumConfig::default());
        cfg.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let report = run(&cfg, dir.path(), 0, SectionFilter::All).unwrap();
        assert!(report.partial);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].section, "spectrum");
        assert_eq!(report.errors[0].category, "numeric");
        assert!(report.momentum.is_some());
        assert!(dir.path().join("report.json").exists());
    }

    #[test]
    fn filtered_run_requires_the_section() {
        let cfg = minimal_config_for_tests();
        let dir = tempfile::tempdir().unwrap();
        let err = run(&cfg, dir.path(), 0, SectionFilter::Classical).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn spectrum_runner_matches_the_oscillator_ladder() {
        let mut cfg = minimal_config_for_tests();
        cfg.grid = crate::config::GridConfig {
            x_min: -10.0,
            x_max: 10.0,
            n_points: 512,
            boundary: crate::config::BoundaryConfig::Dirichlet,
        };
        let s = SpectrumConfig {
            n_levels: 3,
            operators: vec![OperatorConfig::Base],
            write_csv: true,
            grid: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let r = run_spectrum(&cfg, &s, dir.path()).unwrap();
        let levels = &r.operators[0].levels;
        for (k, e) in levels.iter().enumerate() {
            assert!((e - (k as f64 + 0.5)).abs() <= 1e-3, "level {k} = {e}");
        }
        assert!(dir.path().join("spectrum.csv").exists());
    }
}
