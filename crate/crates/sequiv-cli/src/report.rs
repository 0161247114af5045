//! Structured experiment report.
//!
//! One report per run, serialized as JSON. The report embeds the config
//! it was produced from and contains no timestamps or host details, so
//! reruns of the same config produce byte-identical files; volatile
//! run facts go to a separate metadata file.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::metrics::ComparisonMetrics;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_echo: ExperimentConfig,
    /// True when at least one requested section failed; the report then
    /// carries the sections that did complete.
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<SectionError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub momentum: Option<MomentumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernels: Vec<KernelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lprime: Option<LprimeReport>,
}

impl Report {
    pub fn new(config: ExperimentConfig) -> Self {
        Report {
            config_echo: config,
            partial: false,
            errors: Vec::new(),
            classical: None,
            momentum: None,
            spectrum: None,
            kernels: Vec::new(),
            lprime: None,
        }
    }

    pub fn record_error(&mut self, section: &str, err: CliError) {
        self.partial = true;
        self.errors.push(SectionError {
            section: section.to_string(),
            category: err.category().to_string(),
            message: err.to_string(),
        });
    }

    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("serializing report: {e}")))
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Io(format!("parsing report: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionError {
    pub section: String,
    pub category: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalReport {
    pub n_initial_conditions: usize,
    pub t_final: f64,
    pub tolerance: f64,
    /// Largest pointwise gap between the two solution families over all
    /// sampled initial conditions.
    pub max_deviation: f64,
    pub threshold: f64,
    pub passed: bool,
    pub base_energy_drift: f64,
    pub derived_energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumReport {
    pub per_potential: Vec<MomentumPotentialReport>,
    /// Residual shrink factor when the probe step halves; 4 means the
    /// defining relation holds to second order in the step.
    pub pde_residual_ratio: f64,
    pub power_law_p: f64,
    pub power_law_residual: f64,
    pub asymptotic_p: f64,
    pub asymptotic_coefficient_printed: f64,
    pub asymptotic_coefficient_derived: f64,
    pub asymptotic_gap_printed: f64,
    pub asymptotic_gap_derived: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumPotentialReport {
    pub v_pot: f64,
    pub max_round_trip_residual: f64,
    pub series_order_estimate: f64,
    pub hprime_series_order_estimate: f64,
    pub series_c5: f64,
    pub log_form_c5: f64,
    pub c5_signs_differ: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub operators: Vec<OperatorSpectrum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpectrum {
    pub operator: String,
    pub hermiticity_defect: f64,
    pub ground: f64,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub name: String,
    pub lagrangian: String,
    pub mode: String,
    pub normalization: String,
    pub sampling: String,
    pub regulator: f64,
    pub t_total: f64,
    /// Boundary-mass fraction at the finest step count.
    pub boundary_mass: f64,
    pub unreliable: bool,
    pub tables: Vec<ReferenceTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_check: Option<OrderCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone_check: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub reference: String,
    pub rows: Vec<DistanceRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_order: Option<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub n_steps: usize,
    pub dt: f64,
    #[serde(flatten)]
    pub metrics: ComparisonMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCheck {
    pub window: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_order: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LprimeReport {
    pub normalizations: Vec<KernelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub euclid_rows: Vec<DistanceRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub euclid_fitted_order: Option<f64>,
    pub order_window: [f64; 2],
    pub order_passed: bool,
    pub realtime_errors: Vec<DistanceRow>,
    pub monotone_passed: bool,
    pub passed: bool,
}

/// Volatile facts about one invocation, kept out of the report proper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub unix_time_seconds: u64,
    pub seed: u64,
    pub config_path: String,
    pub out_dir: String,
}

impl RunMeta {
    pub fn new(seed: u64, config_path: &str, out_dir: &str) -> Self {
        let unix_time_seconds = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            unix_time_seconds,
            seed,
            config_path: config_path.to_string(),
            out_dir: out_dir.to_string(),
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("serializing run metadata: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::minimal_config_for_tests;

    #[test]
    fn report_round_trips_through_json() {
        let mut report = Report::new(minimal_config_for_tests());
        report.classical = Some(ClassicalReport {
            n_initial_conditions: 20,
            t_final: 10.0,
            tolerance: 1e-10,
            max_deviation: 3.2e-8,
            threshold: 1e-6,
            passed: true,
            base_energy_drift: 1e-11,
            derived_energy_drift: 2e-11,
        });
        report.kernels.push(KernelReport {
            name: "euclid_base".into(),
            lagrangian: "base".into(),
            mode: "euclidean".into(),
            normalization: "gaussian_constant".into(),
            sampling: "midpoint".into(),
            regulator: 0.0,
            t_total: 1.0,
            boundary_mass: 1e-9,
            unreliable: false,
            tables: vec![ReferenceTable {
                reference: "spectral_base".into(),
                rows: vec![DistanceRow {
                    n_steps: 8,
                    dt: 0.125,
                    metrics: ComparisonMetrics {
                        max_abs_interior: 0.01,
                        raw_frobenius: 0.4,
                        rel_frobenius: 0.02,
                        phase_aligned: None,
                    },
                }],
                fitted_order: Some(1.02),
                monotone: true,
            }],
            order_check: Some(OrderCheck {
                window: [0.8, 1.2],
                fitted_order: Some(1.02),
                passed: true,
            }),
            monotone_check: None,
        });
        let text = report.to_json().unwrap();
        let back = Report::from_json(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn section_errors_mark_the_report_partial() {
        let mut report = Report::new(minimal_config_for_tests());
        assert!(!report.partial);
        report.record_error("spectrum", CliError::Numeric("grid too coarse".into()));
        assert!(report.partial);
        let text = report.to_json().unwrap();
        assert!(text.contains("grid too coarse"));
        let back = Report::from_json(&text).unwrap();
        assert_eq!(back.errors.len(), 1);
        assert_eq!(back.errors[0].section, "spectrum");
    }
}
