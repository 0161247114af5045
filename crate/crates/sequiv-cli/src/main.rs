use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sequiv::model::TimeMode;

use sequiv_cli::config::ExperimentConfig;
use sequiv_cli::report::{KernelReport, Report, RunMeta};
use sequiv_cli::runner::{self, SectionFilter};
use sequiv_cli::{csvio, metrics, CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "sequiv",
    version,
    about = "Numerical experiments on a pair of Lagrangians that share \
             their classical trajectories but not their quantizations"
)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output.directory`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Seed override for sampled checks.
    #[arg(short, long, global = true)]
    seed: Option<u64>,
    /// Chattier logging.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate both constructed Lagrangians from shared initial data
    /// and measure trajectory separation.
    ClassicalCheck,
    /// Momentum inversion round trips, truncation orders, and
    /// large-momentum forms.
    MomentumCheck,
    /// Diagonalize the grid operators and report their low-lying levels.
    Spectrum,
    /// Compose configured lattice kernels and compare them against
    /// spectral references.
    Lattice,
    /// Compare two kernel matrices stored as CSV.
    Compare {
        /// Matrix under test.
        #[arg(long)]
        a: PathBuf,
        /// Reference matrix.
        #[arg(long)]
        b: PathBuf,
        /// Time mode for the comparison; defaults to the matrix headers.
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Fraction of nodes clipped from each edge for the interior
        /// metric.
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Run every section present in the config.
    Run,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    RealTime,
    Euclidean,
}

impl From<ModeArg> for TimeMode {
    fn from(m: ModeArg) -> TimeMode {
        match m {
            ModeArg::RealTime => TimeMode::RealTime,
            ModeArg::Euclidean => TimeMode::Euclidean,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(
        env_logger::Env::default()
            .default_filter_or(if cli.verbose { "debug" } else { "warn" }),
    )
    .init();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<u8> {
    if let Command::Compare { a, b, mode, margin } = &cli.command {
        return run_compare(a, b, *mode, *margin);
    }
    let filter = match cli.command {
        Command::ClassicalCheck => SectionFilter::Classical,
        Command::MomentumCheck => SectionFilter::Momentum,
        Command::Spectrum => SectionFilter::Spectrum,
        Command::Lattice => SectionFilter::Kernels,
        Command::Run => SectionFilter::All,
        Command::Compare { .. } => unreachable!(),
    };

    let config_path = cli
        .config
        .ok_or_else(|| CliError::Config("this subcommand needs --config".into()))?;
    let cfg = ExperimentConfig::load(&config_path)?;
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let seed = cli.seed.unwrap_or(cfg.seed);

    let report = runner::run(&cfg, &out_dir, seed, filter)?;
    let meta = RunMeta::new(
        seed,
        &config_path.display().to_string(),
        &out_dir.display().to_string(),
    );
    csvio::write_atomic(&out_dir.join("run_meta.json"), &meta.to_json()?)?;

    print_summary(&report, &out_dir);

    if report.partial {
        for e in &report.errors {
            eprintln!("section {} failed ({}): {}", e.section, e.category, e.message);
        }
        let code = report
            .errors
            .first()
            .map_or(3, |e| CliError::exit_code_for_category(&e.category));
        Ok(code as u8)
    } else {
        Ok(0)
    }
}

fn run_compare(
    a: &PathBuf,
    b: &PathBuf,
    mode: Option<ModeArg>,
    margin: Option<f64>,
) -> CliResult<u8> {
    let ma = csvio::read_matrix_csv(a)?;
    let mb = csvio::read_matrix_csv(b)?;
    if (ma.dx - mb.dx).abs() > 1e-12 * ma.dx.abs() {
        log::warn!("grid spacings differ: {} vs {}", ma.dx, mb.dx);
    }
    let mode = match mode {
        Some(m) => m.into(),
        None => {
            if ma.mode != mb.mode {
                return Err(CliError::Config(
                    "matrix headers disagree on the time mode; pass --mode".into(),
                ));
            }
            ma.mode
        }
    };
    let margin = margin.unwrap_or(sequiv::linalg::DEFAULT_INTERIOR_MARGIN);
    let m = metrics::compare_amplitudes(&ma.matrix, &mb.matrix, mode, margin)?;
    let text = serde_json::to_string_pretty(&m)
        .map_err(|e| CliError::Io(format!("serializing metrics: {e}")))?;
    println!("{text}");
    Ok(0)
}

fn kernel_summary(k: &KernelReport) {
    println!(
        "  {} ({}, {}, {}): boundary mass {:.2e}{}",
        k.name,
        k.lagrangian,
        k.mode,
        k.normalization,
        k.boundary_mass,
        if k.unreliable { ", UNRELIABLE" } else { "" }
    );
    for t in &k.tables {
        let order = match t.fitted_order {
            Some(p) => format!("order {p:.3}"),
            None => "no clean power law".to_string(),
        };
        let last = t.rows.last();
        let err = last.map_or(String::new(), |r| {
            format!(", finest error {:.3e} at n = {}", r.metrics.max_abs_interior, r.n_steps)
        });
        println!(
            "    vs {}: {order}, {}monotone{err}",
            t.reference,
            if t.monotone { "" } else { "not " }
        );
    }
    if let Some(oc) = &k.order_check {
        println!(
            "    order check [{}, {}]: {}",
            oc.window[0],
            oc.window[1],
            if oc.passed { "pass" } else { "FAIL" }
        );
    }
    if let Some(mc) = k.monotone_check {
        println!("    monotone check: {}", if mc { "pass" } else { "FAIL" });
    }
}

fn print_summary(report: &Report, out_dir: &std::path::Path) {
    if let Some(c) = &report.classical {
        println!(
            "classical: {} initial conditions to t = {}, max deviation {:.3e} \
             (threshold {:.1e}) -> {}",
            c.n_initial_conditions,
            c.t_final,
            c.max_deviation,
            c.threshold,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    if let Some(m) = &report.momentum {
        for p in &m.per_potential {
            println!(
                "momentum (V = {}): round trip {:.2e}, residual orders {:.2} and {:.2}, \
                 fifth-order coefficients {:+.4} vs {:+.4}{}",
                p.v_pot,
                p.max_round_trip_residual,
                p.series_order_estimate,
                p.hprime_series_order_estimate,
                p.series_c5,
                p.log_form_c5,
                if p.c5_signs_differ { " (signs differ)" } else { "" }
            );
        }
        println!(
            "momentum: defining-relation ratio {:.3}, power-law residual {:.2e}, \
             subleading gap {:.3e} (printed {:.4}) vs {:.3e} (derived {:.4})",
            m.pde_residual_ratio,
            m.power_law_residual,
            m.asymptotic_gap_printed,
            m.asymptotic_coefficient_printed,
            m.asymptotic_gap_derived,
            m.asymptotic_coefficient_derived
        );
    }
    if let Some(s) = &report.spectrum {
        for op in &s.operators {
            println!(
                "spectrum: {} ground {:.6}, hermiticity defect {:.2e}",
                op.operator, op.ground, op.hermiticity_defect
            );
        }
    }
    for k in &report.kernels {
        println!("kernel:");
        kernel_summary(k);
    }
    if let Some(l) = &report.lprime {
        println!("derived-action lattice comparison:");
        for k in &l.normalizations {
            kernel_summary(k);
        }
        if let Some(c) = &l.control {
            let order = c
                .euclid_fitted_order
                .map_or("none".to_string(), |p| format!("{p:.3}"));
            println!(
                "  control: euclidean order {} in [{}, {}] -> {}, real-time refinement \
                 monotone -> {}, overall {}",
                order,
                c.order_window[0],
                c.order_window[1],
                if c.order_passed { "pass" } else { "FAIL" },
                if c.monotone_passed { "pass" } else { "FAIL" },
                if c.passed { "pass" } else { "FAIL" }
            );
        }
    }
    println!("report written to {}", out_dir.join("report.json").display());
}
