//! `sesans`: simulate, reproduce and cross-check echo polarization curves.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sesans_core::export::export_csv;
use sesans_core::models::{self, sigma_from_fwhm, single_path_residual_damping};
use sesans_core::{load_config, run, CurveKind, Error, PresetId, RunConfig, RunResults};

#[derive(Parser)]
#[command(name = "sesans", version, about = "Spin-echo SANS from phase gratings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the curves listed in a TOML run file.
    Simulate {
        config: PathBuf,
        /// Write one CSV per curve and peak table into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in figure presets.
    Reproduce {
        /// fig2a_ideal, fig2b_damped, fig3a_2MHz, fig3b_3MHz, fig4_tilted_8deg or fig4_tilted_5deg.
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the wave-packet oracle on a run file's sweep and compare with the closed forms.
    Oracle {
        config: PathBuf,
        /// Multiplies the oracle grid densities.
        #[arg(long, default_value_t = 1.0)]
        grid_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the damping the single-path picture still allows.
    Report {
        /// Packet full width at half maximum, µm.
        #[arg(long, default_value_t = 150.0)]
        fwhm_um: f64,
        /// Spin echo length, µm.
        #[arg(long, default_value_t = 25.0)]
        xi_um: f64,
    },
}

fn exit_code(category: &str) -> u8 {
    match category {
        "validation" => 3,
        "parse" => 4,
        "convergence" => 5,
        "domain" => 6,
        "io" => 7,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": e.category(),
                "message": e.to_string(),
            });
            eprintln!("{line}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config)?;
            finish(&cfg, out.as_deref())
        }
        Command::Reproduce { preset, out } => {
            let cfg = preset.parse::<PresetId>()?.config();
            finish(&cfg, out.as_deref())
        }
        Command::Oracle {
            config,
            grid_scale,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if !(grid_scale > 0.0 && grid_scale.is_finite()) {
                return Err(Error::InvalidParameter(format!("--grid-scale must be > 0, got {grid_scale}")));
            }
            cfg.oracle.grid_scale *= grid_scale;
            cfg.outputs.retain(|k| k.is_oracle());
            if cfg.outputs.is_empty() {
                cfg.outputs = vec![CurveKind::OracleQuantum, CurveKind::OracleSemiclassical];
            }
            let results = run(&cfg)?;
            print_oracle_table(&cfg, &results)?;
            export(&results, out.as_deref())
        }
        Command::Report { fwhm_um, xi_um } => {
            if !(fwhm_um > 0.0 && xi_um >= 0.0) {
                return Err(Error::InvalidParameter(
                    "--fwhm-um must be > 0 and --xi-um >= 0".to_string(),
                ));
            }
            let sigma = sigma_from_fwhm(fwhm_um * 1e3) / 1e3;
            let g = single_path_residual_damping(fwhm_um * 1e3, xi_um * 1e3);
            println!("single-path residual damping");
            println!("  packet fwhm        {fwhm_um:.3} um");
            println!("  gaussian sigma     {sigma:.2} um");
            println!("  spin echo length   {xi_um:.3} um");
            println!("  G = exp(-xi^2/2sigma^2) = {g:.3}");
            println!("two-path prediction at the same length: 1 (no damping)");
            Ok(())
        }
    }
}

fn finish(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Error> {
    let results = run(cfg)?;
    print_summary(&results);
    export(&results, out)
}

fn export(results: &RunResults, out: Option<&Path>) -> Result<(), Error> {
    if let Some(dir) = out {
        for path in export_csv(results, dir)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn print_summary(results: &RunResults) {
    if let Some(p) = &results.provenance {
        println!("# {p}");
    }
    println!("period along encoding direction: {:.3} nm", results.period_nm);
    for (kind, pattern) in &results.curves {
        let (lo, hi) = pattern.xi_range().unwrap_or((f64::NAN, f64::NAN));
        println!("{kind}: {} samples, xi {lo:.1}..{hi:.1} nm", pattern.len());
    }
    for (kind, peaks) in &results.peaks {
        println!("peaks of {kind}:");
        println!("  {:>5} {:>14} {:>12} {:>12}", "order", "xi_peak_nm", "height", "width_nm");
        for p in peaks {
            println!(
                "  {:>5} {:>14.3} {:>12.6} {:>12.3}",
                p.order, p.xi_peak_nm, p.height, p.width_nm
            );
        }
    }
    for w in &results.warnings {
        println!("warning: {w}");
    }
}

fn print_oracle_table(cfg: &RunConfig, results: &RunResults) -> Result<(), Error> {
    let g = cfg.effective_grating()?;
    let quantum = results.curve(CurveKind::OracleQuantum);
    let single = results.curve(CurveKind::OracleSemiclassical);
    let Some(reference) = quantum.or(single) else {
        return Ok(());
    };
    println!(
        "{:>12} {:>10} {:>12} {:>12} {:>12} {:>12}",
        "xi_nm", "lambda_nm", "oracle_2path", "closed_2path", "oracle_1path", "closed_1path"
    );
    for (i, s) in reference.samples().iter().enumerate() {
        let lambda = s.lambda_nm.unwrap_or(f64::NAN);
        let phi = cfg
            .oracle
            .phase_rad
            .map(sesans_core::PhaseShift)
            .unwrap_or_else(|| models::tof_phase(&g, lambda));
        let cell = |p: Option<&sesans_core::EchoPattern>| {
            p.map(|p| format!("{:>12.6}", p.samples()[i].polarization))
                .unwrap_or_else(|| format!("{:>12}", "-"))
        };
        println!(
            "{:>12.3} {:>10.5} {} {:>12.6} {} {:>12.6}",
            s.xi_nm,
            lambda,
            cell(quantum),
            models::plane_wave_polarization(&g, phi, s.xi_nm),
            cell(single),
            models::semiclassical_polarization(&g, phi, s.xi_nm, &cfg.packet),
        );
    }
    for w in &results.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
