use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use shared_steer::arm::DriverMode;
use shared_steer::ident::{fit_second_order, generate_excitation, run_impedance_trial, TrialSetup};
use shared_steer::scenario::{
    parse_mode, run_scenario, run_sweep, write_outputs, write_sweep, Condition, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "shared-steer", version, about = "Driver/automation shared steering simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write log.csv, report.json and effective_config.json
    Simulate {
        /// scenario config JSON; defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// MC, NoConflict, ConflictI or ConflictII
        #[arg(long, value_parser = parse_condition)]
        condition: Option<Condition>,
        /// Tense or Relaxed
        #[arg(long, value_parser = parse_driver_mode)]
        mode: Option<DriverMode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all conditions in both driver modes and write the workload table
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Impedance trial on the held wheel: trial CSV plus fitted J, B, K
    Identify {
        #[arg(long, value_parser = parse_driver_mode, default_value = "Tense")]
        mode: DriverMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// trial setup JSON; defaults apply when omitted
        #[arg(long)]
        setup: Option<PathBuf>,
        #[arg(long, default_value = "identify")]
        out: PathBuf,
    },
    /// Write the reference trajectory of a config as t,v_ref,y_ref CSV
    Reference {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_condition(s: &str) -> Result<Condition, String> {
    s.parse().map_err(|e: shared_steer::Error| e.to_string())
}

fn parse_driver_mode(s: &str) -> Result<DriverMode, String> {
    parse_mode(s).map_err(|e| e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            condition,
            mode,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            let condition = condition.unwrap_or(cfg.condition);
            let mode = mode.unwrap_or(cfg.mode);
            if condition != cfg.condition || mode != cfg.mode {
                cfg = cfg.with_cell(condition, mode);
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            cfg.validate()?;
            let result = run_scenario(&cfg)?;
            write_outputs(&cfg, &result, &cfg.output_dir)
                .with_context(|| format!("writing to {}", cfg.output_dir.display()))?;
            let p = &result.report.performance;
            println!(
                "{}/{}: peak lateral error {:.3} m, peak |T_hm| {:.3} N m, peak |T_ADS| {:.3} N m -> {}",
                result.report.condition,
                result.report.mode,
                p.peak_lateral_error,
                p.peak_hand_torque,
                p.peak_ads_torque,
                cfg.output_dir.display()
            );
        }
        Command::Sweep { config, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let cells = run_sweep(&cfg);
            write_sweep(&cells, cfg.clock.outer_every(), &cfg.output_dir)?;
            let failed: Vec<String> = cells
                .iter()
                .filter_map(|c| c.error.as_ref().map(|e| format!("{}/{}: {e}", c.condition, c.mode.label())))
                .collect();
            println!(
                "{} of {} cells completed -> {}",
                cells.len() - failed.len(),
                cells.len(),
                cfg.output_dir.display()
            );
            if !failed.is_empty() {
                anyhow::bail!("failed cells:\n{}", failed.join("\n"));
            }
        }
        Command::Identify { mode, seed, setup, out } => {
            let setup = match setup {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<TrialSetup>(&text)?
                }
                None => TrialSetup::default(),
            };
            let excitation = generate_excitation(seed, setup.duration, setup.dt, setup.amplitude)?;
            let trial = run_impedance_trial(mode, &excitation, seed, &setup)?;
            let fit = fit_second_order(&trial, setup.cutoff_hz)?;
            std::fs::create_dir_all(&out)?;
            trial.write_csv(BufWriter::new(File::create(out.join("trial.csv"))?))?;
            std::fs::write(out.join("fit.json"), serde_json::to_string_pretty(&fit)? + "\n")?;
            println!(
                "{}: J = {:.4} kg m^2, B = {:.4} N m s/rad, K = {:.4} N m/rad, residual {:.4} N m -> {}",
                mode.label(),
                fit.inertia,
                fit.damping,
                fit.stiffness,
                fit.residual,
                out.display()
            );
        }
        Command::Reference { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let reference = cfg.build_reference()?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            reference.write_csv(BufWriter::new(File::create(&out)?))?;
            println!("{} samples -> {}", reference.times().len(), out.display());
        }
    }
    Ok(())
}
