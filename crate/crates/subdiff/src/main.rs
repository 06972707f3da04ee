use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use subdiff::config::{ConfigError, ExperimentConfig};
use subdiff::experiments::{self, Study};
use subdiff::io::{write_curves, write_signals, write_sweep, LabeledCurve};
use subdiff::mc::to_db;
use subdiff::presets::{self, InputFamily};
use subdiff_core::algorithms::AlgorithmKind;
use subdiff_core::complexity::complexity_report;

#[derive(Parser)]
#[command(
    name = "subdiff",
    version,
    about = "Robust multitask diffusion subband adaptive filtering experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo MSD curve of one algorithm.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write the raw input/noise/desired sequences of trial 0.
        #[arg(long)]
        dump_signals: Option<PathBuf>,
    },
    /// Steady-state grid over step size and subband count, with theory.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Run at multiples of the mean-square step bound instead of the step grid.
        #[arg(long)]
        stability: bool,
        /// Bound multiples for --stability.
        #[arg(long, value_delimiter = ',', default_value = "0.9,1.5")]
        factors: Vec<f64>,
        /// Skip the theoretical predictions.
        #[arg(long)]
        no_theory: bool,
        /// Also write the simulated curves.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// All algorithms with their tabulated parameters on the 15-node network.
    Compare {
        #[command(flatten)]
        common: Common,
        /// convergence, or tracking (targets flip sign halfway).
        #[arg(long, default_value = "convergence")]
        study: Study,
        /// white, ar1 or ar2.
        #[arg(long, default_value = "white")]
        input: InputFamily,
    },
    /// Step-size bounds and the predicted MSD curve of MD-NMSAF.
    Theory {
        #[command(flatten)]
        common: Common,
        /// Write the bounds as `quantity,value` CSV.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Per-iteration operation counts of every algorithm.
    Complexity {
        #[arg(long, default_value = "net15")]
        topology: String,
        #[arg(long, default_value_t = 16)]
        m: u64,
        #[arg(long, default_value_t = 4)]
        n_d: u64,
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Shipped networks.
    List,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set step.mu=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Preset name or topology file.
    #[arg(long)]
    topology: Option<String>,
    /// Analysis-bank coefficient file.
    #[arg(long)]
    bank_file: Option<PathBuf>,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => base,
        };
        if let Some(t) = &self.topology {
            cfg.topology = t.clone();
        }
        if let Some(b) = &self.bank_file {
            cfg.bank_file = Some(b.display().to_string());
        }
        for s in &self.sets {
            cfg.set(s)?;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn output_path(cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.output.as_ref().map(PathBuf::from)
}

/// Returns whether divergence was detected.
fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run {
            common,
            dump_signals,
        } => {
            let cfg = common.resolve(ExperimentConfig::default())?;
            if let Some(path) = dump_signals {
                let samples = match cfg.axis {
                    subdiff::config::Axis::Samples => cfg.iterations,
                    subdiff::config::Axis::Iterations => cfg.iterations * cfg.step.n_d,
                };
                write_signals(
                    File::create(&path)?,
                    &experiments::dump_signals(&cfg, samples)?,
                )?;
            }
            let curve = experiments::run_monte_carlo(&cfg)?;
            write_curves(
                sink(output_path(&cfg).as_deref())?,
                &[LabeledCurve::plain(curve.msd_db.clone())],
            )?;
            eprintln!(
                "steady state {:.2} dB, config {}",
                curve.steady_state_db(),
                curve.config_hash
            );
            Ok(curve.diverged)
        }
        Command::Sweep {
            common,
            stability,
            factors,
            no_theory,
            curves,
            cache_dir,
        } => {
            let cfg = common.resolve(experiments::sweep_config(InputFamily::White))?;
            let out = output_path(&cfg);
            let cache = cache_dir.as_deref();
            if stability {
                let r = experiments::stability_sweep(&cfg, &factors, cache)?;
                for (n_d, b) in &r.bounds {
                    let formula = b.formula.map_or("n/a".to_owned(), |f| format!("{f:.6}"));
                    eprintln!("n_d={n_d}: ms bound {:.6} (formula {formula})", b.empirical);
                }
                write_sweep(sink(out.as_deref())?, &r.rows)?;
                return Ok(r.rows.iter().any(|row| row.diverged));
            }
            let r = experiments::sweep_steady_state(&cfg, !no_theory, cache)?;
            write_sweep(sink(out.as_deref())?, &r.rows)?;
            if let Some(path) = curves {
                write_curves(File::create(&path)?, &r.curves)?;
            }
            Ok(r.rows.iter().any(|row| row.diverged))
        }
        Command::Compare {
            common,
            study,
            input,
        } => {
            let cfg = common.resolve(experiments::comparison_config(study, input))?;
            let results = experiments::comparison_experiment(&cfg)?;
            let curves: Vec<LabeledCurve> = results
                .iter()
                .map(|(k, c)| LabeledCurve {
                    msd_db: c.msd_db.clone(),
                    algorithm: Some(k.name().to_owned()),
                    mu: None,
                    n_d: None,
                })
                .collect();
            write_curves(sink(output_path(&cfg).as_deref())?, &curves)?;
            for (k, c) in &results {
                eprintln!(
                    "{:<9} steady state {:8.2} dB",
                    k.name(),
                    c.steady_state_db()
                );
            }
            Ok(results.iter().any(|(_, c)| c.diverged))
        }
        Command::Theory {
            common,
            bounds,
            cache_dir,
        } => {
            let cfg = common.resolve(ExperimentConfig::default())?;
            let r = experiments::theory_report(&cfg, cfg.iterations, cache_dir.as_deref())?;
            let mut rows = vec![
                ("mean_step_bound", r.mean_bound),
                ("ms_step_bound", r.ms_bound.empirical),
            ];
            if let Some(f) = r.ms_bound.formula {
                rows.push(("ms_step_bound_formula", f));
            }
            if let Some(s) = r.steady_state {
                rows.push(("steady_state_db", to_db(s)));
            }
            rows.push(("moment_rse", r.rse));
            for (k, v) in &rows {
                eprintln!("{k} = {v:.6}");
            }
            if let Some(path) = bounds {
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["quantity", "value"])?;
                for (k, v) in &rows {
                    w.write_record([k.to_string(), v.to_string()])?;
                }
                w.flush()?;
            }
            let db: Vec<f64> = r.transient.iter().map(|&x| to_db(x)).collect();
            write_curves(
                sink(output_path(&cfg).as_deref())?,
                &[LabeledCurve::plain(db)],
            )?;
            Ok(r.steady_state.is_none())
        }
        Command::Complexity {
            topology,
            m,
            n_d,
            p,
            out,
        } => {
            let t = presets::load_topology(&topology)
                .and_then(|f| f.build())
                .map_err(|e| anyhow::anyhow!(ConfigError(e.to_string())))?;
            let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
            w.write_record(["algorithm", "multiplications", "additions", "dmi_order"])?;
            for kind in AlgorithmKind::ALL {
                let c = complexity_report(kind, &t, m, n_d, p);
                w.write_record([
                    kind.name().to_owned(),
                    c.multiplications.to_string(),
                    c.additions.to_string(),
                    c.dmi_order.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(false)
        }
        Command::Presets {
            action: PresetAction::List,
        } => {
            for (name, about) in presets::list() {
                println!("{name:<8} {about}");
            }
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("divergence detected");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
