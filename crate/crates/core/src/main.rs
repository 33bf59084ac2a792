use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};

use cblbench::baseline::{
    high_x_of_y, rct_baseline_aggregated, rct_baseline_granular, rct_split, write_baseline_csv, HighXofYConfig,
    Subject,
};
use cblbench::harness::{
    default_workers, emit_report, read_csv_dataset, read_manifest, run_experiment, ExperimentConfig, OutputFormat,
    MANIFEST_FILE,
};
use cblbench::meterdata::{write_interval_csv, CustomerId, EventSchedule, SlotWindow};
use cblbench::settlement::SettlementMode;
use cblbench::synthgen::{generate, SynthConfig};

#[derive(Parser)]
#[command(name = "cblbench", version, about = "Customer baseline load evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Highxofy,
    Rct,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Granular,
    Aggregated,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as interval CSV.
    Generate {
        #[arg(long)]
        customers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        year: Option<i32>,
        /// Mean kWh per customer per hour.
        #[arg(long)]
        target: Option<f64>,
        /// JSON synthetic config; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check an interval CSV for missing, negative and gap cells.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Compute baselines for one event day and print them as CSV.
    Baseline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        event: NaiveDate,
        #[arg(long, value_enum, default_value = "granular")]
        mode: ModeArg,
        #[arg(long, default_value_t = 5)]
        x: usize,
        #[arg(long, default_value_t = 10)]
        y: usize,
        #[arg(long)]
        exclude_weekends: bool,
        /// Other event days, excluded from HighXofY history.
        #[arg(long, value_delimiter = ',')]
        prior_events: Vec<NaiveDate>,
        #[arg(long, value_delimiter = ',')]
        holidays: Vec<NaiveDate>,
        /// Restrict HighXofY granular output to one customer.
        #[arg(long)]
        customer: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        control_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experiment matrix.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replaces the config's seed list.
        #[arg(long)]
        seed: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, value_delimiter = ',')]
        format: Vec<FormatArg>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-run and re-emit a bundle from its manifest.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Generate {
            customers,
            seed,
            year,
            target,
            config,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => serde_json::from_str::<SynthConfig>(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("reading {}", p.display()))?,
                None => SynthConfig::default(),
            };
            cfg.n_customers = customers.unwrap_or(cfg.n_customers);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.year = year.unwrap_or(cfg.year);
            cfg.target_per_capita = target.unwrap_or(cfg.target_per_capita);
            let d = generate(&cfg)?;
            write_atomic(&out, |w| Ok(write_interval_csv(&d, w)?))?;
            eprintln!(
                "wrote {} customers x {} days to {}",
                d.customers().len(),
                d.n_days(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { input } => {
            let d = read_csv_dataset(&input).with_context(|| format!("reading {}", input.display()))?;
            let report = d.validate();
            println!(
                "{}: {} customers, {} days ({}..={}), {} slots/day",
                input.display(),
                d.customers().len(),
                d.n_days(),
                d.start(),
                d.end(),
                d.slots_per_day()
            );
            println!("{report}");
            for (c, day, t) in report.missing_cells.iter().take(20) {
                println!("missing {c} {day} slot {t}");
            }
            for (c, day, t) in report.negative_cells.iter().take(20) {
                println!("negative {c} {day} slot {t}");
            }
            for day in report.gap_days.iter().take(20) {
                println!("gap {day}");
            }
            Ok(if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Baseline {
            input,
            method,
            event,
            mode,
            x,
            y,
            exclude_weekends,
            prior_events,
            holidays,
            customer,
            control_fraction,
            seed,
            out,
        } => {
            let d = read_csv_dataset(&input).with_context(|| format!("reading {}", input.display()))?;
            d.ensure_valid()?;
            let schedule = EventSchedule::new(
                std::iter::once(event).chain(prior_events),
                SlotWindow::default(),
                holidays,
            )?;
            let curves = match method {
                MethodArg::Highxofy => {
                    let cfg = HighXofYConfig {
                        include_weekends: !exclude_weekends,
                        ..HighXofYConfig::new(x, y)?
                    };
                    match mode {
                        ModeArg::Granular => {
                            let who: Vec<usize> = match &customer {
                                Some(id) => vec![d
                                    .customer_index(&CustomerId::new(id.clone()))
                                    .with_context(|| format!("unknown customer {id}"))?],
                                None => (0..d.customers().len()).collect(),
                            };
                            who.into_iter()
                                .map(|c| {
                                    high_x_of_y(
                                        Subject::Customer(d.customers()[c].clone()),
                                        &d.series(c),
                                        &schedule,
                                        event,
                                        &cfg,
                                    )
                                })
                                .collect::<Result<Vec<_>, _>>()?
                        }
                        ModeArg::Aggregated => {
                            let total = d.aggregate(d.customers())?;
                            vec![high_x_of_y(Subject::Aggregate, &total.view(), &schedule, event, &cfg)?]
                        }
                    }
                }
                MethodArg::Rct => {
                    if customer.is_some() {
                        bail!("--customer applies to highxofy only");
                    }
                    let split = rct_split(d.customers(), control_fraction, seed)?;
                    match mode {
                        ModeArg::Granular => rct_baseline_granular(&d, &split, event)?,
                        ModeArg::Aggregated => vec![rct_baseline_aggregated(&d, &split, event)?],
                    }
                }
            };
            match out {
                Some(path) => write_atomic(&path, |w| Ok(write_baseline_csv(&curves, w)?))?,
                None => write_baseline_csv(&curves, io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            seed,
            out,
            format,
            workers,
        } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::from_json_file(&p)?,
                None => ExperimentConfig::default(),
            };
            if !seed.is_empty() {
                cfg.seeds = seed;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if !format.is_empty() {
                cfg.formats = format
                    .into_iter()
                    .map(|f| match f {
                        FormatArg::Csv => OutputFormat::Csv,
                        FormatArg::Json => OutputFormat::Json,
                    })
                    .collect();
            }
            let bundle = run_experiment(&cfg, workers.unwrap_or_else(default_workers))?;
            let written = emit_report(&bundle, &cfg.formats, &cfg.output_dir)?;
            print_summary(&bundle);
            eprintln!("wrote {} files under {}", written.len(), cfg.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { manifest, out, workers } => {
            let m = read_manifest(&manifest)?;
            let out = out.unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());
            let mut cfg = m.config;
            cfg.output_dir = out;
            let bundle = run_experiment(&cfg, workers.unwrap_or_else(default_workers))?;
            let written = emit_report(&bundle, &cfg.formats, &cfg.output_dir)?;
            eprintln!(
                "re-emitted {} files under {} from {}",
                written.len(),
                cfg.output_dir.display(),
                MANIFEST_FILE
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_summary(bundle: &cblbench::harness::ReportBundle) {
    println!("seed\tmethod\tmode\tcontrol%\talpha\tbeta\topi\tflr%\trebate%");
    for g in bundle.groups() {
        println!(
            "{}\t{}\t{}\t{:.0}\t{:.3}\t{:.3}\t{:.3}\t{:.2}\t{:.2}",
            g.seed,
            g.method,
            match g.mode {
                SettlementMode::Granular => "granular",
                SettlementMode::Aggregated => "aggregated",
            },
            g.control_fraction * 100.0,
            g.metrics.alpha,
            g.metrics.beta,
            g.metrics.opi,
            g.settlement.mean_flr_pct,
            g.settlement.mean_rebate_pct
        );
    }
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(&dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        f(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)?;
    Ok(())
}
