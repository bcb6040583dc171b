use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use uabs_sim::checkpoint;
use uabs_sim::config::{RunConfig, Scenario};
use uabs_sim::harness::{self, RunReport, TaskSource};
use uabs_sim::manifest;
use uabs_sim::metrics::{self, Format, Metadata};

#[derive(Parser)]
#[command(name = "uabs", version, about = "UAV base station continual-learning experiments")]
struct Cli {
    /// Output format for metric tables.
    #[arg(long, global = true, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the alternating clockwise / counterclockwise toy sequence.
    Toy(RunArgs),
    /// Run the urban sequence from trace manifests or generated tasks.
    Urban {
        #[command(flatten)]
        run: RunArgs,
        /// Directory of task manifests (`*.toml`), read in name order.
        #[arg(long, conflicts_with = "gen_seed")]
        traces: Option<PathBuf>,
        /// Generate tasks from this seed instead of reading traces.
        #[arg(long)]
        gen_seed: Option<u64>,
    },
    /// Write K synthetic urban tasks as trace manifests.
    GenTasks {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        /// Config overrides for the generator (urban preset otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Aggregate a per-seed metrics table over seeds.
    Summarize {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file of overrides on top of the scenario preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metrics table destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for the final meta-learned initialization of each seed.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn default_out(format: Format, stem: &str) -> PathBuf {
    PathBuf::from(match format {
        Format::Csv => format!("{stem}.csv"),
        Format::Json => format!("{stem}.json"),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Toy(args) => {
            let cfg = RunConfig::load(Scenario::Toy, args.config.as_deref())?;
            let report = harness::run_toy(&cfg)?;
            finish(&cfg, Scenario::Toy, &report, &args, cli.format, &[])
        }
        Command::Urban { run, traces, gen_seed } => {
            let cfg = RunConfig::load(Scenario::Urban, run.config.as_deref())?;
            let (source, extra) = match (traces, gen_seed) {
                (Some(dir), None) => {
                    let label = dir.display().to_string();
                    (TaskSource::Traces(dir), vec![("task_source", format!("traces:{label}"))])
                }
                (None, Some(s)) => (TaskSource::Generator(s), vec![("task_source", format!("generator:{s}"))]),
                _ => bail!("give exactly one of --traces DIR or --gen-seed S"),
            };
            let report = harness::run_urban(&cfg, &source)?;
            finish(&cfg, Scenario::Urban, &report, &run, cli.format, &extra)
        }
        Command::GenTasks { out, k, seed, config } => {
            let cfg = RunConfig::load(Scenario::Urban, config.as_deref())?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (i, task) in harness::generate_tasks(&cfg, seed, k).iter().enumerate() {
                manifest::write_trace_task(&out, &format!("task_{i:03}"), task)?;
            }
            println!("wrote {k} tasks to {}", out.display());
            Ok(())
        }
        Command::Summarize { input, out } => {
            let (mut meta, rows) =
                metrics::load_metrics(&input).with_context(|| format!("reading {}", input.display()))?;
            meta.push("summarized_from", input.display().to_string());
            let summary = harness::summarize(&rows);
            metrics::export_summary(&summary, &meta, &out, cli.format)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} summary rows to {}", summary.len(), out.display());
            Ok(())
        }
    }
}

fn finish(
    cfg: &RunConfig,
    scenario: Scenario,
    report: &RunReport,
    args: &RunArgs,
    format: Format,
    extra: &[(&str, String)],
) -> Result<()> {
    if let Some(bad) = report.audit.iter().find(|a| a.env_calls_during_meta != 0) {
        bail!(
            "seed {} task {}: meta-update made {} simulator calls",
            bad.seed,
            bad.task_index,
            bad.env_calls_during_meta
        );
    }
    let out = args.out.clone().unwrap_or_else(|| default_out(format, &format!("{scenario}_metrics")));
    let meta = Metadata::for_run(cfg, scenario, extra);
    metrics::export_metrics(&report.rows, &meta, &out, format).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} rows to {}", report.rows.len(), out.display());
    if let Some(dir) = &args.checkpoint_dir {
        save_checkpoints(dir, report)?;
    }
    Ok(())
}

fn save_checkpoints(dir: &Path, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (seed, theta) in &report.meta_theta {
        let path = dir.join(format!("comps_seed_{seed}.ckpt"));
        checkpoint::save(theta, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
