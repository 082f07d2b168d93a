//! Command-line front end: `mhfdia run` executes one closed-loop
//! simulation, `mhfdia sweep` repeats runs across a swept parameter.
//! Exit codes: 0 = completed, 2 = configuration error, 3 = numerical
//! failure. `MHFDIA_THREADS` caps the sweep worker pool.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use mhfdia::baselines::AttackKind;
use mhfdia::harness::{
    self, export_summary, export_trace, ExportFormat, ExportOptions, RunConfig, Scenario,
    SweepParam, SweepSpec,
};
use mhfdia::vehicle::PathKind;
use mhfdia::Error;

#[derive(Parser)]
#[command(name = "mhfdia", version, about = "Stealthy moving-horizon FDIA simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one closed-loop run and optionally export its trace.
    Run(RunArgs),
    /// Repeat runs across a swept parameter and aggregate the metrics.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; omitted keys use scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario when no config file is given: grid, vehicle, or synthetic.
    #[arg(long)]
    scenario: Option<String>,
    /// Attack kind: mh, eig, range, gstealth, static, or none.
    #[arg(long)]
    attack: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV and JSON exports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Vehicle path: line, circle, or figure8.
    #[arg(long)]
    path: Option<String>,
    /// Attack injection start time in seconds.
    #[arg(long)]
    attack_start: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Swept parameter: M, support, lambda0, or T.
    #[arg(long)]
    param: String,
    /// Comma-separated value list, e.g. 100,500,2000.
    #[arg(long)]
    values: String,
    /// Repetitions per value with re-randomized seeds.
    #[arg(long, default_value_t = 20)]
    reps: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Dimension(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn build_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => {
            let scenario = match &common.scenario {
                Some(s) => Scenario::from_str(s)?,
                None => Scenario::Synthetic,
            };
            RunConfig::for_scenario(scenario)
        }
    };
    if let Some(s) = &common.scenario {
        cfg.scenario = Scenario::from_str(s)?;
    }
    if let Some(a) = &common.attack {
        cfg.attack = AttackKind::from_str(a)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let mut cfg = build_config(&args.common)?;
    if let Some(p) = &args.path {
        cfg.path = PathKind::from_str(p)?;
    }
    if let Some(s) = args.attack_start {
        cfg.attack_start = s;
    }
    cfg.validate()?;

    let trace = harness::run(&cfg)?;
    let alarms = trace
        .column("alarm")
        .map(|c| c.iter().filter(|&&v| v > 0.5).count())
        .unwrap_or(0);
    let max_residual = trace
        .column("residual")
        .map(|c| c.iter().copied().fold(0.0_f64, f64::max))
        .unwrap_or(0.0);
    println!(
        "scenario = {}, attack = {}, seed = {}: {} steps, {} alarms, max residual {:.6}{}",
        trace.meta.scenario,
        trace.meta.attack,
        trace.meta.seed,
        trace.rows.len(),
        alarms,
        max_residual,
        if trace.meta.diverged { ", DIVERGED" } else { "" }
    );
    if let Some(eff) = trace.column("effectiveness") {
        let peak = eff.iter().copied().fold(0.0_f64, f64::max);
        println!("peak effectiveness {peak:.6}");
    }

    if let Some(dir) = &cfg.out {
        let csv = export_trace(&trace, ExportFormat::Csv, dir, "trace", ExportOptions::default())?;
        let json =
            export_trace(&trace, ExportFormat::Json, dir, "trace", ExportOptions::default())?;
        println!("wrote {} and {}", csv.display(), json.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let base = build_config(&args.common)?;
    let param = SweepParam::from_str(&args.param)?;
    let values = args
        .values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad sweep value '{v}'")))
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    let spec = SweepSpec { param, values, reps: args.reps };

    let summary = harness::sweep(&spec, &base)?;
    print!("{}", summary.to_csv_string());

    if let Some(dir) = &base.out {
        let csv =
            export_summary(&summary, ExportFormat::Csv, dir, "sweep", ExportOptions::default())?;
        let json =
            export_summary(&summary, ExportFormat::Json, dir, "sweep", ExportOptions::default())?;
        println!("wrote {} and {}", csv.display(), json.display());
    }
    Ok(())
}
