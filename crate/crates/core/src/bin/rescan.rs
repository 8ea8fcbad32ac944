use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rescan_core::commands;
use rescan_core::config::{parse_config_at, ExperimentConfig};
use rescan_core::report::{to_json, OutputSet};
use rescan_core::{Error, Result};

/// Re-scan loop cost model and simulator.
#[derive(Parser)]
#[command(name = "rescan", version)]
struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `cohort.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce the published cost-reduction table.
    Table1,
    /// Population cost ratio for the configured distribution and predictor.
    Ratio,
    /// Simulate a cohort and write report.json and subjects.csv.
    Simulate,
    /// Sweep the score threshold grid.
    Sweep,
    /// Kinematic guidance trajectories.
    Guidance,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        key: "--config".into(),
        message: "this command needs a configuration file".into(),
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        key: "--config".into(),
        message: format!("{}: {e}", path.display()),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = parse_config_at(&text, base)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
}

fn commit(out: OutputSet, dir: &Path) -> Result<()> {
    for p in out.commit(dir)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match cli.command {
        Command::Table1 => {
            let t = commands::table1();
            print!("{}", t.render());
            if let Some(dir) = out_dir(cli, None) {
                let mut out = OutputSet::new();
                out.add("table1.csv", t.to_table().to_csv(None)?);
                commit(out, &dir)?;
            }
        }
        Command::Ratio => {
            let cfg = load(cli)?;
            let r = commands::ratio(&cfg)?;
            print!("{}", r.render());
            if let Some(dir) = out_dir(cli, Some(&cfg)) {
                let mut out = OutputSet::new();
                out.add("ratio.json", to_json(&r));
                commit(out, &dir)?;
            }
        }
        Command::Simulate => {
            let cfg = load(cli)?;
            let dir = out_dir(cli, Some(&cfg)).unwrap_or_else(|| PathBuf::from("out"));
            let (report, out) = commands::simulate(&cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report.aggregates).expect("serializable")
            );
            commit(out, &dir)?;
        }
        Command::Sweep => {
            let cfg = load(cli)?;
            let s = commands::sweep(&cfg)?;
            let table = s.to_table();
            print!("{}", table.to_csv(None)?);
            if let Some(dir) = out_dir(cli, Some(&cfg)) {
                let mut out = OutputSet::new();
                out.add("sweep.csv", table.to_csv(Some(&s.manifest))?);
                out.add("sweep.json", to_json(&s));
                commit(out, &dir)?;
            }
        }
        Command::Guidance => {
            let cfg = load(cli)?;
            let dir = out_dir(cli, Some(&cfg)).unwrap_or_else(|| PathBuf::from("out"));
            let g = commands::guidance(&cfg)?;
            print!("{}", g.curve_table().to_csv(None)?);
            commit(g.outputs()?, &dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
