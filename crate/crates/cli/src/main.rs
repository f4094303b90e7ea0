//! Command-line front end: headless learning runs, the session service and
//! scenario/map utilities.

mod serve;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use stairwise::maps::export::voxel_map_to_text;
use stairwise::orchestrator::{
    states_to_text, EditScript, NullObserver, Orchestrator, RunOptions, RunReport, World,
};
use stairwise::world::{generate_stairs, stairs_scenario, voxelize, Scenario, StairsSpec};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONVERGED: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "stairwise",
    version,
    about = "Quadruped path planning with a learning global/local loop",
    after_help = "Exit status of `run`: 0 converged, 2 iteration budget spent without converging, 1 error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learning loop headless and write the report and final path.
    Run(RunArgs),
    /// Serve the session protocol over WebSocket at /ws.
    Serve(ServeArgs),
    /// Write a staircase scenario document.
    GenStairs(GenStairsArgs),
    /// Voxelize a scenario and write the map as text records.
    ExportMap(ExportMapArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Edit script replayed at iteration boundaries.
    #[arg(long)]
    edits: Option<PathBuf>,
    #[arg(long, default_value_t = stairwise::orchestrator::DEFAULT_MAX_ITERATIONS)]
    max_iters: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write zero wall-clock times so reports are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Reserved; planning is deterministic and uses no randomness.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub listen: String,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Where the last run's report is written on shutdown.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
struct GenStairsArgs {
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = 0.1)]
    rise: f64,
    #[arg(long, default_value_t = 0.3)]
    run: f64,
    #[arg(long, default_value_t = 1.0)]
    width: f64,
    /// Trunk height above the floor at the start and above the top step at
    /// the goal.
    #[arg(long)]
    stance_height: Option<f64>,
    /// Extra waypoints the local planner backs off by after a block.
    #[arg(long)]
    back_off_shift: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportMapArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Serve(args) => serve::cmd_serve(&args).map(|()| EXIT_CONVERGED),
        Command::GenStairs(args) => cmd_gen_stairs(&args).map(|()| EXIT_CONVERGED),
        Command::ExportMap(args) => cmd_export_map(&args).map(|()| EXIT_CONVERGED),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

fn cmd_run(args: &RunArgs) -> Result<u8> {
    let scenario = load_scenario(&args.scenario)?;
    let mut edits = match &args.edits {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            EditScript::from_json(&text)
                .with_context(|| format!("parsing edit script {}", p.display()))?
        }
        None => EditScript::default(),
    };
    let options = RunOptions {
        max_iterations: args.max_iters,
        record_timing: !args.no_timing,
    };
    let mut orch = Orchestrator::new(scenario);
    let report = orch.run(&options, &mut edits, &mut NullObserver)?;
    write_artifacts(&args.out, &orch.world, &report)?;
    for m in &report.iterations {
        tracing::info!(
            iteration = m.iteration,
            requests = m.request_count,
            states = m.path_length_states,
            expansions = m.global_expansions,
            "iteration finished"
        );
    }
    println!(
        "{} after {} iterations ({} replan requests); reports in {}",
        if report.converged {
            "converged"
        } else {
            "not converged"
        },
        report.iterations.len(),
        report.total_requests,
        args.out.display()
    );
    Ok(if report.converged {
        EXIT_CONVERGED
    } else {
        EXIT_NOT_CONVERGED
    })
}

/// Writes `report.csv`, `report.json` and `final_path.txt` into `dir`.
pub fn write_artifacts(dir: &Path, world: &World, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let map = world.voxelize()?;
    let files = [
        ("report.csv", report.to_csv()),
        ("report.json", report.to_json()),
        (
            "final_path.txt",
            states_to_text(&report.final_path, &map, &world.scenario.robot),
        ),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_gen_stairs(args: &GenStairsArgs) -> Result<()> {
    // Reject bad dimensions with the generator's own message.
    generate_stairs(args.steps, args.rise, args.run, args.width)?;
    let defaults = StairsSpec::default();
    let spec = StairsSpec {
        steps: args.steps,
        rise: args.rise,
        run: args.run,
        width: args.width,
        stance_height: args.stance_height.unwrap_or(defaults.stance_height),
        ..defaults
    };
    let mut scenario = stairs_scenario(&spec)?;
    if let Some(j) = args.back_off_shift {
        scenario.params.back_off_shift = j;
    }
    std::fs::write(&args.out, scenario.to_json() + "\n")
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn cmd_export_map(args: &ExportMapArgs) -> Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let map = voxelize(&scenario)?;
    std::fs::write(&args.out, voxel_map_to_text(&map))
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}
