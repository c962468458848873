//! Command-line harness: training runs per seed, evaluation and cross-play,
//! tabular equivalence checks and CSV export for plotting.

pub mod config;
pub mod eval;
pub mod export;
pub mod train;
pub mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use damarl_core::envs::{ScenarioConfig, ScenarioId};
use damarl_core::marl::{evaluate, Variant};

use config::{Precision, RunConfig};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DAMARL_OUT";
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "damarl", version, about = "Delay-aware multi-agent actor-critic experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run per seed.
    Train(TrainArgs),
    /// Noise-free evaluation of checkpoints, or a predator-by-prey grid.
    Eval(EvalArgs),
    /// Check that buffered interaction and the augmented game induce the
    /// same reward process.
    Verify(VerifyArgs),
    /// Aggregate metrics streams into CSV series.
    ExportPlots(ExportArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Run config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<ScenarioId>,
    /// Uniform action delay in seconds; must be a whole number of steps.
    #[arg(long)]
    pub delay_seconds: Option<f64>,
    /// Simulation time step in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Comma-separated seeds, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Output root; falls back to the config, then $DAMARL_OUT, then `runs`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
    /// Seeds trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Progress line every this many episodes; 0 is silent.
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
    /// Write the resolved config and exit without training.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Checkpoint set: a checkpoint directory or a run directory.
    #[arg(long, conflicts_with_all = ["run", "scripted"])]
    pub checkpoints: Option<PathBuf>,
    /// Cross-play entry `VARIANT=RUN_DIR`; repeat for each variant.
    #[arg(long, value_parser = parse_run_entry)]
    pub run: Vec<(Variant, PathBuf)>,
    /// Scripted chasers for predators, everyone else still.
    #[arg(long)]
    pub scripted: bool,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the summary (JSON) or grid (CSV).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Fixture JSON; random instances are checked when absent.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = verify::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportKind {
    Curves,
    Delay,
    Outcomes,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    /// Run, group or output-root directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "curves")]
    pub kind: ExportKind,
    /// Final episodes averaged for delay and outcome exports.
    #[arg(long, default_value_t = 1000)]
    pub last: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_run_entry(s: &str) -> Result<(Variant, PathBuf), String> {
    let (v, p) = s.split_once('=').ok_or_else(|| format!("expected VARIANT=DIR, got {s:?}"))?;
    Ok((v.parse().map_err(|e| format!("{e}"))?, PathBuf::from(p)))
}

impl ScenarioArgs {
    /// Config file (or a bare scenario) with command-line overrides applied.
    pub fn base_config(&self) -> Result<RunConfig> {
        let mut c = match (&self.config, self.scenario) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(id)) => RunConfig::new(id),
            (None, None) => bail!("give --config or --scenario"),
        };
        if let Some(id) = self.scenario {
            if c.scenario.scenario != id {
                c.scenario = ScenarioConfig::new(id);
            }
        }
        if let Some(dt) = self.dt {
            c.scenario.dt = Some(dt);
        }
        if let Some(d) = self.delay_seconds {
            c.run.delay_seconds = Some(d);
            c.scenario.delay_steps.clear();
        }
        Ok(c)
    }
}

impl TrainArgs {
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut c = self.scenario.base_config()?;
        if let Some(v) = self.variant {
            c.trainer.variant = v;
        }
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() {
                bail!("--seeds: the seed list must not be empty");
            }
            c.run.seeds = seeds.clone();
        }
        if let Some(e) = self.episodes {
            c.trainer.episodes = e;
        }
        if let Some(p) = self.precision {
            c.run.precision = match p {
                PrecisionArg::F32 => Precision::F32,
                PrecisionArg::F64 => Precision::F64,
            };
        }
        c.run.out = self.out.clone().or(c.run.out);
        c.resolve()
    }
}

/// Output root: flag or config, then the environment, then `runs`.
pub fn output_root(configured: Option<&Path>) -> PathBuf {
    configured
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn cmd_train(args: &TrainArgs) -> Result<ExitCode> {
    let mut config = args.run_config()?;
    let out = output_root(config.run.out.as_deref());
    config.run.out = Some(out.clone());
    let group = out.join(config.group_name());
    std::fs::create_dir_all(&group).with_context(|| format!("creating {}", group.display()))?;
    std::fs::write(group.join("config.toml"), config.to_toml()?)?;
    if args.dry_run {
        println!("{}", group.join("config.toml").display());
        return Ok(ExitCode::SUCCESS);
    }
    for dir in train::train_all(&config, &out, args.jobs, args.log_every)? {
        println!("{}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<ExitCode> {
    let scenario_from_args = || -> Result<Option<ScenarioConfig>> {
        if args.scenario.config.is_none() && args.scenario.scenario.is_none() {
            return Ok(None);
        }
        Ok(Some(args.scenario.base_config()?.resolve()?.scenario))
    };
    if !args.run.is_empty() {
        let scenario = match scenario_from_args()? {
            Some(s) => s,
            None => eval::scenario_of_checkpoint(&eval::checkpoint_dir(&args.run[0].1))?,
        };
        let cells = eval::cross_play(&args.run, &scenario, args.episodes, args.seed)?;
        print!("{}", eval::cross_play_table(&cells));
        if let Some(out) = &args.out {
            std::fs::write(out, eval::cross_play_csv(&cells))?;
        }
        return Ok(ExitCode::SUCCESS);
    }
    let (scenario, mut policies) = if args.scripted {
        let s = scenario_from_args()?.context("--scripted needs --config or --scenario")?;
        let p = eval::scripted_policies(&s)?;
        (s, p)
    } else {
        let dir = args.checkpoints.as_deref().context("give --checkpoints, --run or --scripted")?;
        let s = match scenario_from_args()? {
            Some(s) => s,
            None => eval::scenario_of_checkpoint(&eval::checkpoint_dir(dir))?,
        };
        (s, eval::load_policies(dir)?)
    };
    let summary = evaluate(&mut policies, &scenario, args.episodes, args.seed)?;
    print!("{}", eval::summary_table(&summary));
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let summary = match &args.fixture {
        Some(path) => verify::verify_fixture(path, args.tolerance)?,
        None => verify::verify_random(args.instances, args.seed, args.tolerance)?,
    };
    println!("{}", summary.report());
    if summary.passed() {
        println!("PASS (tolerance {:e})", args.tolerance);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL (tolerance {:e})", args.tolerance);
        Ok(ExitCode::FAILURE)
    }
}

pub fn cmd_export(args: &ExportArgs) -> Result<ExitCode> {
    let runs = export::load_runs(&args.runs)?;
    let points = match args.kind {
        ExportKind::Curves => export::curves(&runs),
        ExportKind::Delay => export::delay_sweep(&runs, args.last),
        ExportKind::Outcomes => export::outcome_rates(&runs, args.last),
    };
    let csv = export::to_csv(&points);
    match &args.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Verify(a) => cmd_verify(a),
        Command::ExportPlots(a) => cmd_export(a),
    }
}
