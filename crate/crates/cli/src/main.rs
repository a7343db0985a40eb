use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use soundshift_cli::{
    cmd_assets_export, cmd_batch, cmd_generate, cmd_plan, cmd_render, cmd_respond, cmd_score, cmd_validate,
    parse_conditions, PlanSource,
};
use soundshift_core::format::to_canonical_json;
use soundshift_core::model::{Condition, ScenarioId};
use soundshift_core::scoring::{ResponderProfile, DEFAULT_WINDOW};

#[derive(Parser)]
#[command(name = "soundshift", version, about = "Render and score mixed-reality listening stimuli")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Rw,
    Vr,
    Mixed,
}

impl From<ScenarioArg> for ScenarioId {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Rw => ScenarioId::RwFocused,
            ScenarioArg::Vr => ScenarioId::VrFocused,
            ScenarioArg::Mixed => ScenarioId::FullyMixed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditionArg {
    Ft,
    Nc,
    Ss,
}

impl From<ConditionArg> for Condition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::Ft => Condition::Ft,
            ConditionArg::Nc => Condition::Nc,
            ConditionArg::Ss => Condition::Ss,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario scene file.
    Generate {
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Nominal duration in seconds (defaults to the scenario's).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Render a scene under a condition preset or a plan file.
    Render {
        scene: PathBuf,
        #[arg(long, conflicts_with = "plan", required_unless_present = "plan")]
        condition: Option<ConditionArg>,
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Clip synthesis seed; defaults to the scene's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Writes <prefix>.wav, <prefix>.timeline.json and <prefix>.report.json.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Score a response log against a timeline.
    Score {
        timeline: PathBuf,
        responses: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check scene, plan, timeline, manifest or WAV files (or a directory).
    Validate { path: PathBuf },
    /// Generate and render every (seed, condition) pair.
    Batch {
        scenario: ScenarioArg,
        #[arg(long, default_value = "ft,nc,ss")]
        conditions: String,
        /// Number of seeds.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 1)]
        first_seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the plan a condition preset applies to a scene.
    Plan {
        scene: PathBuf,
        #[arg(long)]
        condition: ConditionArg,
    },
    /// Simulate a participant's key presses for a timeline.
    Respond {
        timeline: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        delay_mean: f64,
        #[arg(long, default_value_t = 0.0)]
        delay_jitter: f64,
        #[arg(long, default_value_t = 0.0)]
        miss_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Clip bank utilities.
    Assets {
        #[command(subcommand)]
        action: AssetsCommand,
    },
}

#[derive(Subcommand)]
enum AssetsCommand {
    /// Write every synthesized clip as a WAV file.
    Export {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn emit(text: &str, out: Option<PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(&path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Generate { scenario, seed, duration, out } => {
            let scene = cmd_generate(scenario.into(), seed, duration, &out)?;
            let identifiable = scene.events.len();
            println!(
                "{}: {identifiable} events over {} s -> {}",
                scene.id,
                scene.duration,
                out.display()
            );
        }
        Command::Render { scene, condition, plan, seed, out_prefix } => {
            let source = match (condition, plan) {
                (Some(c), _) => PlanSource::Condition(c.into()),
                (None, Some(p)) => PlanSource::File(p),
                (None, None) => unreachable!("clap requires one of --condition/--plan"),
            };
            let art = cmd_render(&scene, &source, seed, &out_prefix)?;
            print!("{}", to_canonical_json(&art.rendered));
        }
        Command::Score { timeline, responses, window, out } => {
            let report = cmd_score(&timeline, &responses, window)?;
            emit(&to_canonical_json(&report), out)?;
        }
        Command::Validate { path } => {
            let violations = cmd_validate(&path)?;
            print!("{}", to_canonical_json(&violations));
            if !violations.is_empty() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Batch { scenario, conditions, seeds, first_seed, out_dir } => {
            let conditions = parse_conditions(&conditions)?;
            let seeds: Vec<u64> = (first_seed..first_seed + seeds).collect();
            let manifest = cmd_batch(scenario.into(), &conditions, &seeds, &out_dir)?;
            println!(
                "{} bundles -> {}",
                manifest.bundles.len(),
                out_dir.join(soundshift_cli::MANIFEST_FILE).display()
            );
        }
        Command::Plan { scene, condition } => print!("{}", cmd_plan(&scene, condition.into())?),
        Command::Respond { timeline, delay_mean, delay_jitter, miss_prob, seed, csv, out } => {
            let profile = ResponderProfile { delay_mean, delay_jitter, miss_prob, seed };
            let log = cmd_respond(&timeline, &profile)?;
            emit(&if csv { log.to_csv() } else { log.to_json() }, out)?;
        }
        Command::Assets { action: AssetsCommand::Export { out_dir, seed } } => {
            let written = cmd_assets_export(&out_dir, seed)?;
            println!("{} clips -> {}", written.len(), out_dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
