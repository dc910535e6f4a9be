use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use escalation_core::agents::ProviderConfig;
use escalation_core::analytics::{AnalyticsReport, Metric, ReportFormat};
use escalation_core::engine::GameSetup;
use escalation_core::scenarios::{canonical_scenarios, resolve_scenario, ScenarioSpec};
use escalation_core::tournament::{agent_seed, run_tournament, schedule, TournamentPlan, TournamentSummary};
use escalation_core::transcript::{JsonlWriter, NullSink, Transcript};
use escalation_core::{run_game, AgentSpec, EngineConfig, Ladder, Side};

/// Two-party nuclear crisis escalation simulator.
#[derive(Parser)]
#[command(name = "escalation", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play a single game and write its transcript.
    Run(RunArgs),
    /// Run every game of a tournament plan.
    Tournament(TournamentArgs),
    /// Verify a transcript's content hash and re-derive its outcomes.
    Replay {
        /// Transcript file (.jsonl).
        transcript: PathBuf,
    },
    /// Canonical scenarios.
    Scenarios {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Compute metrics over a directory of transcripts.
    Analyze(AnalyzeArgs),
    /// Check a configuration file without running anything.
    ValidateConfig {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = ConfigKind::Engine)]
        kind: ConfigKind,
        /// Accept a ladder whose values differ from the canonical ones.
        #[arg(long)]
        custom_ladder: bool,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Print scenario ids, deadlines and titles.
    List,
    /// Print one scenario as JSON.
    Show { id: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfigKind {
    Engine,
    Plan,
    Provider,
    Scenario,
    Ladder,
}

#[derive(Args)]
struct RunArgs {
    /// Agent spec for side A, e.g. `constant:100`, `random:7`, `llm:provider.json`.
    #[arg(long)]
    agent_a: AgentSpec,
    #[arg(long)]
    agent_b: AgentSpec,
    /// Canonical scenario id or path to a scenario file.
    #[arg(long, default_value = "v7_alliance")]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Engine config file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transcript path, or a directory to write `<game_id>.jsonl` into.
    /// Without it the transcript goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    starting_balance: Option<f64>,
    /// Ladder override file.
    #[arg(long)]
    ladder: Option<PathBuf>,
    #[arg(long)]
    custom_ladder: bool,
    #[arg(long)]
    game_id: Option<String>,
}

#[derive(Args)]
struct TournamentArgs {
    /// Tournament plan (JSON).
    plan: PathBuf,
    /// Overrides the plan's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallel: Option<usize>,
    /// Overrides the plan's engine config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the plan's scenario list; repeatable.
    #[arg(long)]
    scenario: Vec<String>,
    /// Print the schedule and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory of transcripts.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    per_model: bool,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    /// Metric name, comma-separated list, or `all`.
    #[arg(long, default_value = "all")]
    metric: String,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_ladder(path: Option<&Path>, custom: bool) -> Result<Arc<Ladder>> {
    match path {
        None => Ok(Ladder::canonical()),
        Some(p) => Ok(Arc::new(
            Ladder::from_file(p, custom).with_context(|| format!("ladder {}", p.display()))?,
        )),
    }
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        None => Ok(EngineConfig::default()),
        Some(p) => EngineConfig::from_file(p).with_context(|| format!("engine config {}", p.display())),
    }
}

fn describe(t: &Transcript) -> String {
    let Some(s) = &t.summary else {
        return format!("{}: no summary", t.header.game_id);
    };
    let outcome = match (&s.aborted, s.victory) {
        (Some(a), _) => format!("aborted on turn {}: {}", a.turn, a.message),
        (None, Some(v)) => {
            let winner = v
                .winner
                .map_or("no winner".to_string(), |w| format!("{} wins", s.agents.get(w)));
            format!("{:?} after {} turns, {winner}", v.kind, s.turns_played)
        }
        (None, None) => "unfinished".to_string(),
    };
    format!(
        "{}: {outcome}; final balance {:+.3}; accidents {}",
        s.game_id, s.final_balance, s.accidents
    )
}

fn run(args: RunArgs) -> Result<()> {
    let ladder = load_ladder(args.ladder.as_deref(), args.custom_ladder)?;
    let config = load_config(args.config.as_deref())?;
    config.validate()?;
    let mut scenario = resolve_scenario(&args.scenario)?;
    if let Some(b) = args.starting_balance {
        scenario = scenario.with_starting_balance(b);
    }
    let game_id = args.game_id.unwrap_or_else(|| {
        format!(
            "{}-{}-vs-{}-s{}",
            scenario.id,
            args.agent_a.label(),
            args.agent_b.label(),
            args.seed
        )
    });
    let build = |spec: &AgentSpec, side| spec.build(ladder.clone(), agent_seed(args.seed, side), config.max_retries);
    let mut a = build(&args.agent_a, Side::A).context("side A")?;
    let mut b = build(&args.agent_b, Side::B).context("side B")?;
    let setup = GameSetup::new(game_id.clone(), scenario, args.seed)
        .with_config(config)
        .with_ladder(ladder);

    let transcript = match &args.out {
        Some(out) => {
            let path = if out.is_dir() {
                out.join(format!("{game_id}.jsonl"))
            } else {
                out.clone()
            };
            let mut sink = JsonlWriter::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let t = run_game(a.as_mut(), b.as_mut(), &setup, &mut sink)?;
            eprintln!("wrote {}", path.display());
            t
        }
        None => {
            let t = run_game(a.as_mut(), b.as_mut(), &setup, &mut NullSink)?;
            std::io::stdout().write_all(t.to_jsonl().as_bytes())?;
            t
        }
    };
    eprintln!("{}", describe(&transcript));
    Ok(())
}

fn print_standings(summary: &TournamentSummary) {
    println!(
        "{:<32} {:>5} {:>5} {:>6} {:>5} {:>9} {:>7}",
        "agent", "games", "wins", "losses", "draws", "self_play", "aborted"
    );
    for (agent, s) in &summary.standings {
        println!(
            "{agent:<32} {:>5} {:>5} {:>6} {:>5} {:>9} {:>7}",
            s.games, s.wins, s.losses, s.draws, s.self_play, s.aborted
        );
    }
    let kinds: Vec<String> = summary.outcome_kinds.iter().map(|(k, n)| format!("{k} {n}")).collect();
    println!("outcomes: {}", kinds.join(", "));
}

fn tournament(args: TournamentArgs) -> Result<()> {
    let mut plan = TournamentPlan::from_file(&args.plan)?;
    if let Some(seed) = args.seed {
        plan.master_seed = seed;
    }
    if let Some(out) = args.out {
        plan.out = out;
    }
    if let Some(n) = args.parallel {
        plan.parallel = n;
    }
    if let Some(c) = args.config {
        plan.config = load_config(Some(&c))?;
    }
    if !args.scenario.is_empty() {
        plan.scenarios = args.scenario;
    }
    if args.dry_run {
        for g in schedule(&plan)? {
            println!("{} seed={}", g.game_id, g.seed);
        }
        return Ok(());
    }
    let summary = run_tournament(&plan)?;
    print_standings(&summary);
    eprintln!("{} games written to {}", summary.games.len(), plan.out.display());
    Ok(())
}

/// Returns false when the transcript fails verification.
fn replay(path: &Path) -> Result<bool> {
    let t = Transcript::read_from(path).with_context(|| format!("reading {}", path.display()))?;
    let mut ok = true;
    match t.verify_hash() {
        Ok(()) => println!("content hash: ok"),
        Err(e) => {
            println!("content hash: FAILED ({e})");
            ok = false;
        }
    }
    let report = t.replay()?;
    if report.is_faithful() {
        println!("replay: ok ({} turns re-derived)", report.turns_checked);
    } else {
        ok = false;
        println!("replay: FAILED ({} mismatches)", report.mismatches.len());
        for m in &report.mismatches {
            println!("  {m}");
        }
    }
    println!("{}", describe(&t));
    Ok(ok)
}

fn list_scenarios() {
    println!("{:<30} {:<9} title", "id", "deadline");
    for s in canonical_scenarios() {
        let deadline = s.time_limit.map_or("none".to_string(), |t| format!("{t} turns"));
        println!("{:<30} {:<9} {}", s.id, deadline, s.title);
    }
}

fn show_scenario(id: &str) -> Result<()> {
    let s = resolve_scenario(id)?;
    println!("{}", serde_json::to_string_pretty(&s)?);
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let metrics = Metric::parse_selection(&args.metric)?;
    let report = AnalyticsReport::from_dir(&args.input)?;
    let text = report.render(&metrics, args.per_model, args.format);
    match args.out {
        Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn validate(path: &Path, kind: ConfigKind, custom_ladder: bool) -> Result<()> {
    let what = match kind {
        ConfigKind::Engine => {
            EngineConfig::from_file(path)?.validate()?;
            "engine config".to_string()
        }
        ConfigKind::Plan => {
            let plan = TournamentPlan::from_file(path)?;
            plan.config.validate()?;
            let ladder = plan.load_ladder()?;
            for spec in &plan.agents {
                spec.check(&ladder).with_context(|| format!("agent {spec}"))?;
            }
            format!("tournament plan with {} games", schedule(&plan)?.len())
        }
        ConfigKind::Provider => {
            let p = ProviderConfig::from_file(path)?;
            format!("provider config for model {}", p.model)
        }
        ConfigKind::Scenario => {
            let s = ScenarioSpec::from_file(path)?;
            format!("scenario {}", s.id)
        }
        ConfigKind::Ladder => {
            let l = Ladder::from_file(path, custom_ladder)?;
            format!("ladder with {} rungs", l.len())
        }
    };
    println!("{}: valid {what}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("ESCALATION_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Tournament(args) => tournament(args),
        Command::Replay { transcript } => match replay(&transcript) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
        Command::Scenarios {
            command: ScenarioCommand::List,
        } => {
            list_scenarios();
            Ok(())
        }
        Command::Scenarios {
            command: ScenarioCommand::Show { id },
        } => show_scenario(&id),
        Command::Analyze(args) => analyze(args),
        Command::ValidateConfig {
            path,
            kind,
            custom_ladder,
        } => validate(&path, kind, custom_ladder),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
