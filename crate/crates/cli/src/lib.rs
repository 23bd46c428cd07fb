//! The `mixtalk` command line: run tournaments, rank agents, distill and
//! replay verification playbooks, and audit stored traces.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mixtalk_core::engine::{payoff_mismatches, rescore_trace};
use mixtalk_core::meta::{oracle_policy, DEFAULT_ALPHA, DEFAULT_POP};
use mixtalk_core::metrics::receiver_metrics;
use mixtalk_core::report::{build_report, ReportInputs};
use mixtalk_core::topd::{distill_receiver_playbooks, load_playbooks, playbooks_to_json, replay_traces};
use mixtalk_core::trace::{read_trace_dir, read_trace_file, trace_files, JsonlTraceStore, TraceSink};
use mixtalk_core::{
    build_schedule, load_config_dir, load_story_dir, render_public_spec, run_tournament, Environment, EpisodeTrace,
    GameConfig, PayoffTensor, PublicSpec, Regime, Role,
};

pub mod agents;
pub mod http;
pub mod manifest;

use agents::Registry;
use manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or values; exit status 2.
    Usage(String),
    /// Anything that went wrong while doing the work; exit status 1.
    Runtime(anyhow::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<mixtalk_core::Error> for CliError {
    fn from(e: mixtalk_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CmdResult = Result<i32, CliError>;

#[derive(Parser, Debug)]
#[command(name = "mixtalk", version, about = "Tournaments for mixed-credibility strategic communication")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play every sender against every receiver on a shared schedule.
    Run(RunArgs),
    /// Leaderboards, behavior profiles and meta-game analysis of stored traces.
    #[command(alias = "report")]
    Rank(RankArgs),
    /// Build per-environment verification playbooks from the oracle receiver.
    Distill(DistillArgs),
    /// Replay stored sender messages against a (playbook-guided) receiver.
    Replay(ReplayArgs),
    /// Recompute every stored payoff and compare.
    Audit(AuditArgs),
}

#[derive(Args, Debug)]
struct EnvArgs {
    /// Directory of variant configs.
    #[arg(long, default_value = "configs/variables")]
    config_dir: PathBuf,
    /// Directory of story layers.
    #[arg(long, default_value = "configs/stories")]
    stories: PathBuf,
    /// Only these env ids (comma separated).
    #[arg(long, value_delimiter = ',')]
    envs: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Sender specs, e.g. `honest,fabricate(2)` or names from --agents.
    #[arg(long, value_delimiter = ',', required = true)]
    senders: Vec<String>,
    /// Receiver specs, e.g. `trusting,audit-greedy`.
    #[arg(long, value_delimiter = ',', required = true)]
    receivers: Vec<String>,
    /// Episodes per pairing; a multiple of the number of variants.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = RegimeArg::Mixtalk)]
    regime: RegimeArg,
    /// JSON file mapping agent names to remote endpoints.
    #[arg(long)]
    agents: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_POP)]
    pop: usize,
    #[arg(long, default_value = "report")]
    out: PathBuf,
    /// Cogency judge: `none`, `heuristic`, a constant, or a name from --agents.
    #[arg(long, default_value = "heuristic")]
    judge: String,
    #[arg(long)]
    agents: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DistillArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, value_enum, default_value_t = RoleArg::Receiver)]
    role: RoleArg,
    /// Receiver the playbook is meant for.
    #[arg(long)]
    agent: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    keep: f64,
    #[arg(long, default_value = "playbook.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    traces: PathBuf,
    /// Receiver spec to replay.
    #[arg(long)]
    receiver: String,
    /// Playbook file; without it the receiver plays unguided.
    #[arg(long)]
    playbook: Option<PathBuf>,
    /// Only replay episodes originally played by this receiver.
    #[arg(long)]
    source_receiver: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    agents: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long, default_value = "configs/variables")]
    config_dir: PathBuf,
    /// Trace file or directory.
    #[arg(long)]
    traces: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RegimeArg {
    Mixtalk,
    Cheaptalk,
    Disclosure,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Regime {
        match r {
            RegimeArg::Mixtalk => Regime::Mixtalk,
            RegimeArg::Cheaptalk => Regime::Cheaptalk,
            RegimeArg::Disclosure => Regime::Disclosure,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RoleArg {
    Sender,
    Receiver,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let command_line: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a, command_line),
        Command::Rank(a) => cmd_rank(a),
        Command::Distill(a) => cmd_distill(a),
        Command::Replay(a) => cmd_replay(a, command_line),
        Command::Audit(a) => cmd_audit(a),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}\n\nFor more information, try '--help'.");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_configs(dir: &Path, only: &[String]) -> Result<Vec<GameConfig>, CliError> {
    let configs = load_config_dir(dir).with_context(|| format!("loading configs from {}", dir.display()))?;
    for id in only {
        if !configs.iter().any(|c| &c.env_id == id) {
            return Err(CliError::Usage(format!("unknown env `{id}`")));
        }
    }
    Ok(configs
        .into_iter()
        .filter(|c| only.is_empty() || only.contains(&c.env_id))
        .collect())
}

fn load_envs(args: &EnvArgs, regimes: &[Regime]) -> Result<Vec<Environment>, CliError> {
    let configs = load_configs(&args.config_dir, &args.envs)?;
    let stories = load_story_dir(&args.stories).with_context(|| format!("loading stories from {}", args.stories.display()))?;
    let mut envs = Vec::new();
    for &regime in regimes {
        for c in &configs {
            for s in stories.iter().filter(|s| s.fits(c)) {
                envs.push(Environment::new(c.with_regime(regime), s.clone())?);
            }
        }
    }
    if envs.is_empty() {
        return Err(CliError::Runtime(anyhow!("no story covers any selected config")));
    }
    Ok(envs)
}

/// A trace file, a directory of trace files, or a run directory holding `traces/`.
fn load_traces(path: &Path) -> Result<Vec<EpisodeTrace>, CliError> {
    let traces = if path.is_file() {
        read_trace_file(path)?
    } else if path.join("traces").is_dir() {
        read_trace_dir(path.join("traces"))?
    } else if path.is_dir() {
        read_trace_dir(path)?
    } else {
        return Err(CliError::Runtime(anyhow!("no such trace file or directory: {}", path.display())));
    };
    if traces.is_empty() {
        return Err(CliError::Runtime(anyhow!("no traces found in {}", path.display())));
    }
    Ok(traces)
}

fn fresh_store(dir: &Path) -> Result<JsonlTraceStore, CliError> {
    if dir.is_dir() && !trace_files(dir)?.is_empty() {
        return Err(CliError::Runtime(anyhow!("{} already holds traces", dir.display())));
    }
    Ok(JsonlTraceStore::create(dir)?)
}

fn cmd_run(a: RunArgs, command_line: Vec<String>) -> CmdResult {
    let registry = Registry::load(a.agents.as_deref())?;
    let senders = registry.agents(&a.senders, Role::Sender)?;
    let receivers = registry.agents(&a.receivers, Role::Receiver)?;
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let regime = Regime::from(a.regime);
    let envs = load_envs(&a.env, &[regime])?;
    let variants: Vec<_> = envs.iter().map(Environment::variant).collect();
    let episodes = a.episodes.unwrap_or(variants.len());
    let schedule = build_schedule(&variants, episodes, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut manifest = RunManifest::start(command_line);
    let trace_dir = a.out.join("traces");
    let store = fresh_store(&trace_dir)?;
    let result = run_tournament(&envs, &schedule, &senders, &receivers, &store, a.jobs)?;
    let written = senders.len() * receivers.len() * schedule.entries.len() - result.failures.len();

    manifest.master_seed = Some(a.seed);
    manifest.regime = Some(regime.as_str().to_string());
    manifest.episodes_per_pair = Some(episodes);
    manifest.jobs = a.jobs;
    manifest.record_envs(&envs);
    manifest.agents = senders.iter().chain(&receivers).map(|x| x.reference().clone()).collect();
    manifest.episodes_written = written;
    manifest.failures = result.failures.clone();
    manifest.outputs = trace_files(&trace_dir)?.iter().map(|p| p.display().to_string()).collect();
    let manifest_path = a.out.join("manifest.json");
    manifest.finish_and_write(&manifest_path)?;

    println!(
        "{written} episodes over {} pairings written to {}",
        senders.len() * receivers.len(),
        trace_dir.display()
    );
    if !result.failures.is_empty() {
        println!("{} episodes failed; see {}", result.failures.len(), manifest_path.display());
    }
    Ok(0)
}

fn specs_for(
    traces: &[EpisodeTrace],
    configs: &BTreeMap<String, GameConfig>,
    stories_dir: &Path,
) -> Result<BTreeMap<(String, String), PublicSpec>, CliError> {
    let stories = load_story_dir(stories_dir).with_context(|| format!("loading stories from {}", stories_dir.display()))?;
    let mut specs = BTreeMap::new();
    for t in traces {
        let key = (t.env_id.clone(), t.story_schema_id.clone());
        if specs.contains_key(&key) {
            continue;
        }
        let (Some(cfg), Some(story)) = (configs.get(&t.env_id), stories.iter().find(|s| s.story_id == t.story_schema_id))
        else {
            continue;
        };
        specs.insert(key, render_public_spec(&cfg.with_regime(t.regime), story)?);
    }
    Ok(specs)
}

fn config_map(configs: Vec<GameConfig>) -> BTreeMap<String, GameConfig> {
    configs.into_iter().map(|c| (c.env_id.clone(), c)).collect()
}

fn cmd_rank(a: RankArgs) -> CmdResult {
    let registry = Registry::load(a.agents.as_deref())?;
    let judge = registry.judge(&a.judge)?;
    if !(a.alpha > 0.0) || a.pop < 2 {
        return Err(CliError::Usage("--alpha must be positive and --pop at least 2".into()));
    }
    let traces = load_traces(&a.traces)?;
    let configs = config_map(load_configs(&a.env.config_dir, &a.env.envs)?);
    let specs = specs_for(&traces, &configs, &a.env.stories)?;
    let report = build_report(&ReportInputs {
        traces: &traces,
        configs: &configs,
        specs: &specs,
        judge: judge.as_deref(),
        alpha: a.alpha,
        pop: a.pop,
    })?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (name, body) in report.files() {
        let path = a.out.join(&name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", report.summary());
    Ok(0)
}

fn cmd_distill(a: DistillArgs) -> CmdResult {
    if matches!(a.role, RoleArg::Sender) {
        return Err(CliError::Usage("only receiver playbooks can be distilled".into()));
    }
    if !(a.keep > 0.0 && a.keep <= 1.0) {
        return Err(CliError::Usage("--keep must be in (0, 1]".into()));
    }
    let traces = load_traces(&a.traces)?;
    let configs = load_configs(&a.env.config_dir, &a.env.envs)?;
    let tensor = PayoffTensor::from_traces(&traces);
    let oracle = oracle_policy(&tensor, Role::Receiver);
    let mut playbooks = distill_receiver_playbooks(&traces, &oracle, &configs, a.keep)?;
    for pb in playbooks.values_mut() {
        pb.provenance.target_agent = a.agent.clone();
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&a.out, playbooks_to_json(&playbooks)).with_context(|| format!("writing {}", a.out.display()))?;
    for pb in playbooks.values() {
        println!(
            "{}: cap {} (mean {:.2} calls), fallback {:.2}, from {} oracle episodes",
            pb.env_id, pb.budget_cap, pb.mean_budget, pb.fallback_rate, pb.provenance.episodes
        );
    }
    println!("playbooks written to {}", a.out.display());
    Ok(0)
}

/// One stored episode per (sender, episode): the original sender messages.
fn source_episodes(mut traces: Vec<EpisodeTrace>, receiver: Option<&str>) -> Vec<EpisodeTrace> {
    if let Some(r) = receiver {
        traces.retain(|t| t.model_receiver == r);
    }
    traces.sort_by(|x, y| {
        (&x.model_sender, &x.episode_id, &x.model_receiver).cmp(&(&y.model_sender, &y.episode_id, &y.model_receiver))
    });
    traces.dedup_by(|x, y| x.model_sender == y.model_sender && x.episode_id == y.episode_id);
    traces
}

fn cmd_replay(a: ReplayArgs, command_line: Vec<String>) -> CmdResult {
    let registry = Registry::load(a.agents.as_deref())?;
    let receiver = registry.agent(&a.receiver, Role::Receiver)?;
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let playbooks = match &a.playbook {
        Some(p) => load_playbooks(p).with_context(|| format!("loading playbook {}", p.display()))?,
        None => BTreeMap::new(),
    };
    let episodes = source_episodes(load_traces(&a.traces)?, a.source_receiver.as_deref());
    if episodes.is_empty() {
        return Err(CliError::Runtime(anyhow!("no stored episodes match the replay filter")));
    }
    let mut regimes: Vec<Regime> = episodes.iter().map(|t| t.regime).collect();
    regimes.sort();
    regimes.dedup();
    let envs = load_envs(&a.env, &regimes)?;

    let mut manifest = RunManifest::start(command_line);
    let replayed = replay_traces(&episodes, &envs, &receiver, &playbooks, a.jobs)?;
    let trace_dir = a.out.join("traces");
    let store = fresh_store(&trace_dir)?;
    for t in &replayed {
        store.write(t)?;
    }
    manifest.jobs = a.jobs;
    manifest.record_envs(&envs);
    manifest.agents = vec![receiver.reference().clone()];
    manifest.playbook = a.playbook.as_ref().map(|p| p.display().to_string());
    manifest.episodes_written = replayed.len();
    manifest.outputs = trace_files(&trace_dir)?.iter().map(|p| p.display().to_string()).collect();
    manifest.finish_and_write(&a.out.join("manifest.json"))?;

    let n = replayed.len() as f64;
    let cost = replayed.iter().flat_map(|t| &t.tool_transcript).fold(0.0, |acc, c| acc + c.cost) / n;
    let judgment = replayed
        .iter()
        .map(|t| {
            let env = envs.iter().find(|e| e.env_id() == t.env_id).expect("replayed on a loaded env");
            receiver_metrics(t, &env.config).judgment
        })
        .sum::<f64>()
        / n;
    let score = replayed.iter().map(|t| t.payoffs.score_r).sum::<f64>() / n;
    println!(
        "replayed {} episodes: mean tool cost {cost:.4}, mean judgment {judgment:.4}, mean Score_R {score:.4}",
        replayed.len()
    );
    Ok(0)
}

fn cmd_audit(a: AuditArgs) -> CmdResult {
    let traces = load_traces(&a.traces)?;
    let configs = config_map(load_configs(&a.config_dir, &[])?);
    let mut bad = 0;
    for t in &traces {
        let Some(cfg) = configs.get(&t.env_id) else {
            println!("MISMATCH {}: unknown env `{}`", t.episode_id, t.env_id);
            bad += 1;
            continue;
        };
        let fields = payoff_mismatches(&t.payoffs, &rescore_trace(t, cfg), 1e-9);
        if !fields.is_empty() {
            println!(
                "MISMATCH {} ({} vs {}): {}",
                t.episode_id,
                t.model_sender,
                t.model_receiver,
                fields.join(", ")
            );
            bad += 1;
        }
    }
    if bad > 0 {
        println!("{bad} of {} traces do not match their recomputed payoffs", traces.len());
        return Ok(1);
    }
    println!("{} traces audited; all payoffs match", traces.len());
    Ok(0)
}
