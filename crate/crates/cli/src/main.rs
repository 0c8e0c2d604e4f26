//! `spc`: corpus generation, self-play, reading benchmark, terminal play and
//! the HTTP service.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod play;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use spc_core::context::{generate_context, load_corpus, save_context, ContextConfig, GameContext};
use spc_core::engine::{run_selfplay, write_transcripts, AgentConfig, ExecMode, Policy, SelfPlayConfig};
use spc_core::readbench;
use spc_core::reader::{CachedTransport, ExternalConfig, ExternalReader, GrammarReader, Reader};
use spc_service::{AppState, ServiceConfig};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "spc", version, about = "Grounded dialogue agent for the dot reference game")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a context corpus (one JSON record per line).
    Gen(GenArgs),
    /// Run a self-play batch and print its summary.
    Selfplay(SelfplayArgs),
    /// Write plans, read them back, and report exact recovery.
    Readbench(ReadbenchArgs),
    /// Play against the agent in the terminal.
    Play(PlayArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
struct BoardArgs {
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shared dots per board.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Dots per view.
    #[arg(long, default_value_t = 7)]
    n: usize,
}

impl BoardArgs {
    fn geometry(&self) -> ContextConfig {
        ContextConfig { n_per_view: self.n, ..ContextConfig::default() }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Grammar,
    External,
}

#[derive(Args, Clone)]
struct AgentArgs {
    /// Marginal a dot needs before the agent selects it.
    #[arg(long, default_value_t = 0.8)]
    theta: f64,
    /// Answer noise of the partner model.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Compactness rate used when reading.
    #[arg(long, default_value_t = 5.0)]
    beta: f64,
    #[arg(long, value_enum, default_value_t = Backend::Grammar)]
    backend: Backend,
    /// Response cache for the external backend.
    #[arg(long, default_value = ".spc-cache")]
    cache: PathBuf,
}

impl AgentArgs {
    fn config(&self) -> CliResult<AgentConfig> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(CliError::Usage(format!("--theta must be in (0, 1], got {}", self.theta)));
        }
        if !(0.0..0.5).contains(&self.epsilon) {
            return Err(CliError::Usage(format!("--epsilon must be in [0, 0.5), got {}", self.epsilon)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(CliError::Usage(format!("--beta must be a finite non-negative number, got {}", self.beta)));
        }
        let mut cfg = AgentConfig { beta: self.beta, ..AgentConfig::default() };
        cfg.planner.theta = self.theta;
        cfg.model.confirm_noise = self.epsilon;
        Ok(cfg)
    }

    fn reader(&self) -> Arc<dyn Reader> {
        match self.backend {
            Backend::Grammar => Arc::new(GrammarReader),
            Backend::External => external_reader(&self.cache),
        }
    }
}

#[cfg(feature = "external-http")]
fn external_reader(cache: &Path) -> Arc<dyn Reader> {
    let http = spc_core::reader::HttpTransport::from_env(Duration::from_secs(60));
    Arc::new(ExternalReader::new(CachedTransport::new(http, cache), ExternalConfig::from_env()))
}

/// Without HTTP support the external backend can only replay cached responses.
#[cfg(not(feature = "external-http"))]
fn external_reader(cache: &Path) -> Arc<dyn Reader> {
    let offline = spc_core::reader::OfflineTransport;
    Arc::new(ExternalReader::new(CachedTransport::new(offline, cache), ExternalConfig::from_env()))
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    board: BoardArgs,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 200)]
    count: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelfplayArgs {
    /// Corpus from `spc gen`; boards are generated from --seed/--k/--n otherwise.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    board: BoardArgs,
    /// Boards to generate when no corpus is given.
    #[arg(long, default_value_t = 200)]
    count: u64,
    #[arg(long, default_value = "spc", value_parser = parse_policy)]
    policy_a: Policy,
    #[arg(long, default_value = "spc", value_parser = parse_policy)]
    policy_b: Policy,
    /// Transcript file (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = spc_core::engine::DEFAULT_TURN_CAP)]
    turn_cap: usize,
    /// Play games one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    agent: AgentArgs,
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse()
}

#[derive(Args)]
struct ReadbenchArgs {
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Backend::Grammar)]
    backend: Backend,
    #[arg(long, default_value = ".spc-cache")]
    cache: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    /// Play the second view; the agent takes the first.
    Partner,
    /// Play the first view; the agent takes the second.
    Agent,
}

#[derive(Args)]
struct PlayArgs {
    #[command(flatten)]
    board: BoardArgs,
    /// Take the board from a corpus instead of generating it.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Line of the corpus to play.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, value_enum, default_value_t = Role::Partner)]
    role: Role,
    #[command(flatten)]
    agent: AgentArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long, default_value_t = 256)]
    capacity: usize,
    #[arg(long, default_value_t = 30)]
    idle_minutes: u64,
    /// Directory for transcripts of closed sessions.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    #[command(flatten)]
    agent: AgentArgs,
}

fn open_out(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_corpus(path: &Path) -> CliResult<Vec<GameContext>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    load_corpus(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn generate(board: &BoardArgs, count: u64) -> CliResult<Vec<GameContext>> {
    let geometry = board.geometry();
    (board.seed..board.seed + count)
        .map(|s| generate_context(s, board.k, &geometry).map_err(|e| CliError::Data(format!("seed {s}: {e}"))))
        .collect()
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let contexts = generate(&a.board, a.count)?;
    let geometry = a.board.geometry();
    for c in &contexts {
        c.validate(&geometry).map_err(|e| CliError::Data(format!("seed {}: {e}", c.seed)))?;
    }
    let mut out = open_out(&a.out)?;
    for c in &contexts {
        writeln!(out, "{}", save_context(c)).map_err(CliError::data)?;
    }
    out.flush().map_err(CliError::data)?;
    eprintln!("wrote {} contexts (k = {}, n = {}), all valid", contexts.len(), a.board.k, a.board.n);
    Ok(())
}

fn cmd_selfplay(a: SelfplayArgs) -> CliResult {
    let mut agent = a.agent.config()?;
    agent.turn_cap = a.turn_cap;
    let contexts = match &a.corpus {
        Some(p) => read_corpus(p)?,
        None => generate(&a.board, a.count)?,
    };
    let exec = if a.sequential { ExecMode::Sequential } else { ExecMode::Parallel };
    let cfg = SelfPlayConfig { agent, turn_cap: a.turn_cap, exec };
    let (transcripts, s) = run_selfplay(&contexts, &a.policy_a, &a.policy_b, &cfg, a.agent.reader());
    if let Some(p) = &a.out {
        let mut out = open_out(&Some(p.clone()))?;
        write_transcripts(&mut out, &transcripts).map_err(CliError::data)?;
        out.flush().map_err(CliError::data)?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&s).map_err(CliError::data)?);
    } else {
        println!("games        {}", s.games);
        println!("success      {:.1}% ({}/{})", 100.0 * s.success_rate, s.successes, s.games);
        println!("mean turns   {:.2}", s.mean_turns);
        println!("words/utt    mean {:.1}, median {:.1}", s.mean_words, s.median_words);
        println!("errors       {}", s.errors);
    }
    Ok(())
}

fn print_report(label: &str, r: &readbench::ReadReport, json: bool) -> CliResult {
    if json {
        println!(
            "{}",
            serde_json::to_string(&serde_json::json!({ "backend": label, "report": r })).map_err(CliError::data)?
        );
        return Ok(());
    }
    println!("{label}: {}/{} exact ({:.1}%), {:.1} ms", r.exact, r.samples, 100.0 * r.accuracy, r.elapsed_ms);
    println!(
        "  act {}  reference {}  polarity {}  constraints {}  unreadable {}",
        r.act, r.reference, r.polarity, r.constraints, r.errors
    );
    Ok(())
}

fn cmd_readbench(a: ReadbenchArgs) -> CliResult {
    let samples = readbench::samples(a.samples, a.seed);
    print_report("grammar", &readbench::evaluate_reader(&GrammarReader, &samples), a.json)?;
    if let Backend::External = a.backend {
        let r = readbench::evaluate_reader(external_reader(&a.cache).as_ref(), &samples);
        if r.samples > 0 && r.errors == r.samples {
            eprintln!("external backend unavailable: every read failed; grammar-only report above");
        } else {
            print_report("external", &r, a.json)?;
        }
    }
    Ok(())
}

fn cmd_play(a: PlayArgs) -> CliResult {
    let cfg = a.agent.config()?;
    let mut ctx = match &a.corpus {
        Some(p) => read_corpus(p)?
            .into_iter()
            .nth(a.index)
            .ok_or_else(|| CliError::Data(format!("{} has no record {}", p.display(), a.index)))?,
        None => generate_context(a.board.seed, a.board.k, &a.board.geometry()).map_err(CliError::data)?,
    };
    if let Role::Agent = a.role {
        std::mem::swap(&mut ctx.agent_scene, &mut ctx.partner_scene);
    }
    let stdin = io::stdin();
    play::run(stdin.lock(), io::stdout().lock(), ctx, cfg, a.agent.reader()).map_err(CliError::data)
}

fn cmd_serve(a: ServeArgs) -> CliResult {
    let cfg = ServiceConfig {
        capacity: a.capacity,
        idle_timeout: Duration::from_secs(60 * a.idle_minutes),
        transcript_dir: a.transcripts.clone(),
        agent: a.agent.config()?,
        ..ServiceConfig::default()
    }
    .with_env_token();
    if let Some(d) = &a.transcripts {
        std::fs::create_dir_all(d).map_err(|e| CliError::Data(format!("{}: {e}", d.display())))?;
    }
    let state = AppState::new(cfg, a.agent.reader());
    let rt = tokio::runtime::Runtime::new().map_err(CliError::data)?;
    rt.block_on(async {
        let listener =
            tokio::net::TcpListener::bind(a.addr).await.map_err(|e| CliError::Data(format!("{}: {e}", a.addr)))?;
        eprintln!("listening on {}", listener.local_addr().map_err(CliError::data)?);
        spc_service::serve(listener, state).await.map_err(CliError::data)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Selfplay(a) => cmd_selfplay(a),
        Cmd::Readbench(a) => cmd_readbench(a),
        Cmd::Play(a) => cmd_play(a),
        Cmd::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
