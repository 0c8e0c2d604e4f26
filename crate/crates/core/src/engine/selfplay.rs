use std::io::{self, BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::context::{DotId, GameContext};
use crate::par::{self, ExecMode};
use crate::reader::Reader;

use super::agent::{AgentAction, AgentConfig, TurnLog};
use super::policy::{make_player, Player, Policy, ScriptLine};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfPlayConfig {
    pub agent: AgentConfig,
    /// Utterances after which both players are made to select.
    pub turn_cap: usize,
    pub exec: ExecMode,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        let agent = AgentConfig::default();
        SelfPlayConfig { agent, turn_cap: agent.turn_cap, exec: ExecMode::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
}

impl Side {
    fn index(self) -> usize {
        self as usize
    }

    fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    /// Logical timestamp within the game.
    pub t: usize,
    pub side: Side,
    pub text: Option<String>,
    pub selection: Option<DotId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub game: usize,
    pub seed: u64,
    pub k: usize,
    pub opener: Side,
    pub success: bool,
    pub selection_a: Option<DotId>,
    pub selection_b: Option<DotId>,
    /// Utterances with text, selections excluded.
    pub turns: usize,
    pub words_a: Vec<usize>,
    pub words_b: Vec<usize>,
    pub error: Option<String>,
}

/// Everything recorded about one game. Player A sees the context's agent
/// scene, player B the partner scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub game: usize,
    pub seed: u64,
    pub k: usize,
    pub shared: Vec<DotId>,
    pub utterances: Vec<Utterance>,
    pub log_a: Vec<TurnLog>,
    pub log_b: Vec<TurnLog>,
    pub result: GameResult,
}

impl GameTranscript {
    /// The lines one side said, for scripted replay.
    pub fn script(&self, side: Side) -> Vec<ScriptLine> {
        self.utterances
            .iter()
            .filter(|u| u.side == side)
            .map(|u| ScriptLine { text: u.text.clone(), select: u.selection })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub games: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_turns: f64,
    pub mean_words: f64,
    pub median_words: f64,
    pub errors: usize,
}

pub fn summarize(results: &[GameResult]) -> Summary {
    let games = results.len();
    let successes = results.iter().filter(|r| r.success).count();
    let mut words: Vec<usize> = results.iter().flat_map(|r| r.words_a.iter().chain(&r.words_b).copied()).collect();
    words.sort_unstable();
    let mean = |total: f64, n: usize| if n == 0 { 0.0 } else { total / n as f64 };
    let median_words = match words.len() {
        0 => 0.0,
        n if n % 2 == 1 => words[n / 2] as f64,
        n => (words[n / 2 - 1] + words[n / 2]) as f64 / 2.0,
    };
    Summary {
        games,
        successes,
        success_rate: mean(successes as f64, games),
        mean_turns: mean(results.iter().map(|r| r.turns as f64).sum(), games),
        mean_words: mean(words.iter().sum::<usize>() as f64, words.len()),
        median_words,
        errors: results.iter().filter(|r| r.error.is_some()).count(),
    }
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Plays one game to completion. Errors end the game with forced
/// selections and are recorded in the result.
pub fn play_game(
    game: usize,
    ctx: &GameContext,
    policy_a: &Policy,
    policy_b: &Policy,
    cfg: &SelfPlayConfig,
    reader: Arc<dyn Reader>,
) -> GameTranscript {
    let opener = if game.is_multiple_of(2) { Side::A } else { Side::B };
    let mut agent = cfg.agent;
    agent.turn_cap = cfg.turn_cap;
    let seed = ctx.seed.wrapping_mul(2);
    let made = make_player(policy_a, &ctx.agent_scene, agent, reader.clone(), seed)
        .and_then(|a| Ok([a, make_player(policy_b, &ctx.partner_scene, agent, reader, seed + 1)?]));
    let mut utterances = Vec::new();
    let mut error = None;
    let mut players: [Box<dyn Player>; 2] = match made {
        Ok(p) => p,
        Err(e) => {
            let result = finish(game, ctx, opener, [None, None], &utterances, Some(e.to_string()));
            return GameTranscript {
                game,
                seed: ctx.seed,
                k: ctx.k,
                shared: ctx.shared.clone(),
                utterances,
                log_a: Vec::new(),
                log_b: Vec::new(),
                result,
            };
        }
    };
    let record = |side: Side, action: &AgentAction, utterances: &mut Vec<Utterance>| {
        let (text, selection) = match action {
            AgentAction::Say(t) => (Some(t.clone()), None),
            AgentAction::Select { text, dot } => (text.clone(), Some(*dot)),
        };
        utterances.push(Utterance { t: utterances.len(), side, text, selection });
    };
    let spoken = |u: &[Utterance]| u.iter().filter(|u| u.text.is_some()).count();
    let mut side = opener;
    let mut action = players[side.index()].open();
    loop {
        let a = match action {
            Ok(a) => a,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        record(side, &a, &mut utterances);
        match a {
            AgentAction::Say(text) => {
                if spoken(&utterances) >= cfg.turn_cap {
                    break;
                }
                side = side.other();
                action = players[side.index()].respond(&text);
            }
            AgentAction::Select { text, .. } => {
                let other = side.other();
                if players[other.index()].selection().is_none() {
                    let reply = match text {
                        Some(t) => players[other.index()].respond(&t),
                        None => Ok(players[other.index()].force_select()),
                    };
                    match reply {
                        Ok(r @ AgentAction::Select { .. }) => record(other, &r, &mut utterances),
                        Ok(AgentAction::Say(_)) => {}
                        Err(e) => error = Some(e.to_string()),
                    }
                }
                break;
            }
        }
    }
    for s in [Side::A, Side::B] {
        if players[s.index()].selection().is_none() {
            let a = players[s.index()].force_select();
            record(s, &a, &mut utterances);
        }
    }
    let selections = [players[0].selection(), players[1].selection()];
    let result = finish(game, ctx, opener, selections, &utterances, error);
    GameTranscript {
        game,
        seed: ctx.seed,
        k: ctx.k,
        shared: ctx.shared.clone(),
        utterances,
        log_a: players[0].log().to_vec(),
        log_b: players[1].log().to_vec(),
        result,
    }
}

fn finish(
    game: usize,
    ctx: &GameContext,
    opener: Side,
    sel: [Option<DotId>; 2],
    utterances: &[Utterance],
    error: Option<String>,
) -> GameResult {
    let words = |side: Side| -> Vec<usize> {
        utterances.iter().filter(|u| u.side == side).filter_map(|u| u.text.as_deref()).map(word_count).collect()
    };
    let success = matches!(sel, [Some(a), Some(b)] if a == b && ctx.is_shared(a));
    GameResult {
        game,
        seed: ctx.seed,
        k: ctx.k,
        opener,
        success,
        selection_a: sel[0],
        selection_b: sel[1],
        turns: utterances.iter().filter(|u| u.text.is_some()).count(),
        words_a: words(Side::A),
        words_b: words(Side::B),
        error,
    }
}

/// Plays every context once; game `i` is opened by A when `i` is even.
pub fn run_selfplay(
    contexts: &[GameContext],
    policy_a: &Policy,
    policy_b: &Policy,
    cfg: &SelfPlayConfig,
    reader: Arc<dyn Reader>,
) -> (Vec<GameTranscript>, Summary) {
    let mut inner = *cfg;
    if cfg.exec == ExecMode::Sequential {
        inner.agent.planner.exec = ExecMode::Sequential;
    }
    let indexed: Vec<(usize, &GameContext)> = contexts.iter().enumerate().collect();
    let transcripts =
        par::map(cfg.exec, &indexed, |(i, ctx)| play_game(*i, ctx, policy_a, policy_b, &inner, reader.clone()));
    let results: Vec<GameResult> = transcripts.iter().map(|t| t.result.clone()).collect();
    (transcripts, summarize(&results))
}

pub fn write_transcripts<W: Write>(out: &mut W, transcripts: &[GameTranscript]) -> io::Result<()> {
    for t in transcripts {
        serde_json::to_writer(&mut *out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transcripts<R: BufRead>(input: R) -> io::Result<Vec<GameTranscript>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(io::Error::other))
        .collect()
}
