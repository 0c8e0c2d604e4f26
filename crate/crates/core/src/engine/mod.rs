//! The turn loop: read, update, plan, write. Also self-play and transcripts.

mod agent;
mod policy;
mod selfplay;

pub use crate::par::ExecMode;
pub use agent::{AgentAction, AgentConfig, AgentError, Candidate, SpcAgent, TurnLog, DEFAULT_TURN_CAP};
pub use policy::{make_player, Player, Policy, RandomSelector, ScriptLine, ScriptedPlayer};
pub use selfplay::{
    play_game, read_transcripts, run_selfplay, summarize, write_transcripts, GameResult, GameTranscript,
    SelfPlayConfig, Side, Summary, Utterance,
};
