use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{DotId, Scene};
use crate::reader::Reader;

use super::agent::{AgentAction, AgentConfig, AgentError, SpcAgent, TurnLog};

/// One scripted move: a line of text, a selection, or both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub text: Option<String>,
    pub select: Option<DotId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Spc,
    /// Selects a uniformly random own dot on its first turn.
    RandomSelector,
    /// Plays back fixed lines whatever the partner says.
    Scripted(Vec<ScriptLine>),
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spc" => Ok(Policy::Spc),
            "random" | "random_selector" => Ok(Policy::RandomSelector),
            other => Err(format!("unknown policy {other:?} (expected spc or random)")),
        }
    }
}

pub trait Player: Send {
    fn open(&mut self) -> Result<AgentAction, AgentError>;
    fn respond(&mut self, utterance: &str) -> Result<AgentAction, AgentError>;
    fn force_select(&mut self) -> AgentAction;
    fn selection(&self) -> Option<DotId>;
    fn log(&self) -> &[TurnLog];
}

impl Player for SpcAgent {
    fn open(&mut self) -> Result<AgentAction, AgentError> {
        SpcAgent::open(self)
    }

    fn respond(&mut self, utterance: &str) -> Result<AgentAction, AgentError> {
        SpcAgent::respond(self, utterance)
    }

    fn force_select(&mut self) -> AgentAction {
        SpcAgent::force_select(self)
    }

    fn selection(&self) -> Option<DotId> {
        SpcAgent::selection(self)
    }

    fn log(&self) -> &[TurnLog] {
        SpcAgent::log(self)
    }
}

pub struct RandomSelector {
    choice: DotId,
    selected: bool,
}

impl RandomSelector {
    pub fn new(scene: &Scene, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let choice = scene.dots[rng.random_range(0..scene.len())].id;
        RandomSelector { choice, selected: false }
    }

    fn pick(&mut self) -> AgentAction {
        self.selected = true;
        AgentAction::Select { text: None, dot: self.choice }
    }
}

impl Player for RandomSelector {
    fn open(&mut self) -> Result<AgentAction, AgentError> {
        Ok(self.pick())
    }

    fn respond(&mut self, _: &str) -> Result<AgentAction, AgentError> {
        if self.selected {
            return Err(AgentError::Closed);
        }
        Ok(self.pick())
    }

    fn force_select(&mut self) -> AgentAction {
        self.pick()
    }

    fn selection(&self) -> Option<DotId> {
        self.selected.then_some(self.choice)
    }

    fn log(&self) -> &[TurnLog] {
        &[]
    }
}

pub struct ScriptedPlayer {
    lines: std::vec::IntoIter<ScriptLine>,
    fallback: DotId,
    selection: Option<DotId>,
}

impl ScriptedPlayer {
    pub fn new(lines: Vec<ScriptLine>, scene: &Scene) -> Self {
        ScriptedPlayer { lines: lines.into_iter(), fallback: scene.dots[0].id, selection: None }
    }

    fn next(&mut self) -> Result<AgentAction, AgentError> {
        if self.selection.is_some() {
            return Err(AgentError::Closed);
        }
        Ok(match self.lines.next() {
            Some(ScriptLine { text, select: Some(dot) }) => {
                self.selection = Some(dot);
                AgentAction::Select { text, dot }
            }
            Some(ScriptLine { text: Some(t), select: None }) => AgentAction::Say(t),
            _ => self.force_select(),
        })
    }
}

impl Player for ScriptedPlayer {
    fn open(&mut self) -> Result<AgentAction, AgentError> {
        self.next()
    }

    fn respond(&mut self, _: &str) -> Result<AgentAction, AgentError> {
        self.next()
    }

    fn force_select(&mut self) -> AgentAction {
        if let Some(dot) = self.selection {
            return AgentAction::Select { text: None, dot };
        }
        let dot = self.lines.by_ref().find_map(|l| l.select).unwrap_or(self.fallback);
        self.selection = Some(dot);
        AgentAction::Select { text: None, dot }
    }

    fn selection(&self) -> Option<DotId> {
        self.selection
    }

    fn log(&self) -> &[TurnLog] {
        &[]
    }
}

pub fn make_player(
    policy: &Policy,
    scene: &Scene,
    cfg: AgentConfig,
    reader: Arc<dyn Reader>,
    seed: u64,
) -> Result<Box<dyn Player>, AgentError> {
    Ok(match policy {
        Policy::Spc => Box::new(SpcAgent::new(scene.clone(), cfg, reader)?),
        Policy::RandomSelector => Box::new(RandomSelector::new(scene, seed)),
        Policy::Scripted(lines) => Box::new(ScriptedPlayer::new(lines.clone(), scene)),
    })
}
