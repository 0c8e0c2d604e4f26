use std::sync::Arc;

use serde::{Deserialize, Serialize};

use spc_core::context::{DotId, GameContext, Scene};
use spc_core::engine::{AgentAction, AgentConfig, AgentError, SpcAgent, TurnLog};
use spc_core::reader::Reader;

use crate::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotView {
    /// Position in the human's view; unrelated to the board's global ids.
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub size: f64,
    pub color: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneView {
    pub radius: f64,
    pub dots: Vec<DotView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Awaiting {
    Utterance,
    /// The agent has selected; only a selection is accepted now.
    Selection,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Human,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReply {
    pub text: Option<String>,
    /// Set once the agent has made its (still hidden) selection.
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Role,
    pub text: Option<String>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub scene: SceneView,
    pub agent: AgentReply,
    pub awaiting: Awaiting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replied {
    pub agent: AgentReply,
    pub awaiting: Awaiting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub success: bool,
    pub partner_selection: DotId,
    pub agent_selection: DotId,
    pub partner_selection_local: u32,
    /// The agent's dot in the human's numbering, when the human can see it.
    pub agent_selection_local: Option<u32>,
    pub turn_count: usize,
    pub words_agent: Vec<usize>,
    pub words_partner: Vec<usize>,
}

/// Session record. Fields past `turns` stay empty until the game closes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub k: usize,
    pub status: Awaiting,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared: Option<Vec<DotId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_scene: Option<Scene>,
    /// Global id of each dot in the human's numbering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_map: Option<Vec<DotId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_log: Option<Vec<TurnLog>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<GameOutcome>,
}

/// Rounds to 9 significant digits.
fn sig9(v: f64) -> f64 {
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn words(turns: &[Turn], who: Role) -> Vec<usize> {
    turns
        .iter()
        .filter(|t| t.speaker == who)
        .filter_map(|t| t.text.as_deref())
        .map(|s| s.split_whitespace().count())
        .collect()
}

pub struct Session {
    id: String,
    ctx: GameContext,
    agent: SpcAgent,
    local: Vec<DotId>,
    turns: Vec<Turn>,
    result: Option<GameOutcome>,
}

impl Session {
    /// Starts a game on `ctx`; the human plays the partner view and the
    /// agent speaks first.
    pub fn start(
        id: String,
        ctx: GameContext,
        cfg: AgentConfig,
        reader: Arc<dyn Reader>,
    ) -> Result<(Session, Created), ApiError> {
        let agent = SpcAgent::new(ctx.agent_scene.clone(), cfg, reader).map_err(internal)?;
        let local = ctx.partner_scene.ids().collect();
        let mut s = Session { id, ctx, agent, local, turns: Vec::new(), result: None };
        let opening = s.agent.open().map_err(internal)?;
        let agent = s.record(&opening);
        let created = Created { session_id: s.id.clone(), scene: s.scene_view(), agent, awaiting: s.awaiting() };
        Ok((s, created))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn awaiting(&self) -> Awaiting {
        if self.result.is_some() {
            Awaiting::Closed
        } else if self.agent.selection().is_some() {
            Awaiting::Selection
        } else {
            Awaiting::Utterance
        }
    }

    pub fn scene_view(&self) -> SceneView {
        let s = &self.ctx.partner_scene;
        let dots = s
            .dots
            .iter()
            .enumerate()
            .map(|(i, d)| DotView {
                id: i as u32,
                x: sig9(d.x - s.center[0]),
                y: sig9(d.y - s.center[1]),
                size: sig9(d.size),
                color: sig9(d.color),
            })
            .collect();
        SceneView { radius: sig9(s.radius), dots }
    }

    fn record(&mut self, action: &AgentAction) -> AgentReply {
        let selected = matches!(action, AgentAction::Select { .. });
        let text = action.text().map(str::to_string);
        if text.is_some() || selected {
            self.turns.push(Turn { speaker: Role::Agent, text: text.clone(), selected });
        }
        AgentReply { text, selected }
    }

    pub fn utterance(&mut self, text: &str) -> Result<Replied, ApiError> {
        match self.awaiting() {
            Awaiting::Closed => return Err(ApiError::Closed),
            Awaiting::Selection => return Err(ApiError::AwaitingSelection),
            Awaiting::Utterance => {}
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(ApiError::Validation("utterance text is empty".into()));
        }
        self.turns.push(Turn { speaker: Role::Human, text: Some(text.to_string()), selected: false });
        let action = self.agent.respond(text).map_err(internal)?;
        let agent = self.record(&action);
        Ok(Replied { agent, awaiting: self.awaiting() })
    }

    /// Takes the human's selection, has the agent finish its own, and closes.
    pub fn select(&mut self, local: u32) -> Result<GameOutcome, ApiError> {
        if self.result.is_some() {
            return Err(ApiError::Closed);
        }
        let human = *self.local.get(local as usize).ok_or(ApiError::UnknownDot(local))?;
        self.turns.push(Turn { speaker: Role::Human, text: None, selected: true });
        if self.agent.selection().is_none() {
            let a = self.agent.force_select();
            self.record(&a);
        }
        let agent = self.agent.selection().expect("agent selected above");
        let outcome = GameOutcome {
            success: human == agent && self.ctx.is_shared(agent),
            partner_selection: human,
            agent_selection: agent,
            partner_selection_local: local,
            agent_selection_local: self.local.iter().position(|d| *d == agent).map(|i| i as u32),
            turn_count: self.turns.iter().filter(|t| t.text.is_some()).count(),
            words_agent: words(&self.turns, Role::Agent),
            words_partner: words(&self.turns, Role::Human),
        };
        self.result = Some(outcome.clone());
        Ok(outcome)
    }

    /// Hidden fields are filled in only once the game has closed.
    pub fn transcript(&self) -> Transcript {
        let mut t = Transcript {
            session_id: self.id.clone(),
            k: self.ctx.k,
            status: self.awaiting(),
            turns: self.turns.clone(),
            seed: None,
            shared: None,
            agent_scene: None,
            id_map: None,
            agent_log: None,
            result: None,
        };
        if let Some(r) = &self.result {
            t.seed = Some(self.ctx.seed);
            t.shared = Some(self.ctx.shared.clone());
            t.agent_scene = Some(self.ctx.agent_scene.clone());
            t.id_map = Some(self.local.clone());
            t.agent_log = Some(self.agent.log().to_vec());
            t.result = Some(r.clone());
        }
        t
    }
}

fn internal(e: AgentError) -> ApiError {
    match e {
        AgentError::Closed => ApiError::Closed,
        e => ApiError::Internal(e.to_string()),
    }
}
