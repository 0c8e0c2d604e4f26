use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{build_prior_with, BeliefError, BeliefState, Observation, PartnerModel, PriorOptions};
use crate::context::{DotId, Scene};
use crate::history::{last_confirmed, HistoryTurn, Speaker};
use crate::meaning::{evaluate_with_beta, most_likely, Act, InterpretationDist, MeaningProgram, DEFAULT_BETA};
use crate::perception::Config;
use crate::planner::{
    fallback_select, plan_with_trace, select_rule, Plan, PlanAct, PlannerConfig, PlannerError, PlannerHistory,
};
use crate::reader::Reader;
use crate::writer::{program_for, write, WriteError, CLARIFY_PREFIX};

pub const DEFAULT_TURN_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub planner: PlannerConfig,
    pub model: PartnerModel,
    /// Compactness rate used when reading.
    pub beta: f64,
    pub prior: PriorOptions,
    /// Utterances after which the agent stops talking and selects.
    pub turn_cap: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            planner: PlannerConfig::default(),
            model: PartnerModel::default(),
            beta: DEFAULT_BETA,
            prior: PriorOptions::default(),
            turn_cap: DEFAULT_TURN_CAP,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("the agent has already selected")]
    Closed,
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Write(#[from] WriteError),
}

/// What a player does on its turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentAction {
    Say(String),
    /// Select a dot, optionally announcing it.
    Select {
        text: Option<String>,
        dot: DotId,
    },
}

impl AgentAction {
    pub fn text(&self) -> Option<&str> {
        match self {
            AgentAction::Say(t) => Some(t),
            AgentAction::Select { text, .. } => text.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub act: PlanAct,
    pub config: Config,
    pub eig: f64,
}

/// One line of a player's own log, from that player's point of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnLog {
    /// Logical timestamp: position in the player's log.
    pub t: usize,
    pub speaker: Speaker,
    /// `None` for a silent selection.
    pub text: Option<String>,
    pub program: Option<MeaningProgram>,
    /// Set when the line could not be read and the agent asked again.
    pub fallback: bool,
    pub interpretations: InterpretationDist,
    /// Belief after the line, as (world bitmask, probability) pairs.
    pub belief: Vec<(u32, f64)>,
    pub plan: Option<Plan>,
    pub candidates: Vec<Candidate>,
    pub selection: Option<DotId>,
}

/// The agent's side of one game.
pub struct SpcAgent {
    scene: Scene,
    cfg: AgentConfig,
    reader: Arc<dyn Reader>,
    belief: BeliefState,
    history: Vec<HistoryTurn>,
    interps: Vec<InterpretationDist>,
    plans: Vec<Option<Plan>>,
    last_question: Option<Plan>,
    log: Vec<TurnLog>,
    selection: Option<DotId>,
}

impl SpcAgent {
    pub fn new(scene: Scene, cfg: AgentConfig, reader: Arc<dyn Reader>) -> Result<Self, AgentError> {
        let belief = build_prior_with(&scene, &cfg.prior)?;
        Ok(SpcAgent {
            scene,
            cfg,
            reader,
            belief,
            history: Vec::new(),
            interps: Vec::new(),
            plans: Vec::new(),
            last_question: None,
            log: Vec::new(),
            selection: None,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn history(&self) -> &[HistoryTurn] {
        &self.history
    }

    pub fn log(&self) -> &[TurnLog] {
        &self.log
    }

    pub fn selection(&self) -> Option<DotId> {
        self.selection
    }

    /// Speaks first.
    pub fn open(&mut self) -> Result<AgentAction, AgentError> {
        if self.selection.is_some() {
            return Err(AgentError::Closed);
        }
        self.act(None)
    }

    /// Reads the partner's line, updates the belief, and replies.
    pub fn respond(&mut self, utterance: &str) -> Result<AgentAction, AgentError> {
        if self.selection.is_some() {
            return Err(AgentError::Closed);
        }
        let program = match self.reader.read(utterance, &self.history) {
            Ok(p) => p,
            Err(_) => return self.clarify(utterance),
        };
        if let (Some(ans), Some(Some(asked))) = (program.polarity(), self.plans.last()) {
            if self.history.last().is_some_and(|t| t.speaker == Speaker::Agent) && asked.act != PlanAct::Select {
                let obs = Observation::PartnerConfirms { answer: ans, config: asked.config.clone() };
                self.belief = self.belief.update(&obs, &self.cfg.model, &self.scene)?;
            }
        }
        let dist = self.interpret(&program);
        let x_star = most_likely(&dist, &self.scene).ok();
        if let Some(x) = &x_star {
            if matches!(program.act(), Act::New | Act::FollowUp | Act::Select) {
                self.belief =
                    self.belief.update(&Observation::PartnerAsserts(x.clone()), &self.cfg.model, &self.scene)?;
            }
        }
        let act = program.act();
        self.push(Speaker::Partner, Some(utterance.to_string()), Some(program), false, dist, None, Vec::new());
        if matches!(act, Act::Select | Act::End) || self.history.len() >= self.cfg.turn_cap {
            return Ok(self.force_select());
        }
        let answer = act.is_question().then_some(x_star.is_some());
        self.act(answer)
    }

    fn interpret(&self, program: &MeaningProgram) -> InterpretationDist {
        let unit = InterpretationDist::unit();
        let prev = match program.ref_turn() {
            Some(r) => self.interps.get(r).unwrap_or(&unit),
            None => &unit,
        };
        if program.act() != Act::New && program.ref_turn().is_some() && prev.is_empty() {
            return InterpretationDist::empty();
        }
        evaluate_with_beta(program, &self.scene, prev, self.cfg.beta).unwrap_or_else(|_| InterpretationDist::empty())
    }

    /// Configuration a turn put on the table, in this agent's scene.
    fn turn_config(&self, t: usize) -> Option<Config> {
        match &self.plans[t] {
            Some(p) => Some(p.config.clone()),
            None => most_likely(&self.interps[t], &self.scene).ok(),
        }
    }

    fn planner_history(&self, pending: Option<bool>) -> PlannerHistory {
        let asked = (0..self.history.len())
            .filter(|t| self.history[*t].program.as_ref().is_some_and(|p| p.act().is_question()))
            .filter_map(|t| self.turn_config(t))
            .collect();
        let confirmed = last_confirmed(&self.history, pending)
            .and_then(|t| self.turn_config(t).map(|c| (t, c)))
            .into_iter()
            .collect();
        PlannerHistory { asked, confirmed }
    }

    fn act(&mut self, answer: Option<bool>) -> Result<AgentAction, AgentError> {
        let ph = self.planner_history(answer);
        let (plan, scored) = plan_with_trace(&self.belief, &self.scene, &ph, &self.cfg.planner, &self.cfg.model)?;
        let text = write(&plan, &self.scene, answer)?;
        let program = program_for(&plan, &self.scene, answer)?;
        let candidates =
            scored.iter().map(|p| Candidate { act: p.act, config: p.config.clone(), eig: p.eig }).collect();
        let dist = InterpretationDist::point(plan.config.clone());
        if plan.act == PlanAct::Select {
            let dot = plan.config.ids()[0];
            self.selection = Some(dot);
            self.push(Speaker::Agent, Some(text.clone()), Some(program), false, dist, Some(plan), candidates);
            self.log.last_mut().expect("just pushed").selection = Some(dot);
            return Ok(AgentAction::Select { text: Some(text), dot });
        }
        self.last_question = Some(plan.clone());
        self.push(Speaker::Agent, Some(text.clone()), Some(program), false, dist, Some(plan), candidates);
        Ok(AgentAction::Say(text))
    }

    fn clarify(&mut self, utterance: &str) -> Result<AgentAction, AgentError> {
        self.push(
            Speaker::Partner,
            Some(utterance.to_string()),
            None,
            true,
            InterpretationDist::empty(),
            None,
            Vec::new(),
        );
        let Some(q) = self.last_question.clone() else {
            let reply = self.act(None)?;
            let last = self.log.len() - 1;
            let prefixed = format!("{CLARIFY_PREFIX}{}", reply.text().unwrap_or_default());
            let h = self.history.len() - 1;
            self.history[h].text = prefixed.clone();
            self.log[last].text = Some(prefixed.clone());
            return Ok(match reply {
                AgentAction::Say(_) => AgentAction::Say(prefixed),
                AgentAction::Select { dot, .. } => AgentAction::Select { text: Some(prefixed), dot },
            });
        };
        let text = format!("{CLARIFY_PREFIX}{}", write(&q, &self.scene, None)?);
        let program = program_for(&q, &self.scene, None)?;
        let dist = InterpretationDist::point(q.config.clone());
        self.push(Speaker::Agent, Some(text.clone()), Some(program), false, dist, Some(q), Vec::new());
        Ok(AgentAction::Say(text))
    }

    /// Selects without speaking: the confident-dot rule over every confirmed
    /// configuration, else the highest-marginal confirmed dot.
    pub fn force_select(&mut self) -> AgentAction {
        if let Some(dot) = self.selection {
            return AgentAction::Select { text: None, dot };
        }
        let confirmed: Vec<(usize, Config)> = crate::history::confirmed_turns(&self.history)
            .into_iter()
            .filter_map(|t| self.turn_config(t).map(|c| (t, c)))
            .collect();
        let by_rule = select_rule(&self.belief, &self.scene, &confirmed, self.cfg.planner.theta).ok().flatten();
        let plan = by_rule.or_else(|| {
            let mut pooled: Vec<DotId> = confirmed.iter().flat_map(|(_, c)| c.ids().to_vec()).collect();
            pooled.sort();
            pooled.dedup();
            let best = pooled
                .into_iter()
                .filter_map(|d| self.belief.marginal(d).ok().map(|m| (m, d)))
                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
            match best {
                Some((_, d)) => Some(Plan {
                    act: PlanAct::Select,
                    config: Config::single(d),
                    base: Config::empty(),
                    ref_turn: None,
                    eig: 0.0,
                }),
                None => fallback_select(&self.belief, &self.scene, &[]).ok(),
            }
        });
        let dot = plan.map(|p| p.config.ids()[0]).unwrap_or_else(|| self.scene.dots[0].id);
        self.selection = Some(dot);
        self.log.push(TurnLog {
            t: self.log.len(),
            speaker: Speaker::Agent,
            text: None,
            program: None,
            fallback: false,
            interpretations: InterpretationDist::empty(),
            belief: self.belief.snapshot(),
            plan: None,
            candidates: Vec::new(),
            selection: Some(dot),
        });
        AgentAction::Select { text: None, dot }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        speaker: Speaker,
        text: Option<String>,
        program: Option<MeaningProgram>,
        fallback: bool,
        dist: InterpretationDist,
        plan: Option<Plan>,
        candidates: Vec<Candidate>,
    ) {
        self.history.push(HistoryTurn { speaker, text: text.clone().unwrap_or_default(), program: program.clone() });
        self.interps.push(dist.clone());
        self.plans.push(plan.clone());
        self.log.push(TurnLog {
            t: self.log.len(),
            speaker,
            text,
            program,
            fallback,
            interpretations: dist,
            belief: self.belief.snapshot(),
            plan,
            candidates,
            selection: None,
        });
    }
}
