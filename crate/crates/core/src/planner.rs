//! One-step information-gain planning over yes/no questions, plus the rule
//! for when to stop asking and select.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{entropy_bits, BeliefError, BeliefState, Observation, PartnerModel};
use crate::context::{DotId, Scene};
use crate::par::{self, ExecMode};
use crate::perception::{circumradius, color_predicate, size_predicate, Config, PerceptionError, MAX_CONFIG_SIZE};

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error("scene has no dots to select")]
    EmptyScene,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanAct {
    // Declaration order is the tie-break order.
    FollowUp,
    New,
    Select,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub act: PlanAct,
    /// The configuration whose presence the question asks about, or the
    /// single dot to select.
    pub config: Config,
    /// Already-grounded dots the plan refers back to: the confirmed
    /// configuration for follow-ups and selections, empty otherwise.
    pub base: Config,
    pub ref_turn: Option<usize>,
    pub eig: f64,
}

impl Plan {
    /// Dots the utterance has to describe.
    pub fn described(&self) -> Vec<DotId> {
        match self.act {
            PlanAct::Select => self.config.ids().to_vec(),
            _ => self.config.ids().iter().copied().filter(|d| !self.base.contains(*d)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub theta: f64,
    pub max_new_pair_candidates: usize,
    pub followup_enabled: bool,
    pub exec: ExecMode,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { theta: 0.8, max_new_pair_candidates: 66, followup_enabled: true, exec: ExecMode::default() }
    }
}

/// What the planner needs from the dialogue so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerHistory {
    /// Configurations either player already asked about.
    pub asked: Vec<Config>,
    /// Confirmed configurations with the turn that introduced them.
    pub confirmed: Vec<(usize, Config)>,
}

pub fn candidate_plans(
    belief: &BeliefState,
    scene: &Scene,
    history: &PlannerHistory,
    cfg: &PlannerConfig,
) -> Vec<Plan> {
    let ids = belief.ids();
    let mut out = Vec::new();
    let mut pairs = 0;
    'outer: for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            if pairs == cfg.max_new_pair_candidates {
                break 'outer;
            }
            let c = Config::new([*a, *b]).expect("distinct ids");
            if history.asked.contains(&c) || scene.dot(*a).is_none() || scene.dot(*b).is_none() {
                continue;
            }
            pairs += 1;
            out.push(Plan { act: PlanAct::New, config: c, base: Config::empty(), ref_turn: None, eig: 0.0 });
        }
    }
    if cfg.followup_enabled {
        for (turn, base) in &history.confirmed {
            if base.len() >= MAX_CONFIG_SIZE {
                continue;
            }
            for d in ids.iter().filter(|d| !base.contains(**d) && scene.dot(**d).is_some()) {
                let c = base.extended(&[*d]).expect("base has room");
                if history.asked.contains(&c) {
                    continue;
                }
                out.push(Plan {
                    act: PlanAct::FollowUp,
                    config: c,
                    base: base.clone(),
                    ref_turn: Some(*turn),
                    eig: 0.0,
                });
            }
        }
    }
    out
}

fn h2(p: f64) -> f64 {
    entropy_bits(&[p, 1.0 - p])
}

/// Mutual information in bits between the partner's yes/no answer to `plan`
/// and the world.
pub fn expected_information_gain(belief: &BeliefState, plan: &Plan, model: &PartnerModel) -> Result<f64, PlannerError> {
    let m = belief.mask_of(&plan.config)? as usize;
    let (mut p_yes, mut p_no, mut noise) = (0.0, 0.0, 0.0);
    for (z, p) in belief.probs().iter().enumerate() {
        let yes = model.p_yes(z & m == m);
        p_yes += p * yes;
        p_no += p * (1.0 - yes);
        noise += p * h2(yes);
    }
    // Normalizing keeps an answer that is certain at exactly zero entropy.
    Ok(entropy_bits(&[p_yes / (p_yes + p_no), p_no / (p_yes + p_no)]) - noise)
}

/// Expected entropy of the belief after hearing the answer to `plan`.
pub fn expected_posterior_entropy(
    belief: &BeliefState,
    plan: &Plan,
    model: &PartnerModel,
    scene: &Scene,
) -> Result<f64, PlannerError> {
    let mut total = 0.0;
    for answer in [true, false] {
        let obs = Observation::PartnerConfirms { answer, config: plan.config.clone() };
        let lik = belief.likelihood(&obs, model, scene)?;
        let p_r: f64 = belief.probs().iter().zip(&lik).map(|(p, l)| p * l).sum();
        if p_r > 0.0 {
            total += p_r * belief.update(&obs, model, scene)?.entropy();
        }
    }
    Ok(total)
}

fn words(scene: &Scene, id: DotId) -> Option<(crate::perception::Predicate, crate::perception::Predicate)> {
    scene.dot(id).map(|d| (size_predicate(d), color_predicate(d)))
}

/// True when no other dot of `base` shares the size and color words of `id`.
pub fn uniquely_described(scene: &Scene, base: &Config, id: DotId) -> bool {
    let w = words(scene, id);
    w.is_some() && base.ids().iter().filter(|d| words(scene, **d) == w).count() == 1
}

fn select_plan(id: DotId, base: &Config, ref_turn: Option<usize>) -> Plan {
    Plan { act: PlanAct::Select, config: Config::single(id), base: base.clone(), ref_turn, eig: 0.0 }
}

/// Fires when a describable dot of a confirmed configuration has a shared
/// marginal of at least `theta`; picks the highest such marginal.
pub fn select_rule(
    belief: &BeliefState,
    scene: &Scene,
    confirmed: &[(usize, Config)],
    theta: f64,
) -> Result<Option<Plan>, PlannerError> {
    let mut best: Option<(f64, DotId, usize, &Config)> = None;
    for (turn, base) in confirmed {
        for id in base.ids() {
            let m = belief.marginal(*id)?;
            if m < theta || !uniquely_described(scene, base, *id) {
                continue;
            }
            if best.is_none_or(|(bm, bid, _, _)| m > bm || (m == bm && *id < bid)) {
                best = Some((m, *id, *turn, base));
            }
        }
    }
    Ok(best.map(|(_, id, turn, base)| select_plan(id, base, Some(turn))))
}

/// Selection used when questioning stops without the rule firing: the
/// highest-marginal dot of the latest confirmed configuration, or of the
/// whole scene when nothing was confirmed.
pub fn fallback_select(
    belief: &BeliefState,
    scene: &Scene,
    confirmed: &[(usize, Config)],
) -> Result<Plan, PlannerError> {
    let all = Config::empty();
    let (pool, base, turn): (Vec<DotId>, &Config, Option<usize>) = match confirmed.last() {
        Some((t, c)) => (c.ids().to_vec(), c, Some(*t)),
        None => (belief.ids().to_vec(), &all, None),
    };
    let mut best: Option<(f64, bool, DotId)> = None;
    for id in pool.into_iter().filter(|d| scene.dot(*d).is_some()) {
        let m = belief.marginal(id)?;
        let unique = base.is_empty() || uniquely_described(scene, base, id);
        let better = match best {
            None => true,
            Some((bm, bu, _)) => (unique, m) > (bu, bm),
        };
        if better {
            best = Some((m, unique, id));
        }
    }
    let (_, _, id) = best.ok_or(PlannerError::EmptyScene)?;
    Ok(select_plan(id, base, turn))
}

fn better(a: &(Plan, f64), b: &(Plan, f64)) -> bool {
    let (pa, ra) = a;
    let (pb, rb) = b;
    if (pa.eig - pb.eig).abs() > TIE_TOL {
        return pa.eig > pb.eig;
    }
    if (ra - rb).abs() > TIE_TOL {
        return ra < rb;
    }
    match pa.act.cmp(&pb.act) {
        Ordering::Equal => pa.config < pb.config,
        o => o == Ordering::Less,
    }
}

/// Scores every candidate and returns them in candidate order.
pub fn score_candidates(
    belief: &BeliefState,
    scene: &Scene,
    history: &PlannerHistory,
    cfg: &PlannerConfig,
    model: &PartnerModel,
) -> Result<Vec<Plan>, PlannerError> {
    let cands = candidate_plans(belief, scene, history, cfg);
    par::map(cfg.exec, &cands, |p| {
        let eig = expected_information_gain(belief, p, model)?;
        Ok(Plan { eig, ..p.clone() })
    })
    .into_iter()
    .collect()
}

/// Best candidate under (EIG, smaller circumradius, follow-up first, ids).
pub fn best_candidate(scored: &[Plan], scene: &Scene) -> Result<Option<Plan>, PlannerError> {
    let mut best: Option<(Plan, f64)> = None;
    for p in scored {
        let cand = (p.clone(), circumradius(&p.config, scene)?);
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    Ok(best.map(|(p, _)| p))
}

pub fn plan(
    belief: &BeliefState,
    scene: &Scene,
    history: &PlannerHistory,
    cfg: &PlannerConfig,
    model: &PartnerModel,
) -> Result<Plan, PlannerError> {
    Ok(plan_with_trace(belief, scene, history, cfg, model)?.0)
}

/// Like [`plan`], also returning every scored candidate.
pub fn plan_with_trace(
    belief: &BeliefState,
    scene: &Scene,
    history: &PlannerHistory,
    cfg: &PlannerConfig,
    model: &PartnerModel,
) -> Result<(Plan, Vec<Plan>), PlannerError> {
    if let Some(p) = select_rule(belief, scene, &history.confirmed, cfg.theta)? {
        return Ok((p, Vec::new()));
    }
    let scored = score_candidates(belief, scene, history, cfg, model)?;
    let chosen = match best_candidate(&scored, scene)? {
        Some(p) => p,
        None => fallback_select(belief, scene, &history.confirmed)?,
    };
    Ok((chosen, scored))
}
