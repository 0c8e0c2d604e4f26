//! Template realization of plans.

use thiserror::Error;

use crate::context::{Dot, Scene};
use crate::meaning::{Act, Arg, Constraint, MeaningProgram, ProgramError, Var};
use crate::perception::{centroid, color_predicate, relation_holds, size_predicate, PerceptionError, Predicate};
use crate::planner::{Plan, PlanAct};

/// Prepended to a repeated question after an unreadable reply.
pub const CLARIFY_PREFIX: &str = "Sorry, I did not understand. ";

#[derive(Debug, Error, PartialEq)]
pub enum WriteError {
    #[error("plan cannot be verbalized: {0}")]
    Unverbalizable(String),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

pub fn attr_word(p: Predicate) -> &'static str {
    match p {
        Predicate::IsSmall => "small",
        Predicate::IsMedium => "medium",
        Predicate::IsLarge => "large",
        Predicate::IsDark => "dark",
        Predicate::IsGrey => "grey",
        Predicate::IsLight => "light",
        _ => unreachable!("not an attribute predicate"),
    }
}

struct Rendering {
    text: String,
    program: MeaningProgram,
}

fn attrs(d: &Dot, v: Var) -> (Predicate, Predicate, [Constraint; 2]) {
    let (s, c) = (size_predicate(d), color_predicate(d));
    (s, c, [Constraint::unary(s, v), Constraint::unary(c, v)])
}

fn dot<'s>(scene: &'s Scene, plan: &Plan, i: usize) -> Result<&'s Dot, WriteError> {
    let id = plan.described()[i];
    scene.dot(id).ok_or(WriteError::Perception(PerceptionError::UnknownDot(id)))
}

fn render(plan: &Plan, scene: &Scene, confirm: Option<bool>) -> Result<Rendering, WriteError> {
    let n = plan.described().len();
    let arity = |want: usize| {
        if n == want {
            Ok(())
        } else {
            Err(WriteError::Unverbalizable(format!("{:?} describes {want} dot(s), plan has {n}", plan.act)))
        }
    };
    let (act, ref_turn, new_dots, body, constraints) = match plan.act {
        PlanAct::New => {
            arity(2)?;
            let (p, q) = (dot(scene, plan, 0)?, dot(scene, plan, 1)?);
            let (dx, dy) = (q.x - p.x, q.y - p.y);
            let (first, second, words, rel) = if dx.abs() >= dy.abs() {
                let (l, r) = if dx > 0.0 { (p, q) } else { (q, p) };
                (l, r, ("left", "right"), Predicate::IsLeftOf)
            } else {
                let (t, b) = if dy < 0.0 { (p, q) } else { (q, p) };
                (t, b, ("top", "bottom"), Predicate::IsAbove)
            };
            let (s1, c1, k1) = attrs(first, Var::A);
            let (s2, c2, k2) = attrs(second, Var::B);
            let body = format!(
                "Do you see a pair of dots, where the {} dot is {}-sized and {} and the {} dot is {}-sized and {}?",
                words.0,
                attr_word(s1),
                attr_word(c1),
                words.1,
                attr_word(s2),
                attr_word(c2)
            );
            let mut cs = k1.to_vec();
            cs.extend(k2);
            cs.push(Constraint::spatial(rel, Var::A, Arg::Var(Var::B)));
            (Act::New, None, 2, body, cs)
        }
        PlanAct::FollowUp => {
            arity(1)?;
            if plan.base.is_empty() || plan.ref_turn.is_none() {
                return Err(WriteError::Unverbalizable("follow-up without a grounded base".into()));
            }
            let d = dot(scene, plan, 0)?;
            let c = centroid(&plan.base, scene)?;
            let holds = |p| relation_holds(p, d.position(), c);
            let horiz = [Predicate::IsLeftOf, Predicate::IsRightOf].into_iter().find(|p| holds(*p));
            let vert = [Predicate::IsAbove, Predicate::IsBelow].into_iter().find(|p| holds(*p));
            let h_word = |p| if p == Predicate::IsLeftOf { "left" } else { "right" };
            let v_word = |p| if p == Predicate::IsAbove { "above" } else { "below" };
            let (position, rels) = match (horiz, vert) {
                (Some(h), Some(v)) => (format!("to the {} and {}", h_word(h), v_word(v)), vec![h, v]),
                (Some(h), None) => (format!("to the {} of", h_word(h)), vec![h]),
                (None, Some(v)) => (v_word(v).to_string(), vec![v]),
                (None, None) => ("near".to_string(), vec![Predicate::IsNear]),
            };
            let (s, col, k) = attrs(d, Var::A);
            let body = format!("Is there a {} size and {} color dot {position} those?", attr_word(s), attr_word(col));
            let mut cs = k.to_vec();
            cs.extend(rels.into_iter().map(|r| Constraint::spatial(r, Var::A, Arg::Ref)));
            (Act::FollowUp, plan.ref_turn, 1, body, cs)
        }
        PlanAct::Select => {
            arity(1)?;
            let d = dot(scene, plan, 0)?;
            let (s, c, k) = attrs(d, Var::A);
            let body = format!("Let's select the {} size and {} color one.", attr_word(s), attr_word(c));
            (Act::Select, plan.ref_turn, 1, body, k.to_vec())
        }
    };
    let prefix = match confirm {
        Some(true) => "Yes. ",
        Some(false) => "No. ",
        None => "",
    };
    let program = MeaningProgram::new(act, ref_turn, new_dots, confirm, constraints)?;
    Ok(Rendering { text: format!("{prefix}{body}"), program })
}

/// Renders `plan` as text, prefixed with the answer to the partner's last
/// question when `confirm` is given.
pub fn write(plan: &Plan, scene: &Scene, confirm: Option<bool>) -> Result<String, WriteError> {
    Ok(render(plan, scene, confirm)?.text)
}

/// The program a reader should recover from [`write`]'s output.
pub fn program_for(plan: &Plan, scene: &Scene, confirm: Option<bool>) -> Result<MeaningProgram, WriteError> {
    Ok(render(plan, scene, confirm)?.program)
}

/// Bare answer to a question, with no plan attached.
pub fn write_answer(answer: bool) -> &'static str {
    if answer {
        "Yes."
    } else {
        "No."
    }
}
