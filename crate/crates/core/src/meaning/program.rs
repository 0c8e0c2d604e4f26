use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::Predicate;

pub const MAX_NEW_DOTS: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Act {
    New,
    FollowUp,
    End,
    ConfirmYes,
    ConfirmNo,
    Select,
}

impl Act {
    pub fn keyword(self) -> &'static str {
        match self {
            Act::New => "new",
            Act::FollowUp => "followup",
            Act::End => "end",
            Act::ConfirmYes => "confirm_yes",
            Act::ConfirmNo => "confirm_no",
            Act::Select => "select",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Act> {
        [Act::New, Act::FollowUp, Act::End, Act::ConfirmYes, Act::ConfirmNo, Act::Select]
            .into_iter()
            .find(|a| a.keyword() == s)
    }

    /// Whether the program asks the listener about dots.
    pub fn is_question(self) -> bool {
        matches!(self, Act::New | Act::FollowUp)
    }
}

/// A new-dot variable: `a` is 0, `b` is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u8);

impl Var {
    pub const A: Var = Var(0);
    pub const B: Var = Var(1);

    pub fn name(self) -> char {
        (b'a' + self.0) as char
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arg {
    Var(Var),
    /// The configuration of the referenced turn.
    Ref,
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Var(v) => write!(f, "{}", v.name()),
            Arg::Ref => f.write_str("ref"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    pub pred: Predicate,
    pub subject: Var,
    /// Present exactly for spatial predicates.
    pub object: Option<Arg>,
}

impl Constraint {
    pub fn unary(pred: Predicate, subject: Var) -> Self {
        Constraint { pred, subject, object: None }
    }

    pub fn spatial(pred: Predicate, subject: Var, object: Arg) -> Self {
        Constraint { pred, subject, object: Some(object) }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.object {
            None => write!(f, "{}({})", self.pred, self.subject.name()),
            Some(o) => write!(f, "{}({}, {})", self.pred, self.subject.name(), o),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("{pred} takes {expected} argument(s), got {got}")]
    Arity { pred: Predicate, expected: usize, got: usize },
    #[error("variable `{0}` is not declared by new={1}")]
    Undeclared(char, u8),
    #[error("new={0} exceeds the limit of {MAX_NEW_DOTS} new dots")]
    TooManyDots(u8),
    #[error("`ref` used but the program has no ref turn")]
    RefWithoutTurn,
    #[error("{0}")]
    Act(String),
}

/// Symbolic meaning of one utterance.
///
/// Constraints are kept sorted and deduplicated so structurally equal
/// programs compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeaningProgram {
    act: Act,
    ref_turn: Option<usize>,
    new_dots: u8,
    confirm: Option<bool>,
    constraints: Vec<Constraint>,
}

impl MeaningProgram {
    pub fn new(
        act: Act,
        ref_turn: Option<usize>,
        new_dots: u8,
        confirm: Option<bool>,
        mut constraints: Vec<Constraint>,
    ) -> Result<Self, ProgramError> {
        constraints.sort();
        constraints.dedup();
        let p = MeaningProgram { act, ref_turn, new_dots, confirm, constraints };
        p.validate()?;
        Ok(p)
    }

    /// Bare yes/no answer to the turn `ref_turn`.
    pub fn confirmation(answer: bool, ref_turn: usize) -> Self {
        let act = if answer { Act::ConfirmYes } else { Act::ConfirmNo };
        MeaningProgram { act, ref_turn: Some(ref_turn), new_dots: 0, confirm: None, constraints: Vec::new() }
    }

    pub fn act(&self) -> Act {
        self.act
    }

    pub fn ref_turn(&self) -> Option<usize> {
        self.ref_turn
    }

    pub fn new_dots(&self) -> u8 {
        self.new_dots
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// The confirmation attached to a non-answer act, e.g. the "Yes." in
    /// "Yes. Is there ...". Use [`MeaningProgram::polarity`] for the answer
    /// carried by either form.
    pub fn confirm(&self) -> Option<bool> {
        self.confirm
    }

    /// Answer to the previous turn carried by this utterance, if any.
    pub fn polarity(&self) -> Option<bool> {
        match self.act {
            Act::ConfirmYes => Some(true),
            Act::ConfirmNo => Some(false),
            _ => self.confirm,
        }
    }

    fn validate(&self) -> Result<(), ProgramError> {
        if self.new_dots > MAX_NEW_DOTS {
            return Err(ProgramError::TooManyDots(self.new_dots));
        }
        for c in &self.constraints {
            let got = 1 + usize::from(c.object.is_some());
            if got != c.pred.arity() {
                return Err(ProgramError::Arity { pred: c.pred, expected: c.pred.arity(), got });
            }
            let mut vars = vec![c.subject];
            match c.object {
                Some(Arg::Var(v)) => {
                    if v == c.subject {
                        return Err(ProgramError::Act(format!("{c} relates a dot to itself")));
                    }
                    vars.push(v);
                }
                Some(Arg::Ref) if self.ref_turn.is_none() => return Err(ProgramError::RefWithoutTurn),
                _ => {}
            }
            if let Some(v) = vars.into_iter().find(|v| v.0 >= self.new_dots) {
                return Err(ProgramError::Undeclared(v.name(), self.new_dots));
            }
        }
        let act_err = |m: &str| Err(ProgramError::Act(format!("{}: {m}", self.act.keyword())));
        match self.act {
            Act::New => {
                if self.ref_turn.is_some() {
                    return act_err("a new line of questioning has no ref turn");
                }
                if self.new_dots == 0 {
                    return act_err("must mention at least one dot");
                }
            }
            Act::FollowUp => {
                if self.ref_turn.is_none() {
                    return act_err("requires ref");
                }
                if self.new_dots == 0 {
                    return act_err("must mention at least one new dot");
                }
            }
            Act::ConfirmYes | Act::ConfirmNo => {
                if self.ref_turn.is_none() {
                    return act_err("requires ref");
                }
                if self.new_dots != 0 || !self.constraints.is_empty() || self.confirm.is_some() {
                    return act_err("takes no dots, constraints, or confirm attribute");
                }
            }
            Act::End => {
                if self.new_dots != 0 || !self.constraints.is_empty() {
                    return act_err("takes no dots or constraints");
                }
            }
            Act::Select => {
                if self.new_dots != 1 {
                    return act_err("describes exactly one dot");
                }
                if self.constraints.iter().any(|c| c.pred.is_spatial()) {
                    return act_err("only size and color constraints are allowed");
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for MeaningProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.act.keyword())?;
        if let Some(r) = self.ref_turn {
            write!(f, " ref={r}")?;
        }
        if self.new_dots > 0 {
            write!(f, " new={}", self.new_dots)?;
        }
        if let Some(c) = self.confirm {
            write!(f, " confirm={}", if c { "yes" } else { "no" })?;
        }
        if self.constraints.is_empty() {
            return f.write_str(" {}");
        }
        f.write_str(" { ")?;
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(" }")
    }
}

impl Serialize for MeaningProgram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MeaningProgram {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        super::dsl::parse_program(&text).map_err(serde::de::Error::custom)
    }
}
