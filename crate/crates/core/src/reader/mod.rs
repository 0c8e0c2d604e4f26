//! Reading utterances into meaning programs.
//!
//! Reading runs in four steps: classify the dialogue act (with the yes/no
//! answer carried alongside it), resolve which earlier turn the utterance
//! builds on, generate constraints over the newly mentioned dots, and compose
//! those parts into a program. Composition is a fixed template shared by
//! every backend.

mod external;
mod grammar;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::history::HistoryTurn;
use crate::meaning::{Act, Constraint, MeaningProgram};

#[cfg(feature = "external-http")]
pub use external::HttpTransport;
pub use external::{
    CachedTransport, ChatMessage, ChatRequest, ChatTransport, ExternalConfig, ExternalReader, OfflineTransport,
    PromptBundle, PromptStyle, TransportError,
};
pub use grammar::{classify_act, generate_constraints, normalize, polarity, resolve_reference, GrammarReader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueAct {
    New,
    FollowUp,
    /// Ends questioning; carries a selection when a dot is described.
    End,
    /// A bare yes or no.
    Answer,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ReadError {
    #[error("could not read utterance: {0}")]
    Unparseable(String),
    #[error("reader transport failed: {message}")]
    Transport { message: String, retryable: bool },
}

/// Constraints over the dots an utterance newly mentions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    pub new_dots: u8,
    pub constraints: Vec<Constraint>,
}

pub trait Reader: Send + Sync {
    fn read(&self, utterance: &str, history: &[HistoryTurn]) -> Result<MeaningProgram, ReadError>;
}

/// Assembles the program from the outputs of the first three steps.
pub fn compose(
    act: DialogueAct,
    ref_turn: Option<usize>,
    polarity: Option<bool>,
    cs: &ConstraintSet,
) -> Result<MeaningProgram, ReadError> {
    let bad = |e: crate::meaning::ProgramError| ReadError::Unparseable(e.to_string());
    match act {
        DialogueAct::Answer => {
            let answer = polarity.ok_or_else(|| ReadError::Unparseable("answer without yes or no".into()))?;
            let r = ref_turn.ok_or_else(|| ReadError::Unparseable("answer with nothing to answer".into()))?;
            Ok(MeaningProgram::confirmation(answer, r))
        }
        DialogueAct::New => {
            MeaningProgram::new(Act::New, None, cs.new_dots, polarity, cs.constraints.clone()).map_err(bad)
        }
        DialogueAct::FollowUp => {
            MeaningProgram::new(Act::FollowUp, ref_turn, cs.new_dots, polarity, cs.constraints.clone()).map_err(bad)
        }
        DialogueAct::End if cs.new_dots == 1 => {
            MeaningProgram::new(Act::Select, ref_turn, 1, polarity, cs.constraints.clone()).map_err(bad)
        }
        DialogueAct::End => MeaningProgram::new(Act::End, None, 0, polarity, Vec::new()).map_err(bad),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meaning::{Arg, Var};
    use crate::perception::Predicate;

    #[test]
    fn compose_builds_the_followup_example() {
        let cs = ConstraintSet {
            new_dots: 1,
            constraints: vec![
                Constraint::spatial(Predicate::IsBelow, Var::A, Arg::Ref),
                Constraint::unary(Predicate::IsGrey, Var::A),
                Constraint::unary(Predicate::IsSmall, Var::A),
            ],
        };
        let p = compose(DialogueAct::FollowUp, Some(1), None, &cs).unwrap();
        assert_eq!(p.to_string(), "followup ref=1 new=1 { is_small(a); is_grey(a); is_below(a, ref) }");
    }

    #[test]
    fn compose_end_variants() {
        let sel = ConstraintSet { new_dots: 1, constraints: vec![Constraint::unary(Predicate::IsLarge, Var::A)] };
        assert_eq!(compose(DialogueAct::End, Some(2), Some(true), &sel).unwrap().act(), Act::Select);
        assert_eq!(compose(DialogueAct::End, None, None, &ConstraintSet::default()).unwrap().act(), Act::End);
        assert!(compose(DialogueAct::Answer, None, Some(true), &ConstraintSet::default()).is_err());
        assert!(compose(DialogueAct::FollowUp, None, None, &sel).is_err());
    }
}
