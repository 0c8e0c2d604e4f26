//! The dialogue record both players can see: who said what, and the program
//! each line was read as.

use serde::{Deserialize, Serialize};

use crate::meaning::MeaningProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Agent,
    Partner,
}

impl Speaker {
    pub fn other(self) -> Speaker {
        match self {
            Speaker::Agent => Speaker::Partner,
            Speaker::Partner => Speaker::Agent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub speaker: Speaker,
    pub text: String,
    /// `None` when the line could not be read.
    pub program: Option<MeaningProgram>,
}

fn is_question(t: &HistoryTurn) -> bool {
    t.program.as_ref().is_some_and(|p| p.act().is_question())
}

fn answer(t: &HistoryTurn) -> Option<bool> {
    t.program.as_ref().and_then(|p| p.polarity())
}

/// Turns holding a question that the next line answered with "yes".
pub fn confirmed_turns(history: &[HistoryTurn]) -> Vec<usize> {
    history
        .windows(2)
        .enumerate()
        .filter(|(_, w)| is_question(&w[0]) && answer(&w[1]) == Some(true))
        .map(|(i, _)| i)
        .collect()
}

/// Most recent confirmed turn, counting `pending` as the answer that a line
/// not yet in `history` gives to its last turn.
pub fn last_confirmed(history: &[HistoryTurn], pending: Option<bool>) -> Option<usize> {
    if pending == Some(true) && history.last().is_some_and(is_question) {
        return Some(history.len() - 1);
    }
    confirmed_turns(history).pop()
}
