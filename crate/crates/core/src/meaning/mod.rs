//! Meaning programs: the symbolic form of an utterance and its interpreter.
//!
//! A program names a dialogue act, optionally the earlier turn it builds on,
//! how many new dots it mentions, and constraints over those dots. Evaluating
//! it against a scene and the referenced turn's interpretations produces a
//! weighted set of candidate configurations.

mod dsl;
mod eval;
mod program;

pub use dsl::{parse_program, print_program, DslError};
pub use eval::{
    compactness_weight, evaluate, evaluate_with_beta, most_likely, EvalError, Interpretation, InterpretationDist,
    DEFAULT_BETA,
};
pub use program::{Act, Arg, Constraint, MeaningProgram, ProgramError, Var, MAX_NEW_DOTS};
