//! Grounded dialogue agent for a partially observable dot reference game.
//!
//! The agent reads partner utterances into executable constraint programs,
//! tracks an exact belief over which of its dots the partner can see, and
//! asks the yes/no question with the highest expected information gain until
//! it is confident enough to select.

pub mod belief;
pub mod context;
pub mod engine;
pub mod history;
pub mod meaning;
pub mod par;
pub mod perception;
pub mod planner;
pub mod readbench;
pub mod reader;
pub mod writer;
