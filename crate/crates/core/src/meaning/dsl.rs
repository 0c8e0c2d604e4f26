//! Text form of meaning programs.
//!
//! ```text
//! program    := act attr* "{" (constraint (";" constraint)* ";"?)? "}"
//! act        := "new" | "followup" | "end" | "confirm_yes" | "confirm_no" | "select"
//! attr       := "ref=" int | "new=" int | "confirm=" ("yes" | "no")
//! constraint := pred "(" var ("," (var | "ref"))? ")"
//! var        := "a" | "b"
//! ```
//!
//! Printing (`Display` on [`MeaningProgram`]) emits the canonical form.

use thiserror::Error;

use super::program::{Act, Arg, Constraint, MeaningProgram, ProgramError, Var};
use crate::perception::Predicate;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("invalid program: {0}")]
    Semantic(#[from] ProgramError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(usize),
    Sym(char),
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { chars: src.chars().peekable(), line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, DslError> {
        let mut out = Vec::new();
        while let Some(&c) = self.chars.peek() {
            let (line, col) = (self.line, self.col);
            if c.is_whitespace() {
                self.bump();
            } else if c.is_ascii_lowercase() || c == '_' {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), line, col));
            } else if c.is_ascii_digit() {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                let n = s.parse().map_err(|_| DslError::Syntax {
                    line,
                    col,
                    msg: format!("integer `{s}` out of range"),
                })?;
                out.push((Tok::Int(n), line, col));
            } else if "{}(),;=".contains(c) {
                self.bump();
                out.push((Tok::Sym(c), line, col));
            } else {
                return Err(DslError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        let (line, col) = self.toks.get(self.pos).map(|t| (t.1, t.2)).unwrap_or(self.end);
        Err(DslError::Syntax { line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<(), DslError> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{c}`")),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn int(&mut self, what: &str) -> Result<usize, DslError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn arg(&mut self) -> Result<Arg, DslError> {
        let start = self.pos;
        match self.ident("an argument (`a`, `b` or `ref`)")?.as_str() {
            "a" => Ok(Arg::Var(Var::A)),
            "b" => Ok(Arg::Var(Var::B)),
            "ref" => Ok(Arg::Ref),
            other => {
                self.pos = start;
                self.err(format!("unknown argument `{other}`"))
            }
        }
    }

    fn constraint(&mut self) -> Result<Constraint, DslError> {
        let start = self.pos;
        let name = self.ident("a predicate")?;
        let Ok(pred) = name.parse::<Predicate>() else {
            self.pos = start;
            return self.err(format!("unknown predicate `{name}`"));
        };
        self.expect_sym('(')?;
        let mut args = vec![self.arg()?];
        while let Some(Tok::Sym(',')) = self.peek() {
            self.pos += 1;
            args.push(self.arg()?);
        }
        self.expect_sym(')')?;
        if args.len() != pred.arity() {
            return Err(ProgramError::Arity { pred, expected: pred.arity(), got: args.len() }.into());
        }
        let subject = match args[0] {
            Arg::Var(v) => v,
            Arg::Ref => {
                self.pos = start;
                return self.err(format!("the first argument of {pred} must be a new dot"));
            }
        };
        Ok(Constraint { pred, subject, object: args.get(1).copied() })
    }

    fn program(&mut self) -> Result<MeaningProgram, DslError> {
        let start = self.pos;
        let kw = self.ident("a dialogue act")?;
        let Some(act) = Act::from_keyword(&kw) else {
            self.pos = start;
            return self.err(format!("unknown act `{kw}`"));
        };
        let (mut ref_turn, mut new_dots, mut confirm) = (None, None, None);
        while let Some(Tok::Ident(_)) = self.peek() {
            let at = self.pos;
            let key = self.ident("an attribute")?;
            self.expect_sym('=')?;
            let dup = match key.as_str() {
                "ref" => ref_turn.replace(self.int("a turn index")?).is_some(),
                "new" => {
                    let n = self.int("a dot count")?;
                    let n = u8::try_from(n).map_err(|_| ProgramError::TooManyDots(u8::MAX))?;
                    new_dots.replace(n).is_some()
                }
                "confirm" => {
                    let v = match self.ident("`yes` or `no`")?.as_str() {
                        "yes" => true,
                        "no" => false,
                        _ => {
                            self.pos -= 1;
                            return self.err("expected `yes` or `no`");
                        }
                    };
                    confirm.replace(v).is_some()
                }
                _ => {
                    self.pos = at;
                    return self.err(format!("unknown attribute `{key}`"));
                }
            };
            if dup {
                self.pos = at;
                return self.err(format!("duplicate attribute `{key}`"));
            }
        }
        self.expect_sym('{')?;
        let mut constraints = Vec::new();
        loop {
            if let Some(Tok::Sym('}')) = self.peek() {
                self.pos += 1;
                break;
            }
            constraints.push(self.constraint()?);
            match self.peek() {
                Some(Tok::Sym(';')) => self.pos += 1,
                Some(Tok::Sym('}')) => {}
                _ => return self.err("expected `;` or `}`"),
            }
        }
        if self.next().is_some() {
            self.pos -= 1;
            return self.err("trailing input after `}`");
        }
        Ok(MeaningProgram::new(act, ref_turn, new_dots.unwrap_or(0), confirm, constraints)?)
    }
}

pub fn parse_program(text: &str) -> Result<MeaningProgram, DslError> {
    let toks = Lexer::new(text).tokens()?;
    let end = {
        let lines: Vec<&str> = text.split('\n').collect();
        (lines.len(), lines.last().map_or(0, |l| l.chars().count()) + 1)
    };
    Parser { toks, pos: 0, end }.program()
}

pub fn print_program(p: &MeaningProgram) -> String {
    p.to_string()
}
