//! Language-model reading backend.
//!
//! The decomposed style makes one call per step (act, reference,
//! constraints) and composes locally. The full style asks for the whole
//! program in one call.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::history::{HistoryTurn, Speaker};
use crate::meaning::{parse_program, MeaningProgram};

use super::{compose, ConstraintSet, DialogueAct, ReadError, Reader};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage { role: role.into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// Content address of the request, used as the cache key.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError {
    pub message: String,
    pub retryable: bool,
}

impl From<TransportError> for ReadError {
    fn from(e: TransportError) -> Self {
        ReadError::Transport { message: e.message, retryable: e.retryable }
    }
}

pub trait ChatTransport: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError>;
}

/// Transport with no model behind it; every call fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineTransport;

impl ChatTransport for OfflineTransport {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        Err(TransportError { message: format!("no model available for request {}", req.digest()), retryable: false })
    }
}

/// Replays responses stored under `dir/<digest>.txt`, and stores new ones.
#[derive(Debug, Clone)]
pub struct CachedTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: ChatTransport> CachedTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        CachedTransport { inner, dir: dir.into() }
    }
}

impl<T: ChatTransport> ChatTransport for CachedTransport<T> {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        let path = self.dir.join(format!("{}.txt", req.digest()));
        if let Ok(hit) = fs::read_to_string(&path) {
            return Ok(hit);
        }
        let out = self.inner.complete(req)?;
        let io = |e: std::io::Error| TransportError {
            message: format!("cache write {}: {e}", path.display()),
            retryable: false,
        };
        fs::create_dir_all(&self.dir).map_err(io)?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &out).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        Ok(out)
    }
}

#[cfg(feature = "external-http")]
pub use http::HttpTransport;

#[cfg(feature = "external-http")]
mod http {
    use std::time::Duration;

    use super::{ChatRequest, ChatTransport, TransportError};

    /// Chat-completions endpoint over HTTP.
    ///
    /// Reads `SPC_LLM_BASE_URL` (default `https://api.openai.com/v1`) and
    /// `SPC_LLM_API_KEY`.
    pub struct HttpTransport {
        agent: ureq::Agent,
        base_url: String,
        api_key: Option<String>,
    }

    impl HttpTransport {
        pub fn new(base_url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
            let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
            HttpTransport { agent, base_url: base_url.into(), api_key }
        }

        pub fn from_env(timeout: Duration) -> Self {
            let base = std::env::var("SPC_LLM_BASE_URL").unwrap_or_else(|_| "https://api.openai.com/v1".into());
            HttpTransport::new(base, std::env::var("SPC_LLM_API_KEY").ok(), timeout)
        }
    }

    impl ChatTransport for HttpTransport {
        fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
            let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
            let mut call = self.agent.post(&url);
            if let Some(k) = &self.api_key {
                call = call.header("Authorization", &format!("Bearer {k}"));
            }
            let fail = |e: ureq::Error| {
                let retryable = matches!(e, ureq::Error::Timeout(_) | ureq::Error::Io(_))
                    || matches!(e, ureq::Error::StatusCode(c) if c == 429 || c >= 500);
                TransportError { message: e.to_string(), retryable }
            };
            let body: serde_json::Value = call.send_json(req).map_err(fail)?.body_mut().read_json().map_err(fail)?;
            body["choices"][0]["message"]["content"].as_str().map(str::to_string).ok_or_else(|| TransportError {
                message: format!("unexpected response shape: {body}"),
                retryable: false,
            })
        }
    }
}

/// Versioned prompt texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub id: &'static str,
    pub classify: &'static str,
    pub reference: &'static str,
    pub constraints: &'static str,
    pub full: &'static str,
}

impl PromptBundle {
    pub fn v1() -> Self {
        PromptBundle {
            id: "v1",
            classify: include_str!("../../prompts/v1/classify.txt"),
            reference: include_str!("../../prompts/v1/reference.txt"),
            constraints: include_str!("../../prompts/v1/constraints.txt"),
            full: include_str!("../../prompts/v1/full.txt"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    #[default]
    Decomposed,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalConfig {
    pub model: String,
    pub temperature: f64,
    pub style: PromptStyle,
    pub bundle: PromptBundle,
}

impl ExternalConfig {
    pub fn new(model: impl Into<String>) -> Self {
        ExternalConfig {
            model: model.into(),
            temperature: 0.0,
            style: PromptStyle::default(),
            bundle: PromptBundle::v1(),
        }
    }

    /// Model id from `SPC_LLM_MODEL`, default `gpt-4o`.
    pub fn from_env() -> Self {
        ExternalConfig::new(std::env::var("SPC_LLM_MODEL").unwrap_or_else(|_| "gpt-4o".into()))
    }
}

pub struct ExternalReader<T> {
    transport: T,
    config: ExternalConfig,
}

fn render_history(history: &[HistoryTurn]) -> String {
    history
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let who = match t.speaker {
                Speaker::Agent => "agent",
                Speaker::Partner => "partner",
            };
            format!("[{i}] {who}: {}\n", t.text)
        })
        .collect()
}

fn field<'a>(out: &'a str, key: &str) -> Option<&'a str> {
    out.split_whitespace().find_map(|w| w.strip_prefix(key)?.strip_prefix('='))
}

fn parse_act(out: &str) -> Result<(DialogueAct, Option<bool>), String> {
    let act = match field(out, "act") {
        Some("new") => DialogueAct::New,
        Some("follow_up") => DialogueAct::FollowUp,
        Some("end") => DialogueAct::End,
        Some("answer") => DialogueAct::Answer,
        other => return Err(format!("unknown act {other:?}")),
    };
    let confirm = match field(out, "confirm") {
        Some("yes") => Some(true),
        Some("no") => Some(false),
        Some("none") | None => None,
        Some(other) => return Err(format!("unknown confirm value {other:?}")),
    };
    Ok((act, confirm))
}

fn parse_ref(out: &str, n_turns: usize) -> Result<Option<usize>, String> {
    match field(out, "ref") {
        Some("none") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(r) if r < n_turns => Ok(Some(r)),
            _ => Err(format!("ref {v:?} is not an earlier turn")),
        },
        None => Err("missing ref=".into()),
    }
}

fn parse_constraints(out: &str) -> Result<ConstraintSet, String> {
    let mut lines = out.lines().map(str::trim).filter(|l| !l.is_empty());
    let n: u8 = lines
        .next()
        .and_then(|l| l.strip_prefix("new="))
        .and_then(|v| v.parse().ok())
        .ok_or("first line must be new=<n>")?;
    let body: Vec<&str> = lines.collect();
    if n == 0 {
        return if body.is_empty() { Ok(ConstraintSet::default()) } else { Err("constraints given for new=0".into()) };
    }
    let p = parse_program(&format!("followup ref=0 new={n} {{ {} }}", body.join(" "))).map_err(|e| e.to_string())?;
    Ok(ConstraintSet { new_dots: n, constraints: p.constraints().to_vec() })
}

impl<T: ChatTransport> ExternalReader<T> {
    pub fn new(transport: T, config: ExternalConfig) -> Self {
        ExternalReader { transport, config }
    }

    /// One model call, re-asked once with the validation error if its
    /// output does not parse.
    fn ask<R>(&self, system: &str, user: String, parse: impl Fn(&str) -> Result<R, String>) -> Result<R, ReadError> {
        let mut messages = vec![ChatMessage::new("system", system), ChatMessage::new("user", user)];
        let mut last_err = String::new();
        for _ in 0..2 {
            let req = ChatRequest {
                model: self.config.model.clone(),
                temperature: self.config.temperature,
                messages: messages.clone(),
            };
            let out = self.transport.complete(&req)?;
            match parse(out.trim()) {
                Ok(r) => return Ok(r),
                Err(e) => {
                    messages.push(ChatMessage::new("assistant", out));
                    messages.push(ChatMessage::new(
                        "user",
                        format!("That reply was invalid ({e}). Answer again in exactly the required format."),
                    ));
                    last_err = e;
                }
            }
        }
        Err(ReadError::Unparseable(format!("model output invalid after retry: {last_err}")))
    }

    pub fn classify_act(
        &self,
        utterance: &str,
        history: &[HistoryTurn],
    ) -> Result<(DialogueAct, Option<bool>), ReadError> {
        let user = format!("{}Utterance: {utterance}", render_history(history));
        self.ask(self.config.bundle.classify, user, parse_act)
    }

    pub fn resolve_reference(&self, utterance: &str, history: &[HistoryTurn]) -> Result<Option<usize>, ReadError> {
        let user = format!("{}Utterance: {utterance}", render_history(history));
        self.ask(self.config.bundle.reference, user, |o| parse_ref(o, history.len()))
    }

    pub fn generate_constraints(&self, utterance: &str, history: &[HistoryTurn]) -> Result<ConstraintSet, ReadError> {
        let user = format!("{}Utterance: {utterance}", render_history(history));
        self.ask(self.config.bundle.constraints, user, parse_constraints)
    }

    fn read_full(&self, utterance: &str, history: &[HistoryTurn]) -> Result<MeaningProgram, ReadError> {
        let user = format!("{}Utterance: {utterance}", render_history(history));
        let n = history.len();
        self.ask(self.config.bundle.full, user, |o| {
            let p = parse_program(o).map_err(|e| e.to_string())?;
            match p.ref_turn() {
                Some(r) if r >= n => Err(format!("ref={r} is not an earlier turn")),
                _ => Ok(p),
            }
        })
    }
}

impl<T: ChatTransport> Reader for ExternalReader<T> {
    fn read(&self, utterance: &str, history: &[HistoryTurn]) -> Result<MeaningProgram, ReadError> {
        if self.config.style == PromptStyle::Full {
            return self.read_full(utterance, history);
        }
        let (act, polarity) = self.classify_act(utterance, history)?;
        let r = self.resolve_reference(utterance, history)?;
        let cs = match act {
            DialogueAct::Answer => ConstraintSet::default(),
            _ => self.generate_constraints(utterance, history)?,
        };
        compose(act, r, polarity, &cs)
    }
}
