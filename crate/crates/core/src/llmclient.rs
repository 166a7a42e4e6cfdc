//! Few-shot relation-extraction prompts, response parsing, and a minimal
//! chat-completion client.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Annotation, Example, Mention, Relation};
use crate::schema::{normalize_label, Role, SchemaGraph, SYNTHETIC_ENTITY_TYPE};

pub const DESCRIPTION: &str = "There are some relation extraction samples, relation must be taken from schema, head entity and tail entity must be taken from context. Relation, head entity and tail entity may have multiple.";
pub const CONFIRMATION: &str =
    "Do you understand how to do relation extraction based on schema? Now it's your turn to do relation extraction.";
pub const ANSWER_LEAD: &str = "The relation involved in the above sentence are:";
const HEAD_MARKER: &str = "The head entity is ";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("demonstration {demo}: relation {relation:?} is not in the schema")]
    DemoOutsideSchema { demo: usize, relation: String },
    #[error("environment variable {0} is not set")]
    MissingToken(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("request failed: {0}")]
    Transport(String),
    #[error("unexpected response shape: {0}")]
    BadResponse(String),
    #[error("no canned response left for prompt {0}")]
    Exhausted(usize),
}

/// One relation as the prompt spells it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub context: String,
    pub relations: Vec<Triple>,
}

impl Demonstration {
    pub fn from_example(ex: &Example) -> Self {
        let relations = ex
            .annotations
            .iter()
            .filter_map(|a| match a {
                Annotation::Relation(r) => Some(Triple {
                    head: r.head.text.clone(),
                    relation: r.relation.clone(),
                    tail: r.tail.text.clone(),
                }),
                _ => None,
            })
            .collect();
        Demonstration {
            context: ex.text.clone(),
            relations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub description: String,
    pub schema: Vec<String>,
    pub demos: Vec<Demonstration>,
    pub query: String,
}

impl PromptSpec {
    pub fn new(schema: Vec<String>, demos: Vec<Demonstration>, query: impl Into<String>) -> Self {
        PromptSpec {
            description: DESCRIPTION.to_string(),
            schema,
            demos,
            query: query.into(),
        }
    }

    /// Relation names of `schema` in name order.
    pub fn for_schema(
        schema: &SchemaGraph,
        demos: Vec<Demonstration>,
        query: impl Into<String>,
    ) -> Self {
        Self::new(schema.names_with_role(Role::Relation), demos, query)
    }
}

/// `schema: ["a", "b"]` with JSON string escaping.
pub fn render_schema_list(names: &[String]) -> String {
    let quoted: Vec<String> = names
        .iter()
        .map(|n| serde_json::to_string(n).expect("strings serialize"))
        .collect();
    format!("schema: [{}]", quoted.join(", "))
}

/// The answer line for a set of relations, numbered from 1.
pub fn render_answer(relations: &[Triple]) -> String {
    let mut s = ANSWER_LEAD.to_string();
    if !relations.is_empty() {
        s.push(' ');
    }
    for (k, t) in relations.iter().enumerate() {
        s.push_str(&format!(
            "{}.{HEAD_MARKER}{}, relation is {}, tail entity is {};",
            k + 1,
            t.head,
            t.relation,
            t.tail
        ));
    }
    s
}

/// Paragraphs, blank-line separated: description, schema, each demo's
/// context and answer, the confirmation line, schema again, the query
/// context and the bare answer lead.
pub fn build_icl_prompt(spec: &PromptSpec) -> Result<String, LlmError> {
    let allowed: std::collections::BTreeSet<String> =
        spec.schema.iter().map(|s| normalize_label(s)).collect();
    let schema_line = render_schema_list(&spec.schema);
    let mut parts = vec![spec.description.clone(), schema_line.clone()];
    for (i, d) in spec.demos.iter().enumerate() {
        if let Some(bad) = d
            .relations
            .iter()
            .find(|t| !allowed.contains(&normalize_label(&t.relation)))
        {
            return Err(LlmError::DemoOutsideSchema {
                demo: i + 1,
                relation: bad.relation.clone(),
            });
        }
        parts.push(format!("Context: {}", d.context));
        parts.push(render_answer(&d.relations));
    }
    parts.push(CONFIRMATION.to_string());
    parts.push(schema_line);
    parts.push(format!("Context: {}", spec.query));
    parts.push(ANSWER_LEAD.to_string());
    Ok(parts.join("\n\n"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseDiagnostic {
    /// A clause that does not follow the triple pattern.
    Unparseable(String),
    /// A well-formed triple whose relation is not a schema name.
    OutOfSchema(Triple),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub relations: Vec<Relation>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

fn entity_types_for(schema: &SchemaGraph, relation: &str) -> (String, String) {
    let name = |id| schema.node(id).map(|n| n.name.to_string());
    let triples: Vec<_> = schema
        .re_constraints()
        .iter()
        .filter(|(_, r, _)| name(r).as_deref() == Some(relation))
        .collect();
    if let [(h, _, t)] = triples.as_slice() {
        if let (Some(h), Some(t)) = (name(h), name(t)) {
            return (h, t);
        }
    }
    let types = schema.names_with_role(Role::EntityType);
    match types.as_slice() {
        [only] => (only.clone(), only.clone()),
        _ => (
            SYNTHETIC_ENTITY_TYPE.to_string(),
            SYNTHETIC_ENTITY_TYPE.to_string(),
        ),
    }
}

/// Extracts every "The head entity is H, relation is R, tail entity is T"
/// clause. Numbering, `;`/`.` terminators and parenthetical asides are
/// tolerated. Triples with non-schema relations are dropped with a
/// diagnostic. Mentions are located in `query` when possible.
pub fn parse_llm_response(text: &str, schema: &SchemaGraph, query: &str) -> ParsedResponse {
    let trailing_number = Regex::new(r"\s*\d+\s*\.\s*$").expect("valid regex");
    let aside = Regex::new(r"\s*\([^()]*\)").expect("valid regex");
    let clause =
        Regex::new(r"^(?s)\s*(.+?)\s*,\s*relation is\s+(.+?)\s*,\s*tail entity is\s+(.+?)\s*$")
            .expect("valid regex");
    let allowed: std::collections::BTreeSet<String> =
        schema.names_with_role(Role::Relation).into_iter().collect();

    let mut out = ParsedResponse {
        relations: Vec::new(),
        diagnostics: Vec::new(),
    };
    for piece in text.split(HEAD_MARKER).skip(1) {
        let mut c = trailing_number.replace(piece, "").into_owned();
        c = aside.replace_all(&c, "").into_owned();
        let c = c.trim_end().trim_end_matches([';', '.']).trim_end();
        let Some(caps) = clause.captures(c) else {
            out.diagnostics
                .push(ParseDiagnostic::Unparseable(piece.trim().to_string()));
            continue;
        };
        let triple = Triple {
            head: caps[1].to_string(),
            relation: normalize_label(&caps[2]),
            tail: caps[3].to_string(),
        };
        if !allowed.contains(&triple.relation) {
            log::debug!("dropping out-of-schema relation {:?}", triple.relation);
            out.diagnostics.push(ParseDiagnostic::OutOfSchema(triple));
            continue;
        }
        let locate =
            |s: &str| Mention::located_in(query, s).unwrap_or_else(|_| Mention::unlocated(s));
        let (head_type, tail_type) = entity_types_for(schema, &triple.relation);
        let rel = Relation {
            head: locate(&triple.head),
            head_type,
            relation: triple.relation,
            tail: locate(&triple.tail),
            tail_type,
        };
        if !out.relations.contains(&rel) {
            out.relations.push(rel);
        }
    }
    out
}

fn default_timeout() -> u64 {
    60
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_concurrency() -> usize {
    4
}

/// Where and how to send chat-completion requests. Holds the name of the
/// variable carrying the bearer token, never the token itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Prefix of the `/chat/completions` path, e.g. `https://host/v1`.
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles per attempt.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            token_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            concurrency: default_concurrency(),
        }
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// Sends one user message and returns the reply text.
pub trait ChatTransport: Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Debug, Clone)]
pub struct HttpTransport {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport { config, agent }
    }

    fn attempt(&self, prompt: &str, token: Option<&str>) -> Result<String, LlmError> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: 0.0,
        };
        let mut req = self.agent.post(self.config.url());
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if status != 200 {
            return Err(LlmError::Status { status, body: text });
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LlmError::BadResponse(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| LlmError::BadResponse("missing choices[0].message.content".into()))
    }
}

fn retryable(e: &LlmError) -> bool {
    match e {
        LlmError::Transport(_) => true,
        LlmError::Status { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl ChatTransport for HttpTransport {
    /// Retries transport failures, 429 and 5xx with doubling delays.
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let token = match &self.config.token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::MissingToken(var.clone()))?),
            None => None,
        };
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(prompt, token.as_deref()) {
                Err(e) if retryable(&e) && attempt < self.config.max_retries => {
                    log::warn!(
                        "request failed ({e}); retry {} of {}",
                        attempt + 1,
                        self.config.max_retries
                    );
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Replays fixed replies in request order; records the prompts it saw.
#[derive(Debug, Default)]
pub struct CannedTransport {
    replies: Vec<String>,
    next: AtomicUsize,
    seen: Mutex<Vec<String>>,
}

impl CannedTransport {
    pub fn new(replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        CannedTransport {
            replies: replies.into_iter().map(Into::into).collect(),
            next: AtomicUsize::new(0),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.seen.lock().expect("lock").clone()
    }
}

impl ChatTransport for CannedTransport {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let i = self.next.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().expect("lock").push(prompt.to_string());
        self.replies.get(i).cloned().ok_or(LlmError::Exhausted(i))
    }
}

/// Sends every prompt with at most `concurrency` requests in flight.
/// Results follow prompt order.
pub fn send_all(
    transport: &dyn ChatTransport,
    prompts: &[String],
    concurrency: usize,
) -> Vec<Result<String, LlmError>> {
    let slots: Vec<Mutex<Option<Result<String, LlmError>>>> =
        prompts.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = concurrency.clamp(1, prompts.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(p) = prompts.get(i) else { break };
                *slots[i].lock().expect("lock") = Some(transport.complete(p));
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("lock").expect("every slot filled"))
        .collect()
}
