//! Annotation requests against a chat-completion backend.
//!
//! Each passage becomes one request carrying the fixed construction prompt.
//! Responses go through [`crate::parse::parse_tuple_list`]; anything that
//! does not parse is kept as a `Malformed` record with its raw text so that
//! filtering statistics stay visible downstream.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AnnotatedPassage, AnnotationKind, EntityAnnotation, Passage};
use crate::parse;

pub const SYSTEM_MESSAGE: &str = "You are a helpful information extraction system.";

const TYPE_CLAUSE: &str = "extract all entities and identify their entity types";
const DEFINITION_CLAUSE: &str = "extract all entities and concepts, and define their type using a short sentence";

const PROMPT_HEAD: &str = "Given a passage, your task is to ";
const PROMPT_TAIL: &str = ". The output should be in a list of tuples of the following format: [(\"entity 1\", \"type of entity 1\"), ... ].\n\nPassage: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PromptVariant {
    #[default]
    TypeName,
    Definition,
}

impl PromptVariant {
    fn clause(self) -> &'static str {
        match self {
            PromptVariant::TypeName => TYPE_CLAUSE,
            PromptVariant::Definition => DEFINITION_CLAUSE,
        }
    }

    pub fn annotation_kind(self) -> AnnotationKind {
        match self {
            PromptVariant::TypeName => AnnotationKind::TypeName,
            PromptVariant::Definition => AnnotationKind::Definition,
        }
    }

    /// The user message up to (not including) the passage text.
    pub fn instruction(self) -> String {
        format!("{PROMPT_HEAD}{}{PROMPT_TAIL}", self.clause())
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "type" | "type-name" => Ok(PromptVariant::TypeName),
            "definition" => Ok(PromptVariant::Definition),
            other => Err(format!("unknown prompt variant {other:?} (expected type|definition)")),
        }
    }
}

/// System and user messages for one passage. The passage text is appended
/// verbatim; it is never itself treated as a template.
pub fn render_construction_prompt(passage: &Passage, variant: PromptVariant) -> (String, String) {
    let mut user = variant.instruction();
    user.push_str(passage.text());
    (SYSTEM_MESSAGE.to_owned(), user)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRequest<'a> {
    pub passage_id: &'a str,
    pub system: &'a str,
    pub user: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("no fixture for passage {0}")]
    NotFound(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected response body: {0}")]
    Decode(String),
}

/// Something that answers chat requests.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Canned responses keyed by passage id.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    fixtures: HashMap<String, String>,
    missing: Option<BackendError>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFixture {
    pub passage_id: String,
    pub response: String,
}

impl MockBackend {
    pub fn new(fixtures: HashMap<String, String>) -> Self {
        MockBackend {
            fixtures,
            missing: None,
        }
    }

    /// Error returned for ids without a fixture (default: `NotFound(id)`).
    pub fn with_missing_error(mut self, err: BackendError) -> Self {
        self.missing = Some(err);
        self
    }

    /// Loads `{"passage_id", "response"}` lines.
    pub fn from_jsonl_str(data: &str) -> Result<Self, GatewayError> {
        let mut fixtures = HashMap::new();
        for (i, line) in data.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: MockFixture = serde_json::from_str(line)
                .map_err(|e| GatewayError::Config(format!("mock fixtures line {}: {e}", i + 1)))?;
            fixtures.insert(f.passage_id, f.response);
        }
        Ok(MockBackend::new(fixtures))
    }

    pub fn from_jsonl_file(path: &Path) -> Result<Self, GatewayError> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        Self::from_jsonl_str(&data)
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        match self.fixtures.get(request.passage_id) {
            Some(text) => Ok(text.clone()),
            None => Err(self
                .missing
                .clone()
                .unwrap_or_else(|| BackendError::NotFound(request.passage_id.to_owned()))),
        }
    }
}

/// OpenAI-compatible `chat/completions` client (temperature 0).
pub struct OpenAiBackend {
    client: reqwest::blocking::Client,
    url: url::Url,
    model: String,
    api_key: Option<String>,
}

pub const API_KEY_ENV: &str = "FORGE_API_KEY";

/// Request body for one chat completion.
pub fn chat_request_body(model: &str, system: &str, user: &str) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
        "temperature": 0,
    })
}

impl OpenAiBackend {
    /// `endpoint` is either a base URL (`https://host/v1`) or the full
    /// `.../chat/completions` URL.
    pub fn new(endpoint: &str, model: &str, timeout: Duration, api_key: Option<String>) -> Result<Self, GatewayError> {
        let mut url = url::Url::parse(endpoint)
            .map_err(|e| GatewayError::Config(format!("bad endpoint {endpoint:?}: {e}")))?;
        if url.scheme() != "http" && url.scheme() != "https" {
            return Err(GatewayError::Config(format!(
                "endpoint {endpoint:?} must be http(s) or mock:FILE"
            )));
        }
        if !url.path().ends_with("/chat/completions") {
            let path = format!("{}/chat/completions", url.path().trim_end_matches('/'));
            url.set_path(&path);
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(OpenAiBackend {
            client,
            url,
            model: model.to_owned(),
            api_key,
        })
    }

    pub fn url(&self) -> &url::Url {
        &self.url
    }
}

impl ChatBackend for OpenAiBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        let mut req = self
            .client
            .post(self.url.clone())
            .json(&chat_request_body(&self.model, request.system, request.user));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Status(status.as_u16()));
        }
        let body: serde_json::Value = resp.json().map_err(|e| BackendError::Decode(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_owned)
            .ok_or_else(|| BackendError::Decode("missing choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayConfig {
    pub endpoint: String,
    pub model: String,
    pub max_concurrency: usize,
    pub retry_limit: usize,
    pub timeout: Duration,
    /// Delay before the first retry; doubles on each further retry.
    pub retry_backoff: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint: String::new(),
            model: "gpt-3.5-turbo".to_owned(),
            max_concurrency: 4,
            retry_limit: 2,
            timeout: Duration::from_secs(60),
            retry_backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("duplicate passage id {0:?}")]
    DuplicatePassageId(String),
}

/// Resolves `mock:FILE` or an http(s) URL into a backend.
pub fn backend_for(cfg: &GatewayConfig) -> Result<Box<dyn ChatBackend>, GatewayError> {
    if let Some(path) = cfg.endpoint.strip_prefix("mock:") {
        return Ok(Box::new(MockBackend::from_jsonl_file(Path::new(path))?));
    }
    let key = std::env::var(API_KEY_ENV)
        .or_else(|_| std::env::var("OPENAI_API_KEY"))
        .ok();
    Ok(Box::new(OpenAiBackend::new(&cfg.endpoint, &cfg.model, cfg.timeout, key)?))
}

/// Turns one raw response into an annotated record.
pub fn annotate_response(passage: &Passage, response: String, variant: PromptVariant) -> AnnotatedPassage {
    match parse::parse_tuple_list(&response) {
        Ok(pairs) => {
            let kind = variant.annotation_kind();
            let entities = pairs
                .into_iter()
                .map(|(m, t)| EntityAnnotation::new(m, t, kind).expect("parser rejects blank fields"))
                .collect();
            AnnotatedPassage::ok(passage.clone(), entities, response)
        }
        Err(reason) => AnnotatedPassage::malformed(passage.clone(), response, reason),
    }
}

fn request_with_retries(
    backend: &dyn ChatBackend,
    request: &ChatRequest<'_>,
    cfg: &GatewayConfig,
) -> Result<String, BackendError> {
    let mut delay = cfg.retry_backoff;
    let mut attempt = 0;
    loop {
        match backend.complete(request) {
            Ok(text) => return Ok(text),
            Err(e) if attempt >= cfg.retry_limit => return Err(e),
            Err(e) => {
                log::debug!("passage {}: attempt {} failed: {e}", request.passage_id, attempt + 1);
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
                delay = delay.saturating_mul(2);
                attempt += 1;
            }
        }
    }
}

/// Annotates every passage, returning one record per passage in input order.
///
/// At most `max_concurrency` requests are in flight. Per-passage failures are
/// recorded as `Malformed` and never abort the batch; only configuration
/// problems and duplicate passage ids are errors, detected before any request.
pub fn annotate(
    passages: &[Passage],
    variant: PromptVariant,
    backend: &dyn ChatBackend,
    cfg: &GatewayConfig,
) -> Result<Vec<AnnotatedPassage>, GatewayError> {
    if cfg.max_concurrency == 0 {
        return Err(GatewayError::Config("max_concurrency must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    for p in passages {
        if !seen.insert(p.id()) {
            return Err(GatewayError::DuplicatePassageId(p.id().to_owned()));
        }
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<AnnotatedPassage>>> = Mutex::new(vec![None; passages.len()]);
    let workers = cfg.max_concurrency.min(passages.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(passage) = passages.get(i) else { break };
                let (system, user) = render_construction_prompt(passage, variant);
                let request = ChatRequest {
                    passage_id: passage.id(),
                    system: &system,
                    user: &user,
                };
                let record = match request_with_retries(backend, &request, cfg) {
                    Ok(text) => annotate_response(passage, text, variant),
                    Err(e) => {
                        log::warn!("passage {}: giving up: {e}", passage.id());
                        AnnotatedPassage::malformed(
                            passage.clone(),
                            String::new(),
                            crate::model::MalformedReason::Transport,
                        )
                    }
                };
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(record);
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every index is claimed exactly once"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnnotationStatus, MalformedReason};
    use std::sync::atomic::AtomicUsize;

    fn passage(id: &str, text: &str) -> Passage {
        Passage::new(id, "test", text).unwrap()
    }

    fn fast(cfg: GatewayConfig) -> GatewayConfig {
        GatewayConfig {
            retry_backoff: Duration::ZERO,
            ..cfg
        }
    }

    #[test]
    fn type_prompt_ends_with_passage() {
        let (system, user) = render_construction_prompt(&passage("p", "Bob works at Acme."), PromptVariant::TypeName);
        assert_eq!(system, "You are a helpful information extraction system.");
        assert_eq!(
            user,
            "Given a passage, your task is to extract all entities and identify their entity types. \
             The output should be in a list of tuples of the following format: \
             [(\"entity 1\", \"type of entity 1\"), ... ].\n\nPassage: Bob works at Acme."
        );
    }

    #[test]
    fn definition_prompt_swaps_only_the_clause() {
        let p = passage("p", "Bob works at Acme.");
        let (_, typed) = render_construction_prompt(&p, PromptVariant::TypeName);
        let (_, def) = render_construction_prompt(&p, PromptVariant::Definition);
        assert!(def.contains("define their type using a short sentence"));
        assert_eq!(typed.replace(TYPE_CLAUSE, DEFINITION_CLAUSE), def);
    }

    #[test]
    fn braces_in_passage_are_literal() {
        let (_, user) = render_construction_prompt(&passage("p", "f({input_passage}) {}"), PromptVariant::TypeName);
        assert!(user.ends_with("Passage: f({input_passage}) {}"));
    }

    #[test]
    fn mock_backend_contract() {
        let mock = MockBackend::new(HashMap::from([("a".to_string(), "[]".to_string())]));
        let req = |id| ChatRequest { passage_id: id, system: "s", user: "u" };
        assert_eq!(mock.complete(&req("a")), Ok("[]".to_string()));
        assert_eq!(mock.complete(&req("b")), Err(BackendError::NotFound("b".into())));
        let custom = MockBackend::default().with_missing_error(BackendError::Status(404));
        assert_eq!(custom.complete(&req("a")), Err(BackendError::Status(404)));
    }

    #[test]
    fn annotate_keeps_order_and_statuses() {
        let mock = MockBackend::new(HashMap::from([
            ("p1".to_string(), r#"[("Bob", "person")]"#.to_string()),
            ("p2".to_string(), "Entities: []".to_string()),
            ("p3".to_string(), r#"[("Acme")]"#.to_string()),
        ]));
        let passages = vec![passage("p1", "Bob"), passage("p2", "x"), passage("p3", "Acme")];
        let out = annotate(&passages, PromptVariant::TypeName, &mock, &fast(GatewayConfig::default())).unwrap();
        let statuses: Vec<_> = out.iter().map(|a| a.status()).collect();
        assert_eq!(
            statuses,
            vec![
                AnnotationStatus::Ok,
                AnnotationStatus::Ok,
                AnnotationStatus::Malformed(MalformedReason::ArityNot2)
            ]
        );
        assert_eq!(out[0].entities()[0].mention(), "Bob");
        assert_eq!(out[2].raw_response(), r#"[("Acme")]"#);
        let ids: Vec<_> = out.iter().map(|a| a.passage().id()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
    }

    struct Flaky {
        failures_left: AtomicUsize,
    }

    impl ChatBackend for Flaky {
        fn complete(&self, _: &ChatRequest<'_>) -> Result<String, BackendError> {
            let left = self.failures_left.load(Ordering::SeqCst);
            if left > 0 {
                self.failures_left.store(left - 1, Ordering::SeqCst);
                Err(BackendError::Status(503))
            } else {
                Ok("[]".into())
            }
        }
    }

    #[test]
    fn retries_until_success() {
        let flaky = Flaky { failures_left: AtomicUsize::new(2) };
        let cfg = fast(GatewayConfig { retry_limit: 2, ..GatewayConfig::default() });
        let out = annotate(&[passage("p", "x")], PromptVariant::TypeName, &flaky, &cfg).unwrap();
        assert!(out[0].is_ok());
    }

    #[test]
    fn exhausted_retries_are_transport_failures() {
        let flaky = Flaky { failures_left: AtomicUsize::new(3) };
        let cfg = fast(GatewayConfig { retry_limit: 2, ..GatewayConfig::default() });
        let out = annotate(&[passage("p", "x")], PromptVariant::TypeName, &flaky, &cfg).unwrap();
        assert_eq!(out[0].status(), AnnotationStatus::Malformed(MalformedReason::Transport));
    }

    #[test]
    fn duplicate_ids_fail_before_any_request() {
        struct Panics;
        impl ChatBackend for Panics {
            fn complete(&self, _: &ChatRequest<'_>) -> Result<String, BackendError> {
                panic!("no request expected")
            }
        }
        let err = annotate(&[passage("p", "x"), passage("p", "y")], PromptVariant::TypeName, &Panics, &GatewayConfig::default())
            .unwrap_err();
        assert!(matches!(err, GatewayError::DuplicatePassageId(id) if id == "p"));
    }

    #[test]
    fn bad_endpoints_are_config_errors() {
        let cfg = |e: &str| GatewayConfig { endpoint: e.into(), ..GatewayConfig::default() };
        assert!(matches!(backend_for(&cfg("not a url")), Err(GatewayError::Config(_))));
        assert!(matches!(backend_for(&cfg("ftp://x/y")), Err(GatewayError::Config(_))));
        assert!(matches!(backend_for(&cfg("mock:/nonexistent/f.jsonl")), Err(GatewayError::Config(_))));
    }

    #[test]
    fn endpoint_path_gets_completions_suffix() {
        let b = OpenAiBackend::new("http://localhost:8080/v1", "m", Duration::from_secs(1), None).unwrap();
        assert_eq!(b.url().path(), "/v1/chat/completions");
        let b = OpenAiBackend::new("http://h/v1/chat/completions", "m", Duration::from_secs(1), None).unwrap();
        assert_eq!(b.url().path(), "/v1/chat/completions");
    }

    #[test]
    fn request_body_is_deterministic() {
        let body = chat_request_body("m", "sys", "usr");
        assert_eq!(
            body.to_string(),
            r#"{"messages":[{"content":"sys","role":"system"},{"content":"usr","role":"user"}],"model":"m","temperature":0}"#
        );
    }
}
