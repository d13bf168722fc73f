//! Shared record types and their canonical JSONL encoding.
//!
//! Every record is immutable once constructed. Constructors and
//! [`deserialize`] both enforce the record's invariants, so a value of any of
//! these types is always valid. Serialization is `serde_json` compact output
//! with keys in declaration order, which makes it byte-deterministic.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

/// A violated record invariant, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("field `{field}`: {message}")]
pub struct InvariantViolation {
    pub field: &'static str,
    pub message: String,
}

impl InvariantViolation {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{kind}: not valid JSON: {source}")]
    Syntax {
        kind: &'static str,
        source: serde_json::Error,
    },
    #[error("{kind}: schema mismatch: {source}")]
    Schema {
        kind: &'static str,
        source: serde_json::Error,
    },
    #[error("{kind}: invariant violated: {violation}")]
    Invariant {
        kind: &'static str,
        violation: InvariantViolation,
    },
}

/// A type with a canonical JSONL line form.
pub trait Record: Serialize + DeserializeOwned {
    /// Tag used in diagnostics.
    const KIND: &'static str;

    fn validate(&self) -> Result<(), InvariantViolation>;
}

/// Encodes a record as one line of canonical JSON (no trailing newline).
pub fn serialize<R: Record>(record: &R) -> String {
    serde_json::to_string(record).expect("record types serialize infallibly")
}

/// Decodes and validates one JSONL line.
pub fn deserialize<R: Record>(line: &str) -> Result<R, RecordError> {
    let record: R = serde_json::from_str(line).map_err(|source| {
        use serde_json::error::Category;
        match source.classify() {
            Category::Data => RecordError::Schema {
                kind: R::KIND,
                source,
            },
            _ => RecordError::Syntax {
                kind: R::KIND,
                source,
            },
        }
    })?;
    record
        .validate()
        .map_err(|violation| RecordError::Invariant {
            kind: R::KIND,
            violation,
        })?;
    Ok(record)
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("line {line}: {source}")]
    Record { line: usize, source: RecordError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads every non-blank line of a JSONL stream.
pub fn read_jsonl<R: Record>(reader: impl BufRead) -> Result<Vec<R>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(deserialize(&line).map_err(|source| JsonlError::Record {
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

/// Writes records one per line, LF-terminated.
pub fn write_jsonl<'a, R: Record + 'a>(
    mut writer: impl Write,
    records: impl IntoIterator<Item = &'a R>,
) -> std::io::Result<()> {
    for r in records {
        writer.write_all(serialize(r).as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Renders records to an in-memory JSONL string.
pub fn to_jsonl_string<'a, R: Record + 'a>(records: impl IntoIterator<Item = &'a R>) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn non_blank(field: &'static str, value: &str) -> Result<(), InvariantViolation> {
    if value.trim().is_empty() {
        Err(InvariantViolation::new(field, "must not be empty"))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Passage

/// A chunk of corpus text, the input unit for annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Passage {
    id: String,
    source: String,
    text: String,
    token_count: usize,
}

impl Passage {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        text: impl Into<String>,
    ) -> Result<Self, InvariantViolation> {
        let text = text.into();
        let passage = Passage {
            id: id.into(),
            source: source.into(),
            token_count: text::token_count(&text),
            text,
        };
        passage.validate()?;
        Ok(passage)
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn source(&self) -> &str {
        &self.source
    }
    pub fn text(&self) -> &str {
        &self.text
    }
    pub fn token_count(&self) -> usize {
        self.token_count
    }
}

impl Record for Passage {
    const KIND: &'static str = "passage";

    fn validate(&self) -> Result<(), InvariantViolation> {
        non_blank("id", &self.id)?;
        non_blank("text", &self.text)?;
        let actual = text::token_count(&self.text);
        if actual != self.token_count {
            return Err(InvariantViolation::new(
                "token_count",
                format!("is {} but text has {actual} tokens", self.token_count),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Annotations

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    TypeName,
    Definition,
}

/// One `(mention, type)` pair produced by the annotating model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityAnnotation {
    mention: String,
    entity_type: String,
    kind: AnnotationKind,
}

impl EntityAnnotation {
    pub fn new(
        mention: impl Into<String>,
        entity_type: impl Into<String>,
        kind: AnnotationKind,
    ) -> Result<Self, InvariantViolation> {
        let a = EntityAnnotation {
            mention: mention.into(),
            entity_type: entity_type.into(),
            kind,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn mention(&self) -> &str {
        &self.mention
    }
    pub fn entity_type(&self) -> &str {
        &self.entity_type
    }
    pub fn kind(&self) -> AnnotationKind {
        self.kind
    }

    fn validate(&self) -> Result<(), InvariantViolation> {
        non_blank("mention", &self.mention)?;
        non_blank("entity_type", &self.entity_type)
    }
}

/// Why an annotation response was quarantined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedReason {
    UnbalancedBrackets,
    NonTupleElement,
    #[serde(rename = "arity_not_2")]
    ArityNot2,
    EmptyField,
    /// The request itself failed after all retries.
    Transport,
}

impl std::fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MalformedReason::UnbalancedBrackets => "unbalanced_brackets",
            MalformedReason::NonTupleElement => "non_tuple_element",
            MalformedReason::ArityNot2 => "arity_not_2",
            MalformedReason::EmptyField => "empty_field",
            MalformedReason::Transport => "transport",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationStatus {
    Ok,
    Malformed(MalformedReason),
}

/// A passage with the annotations parsed from one model response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedPassage {
    passage: Passage,
    entities: Vec<EntityAnnotation>,
    raw_response: String,
    status: AnnotationStatus,
}

impl AnnotatedPassage {
    pub fn ok(passage: Passage, entities: Vec<EntityAnnotation>, raw_response: String) -> Self {
        AnnotatedPassage {
            passage,
            entities,
            raw_response,
            status: AnnotationStatus::Ok,
        }
    }

    pub fn malformed(passage: Passage, raw_response: String, reason: MalformedReason) -> Self {
        AnnotatedPassage {
            passage,
            entities: Vec::new(),
            raw_response,
            status: AnnotationStatus::Malformed(reason),
        }
    }

    pub fn passage(&self) -> &Passage {
        &self.passage
    }
    pub fn entities(&self) -> &[EntityAnnotation] {
        &self.entities
    }
    pub fn raw_response(&self) -> &str {
        &self.raw_response
    }
    pub fn status(&self) -> AnnotationStatus {
        self.status
    }
    pub fn is_ok(&self) -> bool {
        self.status == AnnotationStatus::Ok
    }

    /// Entity types in first-appearance order, each with its mentions in
    /// annotation order.
    pub fn mentions_by_type(&self) -> Vec<(&str, Vec<&str>)> {
        let mut groups: Vec<(&str, Vec<&str>)> = Vec::new();
        for e in &self.entities {
            match groups.iter_mut().find(|(t, _)| *t == e.entity_type) {
                Some((_, ms)) => ms.push(&e.mention),
                None => groups.push((&e.entity_type, vec![&e.mention])),
            }
        }
        groups
    }
}

impl Record for AnnotatedPassage {
    const KIND: &'static str = "annotated_passage";

    fn validate(&self) -> Result<(), InvariantViolation> {
        self.passage.validate()?;
        for e in &self.entities {
            e.validate()?;
        }
        if matches!(self.status, AnnotationStatus::Malformed(_)) && !self.entities.is_empty() {
            return Err(InvariantViolation::new(
                "entities",
                "must be empty for a malformed record",
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Conversations

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One conversation turn. `in_loss` marks the turns the trainer learns from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    role: Role,
    content: String,
    in_loss: bool,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>, in_loss: bool) -> Result<Self, InvariantViolation> {
        let m = Message {
            role,
            content: content.into(),
            in_loss,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn role(&self) -> Role {
        self.role
    }
    pub fn content(&self) -> &str {
        &self.content
    }
    pub fn in_loss(&self) -> bool {
        self.in_loss
    }

    fn validate(&self) -> Result<(), InvariantViolation> {
        if self.in_loss {
            if self.role != Role::Assistant {
                return Err(InvariantViolation::new(
                    "in_loss",
                    "only assistant turns may carry loss",
                ));
            }
            match serde_json::from_str::<serde_json::Value>(&self.content) {
                Ok(serde_json::Value::Array(_)) | Ok(serde_json::Value::Object(_)) => {}
                _ => {
                    return Err(InvariantViolation::new(
                        "in_loss",
                        "loss-bearing content must be a JSON list or object",
                    ))
                }
            }
        }
        Ok(())
    }
}

/// An instruction-tuning conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationExample {
    id: String,
    dataset: Option<String>,
    messages: Vec<Message>,
}

impl ConversationExample {
    pub fn new(
        id: impl Into<String>,
        dataset: Option<String>,
        messages: Vec<Message>,
    ) -> Result<Self, InvariantViolation> {
        let c = ConversationExample {
            id: id.into(),
            dataset,
            messages,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn dataset(&self) -> Option<&str> {
        self.dataset.as_deref()
    }
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }
}

impl Record for ConversationExample {
    const KIND: &'static str = "conversation";

    fn validate(&self) -> Result<(), InvariantViolation> {
        non_blank("id", &self.id)?;
        let Some((first, rest)) = self.messages.split_first() else {
            return Err(InvariantViolation::new("messages", "must not be empty"));
        };
        if first.role != Role::System {
            return Err(InvariantViolation::new(
                "messages",
                "first message must be the system preamble",
            ));
        }
        if rest.len() % 2 != 0 {
            return Err(InvariantViolation::new(
                "messages",
                "user turns must each be answered",
            ));
        }
        for (i, m) in rest.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if m.role != expected {
                return Err(InvariantViolation::new(
                    "messages",
                    format!("turn {} should be {expected:?}", i + 1),
                ));
            }
        }
        for m in &self.messages {
            m.validate()?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Benchmark

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypedMention {
    pub entity_type: String,
    pub mention: String,
}

impl TypedMention {
    pub fn new(entity_type: impl Into<String>, mention: impl Into<String>) -> Self {
        TypedMention {
            entity_type: entity_type.into(),
            mention: mention.into(),
        }
    }
}

/// A sentence-level evaluation instance. `gold` is an ordered multiset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRecord {
    id: String,
    dataset: String,
    domain: String,
    text: String,
    gold: Vec<TypedMention>,
    allowed_types: BTreeSet<String>,
}

impl BenchmarkRecord {
    pub fn new(
        id: impl Into<String>,
        dataset: impl Into<String>,
        domain: impl Into<String>,
        text: impl Into<String>,
        gold: Vec<TypedMention>,
        allowed_types: BTreeSet<String>,
    ) -> Result<Self, InvariantViolation> {
        let r = BenchmarkRecord {
            id: id.into(),
            dataset: dataset.into(),
            domain: domain.into(),
            text: text.into(),
            gold,
            allowed_types,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn dataset(&self) -> &str {
        &self.dataset
    }
    pub fn domain(&self) -> &str {
        &self.domain
    }
    pub fn text(&self) -> &str {
        &self.text
    }
    pub fn gold(&self) -> &[TypedMention] {
        &self.gold
    }
    pub fn allowed_types(&self) -> &BTreeSet<String> {
        &self.allowed_types
    }

    /// Gold types in first-appearance order with their mentions.
    pub fn mentions_by_type(&self) -> Vec<(&str, Vec<&str>)> {
        let mut groups: Vec<(&str, Vec<&str>)> = Vec::new();
        for g in &self.gold {
            match groups.iter_mut().find(|(t, _)| *t == g.entity_type) {
                Some((_, ms)) => ms.push(&g.mention),
                None => groups.push((&g.entity_type, vec![&g.mention])),
            }
        }
        groups
    }
}

impl Record for BenchmarkRecord {
    const KIND: &'static str = "benchmark_record";

    fn validate(&self) -> Result<(), InvariantViolation> {
        non_blank("id", &self.id)?;
        non_blank("dataset", &self.dataset)?;
        non_blank("domain", &self.domain)?;
        for g in &self.gold {
            if !self.allowed_types.contains(&g.entity_type) {
                return Err(InvariantViolation::new(
                    "gold",
                    format!("type {:?} is not in allowed_types", g.entity_type),
                ));
            }
            if g.mention.is_empty() || !self.text.contains(&g.mention) {
                return Err(InvariantViolation::new(
                    "gold",
                    format!("mention {:?} does not occur in text", g.mention),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Predictions

/// A prediction line as written by an inference run: the model's raw answer
/// to one `(record, type)` query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPrediction {
    pub record_id: String,
    pub entity_type: String,
    pub raw_output: String,
}

impl Record for RawPrediction {
    const KIND: &'static str = "prediction";

    fn validate(&self) -> Result<(), InvariantViolation> {
        non_blank("record_id", &self.record_id)?;
        non_blank("entity_type", &self.entity_type)
    }
}

/// A parsed prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    record_id: String,
    entity_type: String,
    mentions: Vec<String>,
    parse_ok: bool,
}

impl PredictionRecord {
    pub fn new(
        record_id: impl Into<String>,
        entity_type: impl Into<String>,
        mentions: Vec<String>,
        parse_ok: bool,
    ) -> Result<Self, InvariantViolation> {
        let p = PredictionRecord {
            record_id: record_id.into(),
            entity_type: entity_type.into(),
            mentions,
            parse_ok,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn record_id(&self) -> &str {
        &self.record_id
    }
    pub fn entity_type(&self) -> &str {
        &self.entity_type
    }
    pub fn mentions(&self) -> &[String] {
        &self.mentions
    }
    pub fn parse_ok(&self) -> bool {
        self.parse_ok
    }
}

impl Record for PredictionRecord {
    const KIND: &'static str = "prediction_record";

    fn validate(&self) -> Result<(), InvariantViolation> {
        non_blank("record_id", &self.record_id)?;
        if !self.parse_ok && !self.mentions.is_empty() {
            return Err(InvariantViolation::new(
                "mentions",
                "must be empty when parse_ok is false",
            ));
        }
        Ok(())
    }
}
