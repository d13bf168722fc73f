//! Conversation-style instruction-tuning examples.
//!
//! A built conversation is:
//!
//! ```text
//! system:    A virtual assistant answers questions from a user based on the provided text.
//! user:      [Dataset: {D} \n ]Text: {passage}
//! assistant: I've read this text.
//! user:      What describes {type} in the text?        (one pair per queried type)
//! assistant: ["mention", ...]                           (in loss)
//! ```
//!
//! Positive types come first in first-appearance order, then sampled
//! negative types whose answer is `[]`. The all-in-one variant asks a single
//! question, `What describes ["t1","t2"] in the text?`, answered by one JSON
//! object mapping every queried type to its mention list, in query order.
//!
//! Mention lists are compact `serde_json` arrays, the same convention the
//! prediction parser reads back.

use std::collections::{BTreeSet, HashSet};

use rand::Rng;
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{AnnotatedPassage, BenchmarkRecord, ConversationExample, InvariantViolation, Message, Role};
use crate::seed;
use crate::stats::TypeFrequencyTable;

pub const SYSTEM_PREAMBLE: &str = "A virtual assistant answers questions from a user based on the provided text.";
pub const ACKNOWLEDGEMENT: &str = "I've read this text.";
pub const DEFAULT_NEGATIVES_PER_EXAMPLE: usize = 2;

const QUERY_PREFIX: &str = "What describes ";
const QUERY_SUFFIX: &str = " in the text?";
const TEXT_PREFIX: &str = "Text: ";
const DATASET_PREFIX: &str = "Dataset: ";
const DATASET_SEPARATOR: &str = " \n ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemplateVariant {
    #[default]
    PerType,
    AllInOne,
    /// Same shape as `PerType`; the queried "types" are definition sentences.
    Definition,
}

impl std::str::FromStr for TemplateVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-type" => Ok(TemplateVariant::PerType),
            "all-in-one" => Ok(TemplateVariant::AllInOne),
            "definition" => Ok(TemplateVariant::Definition),
            other => Err(format!(
                "unknown template variant {other:?} (expected per-type|all-in-one|definition)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeStrategy {
    #[default]
    None,
    Uniform {
        k: usize,
    },
    /// Draw proportional to corpus frequency, without replacement.
    Frequency {
        k: usize,
    },
}

impl NegativeStrategy {
    pub fn k(self) -> usize {
        match self {
            NegativeStrategy::None => 0,
            NegativeStrategy::Uniform { k } | NegativeStrategy::Frequency { k } => k,
        }
    }
}

/// Strategy plus the type vocabulary and seed it draws with.
#[derive(Debug, Clone, Default)]
pub struct NegativeSampling {
    pub strategy: NegativeStrategy,
    pub vocabulary: TypeFrequencyTable,
    pub seed: u64,
}

/// Sampled negative types, plus how many the strategy asked for but the
/// pool could not supply.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Negatives {
    pub types: Vec<String>,
    pub shortfall: usize,
}

/// Draws up to `k` items without replacement, each draw proportional to the
/// remaining weights. Weights must be positive.
pub fn draw_weighted<R: Rng + ?Sized>(mut pool: Vec<(String, u64)>, k: usize, rng: &mut R) -> Vec<String> {
    let mut out = Vec::with_capacity(k.min(pool.len()));
    let mut total: u64 = pool.iter().map(|(_, w)| w).sum();
    while out.len() < k && !pool.is_empty() {
        let mut r = rng.random_range(0..total);
        let idx = pool
            .iter()
            .position(|(_, w)| {
                if r < *w {
                    true
                } else {
                    r -= w;
                    false
                }
            })
            .expect("r < total");
        let (t, w) = pool.remove(idx);
        total -= w;
        out.push(t);
    }
    out
}

impl NegativeSampling {
    /// Samples negatives for one example from the whole vocabulary.
    pub fn sample(&self, positives: &HashSet<&str>, example_id: &str) -> Negatives {
        let pool = self
            .vocabulary
            .iter()
            .filter(|(t, _)| !positives.contains(t))
            .map(|(t, c)| (t.to_owned(), c));
        self.sample_from(pool.collect(), example_id)
    }

    /// Samples negatives from an explicit candidate set (the supervised
    /// setting). Frequency weights come from the vocabulary; candidates it
    /// has never seen weigh 1.
    pub fn sample_among(&self, candidates: &BTreeSet<String>, positives: &HashSet<&str>, example_id: &str) -> Negatives {
        let pool = candidates
            .iter()
            .filter(|t| !positives.contains(t.as_str()))
            .map(|t| (t.clone(), self.vocabulary.count(t).max(1)));
        self.sample_from(pool.collect(), example_id)
    }

    fn sample_from(&self, pool: Vec<(String, u64)>, example_id: &str) -> Negatives {
        let k = self.strategy.k();
        let shortfall = k.saturating_sub(pool.len());
        let pool = match self.strategy {
            NegativeStrategy::None => return Negatives::default(),
            NegativeStrategy::Uniform { .. } => pool.into_iter().map(|(t, _)| (t, 1)).collect(),
            NegativeStrategy::Frequency { .. } => pool,
        };
        let mut rng = seed::item_rng(self.seed, example_id);
        Negatives {
            types: draw_weighted(pool, k, &mut rng),
            shortfall,
        }
    }
}

/// Samples negatives for `positives` under `sampling`.
pub fn sample_negatives(positives: &HashSet<&str>, sampling: &NegativeSampling, example_id: &str) -> Negatives {
    sampling.sample(positives, example_id)
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("record {0} is malformed and cannot be rendered")]
    MalformedInput(String),
    #[error("dataset name {0:?} must be non-empty and single-line")]
    BadDatasetName(String),
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
}

fn mention_list<S: AsRef<str>>(mentions: &[S]) -> String {
    let v: Vec<&str> = mentions.iter().map(AsRef::as_ref).collect();
    serde_json::to_string(&v).expect("strings serialize")
}

/// Renders the conversation for one passage with already-chosen queries.
pub fn render(
    id: &str,
    passage_text: &str,
    positives: &[(&str, Vec<&str>)],
    negatives: &[String],
    variant: TemplateVariant,
    dataset: Option<&str>,
) -> Result<ConversationExample, BuildError> {
    if let Some(d) = dataset {
        if d.trim().is_empty() || d.contains('\n') {
            return Err(BuildError::BadDatasetName(d.to_owned()));
        }
    }
    let mut opening = String::new();
    if let Some(d) = dataset {
        opening.push_str(DATASET_PREFIX);
        opening.push_str(d);
        opening.push_str(DATASET_SEPARATOR);
    }
    opening.push_str(TEXT_PREFIX);
    opening.push_str(passage_text);

    let mut messages = vec![
        Message::new(Role::System, SYSTEM_PREAMBLE, false)?,
        Message::new(Role::User, opening, false)?,
        Message::new(Role::Assistant, ACKNOWLEDGEMENT, false)?,
    ];
    let queried = positives
        .iter()
        .map(|(t, ms)| (*t, ms.as_slice()))
        .chain(negatives.iter().map(|t| (t.as_str(), &[][..])));
    match variant {
        TemplateVariant::PerType | TemplateVariant::Definition => {
            for (t, ms) in queried {
                messages.push(Message::new(Role::User, format!("{QUERY_PREFIX}{t}{QUERY_SUFFIX}"), false)?);
                messages.push(Message::new(Role::Assistant, mention_list(ms), true)?);
            }
        }
        TemplateVariant::AllInOne => {
            let queried: Vec<_> = queried.collect();
            if !queried.is_empty() {
                let types: Vec<&str> = queried.iter().map(|(t, _)| *t).collect();
                // Built by hand so keys keep query order.
                let fields: Vec<String> = queried
                    .iter()
                    .map(|(t, ms)| format!("{}:{}", serde_json::to_string(t).expect("strings serialize"), mention_list(ms)))
                    .collect();
                let answer = format!("{{{}}}", fields.join(","));
                let question = format!(
                    "{QUERY_PREFIX}{}{QUERY_SUFFIX}",
                    serde_json::to_string(&types).expect("strings serialize")
                );
                messages.push(Message::new(Role::User, question, false)?);
                messages.push(Message::new(Role::Assistant, answer, true)?);
            }
        }
    }
    Ok(ConversationExample::new(id, dataset.map(str::to_owned), messages)?)
}

/// Builds the conversation for one annotated passage.
pub fn build_conversation(
    ap: &AnnotatedPassage,
    variant: TemplateVariant,
    sampling: &NegativeSampling,
    dataset: Option<&str>,
) -> Result<(ConversationExample, Negatives), BuildError> {
    if !ap.is_ok() {
        return Err(BuildError::MalformedInput(ap.passage().id().to_owned()));
    }
    let id = ap.passage().id();
    let positives = ap.mentions_by_type();
    let positive_set: HashSet<&str> = positives.iter().map(|(t, _)| *t).collect();
    let negatives = sampling.sample(&positive_set, id);
    let conv = render(id, ap.passage().text(), &positives, &negatives.types, variant, dataset)?;
    Ok((conv, negatives))
}

fn warn_shortfall(shortfalls: impl Iterator<Item = usize>) {
    let (n, missing) = shortfalls
        .filter(|&s| s > 0)
        .fold((0usize, 0usize), |(n, m), s| (n + 1, m + s));
    if n > 0 {
        log::warn!("vocabulary too small: {n} examples got {missing} fewer negatives than requested");
    }
}

/// Builds conversations for every `Ok` record; malformed records are skipped.
pub fn build_conversations(
    records: &[AnnotatedPassage],
    variant: TemplateVariant,
    sampling: &NegativeSampling,
    use_dataset_field: bool,
    exec: Execution,
) -> Result<Vec<ConversationExample>, BuildError> {
    let ok: Vec<&AnnotatedPassage> = records.iter().filter(|r| r.is_ok()).collect();
    let built = exec.map(&ok, |ap| {
        let dataset = use_dataset_field.then(|| ap.passage().source());
        build_conversation(ap, variant, sampling, dataset)
    });
    let built: Vec<_> = built.into_iter().collect::<Result<_, _>>()?;
    warn_shortfall(built.iter().map(|(_, n)| n.shortfall));
    Ok(built.into_iter().map(|(c, _)| c).collect())
}

/// Builds one conversation per supervised record. Negatives are drawn only
/// from the record's own allowed types.
pub fn build_supervised_conversations(
    records: &[BenchmarkRecord],
    variant: TemplateVariant,
    sampling: &NegativeSampling,
    use_dataset_field: bool,
    exec: Execution,
) -> Result<Vec<ConversationExample>, BuildError> {
    let built = exec.map(records, |r| {
        let positives = r.mentions_by_type();
        let positive_set: HashSet<&str> = positives.iter().map(|(t, _)| *t).collect();
        let negatives = sampling.sample_among(r.allowed_types(), &positive_set, r.id());
        let dataset = use_dataset_field.then(|| r.dataset());
        render(r.id(), r.text(), &positives, &negatives.types, variant, dataset).map(|c| (c, negatives))
    });
    let built: Vec<_> = built.into_iter().collect::<Result<_, _>>()?;
    warn_shortfall(built.iter().map(|(_, n)| n.shortfall));
    Ok(built.into_iter().map(|(c, _)| c).collect())
}

/// What [`extract`] recovers from a rendered conversation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub dataset: Option<String>,
    pub passage: String,
    pub positives: Vec<(String, Vec<String>)>,
    pub negatives: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("conversation does not follow the template: {0}")]
pub struct ExtractError(String);

fn bad(msg: impl Into<String>) -> ExtractError {
    ExtractError(msg.into())
}

fn query_subject(content: &str) -> Result<&str, ExtractError> {
    content
        .strip_prefix(QUERY_PREFIX)
        .and_then(|s| s.strip_suffix(QUERY_SUFFIX))
        .ok_or_else(|| bad(format!("unexpected query {content:?}")))
}

/// Inverse of the renderer: recovers the passage, dataset, queried types and
/// answers. Types with a non-empty answer are positives; the rest negatives.
pub fn extract(conv: &ConversationExample, variant: TemplateVariant) -> Result<Extracted, ExtractError> {
    let msgs = conv.messages();
    if msgs.len() < 3 || msgs[0].content() != SYSTEM_PREAMBLE || msgs[2].content() != ACKNOWLEDGEMENT {
        return Err(bad("missing preamble"));
    }
    let opening = msgs[1].content();
    let (dataset, rest) = match opening.strip_prefix(DATASET_PREFIX) {
        Some(after) => {
            let (d, rest) = after
                .split_once(DATASET_SEPARATOR)
                .ok_or_else(|| bad("dataset field without separator"))?;
            (Some(d.to_owned()), rest)
        }
        None => (None, opening),
    };
    let passage = rest
        .strip_prefix(TEXT_PREFIX)
        .ok_or_else(|| bad("opening turn lacks Text:"))?
        .to_owned();

    let mut answers: Vec<(String, Vec<String>)> = Vec::new();
    let pairs = msgs[3..].chunks(2);
    match variant {
        TemplateVariant::PerType | TemplateVariant::Definition => {
            for pair in pairs {
                let t = query_subject(pair[0].content())?;
                let ms: Vec<String> =
                    serde_json::from_str(pair[1].content()).map_err(|e| bad(format!("answer: {e}")))?;
                answers.push((t.to_owned(), ms));
            }
        }
        TemplateVariant::AllInOne => {
            let pairs: Vec<_> = pairs.collect();
            match pairs.as_slice() {
                [] => {}
                [pair] => {
                    let types: Vec<String> = serde_json::from_str(query_subject(pair[0].content())?)
                        .map_err(|e| bad(format!("query list: {e}")))?;
                    let mut obj: serde_json::Map<String, serde_json::Value> =
                        serde_json::from_str(pair[1].content()).map_err(|e| bad(format!("answer: {e}")))?;
                    for t in types {
                        let v = obj.remove(&t).ok_or_else(|| bad(format!("answer lacks {t:?}")))?;
                        let ms: Vec<String> = serde_json::from_value(v).map_err(|e| bad(e.to_string()))?;
                        answers.push((t, ms));
                    }
                    if !obj.is_empty() {
                        return Err(bad("answer has unqueried types"));
                    }
                }
                _ => return Err(bad("all-in-one conversation has several queries")),
            }
        }
    }
    let split = answers.iter().position(|(_, ms)| ms.is_empty()).unwrap_or(answers.len());
    let mut negatives = Vec::new();
    for (t, ms) in answers.drain(split..) {
        if !ms.is_empty() {
            return Err(bad(format!("positive type {t:?} queried after a negative")));
        }
        negatives.push(t);
    }
    Ok(Extracted {
        dataset,
        passage,
        positives: answers,
        negatives,
    })
}
