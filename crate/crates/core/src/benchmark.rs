//! Harmonizing third-party NER datasets into [`BenchmarkRecord`]s.
//!
//! The flow is adapter → (document splitting) → label normalization → cap.
//! Adapters read CoNLL column files (already sentence level) or span-offset
//! JSONL documents. Offsets in span files count Unicode scalar values.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::model::{BenchmarkRecord, InvariantViolation, TypedMention};
use crate::seed;
use crate::text;

pub const DEFAULT_QUERY_CAP: usize = 200_000;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("label map has no entry for dataset {0:?}")]
    UnknownDataset(String),
    #[error("dataset {dataset:?} has unmapped labels: {labels:?}")]
    UnknownLabel { dataset: String, labels: Vec<String> },
    #[error("label map: {0}")]
    BadLabelMap(String),
    #[error("document {doc}: offset {start}..{end} outside text of length {len}")]
    OffsetOutOfRange {
        doc: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("{context}: {message}")]
    Format { context: String, message: String },
    #[error("record {id}: {violation}")]
    Invariant { id: String, violation: InvariantViolation },
}

// ---------------------------------------------------------------------------
// Label maps

/// What to do with one raw label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Option<String>", into = "Option<String>")]
pub enum LabelAction {
    Rename(String),
    Drop,
}

impl From<Option<String>> for LabelAction {
    fn from(v: Option<String>) -> Self {
        v.map_or(LabelAction::Drop, LabelAction::Rename)
    }
}

impl From<LabelAction> for Option<String> {
    fn from(a: LabelAction) -> Self {
        match a {
            LabelAction::Rename(s) => Some(s),
            LabelAction::Drop => None,
        }
    }
}

/// Raw label → action for one dataset. Rejects duplicate keys on load.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DatasetLabels(pub BTreeMap<String, LabelAction>);

impl<'de> Deserialize<'de> for DatasetLabels {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = DatasetLabels;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of raw label -> natural name or null")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((k, v)) = map.next_entry::<String, LabelAction>()? {
                    if out.insert(k.clone(), v).is_some() {
                        return Err(serde::de::Error::custom(format!("label {k:?} listed twice")));
                    }
                }
                Ok(DatasetLabels(out))
            }
        }
        de.deserialize_map(V)
    }
}

/// Per-dataset label maps, as stored in `labelmaps.json`:
///
/// ```json
/// {"version": 1, "datasets": {"conll03": {"PER": "person", "MISC": null}}}
/// ```
///
/// A string renames the label; `null` drops it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMap {
    pub version: u32,
    pub datasets: BTreeMap<String, DatasetLabels>,
}

fn is_natural_name(name: &str) -> bool {
    !name.is_empty()
        && name.split(' ').all(|w| !w.is_empty() && !w.chars().any(char::is_whitespace))
        && name.to_lowercase() == name
}

impl LabelMap {
    pub fn from_json(data: &str) -> Result<Self, BenchmarkError> {
        let map: LabelMap = serde_json::from_str(data).map_err(|e| BenchmarkError::BadLabelMap(e.to_string()))?;
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        for (ds, labels) in &self.datasets {
            for (raw, action) in &labels.0 {
                if let LabelAction::Rename(name) = action {
                    if !is_natural_name(name) {
                        return Err(BenchmarkError::BadLabelMap(format!(
                            "{ds}/{raw}: {name:?} is not lowercase space-separated words"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetLabels, BenchmarkError> {
        self.datasets
            .get(name)
            .ok_or_else(|| BenchmarkError::UnknownDataset(name.to_owned()))
    }
}

impl DatasetLabels {
    /// The natural names queried for this dataset.
    pub fn allowed_types(&self) -> BTreeSet<String> {
        self.0
            .values()
            .filter_map(|a| match a {
                LabelAction::Rename(n) => Some(n.clone()),
                LabelAction::Drop => None,
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Raw records

/// A sentence with raw-label gold mentions, before normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub text: String,
    /// `(raw label, mention)` pairs in order.
    pub gold: Vec<(String, String)>,
}

/// Rewrites raw labels through the dataset's map.
///
/// Every raw label must be mapped; all unmapped labels are reported together.
/// Dropped labels vanish from gold and from `allowed_types`. Records whose
/// gold becomes empty are kept.
pub fn normalize_labels(
    raw: &[RawRecord],
    dataset: &str,
    domain: &str,
    map: &LabelMap,
) -> Result<Vec<BenchmarkRecord>, BenchmarkError> {
    let labels = map.dataset(dataset)?;
    let unknown: BTreeSet<&str> = raw
        .iter()
        .flat_map(|r| r.gold.iter().map(|(l, _)| l.as_str()))
        .filter(|l| !labels.0.contains_key(*l))
        .collect();
    if !unknown.is_empty() {
        return Err(BenchmarkError::UnknownLabel {
            dataset: dataset.to_owned(),
            labels: unknown.into_iter().map(str::to_owned).collect(),
        });
    }
    let allowed = labels.allowed_types();
    raw.iter()
        .map(|r| {
            let gold = r
                .gold
                .iter()
                .filter_map(|(label, mention)| match &labels.0[label] {
                    LabelAction::Rename(name) => Some(TypedMention::new(name.clone(), mention.clone())),
                    LabelAction::Drop => None,
                })
                .collect();
            BenchmarkRecord::new(&r.id, dataset, domain, &r.text, gold, allowed.clone()).map_err(|violation| {
                BenchmarkError::Invariant {
                    id: r.id.clone(),
                    violation,
                }
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Documents and sentence splitting

/// A labeled character span within a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanEntity {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// A document with character-offset entities and sentence boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocRecord {
    pub id: String,
    pub text: String,
    pub entities: Vec<SpanEntity>,
    /// Half-open character ranges, ascending and non-overlapping.
    pub sentences: Vec<(usize, usize)>,
}

/// One document's sentences and the text between them.
///
/// `separators` has one more entry than `sentences`: the text before the
/// first sentence, between each pair, and after the last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDocument {
    pub sentences: Vec<RawRecord>,
    pub separators: Vec<String>,
}

impl SplitDocument {
    /// Reassembles the document text.
    pub fn reassemble(&self) -> String {
        let mut out = self.separators[0].clone();
        for (s, sep) in self.sentences.iter().zip(&self.separators[1..]) {
            out.push_str(&s.text);
            out.push_str(sep);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitOutput {
    pub documents: Vec<SplitDocument>,
    /// Entities dropped because they cross a sentence boundary.
    pub dropped_crossing: usize,
}

impl SplitOutput {
    pub fn into_records(self) -> Vec<RawRecord> {
        self.documents.into_iter().flat_map(|d| d.sentences).collect()
    }
}

/// Sentence ranges from a simple splitter: a sentence ends at a token ending
/// in `.`, `!` or `?` that is followed by whitespace or the end of text.
pub fn default_sentence_bounds(text: &str) -> Vec<(usize, usize)> {
    // char offset of each byte boundary we need
    let char_at: BTreeMap<usize, usize> = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .enumerate()
        .map(|(c, b)| (b, c))
        .collect();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (s, e) in text::token_spans(text) {
        let begin = *start.get_or_insert(s);
        if text[s..e].ends_with(['.', '!', '?']) {
            out.push((char_at[&begin], char_at[&e]));
            start = None;
        }
    }
    if let Some(begin) = start {
        let last_end = text.trim_end().len();
        out.push((char_at[&begin], char_at[&last_end]));
    }
    out
}

/// Splits documents into sentence records.
///
/// Each entity goes to the sentence containing it, with offsets rebased; an
/// entity not inside a single sentence is dropped and counted. Sentence ids
/// are `{doc id}-{index:03}`.
pub fn split_documents(docs: &[DocRecord]) -> Result<SplitOutput, BenchmarkError> {
    let mut out = SplitOutput::default();
    for doc in docs {
        let byte_of: Vec<usize> = doc
            .text
            .char_indices()
            .map(|(b, _)| b)
            .chain(std::iter::once(doc.text.len()))
            .collect();
        let len = byte_of.len() - 1;
        let oob = |start, end| BenchmarkError::OffsetOutOfRange {
            doc: doc.id.clone(),
            start,
            end,
            len,
        };
        let mut prev_end = 0;
        for &(s, e) in &doc.sentences {
            if s < prev_end || s >= e || e > len {
                return Err(oob(s, e));
            }
            prev_end = e;
        }
        for ent in &doc.entities {
            if ent.start >= ent.end || ent.end > len {
                return Err(oob(ent.start, ent.end));
            }
        }

        let mut sentences: Vec<RawRecord> = Vec::with_capacity(doc.sentences.len());
        let mut separators = Vec::with_capacity(doc.sentences.len() + 1);
        let mut cursor = 0;
        for (i, &(s, e)) in doc.sentences.iter().enumerate() {
            separators.push(doc.text[byte_of[cursor]..byte_of[s]].to_owned());
            cursor = e;
            let sentence_text = &doc.text[byte_of[s]..byte_of[e]];
            let gold = doc
                .entities
                .iter()
                .filter(|ent| ent.start >= s && ent.end <= e)
                .map(|ent| {
                    (
                        ent.label.clone(),
                        doc.text[byte_of[ent.start]..byte_of[ent.end]].to_owned(),
                    )
                })
                .collect();
            sentences.push(RawRecord {
                id: format!("{}-{i:03}", doc.id),
                text: sentence_text.to_owned(),
                gold,
            });
        }
        separators.push(doc.text[byte_of[cursor]..].to_owned());

        let kept: usize = sentences.iter().map(|s| s.gold.len()).sum();
        out.dropped_crossing += doc.entities.len() - kept;
        out.documents.push(SplitDocument { sentences, separators });
    }
    if out.dropped_crossing > 0 {
        log::warn!("dropped {} entities crossing sentence boundaries", out.dropped_crossing);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Input adapters

/// Reads CoNLL column data: one token per line, the tag in the last column
/// (BIO or IOB1), blank lines between sentences, `-DOCSTART-` lines ignored.
/// Sentence text is the tokens joined by single spaces. Records are numbered
/// `{prefix}-{n:06}`.
pub fn read_conll(data: &str, prefix: &str) -> Result<Vec<RawRecord>, BenchmarkError> {
    let mut out = Vec::new();
    let mut tokens: Vec<(String, String)> = Vec::new();
    let flush = |tokens: &mut Vec<(String, String)>, out: &mut Vec<RawRecord>| {
        if tokens.is_empty() {
            return;
        }
        let text = tokens.iter().map(|(t, _)| t.as_str()).collect::<Vec<_>>().join(" ");
        let mut gold: Vec<(String, String)> = Vec::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        for (tok, tag) in tokens.iter() {
            let (scheme, label) = match tag.split_once('-') {
                Some((p, l)) if matches!(p, "B" | "I" | "E" | "S") => (p, l),
                _ => ("O", ""),
            };
            let continues = matches!(scheme, "I" | "E")
                && current.as_ref().is_some_and(|(l, _)| l == label);
            if continues {
                current.as_mut().expect("checked").1.push(tok);
                continue;
            }
            if let Some((l, ws)) = current.take() {
                gold.push((l, ws.join(" ")));
            }
            if scheme != "O" {
                current = Some((label.to_owned(), vec![tok]));
            }
        }
        if let Some((l, ws)) = current.take() {
            gold.push((l, ws.join(" ")));
        }
        out.push(RawRecord {
            id: format!("{prefix}-{:06}", out.len()),
            text: text::nfc(&text),
            gold: gold.into_iter().map(|(l, m)| (l, text::nfc(&m))).collect(),
        });
        tokens.clear();
    };
    for (n, line) in data.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            flush(&mut tokens, &mut out);
            continue;
        }
        if line.starts_with("-DOCSTART-") {
            flush(&mut tokens, &mut out);
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 2 {
            return Err(BenchmarkError::Format {
                context: format!("conll line {}", n + 1),
                message: "expected at least a token and a tag column".into(),
            });
        }
        tokens.push((cols[0].to_owned(), cols[cols.len() - 1].to_owned()));
    }
    flush(&mut tokens, &mut out);
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpanLine {
    id: String,
    text: String,
    #[serde(default)]
    entities: Vec<SpanEntity>,
    #[serde(default)]
    sentences: Option<Vec<(usize, usize)>>,
}

/// Reads span-offset JSONL documents:
/// `{"id", "text", "entities": [{"start","end","label"}], "sentences"?: [[s,e],...]}`.
/// Documents without `sentences` get [`default_sentence_bounds`].
pub fn read_span_documents(data: &str) -> Result<Vec<DocRecord>, BenchmarkError> {
    let mut out = Vec::new();
    for (n, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: SpanLine = serde_json::from_str(line).map_err(|e| BenchmarkError::Format {
            context: format!("spans line {}", n + 1),
            message: e.to_string(),
        })?;
        // Offsets refer to the text as given, so normalization happens after
        // splitting.
        let sentences = l.sentences.unwrap_or_else(|| default_sentence_bounds(&l.text));
        out.push(DocRecord {
            id: l.id,
            text: l.text,
            entities: l.entities,
            sentences,
        });
    }
    Ok(out)
}

/// NFC-normalizes text and mentions of split records.
pub fn normalize_text(records: Vec<RawRecord>) -> Vec<RawRecord> {
    records
        .into_iter()
        .map(|r| RawRecord {
            id: r.id,
            text: text::nfc(&r.text),
            gold: r.gold.into_iter().map(|(l, m)| (l, text::nfc(&m))).collect(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Capping

/// Limits a dataset to at most `cap` passage-query pairs, counting one pair
/// per allowed type of each record.
///
/// Datasets within the cap are returned unchanged. Otherwise records are
/// taken in seeded shuffled order until the next one would not fit, and the
/// survivors are returned in their original order.
pub fn cap_queries(records: &[BenchmarkRecord], cap: usize, seed: u64) -> Vec<BenchmarkRecord> {
    let pairs = |r: &BenchmarkRecord| r.allowed_types().len();
    let total: usize = records.iter().map(pairs).sum();
    if total <= cap {
        return records.to_vec();
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut seed::stage_rng(seed));
    let mut used = 0;
    let mut keep = HashSet::new();
    for i in order {
        let p = pairs(&records[i]);
        if used + p > cap {
            break;
        }
        used += p;
        keep.insert(i);
    }
    records
        .iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, r)| r.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(json: &str) -> LabelMap {
        LabelMap::from_json(json).unwrap()
    }

    fn raw(id: &str, text: &str, gold: &[(&str, &str)]) -> RawRecord {
        RawRecord {
            id: id.into(),
            text: text.into(),
            gold: gold.iter().map(|(l, m)| (l.to_string(), m.to_string())).collect(),
        }
    }

    const MAP: &str = r#"{"version":1,"datasets":{"d":{"per":"person","ELSE":null,"location":"location"}}}"#;

    #[test]
    fn renames_labels() {
        let out = normalize_labels(&[raw("r", "Obama spoke", &[("per", "Obama")])], "d", "general", &map(MAP)).unwrap();
        assert_eq!(out[0].gold(), [TypedMention::new("person", "Obama")]);
        assert!(out[0].allowed_types().contains("person"));
        assert!(out[0].allowed_types().contains("location"));
    }

    #[test]
    fn dropped_labels_leave_empty_gold() {
        let out = normalize_labels(&[raw("r", "x y", &[("ELSE", "x")])], "d", "general", &map(MAP)).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].gold().is_empty());
        assert!(!out[0].allowed_types().contains("ELSE"));
    }

    #[test]
    fn identity_rename_is_unchanged() {
        let out = normalize_labels(&[raw("r", "in Rome", &[("location", "Rome")])], "d", "g", &map(MAP)).unwrap();
        assert_eq!(out[0].gold(), [TypedMention::new("location", "Rome")]);
    }

    #[test]
    fn unknown_labels_and_datasets() {
        let err = normalize_labels(&[raw("r", "a b", &[("ORG", "a"), ("MISC", "b")])], "d", "g", &map(MAP)).unwrap_err();
        match err {
            BenchmarkError::UnknownLabel { labels, .. } => assert_eq!(labels, ["MISC", "ORG"]),
            other => panic!("{other}"),
        }
        assert!(matches!(
            normalize_labels(&[], "nope", "g", &map(MAP)),
            Err(BenchmarkError::UnknownDataset(_))
        ));
    }

    #[test]
    fn label_map_validation() {
        assert!(LabelMap::from_json(r#"{"version":1,"datasets":{"d":{"a":"Person"}}}"#).is_err());
        assert!(LabelMap::from_json(r#"{"version":1,"datasets":{"d":{"a":"two  spaces"}}}"#).is_err());
        assert!(LabelMap::from_json(r#"{"version":1,"datasets":{"d":{"a":"x","a":"y"}}}"#).is_err());
        assert!(LabelMap::from_json(r#"{"version":1,"datasets":{"d":{"a":"medical condition"}}}"#).is_ok());
    }

    fn doc(text: &str, ents: &[(usize, usize, &str)], sentences: Vec<(usize, usize)>) -> DocRecord {
        DocRecord {
            id: "doc".into(),
            text: text.into(),
            entities: ents
                .iter()
                .map(|&(s, e, l)| SpanEntity { start: s, end: e, label: l.into() })
                .collect(),
            sentences,
        }
    }

    #[test]
    fn two_sentences_one_entity_each() {
        let text = "Bob ran. Ann swam.";
        let d = doc(text, &[(0, 3, "per"), (9, 12, "per")], default_sentence_bounds(text));
        let out = split_documents(&[d]).unwrap();
        assert_eq!(out.dropped_crossing, 0);
        let recs = out.documents[0].sentences.clone();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].gold, [("per".to_string(), "Bob".to_string())]);
        assert_eq!(recs[1].text, "Ann swam.");
        assert_eq!(recs[1].gold, [("per".to_string(), "Ann".to_string())]);
        assert_eq!(recs[1].id, "doc-001");
    }

    #[test]
    fn crossing_entity_is_dropped() {
        let text = "Bob ran. Ann swam.";
        let d = doc(text, &[(4, 12, "x")], default_sentence_bounds(text));
        let out = split_documents(&[d]).unwrap();
        assert_eq!(out.dropped_crossing, 1);
        assert!(out.into_records().iter().all(|r| r.gold.is_empty()));
    }

    #[test]
    fn entity_free_document_yields_empty_records() {
        let text = "One. Two! Three?";
        let out = split_documents(&[doc(text, &[], default_sentence_bounds(text))]).unwrap();
        assert_eq!(out.documents[0].sentences.len(), 3);
        assert_eq!(out.documents[0].reassemble(), text);
    }

    #[test]
    fn offsets_are_checked() {
        let d = doc("abc", &[(1, 9, "x")], vec![(0, 3)]);
        assert!(matches!(split_documents(&[d]), Err(BenchmarkError::OffsetOutOfRange { .. })));
        let d = doc("abc", &[], vec![(0, 4)]);
        assert!(matches!(split_documents(&[d]), Err(BenchmarkError::OffsetOutOfRange { .. })));
    }

    #[test]
    fn character_offsets_handle_multibyte_text() {
        let text = "Zoë left. Jürgen came.";
        let d = doc(text, &[(10, 16, "per")], default_sentence_bounds(text));
        let recs = split_documents(&[d]).unwrap().into_records();
        assert_eq!(recs[1].gold[0].1, "Jürgen");
    }

    #[test]
    fn conll_reader() {
        let data = "-DOCSTART- -X- O O\n\nEU NNP B-ORG\nrejects VBZ O\nGerman JJ B-MISC\ncall NN O\n\nPeter NNP B-PER\nBlackburn NNP I-PER\n";
        let recs = read_conll(data, "conll03").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].text, "EU rejects German call");
        assert_eq!(recs[0].gold, [("ORG".into(), "EU".into()), ("MISC".into(), "German".into())]);
        assert_eq!(recs[1].gold, [("PER".to_string(), "Peter Blackburn".to_string())]);
        assert_eq!(recs[1].id, "conll03-000001");
    }

    #[test]
    fn conll_iob1_and_adjacent_entities() {
        let data = "A x I-LOC\nB x I-LOC\nC x B-LOC\nD x I-PER\n";
        let recs = read_conll(data, "p").unwrap();
        assert_eq!(
            recs[0].gold,
            [("LOC".into(), "A B".into()), ("LOC".into(), "C".into()), ("PER".into(), "D".into())]
        );
    }

    #[test]
    fn span_reader_defaults_sentences() {
        let docs = read_span_documents(r#"{"id":"d1","text":"A b. C d.","entities":[{"start":0,"end":1,"label":"x"}]}"#).unwrap();
        assert_eq!(docs[0].sentences, vec![(0, 4), (5, 9)]);
    }

    fn bench(n: usize, types: usize) -> Vec<BenchmarkRecord> {
        let allowed: BTreeSet<String> = (0..types).map(|i| format!("t{i}")).collect();
        (0..n)
            .map(|i| BenchmarkRecord::new(format!("r{i}"), "d", "g", "x", vec![], allowed.clone()).unwrap())
            .collect()
    }

    #[test]
    fn cap_passes_small_datasets_through() {
        let recs = bench(10, 3);
        assert_eq!(cap_queries(&recs, DEFAULT_QUERY_CAP, 1), recs);
    }

    #[test]
    fn cap_takes_whole_records() {
        let recs = bench(7, 3);
        let out = cap_queries(&recs, 9, 1);
        assert_eq!(out.len(), 3);
        assert_eq!(out, cap_queries(&recs, 9, 1));
        let ids: Vec<_> = out.iter().map(|r| r.id().to_owned()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    proptest! {
        #[test]
        fn split_reassembles_and_conserves_entities(
            sentences in prop::collection::vec("[A-Za-zé]{1,5}( [a-z]{1,4}){0,3}[.!?]", 1..6),
            gaps in prop::collection::vec(prop::sample::select(vec![" ", "  ", "\n", " \t"]), 6),
            lead in prop::sample::select(vec!["", " ", "\n"]),
            ents in prop::collection::vec((0usize..60, 1usize..8), 0..6),
        ) {
            let mut text = lead.to_string();
            for (i, s) in sentences.iter().enumerate() {
                if i > 0 { text.push_str(gaps[i]); }
                text.push_str(s);
            }
            let len = text.chars().count();
            let entities: Vec<(usize, usize, &str)> = ents
                .iter()
                .filter(|(s, w)| s + w <= len)
                .map(|&(s, w)| (s, s + w, "x"))
                .collect();
            let d = doc(&text, &entities, default_sentence_bounds(&text));
            let out = split_documents(std::slice::from_ref(&d)).unwrap();
            prop_assert_eq!(out.documents[0].reassemble(), text);
            let kept: usize = out.documents[0].sentences.iter().map(|s| s.gold.len()).sum();
            prop_assert_eq!(kept, entities.len() - out.dropped_crossing);
            prop_assert_eq!(out.documents[0].sentences.len(), sentences.len());
        }
    }
}
