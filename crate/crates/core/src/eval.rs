//! Entity-level scoring of prediction files against a benchmark.
//!
//! Each record is queried once per allowed type. Gold and predictions are
//! multisets of `(type, mention)`; mentions compare by exact string equality.
//!
//! * Strict: a prediction counts only if type and mention both match a gold
//!   item. Per key, `tp += min(gold count, predicted count)`.
//! * Partial: strict pairs first; then each remaining gold item, in gold
//!   order, takes the first remaining prediction of the same type that shares
//!   a whitespace token with it, for half a true positive.
//!
//! In both regimes `fp = predictions - tp` and `fn = gold - tp`, so a
//! half-credit pair also leaves half a false positive and half a false
//! negative: precision is `tp / predictions` and recall `tp / gold`.
//!
//! Counts are micro-aggregated within a dataset. Domain and overall scores are
//! unweighted means of dataset F1. Any ratio with a zero denominator is 0, and
//! records with no gold are never padded with placeholder entities, so a
//! dataset of empty records with empty predictions scores 0.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{BenchmarkRecord, PredictionRecord, RawPrediction, TypedMention};
use crate::parse;
use crate::text;

/// True positive, false positive and false negative counts, kept in half
/// units so partial credit stays exact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct MatchCounts {
    pub tp_halves: u64,
    pub fp_halves: u64,
    pub fn_halves: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl MatchCounts {
    /// Counts from whole-unit predictions and gold totals and `tp` halves.
    fn from_totals(tp_halves: u64, predicted: usize, gold: usize) -> Self {
        MatchCounts {
            tp_halves,
            fp_halves: 2 * predicted as u64 - tp_halves,
            fn_halves: 2 * gold as u64 - tp_halves,
        }
    }

    pub fn tp(&self) -> f64 {
        self.tp_halves as f64 / 2.0
    }

    pub fn fp(&self) -> f64 {
        self.fp_halves as f64 / 2.0
    }

    pub fn fn_(&self) -> f64 {
        self.fn_halves as f64 / 2.0
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp(), self.tp() + self.fp())
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp(), self.tp() + self.fn_())
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        ratio(2.0 * p * r, p + r)
    }

    pub fn merge(self, other: MatchCounts) -> MatchCounts {
        MatchCounts {
            tp_halves: self.tp_halves + other.tp_halves,
            fp_halves: self.fp_halves + other.fp_halves,
            fn_halves: self.fn_halves + other.fn_halves,
        }
    }
}

/// Strict matching by per-key minimum counts.
pub fn match_strict(gold: &[TypedMention], preds: &[TypedMention]) -> MatchCounts {
    let mut gold_counts: HashMap<(&str, &str), u64> = HashMap::new();
    for g in gold {
        *gold_counts.entry((&g.entity_type, &g.mention)).or_default() += 1;
    }
    let mut pred_counts: HashMap<(&str, &str), u64> = HashMap::new();
    for p in preds {
        *pred_counts.entry((&p.entity_type, &p.mention)).or_default() += 1;
    }
    let tp: u64 = pred_counts
        .iter()
        .map(|(k, &c)| c.min(gold_counts.get(k).copied().unwrap_or(0)))
        .sum();
    MatchCounts::from_totals(2 * tp, preds.len(), gold.len())
}

/// Strict pairing followed by greedy half-credit token-overlap pairing.
pub fn match_partial(gold: &[TypedMention], preds: &[TypedMention]) -> MatchCounts {
    let mut pred_used = vec![false; preds.len()];
    let mut gold_used = vec![false; gold.len()];
    let mut exact = 0u64;
    for (gi, g) in gold.iter().enumerate() {
        if let Some(pi) = (0..preds.len()).find(|&pi| !pred_used[pi] && preds[pi] == *g) {
            pred_used[pi] = true;
            gold_used[gi] = true;
            exact += 1;
        }
    }
    let mut half = 0u64;
    for (gi, g) in gold.iter().enumerate() {
        if gold_used[gi] {
            continue;
        }
        let found = (0..preds.len()).find(|&pi| {
            !pred_used[pi] && preds[pi].entity_type == g.entity_type && text::shares_token(&preds[pi].mention, &g.mention)
        });
        if let Some(pi) = found {
            pred_used[pi] = true;
            gold_used[gi] = true;
            half += 1;
        }
    }
    MatchCounts::from_totals(2 * exact + half, preds.len(), gold.len())
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("duplicate prediction for record {record_id:?}, type {entity_type:?}")]
    DuplicatePrediction { record_id: String, entity_type: String },
    #[error("prediction refers to unknown record {0:?}")]
    UnknownRecordId(String),
    #[error("benchmark has duplicate record id {0:?}")]
    DuplicateRecordId(String),
    #[error("dataset {dataset:?} appears under domains {first:?} and {second:?}")]
    InconsistentDomain {
        dataset: String,
        first: String,
        second: String,
    },
}

/// A metric value that serializes with exactly four decimal places.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Metric(pub f64);

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = serde_json::value::RawValue::from_string(format!("{:.4}", self.0))
            .expect("a formatted float is valid JSON");
        raw.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scores {
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
    pub tp: Metric,
    pub fp: Metric,
    #[serde(rename = "fn")]
    pub fn_: Metric,
}

impl From<MatchCounts> for Scores {
    fn from(c: MatchCounts) -> Self {
        Scores {
            precision: Metric(c.precision()),
            recall: Metric(c.recall()),
            f1: Metric(c.f1()),
            tp: Metric(c.tp()),
            fp: Metric(c.fp()),
            fn_: Metric(c.fn_()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetReport {
    pub domain: String,
    pub records: usize,
    pub strict: Scores,
    pub partial: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageF1 {
    pub datasets: usize,
    pub strict_f1: Metric,
    pub partial_f1: Metric,
}

/// The `report.json` document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_dataset: BTreeMap<String, DatasetReport>,
    pub per_domain: BTreeMap<String, AverageF1>,
    pub overall: AverageF1,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Parses raw prediction lines.
pub fn parse_predictions(raw: &[RawPrediction]) -> Vec<PredictionRecord> {
    raw.iter()
        .map(|r| {
            let parsed = parse::parse_prediction_output(&r.raw_output);
            PredictionRecord::new(&r.record_id, text::nfc(&r.entity_type), parsed.mentions, parsed.parse_ok)
                .expect("parser output satisfies the record invariant")
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> (usize, f64) {
    let (n, sum) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n, if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Per-record strict and partial counts.
pub fn score_record(record: &BenchmarkRecord, preds: &[&PredictionRecord]) -> (MatchCounts, MatchCounts) {
    let mut sorted: Vec<&PredictionRecord> = preds.to_vec();
    // allowed types first, in their order, then stray types by name
    sorted.sort_by(|a, b| {
        let rank = |p: &PredictionRecord| !record.allowed_types().contains(p.entity_type());
        rank(a).cmp(&rank(b)).then_with(|| a.entity_type().cmp(b.entity_type()))
    });
    let predicted: Vec<TypedMention> = sorted
        .iter()
        .flat_map(|p| p.mentions().iter().map(|m| TypedMention::new(p.entity_type(), m.clone())))
        .collect();
    (match_strict(record.gold(), &predicted), match_partial(record.gold(), &predicted))
}

/// Scores parsed predictions against the benchmark.
pub fn evaluate_parsed(
    benchmark: &[BenchmarkRecord],
    predictions: &[PredictionRecord],
    exec: Execution,
) -> Result<EvalReport, EvalError> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut domains: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, r) in benchmark.iter().enumerate() {
        if index.insert(r.id(), i).is_some() {
            return Err(EvalError::DuplicateRecordId(r.id().to_owned()));
        }
        let d = domains.entry(r.dataset()).or_insert(r.domain());
        if *d != r.domain() {
            return Err(EvalError::InconsistentDomain {
                dataset: r.dataset().to_owned(),
                first: (*d).to_owned(),
                second: r.domain().to_owned(),
            });
        }
    }
    let mut by_record: Vec<Vec<&PredictionRecord>> = vec![Vec::new(); benchmark.len()];
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    for p in predictions {
        let &i = index
            .get(p.record_id())
            .ok_or_else(|| EvalError::UnknownRecordId(p.record_id().to_owned()))?;
        if !seen.insert((p.record_id(), p.entity_type())) {
            return Err(EvalError::DuplicatePrediction {
                record_id: p.record_id().to_owned(),
                entity_type: p.entity_type().to_owned(),
            });
        }
        by_record[i].push(p);
    }

    let indices: Vec<usize> = (0..benchmark.len()).collect();
    let scored = exec.map(&indices, |&i| score_record(&benchmark[i], &by_record[i]));

    let mut per_dataset_counts: BTreeMap<&str, (usize, MatchCounts, MatchCounts)> = BTreeMap::new();
    for (r, (strict, partial)) in benchmark.iter().zip(scored) {
        let e = per_dataset_counts.entry(r.dataset()).or_default();
        e.0 += 1;
        e.1 = e.1.merge(strict);
        e.2 = e.2.merge(partial);
    }

    let per_dataset: BTreeMap<String, DatasetReport> = per_dataset_counts
        .into_iter()
        .map(|(ds, (n, strict, partial))| {
            (
                ds.to_owned(),
                DatasetReport {
                    domain: domains[ds].to_owned(),
                    records: n,
                    strict: strict.into(),
                    partial: partial.into(),
                },
            )
        })
        .collect();

    let average = |reports: Vec<&DatasetReport>| {
        let (n, strict) = mean(reports.iter().map(|d| d.strict.f1.0));
        let (_, partial) = mean(reports.iter().map(|d| d.partial.f1.0));
        AverageF1 {
            datasets: n,
            strict_f1: Metric(strict),
            partial_f1: Metric(partial),
        }
    };
    let mut grouped: BTreeMap<&str, Vec<&DatasetReport>> = BTreeMap::new();
    for d in per_dataset.values() {
        grouped.entry(&d.domain).or_default().push(d);
    }
    let per_domain = grouped
        .into_iter()
        .map(|(dom, ds)| (dom.to_owned(), average(ds)))
        .collect();
    let overall = average(per_dataset.values().collect());
    Ok(EvalReport {
        per_dataset,
        per_domain,
        overall,
    })
}

/// Parses raw predictions and scores them.
pub fn evaluate(benchmark: &[BenchmarkRecord], predictions: &[RawPrediction], exec: Execution) -> Result<EvalReport, EvalError> {
    evaluate_parsed(benchmark, &parse_predictions(predictions), exec)
}
