//! Random domain values for property checks.

use std::collections::HashSet;

use nerforge::conversation::{build_conversation, extract, NegativeSampling, NegativeStrategy, TemplateVariant};
use nerforge::model::{AnnotatedPassage, AnnotationKind, EntityAnnotation, Passage};
use nerforge::stats::TypeFrequencyTable;
use rand::seq::IndexedRandom;
use rand::Rng;

const WORDS: &[&str] = &[
    "Bob", "works", "at", "Acme", "in", "New", "York", "\"quoted\"", "back\\slash", "{braces}", "café", "東京",
    "it's", "[list]", "Dataset:", "Text:", "a,b", "x\ty",
];
const TYPES: &[&str] = &[
    "person", "organization", "location", "city", "\"odd\" type", "a person who writes software",
    "type, with comma", "what", "ñ",
];
const SOURCES: &[&str] = &["pile", "wiki news", "conll2003", "Dataset: x"];

fn words<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> String {
    let n = rng.random_range(lo..=hi);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn annotated_passage<R: Rng>(rng: &mut R, id: usize) -> AnnotatedPassage {
    let p = Passage::new(format!("p{id:05}"), *SOURCES.choose(rng).unwrap(), words(rng, 1, 30)).unwrap();
    let kind = if rng.random_bool(0.5) { AnnotationKind::TypeName } else { AnnotationKind::Definition };
    let ents = (0..rng.random_range(0..6))
        .map(|_| EntityAnnotation::new(words(rng, 1, 3), *TYPES.choose(rng).unwrap(), kind).unwrap())
        .collect();
    AnnotatedPassage::ok(p, ents, String::new())
}

pub fn sampling<R: Rng>(rng: &mut R) -> NegativeSampling {
    let mut vocabulary = TypeFrequencyTable::new();
    for t in TYPES {
        if rng.random_bool(0.6) {
            vocabulary.add_count(t, rng.random_range(1..50));
        }
    }
    let k = rng.random_range(0..4);
    let strategy = match rng.random_range(0..3) {
        0 => NegativeStrategy::None,
        1 => NegativeStrategy::Uniform { k },
        _ => NegativeStrategy::Frequency { k },
    };
    NegativeSampling {
        strategy,
        vocabulary,
        seed: rng.random(),
    }
}

/// Builds the conversation and checks the extractor recovers every input.
pub fn round_trip(
    ap: &AnnotatedPassage,
    variant: TemplateVariant,
    sampling: &NegativeSampling,
    use_dataset: bool,
) -> Result<(), String> {
    let dataset = use_dataset.then(|| ap.passage().source());
    let (conv, negatives) = build_conversation(ap, variant, sampling, dataset).map_err(|e| e.to_string())?;
    let got = extract(&conv, variant).map_err(|e| e.to_string())?;
    let positives: Vec<(String, Vec<String>)> = ap
        .mentions_by_type()
        .into_iter()
        .map(|(t, ms)| (t.to_string(), ms.into_iter().map(String::from).collect()))
        .collect();
    let positive_set: HashSet<&str> = positives.iter().map(|(t, _)| t.as_str()).collect();
    let checks = [
        (got.passage == ap.passage().text(), "passage"),
        (got.dataset.as_deref() == dataset, "dataset"),
        (got.positives == positives, "positives"),
        (got.negatives == negatives.types, "negatives"),
        (got.negatives.iter().all(|t| !positive_set.contains(t.as_str())), "negatives overlap positives"),
        (conv.messages().iter().filter(|m| m.in_loss()).count() > 0 || (positives.is_empty() && negatives.types.is_empty()), "loss mask"),
    ];
    match checks.iter().find(|(ok, _)| !ok) {
        Some((_, what)) => Err(format!("{what} mismatch for {}: {got:?}", ap.passage().id())),
        None => Ok(()),
    }
}

/// Runs `n` random passages through every variant and dataset setting;
/// returns the failures.
pub fn round_trip_failures<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    let mut failures = Vec::new();
    for i in 0..n {
        let ap = annotated_passage(rng, i);
        let s = sampling(rng);
        for variant in [TemplateVariant::PerType, TemplateVariant::AllInOne, TemplateVariant::Definition] {
            for use_dataset in [false, true] {
                if let Err(e) = round_trip(&ap, variant, &s, use_dataset) {
                    failures.push(format!("{variant:?} dataset={use_dataset}: {e}"));
                }
            }
        }
    }
    failures
}
