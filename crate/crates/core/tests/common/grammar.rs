//! The committed grammar fixture corpus and a seeded fuzz-input generator.

use nerforge::model::MalformedReason;
use nerforge::parse;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::grammar_oracle;

pub const CASES: &str = include_str!("../../fixtures/grammar_cases.jsonl");

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Ok(Vec<serde_json::Value>),
    Err(String),
}

#[derive(Debug, Clone, Deserialize)]
pub struct Case {
    pub class: String,
    pub mode: String,
    pub input: String,
    pub expect: Expect,
}

pub fn cases() -> Vec<Case> {
    CASES
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("fixture line"))
        .collect()
}

/// Outcome in fixture vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok(Vec<serde_json::Value>),
    Err(String),
}

impl From<&Expect> for Outcome {
    fn from(e: &Expect) -> Self {
        match e {
            Expect::Ok(v) => Outcome::Ok(v.clone()),
            Expect::Err(r) => Outcome::Err(r.clone()),
        }
    }
}

fn tuple_outcome(r: Result<Vec<(String, String)>, MalformedReason>) -> Outcome {
    match r {
        Ok(ps) => Outcome::Ok(ps.into_iter().map(|(m, t)| serde_json::json!([m, t])).collect()),
        Err(e) => Outcome::Err(e.to_string()),
    }
}

fn mention_outcome(r: Option<Vec<String>>) -> Outcome {
    match r {
        Some(ms) => Outcome::Ok(ms.into_iter().map(serde_json::Value::String).collect()),
        None => Outcome::Err("unparsed".into()),
    }
}

pub fn library(mode: &str, input: &str) -> Outcome {
    match mode {
        "tuples" => tuple_outcome(parse::parse_tuple_list(input)),
        _ => {
            let p = parse::parse_prediction_output(input);
            if p.parse_ok {
                mention_outcome(Some(p.mentions))
            } else {
                assert!(p.mentions.is_empty(), "unparsed output must carry no mentions");
                mention_outcome(None)
            }
        }
    }
}

pub fn oracle(mode: &str, input: &str) -> Outcome {
    match mode {
        "tuples" => tuple_outcome(grammar_oracle::tuples(input)),
        _ => mention_outcome(grammar_oracle::mentions(input)),
    }
}

const FRAGMENTS: &[&str] = &[
    "[", "]", "(", ")", ",", ", ", "\"", "'", "\\", " ", "\n", "a", "Bob", "\"x\"", "'y'", "\"\"",
    "(\"a\", \"b\")", "('c', 'd')", "\"e\\\"f\"", "\\u00e9", "\\ud800", "\\n", "é", "e\u{301}", "1",
    "null", "Sure: ", "{", "}", ":", "東京", "\t", "\\'",
];

fn mutate(rng: &mut ChaCha8Rng, seed: &str) -> String {
    let mut cs: Vec<char> = seed.chars().collect();
    for _ in 0..rng.random_range(1..4) {
        let pos = rng.random_range(0..=cs.len());
        match rng.random_range(0..3) {
            0 if pos < cs.len() => {
                cs.remove(pos);
            }
            1 if pos < cs.len() => {
                let other = rng.random_range(0..cs.len());
                cs.swap(pos, other);
            }
            _ => {
                let frag = FRAGMENTS.choose(rng).unwrap();
                for (k, c) in frag.chars().enumerate() {
                    cs.insert(pos + k, c);
                }
            }
        }
    }
    cs.into_iter().collect()
}

/// `n` fuzz inputs: half free concatenations of grammar fragments, half
/// mutations of fixture inputs.
pub fn fuzz_inputs(n: usize, seed: u64) -> Vec<String> {
    let seeds: Vec<String> = cases().into_iter().map(|c| c.input).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                let len = rng.random_range(0..16);
                (0..len).map(|_| *FRAGMENTS.choose(&mut rng).unwrap()).collect()
            } else {
                let s = seeds.choose(&mut rng).unwrap().clone();
                mutate(&mut rng, &s)
            }
        })
        .collect()
}

/// Runs the fixture corpus; returns descriptions of every disagreement.
pub fn corpus_disagreements() -> Vec<String> {
    let mut bad = Vec::new();
    for (n, case) in cases().iter().enumerate() {
        let want = Outcome::from(&case.expect);
        let got = library(&case.mode, &case.input);
        let reference = oracle(&case.mode, &case.input);
        if got != want || reference != want {
            bad.push(format!(
                "line {}: {:?} expected {:?}, library {:?}, oracle {:?}",
                n + 1,
                case.input,
                want,
                got,
                reference
            ));
        }
    }
    bad
}

/// Runs `n` fuzz inputs through both parsers in both modes; returns the
/// disagreements. A panic in the library propagates.
pub fn fuzz_disagreements(n: usize, seed: u64) -> Vec<String> {
    let mut bad = Vec::new();
    for input in fuzz_inputs(n, seed) {
        for mode in ["tuples", "mentions"] {
            let got = library(mode, &input);
            let reference = oracle(mode, &input);
            if got != reference {
                bad.push(format!("{mode} {input:?}: library {got:?}, oracle {reference:?}"));
            }
        }
    }
    bad
}
