//! Brute-force scorers for small records, plus a generator of noisy
//! gold/prediction pairs.

use nerforge::model::TypedMention;
use rand::seq::IndexedRandom;
use rand::Rng;

/// Strict true positives by sorting both sides and walking them together.
pub fn strict_tp(gold: &[TypedMention], preds: &[TypedMention]) -> u64 {
    let key = |m: &TypedMention| (m.entity_type.clone(), m.mention.clone());
    let mut g: Vec<_> = gold.iter().map(key).collect();
    let mut p: Vec<_> = preds.iter().map(key).collect();
    g.sort();
    p.sort();
    let (mut i, mut j, mut tp) = (0, 0, 0);
    while i < g.len() && j < p.len() {
        match g[i].cmp(&p[j]) {
            std::cmp::Ordering::Equal => {
                tp += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    tp
}

fn overlaps(a: &str, b: &str) -> bool {
    a.split_whitespace().any(|x| b.split_whitespace().any(|y| x == y))
}

/// Pair weight in half units: 2 for an exact match, 1 for a same-type
/// token overlap, 0 otherwise.
fn weight(g: &TypedMention, p: &TypedMention) -> u64 {
    if g.entity_type != p.entity_type {
        0
    } else if g.mention == p.mention {
        2
    } else if overlaps(&g.mention, &p.mention) {
        1
    } else {
        0
    }
}

/// Maximum total weight over all one-to-one pairings, in half units.
pub fn max_partial_tp_halves(gold: &[TypedMention], preds: &[TypedMention]) -> u64 {
    fn go(gold: &[TypedMention], preds: &[TypedMention], gi: usize, used: u32) -> u64 {
        if gi == gold.len() {
            return 0;
        }
        let mut best = go(gold, preds, gi + 1, used);
        for (pi, p) in preds.iter().enumerate() {
            if used & (1 << pi) != 0 {
                continue;
            }
            let w = weight(&gold[gi], p);
            if w > 0 {
                best = best.max(w + go(gold, preds, gi + 1, used | (1 << pi)));
            }
        }
        best
    }
    assert!(preds.len() <= 32);
    go(gold, preds, 0, 0)
}

const TYPES: &[&str] = &["person", "location", "organization"];
const WORDS: &[&str] = &["new", "york", "city", "john", "smith", "bank", "of", "america", "paris", "hall"];

fn phrase<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(1..=3);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// A record with up to five gold items and up to five predictions derived
/// from them: exact copies, boundary changes, type swaps, omissions and
/// spurious extractions.
pub fn noisy_case<R: Rng>(rng: &mut R) -> (Vec<TypedMention>, Vec<TypedMention>) {
    let gold: Vec<TypedMention> = (0..rng.random_range(0..=5))
        .map(|_| TypedMention::new(*TYPES.choose(rng).unwrap(), phrase(rng)))
        .collect();
    let mut preds = Vec::new();
    for g in &gold {
        match rng.random_range(0..10) {
            0..=4 => preds.push(g.clone()),
            5 | 6 => {
                let mut words: Vec<&str> = g.mention.split_whitespace().collect();
                if words.len() > 1 && rng.random_bool(0.5) {
                    words.remove(if rng.random_bool(0.5) { 0 } else { words.len() - 1 });
                } else {
                    words.push(WORDS.choose(rng).unwrap());
                }
                preds.push(TypedMention::new(g.entity_type.clone(), words.join(" ")));
            }
            7 => preds.push(TypedMention::new(*TYPES.choose(rng).unwrap(), g.mention.clone())),
            _ => {}
        }
    }
    for _ in 0..rng.random_range(0..=2) {
        preds.push(TypedMention::new(*TYPES.choose(rng).unwrap(), phrase(rng)));
    }
    preds.truncate(5);
    (gold, preds)
}
