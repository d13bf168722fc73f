//! Entity-type frequency tables and the heavy-tail bucket report.
//!
//! Frequencies count mention occurrences: a type mentioned three times in one
//! passage contributes three. Type strings are used exactly as the model
//! produced them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::AnnotatedPassage;

/// Counts per entity type. Never holds a zero count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeFrequencyTable {
    entries: BTreeMap<String, u64>,
    total: u64,
}

impl TypeFrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, entity_type: &str) {
        self.add_count(entity_type, 1);
    }

    /// Adds `count` occurrences; a zero count is ignored.
    pub fn add_count(&mut self, entity_type: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self.entries.entry(entity_type.to_owned()).or_insert(0) += count;
        self.total += count;
    }

    pub fn merge(mut self, other: TypeFrequencyTable) -> TypeFrequencyTable {
        for (t, c) in other.entries {
            self.add_count(&t, c);
        }
        self
    }

    pub fn count(&self, entity_type: &str) -> u64 {
        self.entries.get(entity_type).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lexicographic type order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(t, &c)| (t.as_str(), c))
    }

    /// Entries by descending count, ties broken lexicographically.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }
}

impl FromIterator<(String, u64)> for TypeFrequencyTable {
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        let mut t = TypeFrequencyTable::new();
        for (k, c) in iter {
            t.add_count(&k, c);
        }
        t
    }
}

/// Tallies entity types over the `Ok` records; malformed records add nothing.
pub fn count_types(annotations: &[AnnotatedPassage], exec: Execution) -> TypeFrequencyTable {
    exec.fold(
        annotations,
        TypeFrequencyTable::new,
        |mut acc, ap| {
            if ap.is_ok() {
                for e in ap.entities() {
                    acc.add(e.entity_type());
                }
            }
            acc
        },
        TypeFrequencyTable::merge,
    )
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("frequency table is empty")]
    EmptyTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeCount {
    pub entity_type: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub name: String,
    pub type_count: usize,
    pub frequency: u64,
    pub share: f64,
    /// Up to ten most frequent types in the bucket.
    pub top_types: Vec<TypeCount>,
}

pub const BUCKET_NAMES: [&str; 3] = ["top_1_percent", "1_to_10_percent", "10_to_100_percent"];

/// Splits ranked types into the top 1%, 1–10% and 10–100% of types.
///
/// Bucket edges are `ceil(n/100)` and `ceil(n/10)` type ranks, so the first
/// bucket is never empty. Buckets that receive no types have share 0.
pub fn bucket_report(table: &TypeFrequencyTable) -> Result<Vec<Bucket>, StatsError> {
    if table.is_empty() {
        return Err(StatsError::EmptyTable);
    }
    let ranked = table.ranked();
    let n = ranked.len();
    let edges = [0, n.div_ceil(100), n.div_ceil(10), n];
    Ok(BUCKET_NAMES
        .iter()
        .enumerate()
        .map(|(b, name)| {
            let slice = &ranked[edges[b]..edges[b + 1]];
            let frequency: u64 = slice.iter().map(|(_, c)| c).sum();
            Bucket {
                name: (*name).to_owned(),
                type_count: slice.len(),
                frequency,
                share: frequency as f64 / table.total() as f64,
                top_types: slice
                    .iter()
                    .take(10)
                    .map(|&(t, c)| TypeCount {
                        entity_type: t.to_owned(),
                        count: c,
                    })
                    .collect(),
            }
        })
        .collect())
}

/// The `stats.json` document: the full ranked table plus the bucket report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub total: u64,
    pub distinct_types: usize,
    pub types: Vec<TypeCount>,
    pub buckets: Vec<Bucket>,
}

impl StatsFile {
    pub fn from_table(table: &TypeFrequencyTable) -> Self {
        StatsFile {
            total: table.total(),
            distinct_types: table.len(),
            types: table
                .ranked()
                .into_iter()
                .map(|(t, c)| TypeCount {
                    entity_type: t.to_owned(),
                    count: c,
                })
                .collect(),
            buckets: bucket_report(table).unwrap_or_default(),
        }
    }

    pub fn table(&self) -> TypeFrequencyTable {
        self.types
            .iter()
            .map(|tc| (tc.entity_type.clone(), tc.count))
            .collect()
    }
}
