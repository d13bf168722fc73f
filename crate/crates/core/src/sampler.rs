//! Corpus chunking and reproducible passage sampling.
//!
//! Articles are cut into passages of at most `max_tokens` whitespace tokens,
//! with boundaries only between tokens. Each passage keeps the article's
//! original text between its first and last token, so inner whitespace such
//! as line breaks survives. Sampling is single-pass reservoir sampling
//! (Algorithm R) driven by the seeded ChaCha8 stream from [`crate::seed`].

use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::model::Passage;
use crate::seed;
use crate::text;

pub const DEFAULT_MAX_TOKENS: usize = 256;
pub const DEFAULT_SAMPLE_SIZE: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkConfig {
    pub max_tokens: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            max_tokens: DEFAULT_MAX_TOKENS,
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("max_tokens must be at least 1")]
    ZeroMaxTokens,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    BadArticle {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.max_tokens == 0 {
            return Err(CorpusError::ZeroMaxTokens);
        }
        Ok(())
    }
}

/// A raw corpus document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub id: String,
    pub source: String,
    pub text: String,
}

/// Splits one article into passages of `1..=max_tokens` tokens.
///
/// Passage ids are `{article.id}-{index:04}`. A blank article yields nothing.
pub fn chunk_article(article: &Article, cfg: &ChunkConfig) -> Vec<Passage> {
    let max = cfg.max_tokens.max(1);
    let spans = text::token_spans(&article.text);
    spans
        .chunks(max)
        .enumerate()
        .map(|(i, group)| {
            let start = group[0].0;
            let end = group[group.len() - 1].1;
            Passage::new(
                format!("{}-{i:04}", article.id),
                article.source.clone(),
                &article.text[start..end],
            )
            .expect("a chunk holds at least one token")
        })
        .collect()
}

/// Chunks many articles, concatenating their passages in article order.
pub fn chunk_corpus(articles: &[Article], cfg: &ChunkConfig, exec: Execution) -> Vec<Passage> {
    exec.map(articles, |a| chunk_article(a, cfg))
        .into_iter()
        .flatten()
        .collect()
}

/// Uniform fixed-size sampling without replacement over a stream.
#[derive(Debug)]
pub struct Reservoir<T> {
    capacity: usize,
    seen: u64,
    items: Vec<T>,
}

impl<T> Reservoir<T> {
    pub fn new(capacity: usize) -> Self {
        Reservoir {
            capacity,
            seen: 0,
            items: Vec::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn offer<R: Rng + ?Sized>(&mut self, item: T, rng: &mut R) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
            return;
        }
        if self.capacity == 0 {
            return;
        }
        let j = rng.random_range(0..self.seen);
        if (j as usize) < self.capacity {
            self.items[j as usize] = item;
        }
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn into_items(self) -> Vec<T> {
        self.items
    }
}

/// Draws `min(sample_size, population)` passages uniformly without
/// replacement, returned sorted by id.
pub fn sample_passages(chunks: impl IntoIterator<Item = Passage>, cfg: &ChunkConfig) -> Vec<Passage> {
    let mut rng = seed::stage_rng(cfg.seed);
    let mut reservoir = Reservoir::new(cfg.sample_size);
    for p in chunks {
        reservoir.offer(p, &mut rng);
    }
    let mut out = reservoir.into_items();
    out.sort_by(|a, b| a.id().cmp(b.id()));
    out
}

#[derive(Deserialize)]
struct ArticleLine {
    #[serde(default)]
    id: Option<String>,
    source: String,
    text: String,
}

/// Loads articles from a directory of `.txt` files (sorted by file name) or
/// from a JSONL file of `{"source", "text"}` objects. Text is NFC-normalized.
pub fn read_articles(path: &Path) -> Result<Vec<Article>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    if path.is_dir() {
        let source = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".to_owned());
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|f| {
                let text = std::fs::read_to_string(&f).map_err(|source| CorpusError::Io {
                    path: f.display().to_string(),
                    source,
                })?;
                let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                Ok(Article {
                    id: stem,
                    source: source.clone(),
                    text: text::nfc(&text),
                })
            })
            .collect()
    } else {
        let file = std::fs::File::open(path).map_err(io_err)?;
        let mut out = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let a: ArticleLine = serde_json::from_str(&line).map_err(|source| CorpusError::BadArticle {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })?;
            out.push(Article {
                id: a.id.unwrap_or_else(|| format!("{}-{:06}", a.source, i + 1)),
                source: a.source,
                text: text::nfc(&a.text),
            });
        }
        Ok(out)
    }
}
