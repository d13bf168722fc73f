//! Monte Carlo measurements of the seeded samplers.

use std::collections::HashSet;

use nerforge::conversation::{NegativeSampling, NegativeStrategy};
use nerforge::sampler::Reservoir;
use nerforge::seed::stage_rng;
use nerforge::stats::TypeFrequencyTable;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn table(entries: &[(&str, u64)]) -> TypeFrequencyTable {
    entries.iter().map(|(t, c)| (t.to_string(), *c)).collect()
}

/// Empirical probability of each vocabulary type being the first negative,
/// one trial per seed.
pub fn first_pick_rates(
    strategy: NegativeStrategy,
    vocabulary: &[(&str, u64)],
    positives: &[&str],
    trials: u64,
) -> Vec<(String, f64)> {
    let positives: HashSet<&str> = positives.iter().copied().collect();
    let vocab = table(vocabulary);
    let mut counts = vec![0u64; vocabulary.len()];
    for seed in 0..trials {
        let sampling = NegativeSampling {
            strategy,
            vocabulary: vocab.clone(),
            seed,
        };
        let neg = sampling.sample(&positives, "example");
        if let Some(first) = neg.types.first() {
            let i = vocabulary.iter().position(|(t, _)| t == first).unwrap();
            counts[i] += 1;
        }
    }
    vocabulary
        .iter()
        .zip(counts)
        .map(|((t, _), c)| (t.to_string(), c as f64 / trials as f64))
        .collect()
}

/// Upper-tail p-value of Pearson's chi-square test against equal expected
/// counts.
pub fn uniform_p_value(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Chi-square p-value of Uniform first picks over ten equal-count types.
pub fn uniform_negatives_p_value(trials: u64) -> f64 {
    let vocab: Vec<(String, u64)> = (0..10).map(|i| (format!("type{i}"), 5)).collect();
    let refs: Vec<(&str, u64)> = vocab.iter().map(|(t, c)| (t.as_str(), *c)).collect();
    let rates = first_pick_rates(NegativeStrategy::Uniform { k: 1 }, &refs, &[], trials);
    let counts: Vec<u64> = rates.iter().map(|(_, r)| (r * trials as f64).round() as u64).collect();
    uniform_p_value(&counts)
}

/// True when strategy `None` yields no negatives for any of `trials` seeds.
pub fn none_is_always_empty(trials: u64) -> bool {
    let vocab = table(&[("a", 3), ("b", 2), ("c", 1)]);
    (0..trials).all(|seed| {
        let s = NegativeSampling {
            strategy: NegativeStrategy::None,
            vocabulary: vocab.clone(),
            seed,
        };
        let n = s.sample(&HashSet::new(), &format!("ex{seed}"));
        n.types.is_empty() && n.shortfall == 0
    })
}

/// Largest absolute deviation of per-item inclusion frequency from `k/n`.
pub fn reservoir_inclusion_error(n: usize, k: usize, trials: u64) -> f64 {
    let mut hits = vec![0u64; n];
    for seed in 0..trials {
        let mut rng = stage_rng(seed);
        let mut r = Reservoir::new(k);
        for i in 0..n {
            r.offer(i, &mut rng);
        }
        for i in r.into_items() {
            hits[i] += 1;
        }
    }
    let want = k as f64 / n as f64;
    hits.iter()
        .map(|&h| (h as f64 / trials as f64 - want).abs())
        .fold(0.0, f64::max)
}
