//! Sampled-subgraph alignability diagnostic: draw small sets of gold
//! translation pairs, build a nearest-neighbour graph over the source words
//! and one over their translations, and compare the two graphs.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    build_nn_graph, eigensimilarity, vf2_isomorphic_with_limit, EigenSimilarity, GraphOptions,
    DEFAULT_MAX_ISOMORPHISM_NODES,
};
use crate::dictionary::BilingualDictionary;
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct SampleConfig {
    pub num_samples: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub graph: GraphOptions,
    /// Samples above this node count skip the isomorphism check.
    pub max_isomorphism_nodes: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            num_samples: 10,
            sample_size: 10,
            seed: 0,
            graph: GraphOptions::default(),
            max_isomorphism_nodes: DEFAULT_MAX_ISOMORPHISM_NODES,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubgraphSample {
    pub source_words: Vec<String>,
    pub target_words: Vec<String>,
    pub similarity: EigenSimilarity,
    pub isomorphic: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubgraphReport {
    /// One-to-one in-vocabulary gold pairs the samples were drawn from.
    pub pairs_available: usize,
    pub samples: Vec<SubgraphSample>,
    pub mean_delta: f64,
}

impl SubgraphReport {
    pub fn per_sample_delta(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.similarity.delta).collect()
    }

    pub fn k_values(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.similarity.k_used).collect()
    }

    pub fn pairs_sampled(&self) -> usize {
        self.samples.iter().map(|s| s.source_words.len()).sum()
    }

    pub fn isomorphic_count(&self) -> usize {
        self.samples.iter().filter(|s| s.isomorphic == Some(true)).count()
    }
}

/// One-to-one in-vocabulary pairs ordered by source frequency rank. Each
/// source keeps its most frequent translation not already claimed by a more
/// frequent source.
fn sampling_pool(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    gold: &BilingualDictionary,
) -> Vec<(String, String)> {
    let mut sources: Vec<(usize, &str)> = gold
        .sources()
        .iter()
        .filter_map(|s| src.index_of(s).map(|r| (r, s.as_str())))
        .collect();
    sources.sort_unstable();
    let mut claimed = HashSet::new();
    let mut pool = Vec::new();
    for (_, s) in sources {
        let best = gold
            .translations(s)
            .filter_map(|t| tgt.index_of(t).map(|r| (r, t)))
            .filter(|(r, _)| !claimed.contains(r))
            .min();
        if let Some((r, t)) = best {
            claimed.insert(r);
            pool.push((s.to_owned(), t.to_owned()));
        }
    }
    pool
}

pub fn sampled_subgraph_similarity(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    gold: &BilingualDictionary,
    cfg: &SampleConfig,
) -> Result<SubgraphReport> {
    src.require_normalized("subgraph sampling")?;
    tgt.require_normalized("subgraph sampling")?;
    if cfg.num_samples == 0 {
        return Err(Error::InvalidConfig("num_samples must be positive".into()));
    }
    if cfg.sample_size < 2 {
        return Err(Error::TooFewNodes {
            found: cfg.sample_size,
        });
    }
    let pool = sampling_pool(src, tgt, gold);
    if pool.len() < cfg.sample_size {
        return Err(Error::InsufficientPairs {
            required: cfg.sample_size,
            available: pool.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<Vec<usize>> = (0..cfg.num_samples)
        .map(|_| {
            let mut idx = rand::seq::index::sample(&mut rng, pool.len(), cfg.sample_size).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();

    let samples = draws
        .par_iter()
        .map(|idx| {
            let source_words: Vec<String> = idx.iter().map(|&i| pool[i].0.clone()).collect();
            let target_words: Vec<String> = idx.iter().map(|&i| pool[i].1.clone()).collect();
            let g1 = build_nn_graph(src, &source_words, &cfg.graph)?;
            let g2 = build_nn_graph(tgt, &target_words, &cfg.graph)?;
            let similarity = eigensimilarity(&g1, &g2)?;
            let isomorphic = if cfg.sample_size <= cfg.max_isomorphism_nodes {
                Some(vf2_isomorphic_with_limit(&g1, &g2, cfg.max_isomorphism_nodes)?)
            } else {
                None
            };
            Ok(SubgraphSample {
                source_words,
                target_words,
                similarity,
                isomorphic,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_delta = samples.iter().map(|s| s.similarity.delta).sum::<f64>() / samples.len() as f64;
    Ok(SubgraphReport {
        pairs_available: pool.len(),
        samples,
        mean_delta,
    })
}
