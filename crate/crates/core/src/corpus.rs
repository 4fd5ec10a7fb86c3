//! Term distributions of tokenized corpora and Jensen-Shannon domain
//! similarity.

use std::collections::HashMap;
use std::io::BufRead;

use serde::Serialize;

use crate::dictionary::BilingualDictionary;
use crate::error::{Error, Result};

/// Relative term frequencies, most frequent first (ties by word).
#[derive(Clone, Debug, PartialEq)]
pub struct TermDistribution {
    vocabulary: Vec<String>,
    probabilities: Vec<f64>,
}

impl TermDistribution {
    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    fn as_map(&self) -> HashMap<&str, f64> {
        self.vocabulary
            .iter()
            .map(String::as_str)
            .zip(self.probabilities.iter().copied())
            .collect()
    }
}

pub fn term_distribution<I, S>(tokens: I, vocab_cap: Option<usize>) -> Result<TermDistribution>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_ref().to_owned()).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(Error::EmptyInput("token stream".into()));
    }
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(cap) = vocab_cap {
        if cap == 0 {
            return Err(Error::InvalidConfig("vocabulary cap must be positive".into()));
        }
        entries.truncate(cap);
    }
    let total: u64 = entries.iter().map(|e| e.1).sum();
    let (vocabulary, probabilities) = entries
        .into_iter()
        .map(|(w, c)| (w, c as f64 / total as f64))
        .unzip();
    Ok(TermDistribution {
        vocabulary,
        probabilities,
    })
}

/// Whitespace tokens of a corpus, one sentence per line.
pub fn read_tokens<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    for line in reader.lines() {
        tokens.extend(line?.split_whitespace().map(str::to_owned));
    }
    Ok(tokens)
}

/// Replace each token with its first-listed translation. Returns the
/// translated tokens and the number dropped for lack of a translation.
pub fn translate_tokens<S: AsRef<str>>(tokens: &[S], dict: &BilingualDictionary) -> (Vec<String>, usize) {
    let mut dropped = 0;
    let translated = tokens
        .iter()
        .filter_map(|t| {
            let first = dict.translations(t.as_ref()).next().map(str::to_owned);
            dropped += first.is_none() as usize;
            first
        })
        .collect();
    (translated, dropped)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DomainSimilarity {
    /// Jensen-Shannon divergence, base 2, in [0, 1].
    pub js: f64,
    pub dsim: f64,
}

fn kl_to_mixture(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / (0.5 * (p + q))).log2()
    }
}

/// `dsim = 1 − JS(P‖Q)` over the union of both vocabularies.
pub fn domain_similarity(p: &TermDistribution, q: &TermDistribution) -> DomainSimilarity {
    let pm = p.as_map();
    let qm = q.as_map();
    let mut js = 0.0;
    for (w, &pw) in p.vocabulary.iter().zip(&p.probabilities) {
        let qw = qm.get(w.as_str()).copied().unwrap_or(0.0);
        js += 0.5 * (kl_to_mixture(pw, qw) + kl_to_mixture(qw, pw));
    }
    for (w, &qw) in q.vocabulary.iter().zip(&q.probabilities) {
        if !pm.contains_key(w.as_str()) {
            js += 0.5 * kl_to_mixture(qw, 0.0);
        }
    }
    let js = js.clamp(0.0, 1.0);
    DomainSimilarity { js, dsim: 1.0 - js }
}
