//! Synthetic embedding-space pairs with controlled distortion, and the
//! noise sweep that relates graph dissimilarity to retrieval accuracy.
//!
//! Source rows are normalized standard-normal draws. Target row `i` is
//! `normalize(Q·diag(s)·x_i + ε)` with `Q` a seeded random rotation, `s` all
//! ones unless scaling is requested, and `ε ~ N(0, σ²I)`. A `domain_shift`
//! fraction of target rows is replaced by independent draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::alignment::{procrustes, refine, RefineConfig, TranslationMatrix};
use crate::dictionary::{BilingualDictionary, Provenance};
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::graph::{sampled_subgraph_similarity, SampleConfig};
use crate::numerics::{l2_norm, random_orthogonal, Matrix};
use crate::retrieval::{evaluate_p1, translate, RetrievalConfig};
use crate::stats::{correlation, Correlation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    #[default]
    Rotation,
    /// Per-axis scaling in [0.5, 1.5] before the rotation.
    RotationScaling,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub noise_sigma: f64,
    pub transform: Transform,
    /// Fraction of target rows re-drawn independently.
    pub domain_shift: f64,
    /// Fraction of word indices labelled identically on both sides.
    pub shared_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 20,
            noise_sigma: 0.0,
            transform: Transform::Rotation,
            domain_shift: 0.0,
            shared_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("n must be at least 2, got {}", self.n)));
        }
        if self.d < 2 {
            return Err(Error::InvalidConfig(format!("d must be at least 2, got {}", self.d)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("noise_sigma must be finite and non-negative".into()));
        }
        for (name, v) in [("domain_shift", self.domain_shift), ("shared_fraction", self.shared_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthPair {
    pub src: EmbeddingSpace,
    pub tgt: EmbeddingSpace,
    /// Index pairing: source word `i` translates to target word `i`.
    pub gold: BilingualDictionary,
    pub true_w: TranslationMatrix,
}

pub fn source_label(i: usize) -> String {
    format!("s{i}")
}

pub fn target_label(i: usize) -> String {
    format!("t{i}")
}

pub fn shared_label(i: usize) -> String {
    format!("w{i}")
}

fn normal_unit_row(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = l2_norm(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn fraction_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

pub fn make_pair(spec: &SynthSpec) -> Result<SynthPair> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let src_rows: Vec<Vec<f64>> = (0..n).map(|_| normal_unit_row(&mut rng, d)).collect();
    let q = random_orthogonal(d, &mut rng);
    let scales: Vec<f64> = match spec.transform {
        Transform::Rotation => vec![1.0; d],
        Transform::RotationScaling => (0..d).map(|_| rng.random_range(0.5..1.5)).collect(),
    };
    let mut tgt_rows: Vec<Vec<f64>> = src_rows
        .iter()
        .map(|x| {
            let scaled: Vec<f64> = x.iter().zip(&scales).map(|(a, s)| a * s).collect();
            let mut y: Vec<f64> = q.row_iter().map(|r| crate::numerics::dot(r, &scaled)).collect();
            for v in y.iter_mut() {
                *v += spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
            }
            y
        })
        .collect();
    for i in rand::seq::index::sample(&mut rng, n, fraction_count(spec.domain_shift, n)) {
        tgt_rows[i] = normal_unit_row(&mut rng, d);
    }
    let mut shared = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, fraction_count(spec.shared_fraction, n)) {
        shared[i] = true;
    }

    let src_words: Vec<String> = (0..n)
        .map(|i| if shared[i] { shared_label(i) } else { source_label(i) })
        .collect();
    let tgt_words: Vec<String> = (0..n)
        .map(|i| if shared[i] { shared_label(i) } else { target_label(i) })
        .collect();
    let gold = BilingualDictionary::from_pairs(
        src_words.iter().cloned().zip(tgt_words.iter().cloned()),
        Provenance::Gold,
    )?;

    let src = EmbeddingSpace::new(src_words, Matrix::from_rows(&src_rows)?)?.normalize()?;
    let tgt = EmbeddingSpace::new(tgt_words, Matrix::from_rows(&tgt_rows)?)?.normalize()?;
    Ok(SynthPair {
        src,
        tgt,
        gold,
        true_w: TranslationMatrix::new(q)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    /// Share of gold pairs used as the Procrustes seed; the rest is held out.
    pub seed_fraction: f64,
    pub refine: RefineConfig,
    pub retrieval: RetrievalConfig,
    pub sampling: SampleConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed_fraction: 0.1,
            refine: RefineConfig::default(),
            retrieval: RetrievalConfig::default(),
            sampling: SampleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteRow {
    pub sigma: f64,
    pub mean_delta: f64,
    pub p_at_1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
    /// Correlation between mean Δ and P@1 across rows.
    pub correlation: Correlation,
}

impl SuiteReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma,mean_delta,p_at_1\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.sigma, r.mean_delta, r.p_at_1));
        }
        out
    }
}

/// Split gold into a seeded seed set and the held-out remainder.
pub fn split_gold(
    gold: &BilingualDictionary,
    fraction: f64,
    seed: u64,
) -> Result<(BilingualDictionary, BilingualDictionary)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig("seed fraction must be in (0, 1)".into()));
    }
    let n = gold.len();
    let k = fraction_count(fraction, n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, k) {
        chosen[i] = true;
    }
    let mut train = BilingualDictionary::new(Provenance::Gold);
    let mut test = BilingualDictionary::new(Provenance::Gold);
    for (i, (s, t)) in gold.pairs().iter().enumerate() {
        if chosen[i] {
            train.insert(s.as_str(), t.as_str())?;
        } else {
            test.insert(s.as_str(), t.as_str())?;
        }
    }
    Ok((train, test))
}

fn suite_row(sigma: f64, base: &SynthSpec, cfg: &SuiteConfig) -> Result<SuiteRow> {
    let spec = SynthSpec {
        noise_sigma: sigma,
        ..base.clone()
    };
    let pair = make_pair(&spec)?;
    let (train, test) = split_gold(&pair.gold, cfg.seed_fraction, spec.seed)?;
    let w0 = procrustes(&pair.src, &pair.tgt, &train)?.matrix;
    let w = refine(&pair.src, &pair.tgt, &w0, &cfg.refine)?.matrix;
    let translation = translate(test.sources(), &pair.src, &pair.tgt, &w, &cfg.retrieval)?;
    let p_at_1 = evaluate_p1(&translation, &test)?.p_at_1;
    let mean_delta = sampled_subgraph_similarity(&pair.src, &pair.tgt, &pair.gold, &cfg.sampling)?.mean_delta;
    log::info!("suite sigma={sigma}: mean_delta={mean_delta:.4} p_at_1={p_at_1:.4}");
    Ok(SuiteRow {
        sigma,
        mean_delta,
        p_at_1,
    })
}

/// For each noise level: build a pair, align from a seed subset of gold,
/// refine, score P@1 on the held-out gold and measure mean Δ.
pub fn correlation_suite(noise_levels: &[f64], base: &SynthSpec, cfg: &SuiteConfig) -> Result<SuiteReport> {
    if noise_levels.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "correlation suite needs at least 3 noise levels, got {}",
            noise_levels.len()
        )));
    }
    let rows = noise_levels
        .iter()
        .map(|&s| suite_row(s, base, cfg))
        .collect::<Result<Vec<_>>>()?;
    let deltas: Vec<f64> = rows.iter().map(|r| r.mean_delta).collect();
    let p1: Vec<f64> = rows.iter().map(|r| r.p_at_1).collect();
    Ok(SuiteReport {
        correlation: correlation(&deltas, &p1)?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::RetrievalMethod;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            n: 300,
            d: 8,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = make_pair(&small(5)).unwrap();
        let b = make_pair(&small(5)).unwrap();
        assert_eq!(a.src.vectors(), b.src.vectors());
        assert_eq!(a.tgt.vectors(), b.tgt.vectors());
        assert_eq!(a.tgt.words(), b.tgt.words());
        let c = make_pair(&small(6)).unwrap();
        assert_ne!(a.src.vectors(), c.src.vectors());
    }

    #[test]
    fn rejects_invalid_spec() {
        for spec in [
            SynthSpec { n: 1, ..small(0) },
            SynthSpec { d: 1, ..small(0) },
            SynthSpec {
                noise_sigma: -0.1,
                ..small(0)
            },
            SynthSpec {
                domain_shift: 1.5,
                ..small(0)
            },
        ] {
            assert!(matches!(make_pair(&spec), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn noiseless_pair_translates_perfectly() {
        let pair = make_pair(&small(1)).unwrap();
        let cfg = RetrievalConfig {
            method: RetrievalMethod::Cosine,
            ..Default::default()
        };
        let t = translate(pair.gold.sources(), &pair.src, &pair.tgt, &pair.true_w, &cfg).unwrap();
        assert_eq!(evaluate_p1(&t, &pair.gold).unwrap().p_at_1, 1.0);
    }

    #[test]
    fn shared_labels_follow_fraction() {
        let pair = make_pair(&SynthSpec {
            shared_fraction: 0.3,
            ..small(2)
        })
        .unwrap();
        let shared = pair.src.words().iter().filter(|w| w.starts_with('w')).count();
        assert_eq!(shared, 90);
        for (s, t) in pair.gold.pairs() {
            assert_eq!(s[1..], t[1..]);
            assert_eq!(s.starts_with('w'), t.starts_with('w'));
        }
    }

    #[test]
    fn full_shift_is_chance_level() {
        let pair = make_pair(&SynthSpec {
            domain_shift: 1.0,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let cfg = RetrievalConfig {
            method: RetrievalMethod::Cosine,
            ..Default::default()
        };
        for w in [pair.true_w.clone(), TranslationMatrix::identity(20)] {
            let t = translate(pair.gold.sources(), &pair.src, &pair.tgt, &w, &cfg).unwrap();
            let p1 = evaluate_p1(&t, &pair.gold).unwrap().p_at_1;
            assert!(p1 <= 2.0 / 2000.0 + 1e-12, "{p1}");
        }
    }

    #[test]
    fn noiseless_pair_has_identical_graphs() {
        let pair = make_pair(&small(8)).unwrap();
        let report = sampled_subgraph_similarity(&pair.src, &pair.tgt, &pair.gold, &SampleConfig::default()).unwrap();
        assert!(report.mean_delta.abs() < 1e-9, "{}", report.mean_delta);
    }

    #[test]
    fn scaling_transform_distorts_geometry() {
        let rot = make_pair(&small(4)).unwrap();
        let scaled = make_pair(&SynthSpec {
            transform: Transform::RotationScaling,
            ..small(4)
        })
        .unwrap();
        assert_eq!(rot.src.vectors(), scaled.src.vectors());
        assert_ne!(rot.tgt.vectors(), scaled.tgt.vectors());
    }

    #[test]
    fn split_is_disjoint_and_complete() {
        let pair = make_pair(&small(7)).unwrap();
        let (train, test) = split_gold(&pair.gold, 0.1, 7).unwrap();
        assert_eq!(train.len(), 30);
        assert_eq!(train.len() + test.len(), 300);
        for (s, t) in train.pairs() {
            assert!(!test.contains(s, t));
        }
    }

    #[test]
    fn suite_needs_three_levels() {
        assert!(correlation_suite(&[0.0, 0.1], &small(0), &SuiteConfig::default()).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = SuiteReport {
            rows: vec![SuiteRow {
                sigma: 0.2,
                mean_delta: 1.5,
                p_at_1: 0.75,
            }],
            correlation: Correlation {
                pearson: None,
                spearman: None,
            },
        };
        assert_eq!(r.to_csv(), "sigma,mean_delta,p_at_1\n0.2,1.5,0.75\n");
    }
}
