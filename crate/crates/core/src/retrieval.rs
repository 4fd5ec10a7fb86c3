//! Cross-lingual nearest-neighbour retrieval (plain cosine or CSLS) and P@1
//! scoring against a gold dictionary.
//!
//! CSLS(x, y) = 2 cos(x, y) − mnn_T(x) − mnn_S(y), where mnn_T(x) is the mean
//! cosine of the mapped source vector x to its K nearest target vectors and
//! mnn_S(y) the mean cosine of target y to its K nearest mapped source vectors.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use rayon::prelude::*;
use serde::Serialize;

use crate::alignment::TranslationMatrix;
use crate::dictionary::BilingualDictionary;
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMethod {
    Cosine,
    #[default]
    Csls,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RetrievalConfig {
    pub method: RetrievalMethod,
    /// CSLS neighbourhood size.
    pub k: usize,
    /// Restrict candidates (and CSLS neighbourhoods) to the most frequent rows.
    pub candidates: Option<usize>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            method: RetrievalMethod::Csls,
            k: 10,
            candidates: None,
        }
    }
}

#[inline]
pub fn csls_score(x: &[f64], y: &[f64], mnn_x: f64, mnn_y: f64) -> f64 {
    2.0 * dot(x, y) - mnn_x - mnn_y
}

/// Mean of the `k` largest values.
fn top_k_mean(values: impl Iterator<Item = f64>, k: usize) -> f64 {
    let mut top: Vec<f64> = Vec::with_capacity(k + 1);
    for v in values {
        if top.len() < k {
            top.push(v);
            if top.len() == k {
                top.sort_by(|a, b| b.total_cmp(a));
            }
        } else if v > top[k - 1] {
            let pos = top.partition_point(|t| *t >= v);
            top.insert(pos, v);
            top.truncate(k);
        }
    }
    top.iter().sum::<f64>() / k as f64
}

fn mnn_over(x: &[f64], rows: &Matrix, k: usize) -> f64 {
    top_k_mean(rows.row_iter().map(|r| dot(x, r)), k)
}

/// Mean cosine of `x` to its `k` nearest rows of `space`.
pub fn mean_nn_similarity(x: &[f64], space: &EmbeddingSpace, k: usize) -> Result<f64> {
    space.require_normalized("mean nearest-neighbour similarity")?;
    if k == 0 || k >= space.len() {
        return Err(Error::InvalidConfig(format!(
            "K must be in [1, {}), got {k}",
            space.len()
        )));
    }
    if x.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            context: "query vector".into(),
            expected: space.dim(),
            found: x.len(),
        });
    }
    Ok(mnn_over(x, space.vectors(), k))
}

fn leading_rows(m: &Matrix, n: usize) -> Matrix {
    let n = n.min(m.rows());
    Matrix::from_vec(n, m.cols(), m.as_slice()[..n * m.cols()].to_vec()).expect("finite prefix")
}

/// Retrieval index over a mapped source space and a target space.
pub(crate) struct Retriever<'a> {
    w: &'a TranslationMatrix,
    mapped_sources: Matrix,
    targets: Matrix,
    method: RetrievalMethod,
    k: usize,
    mnn_sources: Vec<f64>,
    mnn_targets: Vec<f64>,
}

impl<'a> Retriever<'a> {
    pub(crate) fn new(
        src: &EmbeddingSpace,
        tgt: &EmbeddingSpace,
        w: &'a TranslationMatrix,
        cfg: &RetrievalConfig,
    ) -> Result<Self> {
        src.require_normalized("retrieval")?;
        tgt.require_normalized("retrieval")?;
        for (space, what) in [(src, "source"), (tgt, "target")] {
            if space.dim() != w.dim() {
                return Err(Error::DimensionMismatch {
                    context: format!("{what} space vs translation matrix"),
                    expected: w.dim(),
                    found: space.dim(),
                });
            }
        }
        let cap = cfg.candidates.unwrap_or(usize::MAX);
        if cap == 0 {
            return Err(Error::InvalidConfig("candidate cap must be positive".into()));
        }
        let mapped_sources = w.map_rows(&leading_rows(src.vectors(), cap));
        let targets = leading_rows(tgt.vectors(), cap);

        let (mnn_sources, mnn_targets) = match cfg.method {
            RetrievalMethod::Cosine => (Vec::new(), Vec::new()),
            RetrievalMethod::Csls => {
                let limit = targets.rows().min(mapped_sources.rows());
                if cfg.k == 0 || cfg.k >= limit {
                    return Err(Error::InvalidConfig(format!(
                        "CSLS K must be in [1, {limit}), got {}",
                        cfg.k
                    )));
                }
                let mnn_sources = (0..mapped_sources.rows())
                    .into_par_iter()
                    .map(|i| mnn_over(mapped_sources.row(i), &targets, cfg.k))
                    .collect();
                let mnn_targets = (0..targets.rows())
                    .into_par_iter()
                    .map(|j| mnn_over(targets.row(j), &mapped_sources, cfg.k))
                    .collect();
                (mnn_sources, mnn_targets)
            }
        };
        Ok(Self {
            w,
            mapped_sources,
            targets,
            method: cfg.method,
            k: cfg.k,
            mnn_sources,
            mnn_targets,
        })
    }

    pub(crate) fn source_pool(&self) -> usize {
        self.mapped_sources.rows()
    }

    /// Mapped vector and its mnn_T term for a source row.
    fn query(&self, src: &EmbeddingSpace, row: usize) -> (Vec<f64>, f64) {
        if row < self.mapped_sources.rows() {
            let x = self.mapped_sources.row(row).to_vec();
            let mnn = self.mnn_sources.get(row).copied().unwrap_or(0.0);
            (x, mnn)
        } else {
            let x = self.w.map_row(src.vectors().row(row));
            let mnn = match self.method {
                RetrievalMethod::Cosine => 0.0,
                RetrievalMethod::Csls => mnn_over(&x, &self.targets, self.k),
            };
            (x, mnn)
        }
    }

    /// Best target row for source row `row`; ties go to the lower row.
    pub(crate) fn best_target(&self, src: &EmbeddingSpace, row: usize) -> (usize, f64) {
        let (x, mnn_x) = self.query(src, row);
        let mut best = (0, f64::NEG_INFINITY);
        for (j, y) in self.targets.row_iter().enumerate() {
            let score = match self.method {
                RetrievalMethod::Cosine => dot(&x, y),
                RetrievalMethod::Csls => csls_score(&x, y, mnn_x, self.mnn_targets[j]),
            };
            if score > best.1 {
                best = (j, score);
            }
        }
        best
    }

    /// Best source row (within the source pool) for target row `row`.
    pub(crate) fn best_source(&self, row: usize) -> (usize, f64) {
        let y = self.targets.row(row);
        let mut best = (0, f64::NEG_INFINITY);
        for (i, x) in self.mapped_sources.row_iter().enumerate() {
            let score = match self.method {
                RetrievalMethod::Cosine => dot(x, y),
                RetrievalMethod::Csls => csls_score(x, y, self.mnn_sources[i], self.mnn_targets[row]),
            };
            if score > best.1 {
                best = (i, score);
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub query: String,
    pub predicted: String,
    pub score: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Translation {
    pub predictions: Vec<Prediction>,
    pub skipped_oov: Vec<String>,
}

/// Map each in-vocabulary query with `x·W^T` and return its best target.
pub fn translate<S: AsRef<str> + Sync>(
    queries: &[S],
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    w: &TranslationMatrix,
    cfg: &RetrievalConfig,
) -> Result<Translation> {
    let retriever = Retriever::new(src, tgt, w, cfg)?;
    let mut skipped_oov = Vec::new();
    let mut rows = Vec::new();
    for q in queries {
        match src.index_of(q.as_ref()) {
            Some(r) => rows.push((q.as_ref(), r)),
            None => skipped_oov.push(q.as_ref().to_owned()),
        }
    }
    if rows.is_empty() {
        return Err(Error::NoEvaluableQueries(format!(
            "all {} queries are out of vocabulary",
            queries.len()
        )));
    }
    let predictions = rows
        .par_iter()
        .map(|&(q, r)| {
            let (j, score) = retriever.best_target(src, r);
            Prediction {
                query: q.to_owned(),
                predicted: tgt.words()[j].clone(),
                score,
            }
        })
        .collect();
    Ok(Translation {
        predictions,
        skipped_oov,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupScore {
    pub count: usize,
    pub p_at_1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub p_at_1: f64,
    pub correct: usize,
    pub evaluated: usize,
    pub skipped_oov: usize,
    /// Predictions whose query has no gold entry.
    pub not_in_gold: usize,
    /// Each grouping family (`freq:`, `homograph:`, `class:`) partitions the
    /// evaluated queries.
    pub groups: BTreeMap<String, GroupScore>,
}

fn is_correct(p: &Prediction, gold: &BilingualDictionary) -> bool {
    gold.contains(&p.query, &p.predicted)
}

/// Share of gold-covered queries whose prediction is one of their gold
/// translations.
pub fn evaluate_p1(translation: &Translation, gold: &BilingualDictionary) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::EmptyInput("gold dictionary".into()));
    }
    let mut evaluated = 0;
    let mut correct = 0;
    for p in &translation.predictions {
        if gold.has_source(&p.query) {
            evaluated += 1;
            correct += is_correct(p, gold) as usize;
        }
    }
    if evaluated == 0 {
        return Err(Error::NoEvaluableQueries("no prediction has a gold entry".into()));
    }
    Ok(EvalReport {
        p_at_1: correct as f64 / evaluated as f64,
        correct,
        evaluated,
        skipped_oov: translation.skipped_oov.len(),
        not_in_gold: translation.predictions.len() - evaluated,
        groups: BTreeMap::new(),
    })
}

/// Frequency bin of a 1-based source rank.
pub fn frequency_group(rank: usize) -> &'static str {
    match rank {
        0..=100 => "freq:1-100",
        101..=1000 => "freq:101-1000",
        1001..=10000 => "freq:1001-10000",
        _ => "freq:10001+",
    }
}

/// Spelling-overlap class of a query, judged through gold-dictionary
/// membership.
pub fn homograph_group(query: &str, gold: &BilingualDictionary, tgt: &EmbeddingSpace) -> &'static str {
    if gold.contains(query, query) {
        "homograph:same-same"
    } else if tgt.contains(query) {
        "homograph:same-diff"
    } else {
        "homograph:diff-diff"
    }
}

pub type WordClassMap = HashMap<String, String>;

/// Reads `word<TAB>label` lines.
pub fn read_word_classes<R: BufRead>(reader: R) -> Result<WordClassMap> {
    let mut map = WordClassMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (word, label) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: "expected \"word<TAB>label\"".into(),
        })?;
        map.entry(word.to_owned()).or_insert_with(|| label.trim().to_owned());
    }
    Ok(map)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScoredPrediction {
    pub query: String,
    pub predicted: String,
    pub score: f64,
    pub correct: bool,
    pub groups: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Breakdown {
    pub report: EvalReport,
    /// Gold-covered predictions in query order.
    pub rows: Vec<ScoredPrediction>,
}

pub fn breakdown_report(
    translation: &Translation,
    gold: &BilingualDictionary,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    word_classes: Option<&WordClassMap>,
) -> Result<Breakdown> {
    let mut report = evaluate_p1(translation, gold)?;
    let mut tallies: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut rows = Vec::with_capacity(report.evaluated);
    for p in translation.predictions.iter().filter(|p| gold.has_source(&p.query)) {
        let correct = is_correct(p, gold);
        let rank = src.frequency_rank(&p.query).unwrap_or(usize::MAX);
        let mut groups = vec![
            frequency_group(rank).to_owned(),
            homograph_group(&p.query, gold, tgt).to_owned(),
        ];
        if let Some(classes) = word_classes {
            groups.push(match classes.get(&p.query) {
                Some(label) => format!("class:{label}"),
                None => "class:unlabeled".to_owned(),
            });
        }
        for g in &groups {
            let t = tallies.entry(g.clone()).or_default();
            t.0 += 1;
            t.1 += correct as usize;
        }
        rows.push(ScoredPrediction {
            query: p.query.clone(),
            predicted: p.predicted.clone(),
            score: p.score,
            correct,
            groups,
        });
    }
    report.groups = tallies
        .into_iter()
        .map(|(name, (count, ok))| {
            (
                name,
                GroupScore {
                    count,
                    p_at_1: ok as f64 / count as f64,
                },
            )
        })
        .collect();
    Ok(Breakdown { report, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::Provenance;

    fn space(words: &[&str], rows: &[&[f64]]) -> EmbeddingSpace {
        EmbeddingSpace::new(
            words.iter().map(|w| w.to_string()).collect(),
            Matrix::from_rows(rows).unwrap(),
        )
        .unwrap()
        .normalize()
        .unwrap()
    }

    fn gold(pairs: &[(&str, &str)]) -> BilingualDictionary {
        BilingualDictionary::from_pairs(pairs.iter().copied(), Provenance::Gold).unwrap()
    }

    #[test]
    fn csls_examples() {
        let x = [1.0, 0.0];
        assert_eq!(csls_score(&x, &x, 1.0, 1.0), 0.0);
        assert_eq!(csls_score(&x, &x, 0.0, 0.0), 2.0);
        let y = [0.8, 0.6];
        assert!((csls_score(&x, &y, 0.7, 0.5) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn mnn_examples() {
        // cosines to the first axis: 0.9, 0.5, 0.1
        let t = space(
            &["a", "b", "c"],
            &[
                &[0.9, (1.0f64 - 0.81).sqrt()],
                &[0.5, (0.75f64).sqrt()],
                &[0.1, (0.99f64).sqrt()],
            ],
        );
        let x = [1.0, 0.0];
        assert!((mean_nn_similarity(&x, &t, 2).unwrap() - 0.7).abs() < 1e-12);
        let y = t.vectors().row(1).to_vec();
        assert!((mean_nn_similarity(&y, &t, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(mean_nn_similarity(&x, &t, 3).is_err());
        assert!(mean_nn_similarity(&x, &t, 0).is_err());
    }

    #[test]
    fn top_k_mean_matches_sort() {
        let vals: [f64; 6] = [0.3, -0.2, 0.9, 0.1, 0.9, 0.5];
        let mut sorted = vals.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        for k in 1..=vals.len() {
            let expect = sorted[..k].iter().sum::<f64>() / k as f64;
            assert!((top_k_mean(vals.iter().copied(), k) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn self_retrieval_with_identity() {
        let s = space(&["a", "b", "c"], &[&[1.0, 0.1], &[0.2, 1.0], &[-1.0, 0.3]]);
        let w = TranslationMatrix::identity(2);
        for method in [RetrievalMethod::Cosine, RetrievalMethod::Csls] {
            let cfg = RetrievalConfig {
                method,
                k: 1,
                candidates: None,
            };
            let t = translate(s.words(), &s, &s, &w, &cfg).unwrap();
            for p in &t.predictions {
                assert_eq!(p.query, p.predicted);
            }
        }
    }

    #[test]
    fn oov_queries_are_skipped() {
        let s = space(&["a", "b"], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let w = TranslationMatrix::identity(2);
        let cfg = RetrievalConfig {
            method: RetrievalMethod::Cosine,
            ..Default::default()
        };
        let t = translate(&["a", "zz"], &s, &s, &w, &cfg).unwrap();
        assert_eq!(t.predictions.len(), 1);
        assert_eq!(t.skipped_oov, ["zz"]);
        assert!(matches!(
            translate(&["zz"], &s, &s, &w, &cfg),
            Err(Error::NoEvaluableQueries(_))
        ));
    }

    #[test]
    fn csls_k_must_fit_vocabulary() {
        let s = space(&["a", "b"], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let w = TranslationMatrix::identity(2);
        let cfg = RetrievalConfig {
            k: 2,
            ..Default::default()
        };
        assert!(translate(&["a"], &s, &s, &w, &cfg).is_err());
    }

    fn predictions(pairs: &[(&str, &str)]) -> Translation {
        Translation {
            predictions: pairs
                .iter()
                .map(|(q, p)| Prediction {
                    query: q.to_string(),
                    predicted: p.to_string(),
                    score: 0.0,
                })
                .collect(),
            skipped_oov: vec![],
        }
    }

    #[test]
    fn p1_examples() {
        let g = gold(&[("a", "x"), ("b", "y"), ("q", "a"), ("q", "b")]);
        let all = evaluate_p1(&predictions(&[("a", "x"), ("b", "y")]), &g).unwrap();
        assert_eq!(all.p_at_1, 1.0);
        let half = evaluate_p1(&predictions(&[("a", "x"), ("b", "z")]), &g).unwrap();
        assert_eq!(half.p_at_1, 0.5);
        let multi = evaluate_p1(&predictions(&[("q", "b")]), &g).unwrap();
        assert_eq!(multi.p_at_1, 1.0);
        let excluded = evaluate_p1(&predictions(&[("a", "x"), ("nope", "x")]), &g).unwrap();
        assert_eq!((excluded.evaluated, excluded.not_in_gold), (1, 1));
        assert!(evaluate_p1(&predictions(&[("nope", "x")]), &g).is_err());
        assert!(evaluate_p1(&predictions(&[("a", "x")]), &gold(&[])).is_err());
    }

    #[test]
    fn group_labels() {
        assert_eq!(frequency_group(1), "freq:1-100");
        assert_eq!(frequency_group(50), "freq:1-100");
        assert_eq!(frequency_group(100), "freq:1-100");
        assert_eq!(frequency_group(101), "freq:101-1000");
        assert_eq!(frequency_group(10000), "freq:1001-10000");
        assert_eq!(frequency_group(10001), "freq:10001+");
        let tgt = space(&["madrid", "casa", "house"], &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let g = gold(&[("madrid", "madrid"), ("house", "casa"), ("dog", "perro")]);
        assert_eq!(homograph_group("madrid", &g, &tgt), "homograph:same-same");
        assert_eq!(homograph_group("house", &g, &tgt), "homograph:same-diff");
        assert_eq!(homograph_group("dog", &g, &tgt), "homograph:diff-diff");
    }

    #[test]
    fn breakdown_partitions_evaluated() {
        let src = space(&["madrid", "house", "dog"], &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let tgt = space(&["madrid", "casa", "house"], &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let g = gold(&[("madrid", "madrid"), ("house", "casa"), ("dog", "perro")]);
        let t = predictions(&[("madrid", "madrid"), ("house", "house"), ("dog", "casa")]);
        let classes: WordClassMap = [("madrid".to_string(), "PROPN".to_string())].into();
        let b = breakdown_report(&t, &g, &src, &tgt, Some(&classes)).unwrap();
        assert_eq!(b.report.evaluated, 3);
        for family in ["freq:", "homograph:", "class:"] {
            let total: usize = b
                .report
                .groups
                .iter()
                .filter(|(k, _)| k.starts_with(family))
                .map(|(_, g)| g.count)
                .sum();
            assert_eq!(total, 3, "{family}");
        }
        assert_eq!(b.report.groups["homograph:same-same"].p_at_1, 1.0);
        assert_eq!(b.report.groups["class:unlabeled"].count, 2);
        assert_eq!(b.rows[0].groups[0], "freq:1-100");
    }

    #[test]
    fn word_class_file() {
        let m = read_word_classes("run\tVERB\ndog\tNOUN\n\n".as_bytes()).unwrap();
        assert_eq!(m["run"], "VERB");
        assert!(read_word_classes("bad line\n".as_bytes()).is_err());
    }
}
