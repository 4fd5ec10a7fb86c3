//! Orthogonal mappings between two embedding spaces.
//!
//! Mapping convention: a source row vector `x` maps to `x·W^T` (the column
//! form `W x`). `W` is square and, after any Procrustes step, orthogonal.

mod adversarial;

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::dictionary::{BilingualDictionary, Provenance};
use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::numerics::{dot, l2_norm, svd, Matrix};
use crate::retrieval::{RetrievalConfig, Retriever};

pub use adversarial::{adversarial_init, AdversarialConfig, AdversarialRun, EpochStats};

/// Maximum `‖W^T W − I‖_F` accepted from a Procrustes step.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct TranslationMatrix {
    w: Matrix,
    orthogonality_residual: f64,
}

impl TranslationMatrix {
    pub fn new(w: Matrix) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::NotSquare {
                rows: w.rows(),
                cols: w.cols(),
            });
        }
        let orthogonality_residual = w.orthogonality_residual();
        Ok(Self {
            w,
            orthogonality_residual,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            w: Matrix::identity(d),
            orthogonality_residual: 0.0,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn orthogonality_residual(&self) -> f64 {
        self.orthogonality_residual
    }

    /// `W^T`, the inverse map for an orthogonal `W`.
    pub fn transpose(&self) -> Self {
        Self {
            w: self.w.transpose(),
            orthogonality_residual: self.orthogonality_residual,
        }
    }

    /// `x·W^T`, renormalized to unit length.
    pub fn map_row(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.w.row_iter().map(|wr| dot(wr, x)).collect();
        let norm = l2_norm(&y);
        if norm > 0.0 {
            y.iter_mut().for_each(|v| *v /= norm);
        }
        y
    }

    pub fn map_rows(&self, m: &Matrix) -> Matrix {
        let data: Vec<f64> = (0..m.rows())
            .into_par_iter()
            .flat_map_iter(|i| self.map_row(m.row(i)))
            .collect();
        Matrix::from_vec(m.rows(), self.dim(), data).expect("mapped rows are finite")
    }

    /// `d d` header followed by one matrix row per line.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.dim(), self.dim())?;
        for row in self.w.row_iter() {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break l;
                    }
                }
                None => return Err(Error::EmptyInput("translation matrix file".into())),
            }
        };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: 1,
                message: "expected header \"d d\"".into(),
            })?;
        let d = match dims.as_slice() {
            [a, b] if a == b && *a > 0 => *a,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected square header \"d d\"".into(),
                })
            }
        };
        let mut data = Vec::with_capacity(d * d);
        let mut rows = 0;
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            if values.len() != d || rows == d {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected {d} rows of {d} values"),
                });
            }
            data.extend(values);
            rows += 1;
        }
        if rows != d {
            return Err(Error::Parse {
                line: rows + 1,
                message: format!("expected {d} rows, found {rows}"),
            });
        }
        Self::new(Matrix::from_vec(d, d, data)?)
    }
}

fn check_dims(src: &EmbeddingSpace, tgt: &EmbeddingSpace) -> Result<()> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch {
            context: "source vs target embedding dimension".into(),
            expected: src.dim(),
            found: tgt.dim(),
        });
    }
    Ok(())
}

/// Pairs `(w, w)` for every word spelled identically in both vocabularies,
/// in source frequency order.
pub fn identical_seed(src: &EmbeddingSpace, tgt: &EmbeddingSpace) -> Result<BilingualDictionary> {
    let mut dict = BilingualDictionary::new(Provenance::IdenticalSeed);
    for w in src.words().iter().filter(|w| tgt.contains(w)) {
        dict.insert(w.as_str(), w.as_str())?;
    }
    if dict.is_empty() {
        return Err(Error::EmptySeed("the vocabularies share no identical words".into()));
    }
    Ok(dict)
}

#[derive(Clone, Debug)]
pub struct ProcrustesFit {
    pub matrix: TranslationMatrix,
    pub pairs_used: usize,
    /// Pairs with an out-of-vocabulary source or target word.
    pub pairs_dropped: usize,
}

/// Orthogonal `W` minimising `‖S·W^T − T‖_F` over the dictionary's
/// in-vocabulary pairs: `W = U·V^T` with `U Σ V^T = svd(T^T·S)`.
pub fn procrustes(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    dict: &BilingualDictionary,
) -> Result<ProcrustesFit> {
    check_dims(src, tgt)?;
    src.require_normalized("procrustes")?;
    tgt.require_normalized("procrustes")?;
    let d = src.dim();
    let mut m = vec![0.0; d * d];
    let mut used = 0;
    for (s, t) in dict.pairs() {
        let (Some(x), Some(y)) = (src.vector(s), tgt.vector(t)) else {
            continue;
        };
        for (a, ya) in y.iter().enumerate() {
            let row = &mut m[a * d..(a + 1) * d];
            for (mb, xb) in row.iter_mut().zip(x) {
                *mb += ya * xb;
            }
        }
        used += 1;
    }
    let dropped = dict.len() - used;
    if used == 0 {
        return Err(Error::EmptySeed(format!(
            "none of the {} dictionary pairs is in vocabulary",
            dict.len()
        )));
    }
    if dropped > 0 {
        log::info!("procrustes: dropped {dropped} out-of-vocabulary pairs");
    }
    if used < d {
        log::warn!("procrustes: {used} pairs for dimension {d}, solution is rank-deficient");
    }
    let dec = svd(&Matrix::from_vec(d, d, m)?)?;
    let matrix = TranslationMatrix::new(dec.u.matmul(&dec.v.transpose())?)?;
    debug_assert!(matrix.orthogonality_residual() < ORTHOGONALITY_TOL);
    Ok(ProcrustesFit {
        matrix,
        pairs_used: used,
        pairs_dropped: dropped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MutualNnConfig {
    /// Candidate pool: this many most frequent source words.
    pub top_frequent: usize,
    pub retrieval: RetrievalConfig,
}

impl Default for MutualNnConfig {
    fn default() -> Self {
        Self {
            top_frequent: 10_000,
            retrieval: RetrievalConfig::default(),
        }
    }
}

/// Frequent source words paired with their retrieved target, kept only when
/// retrieval from that target returns the same source word.
pub fn mutual_nn_dictionary(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    w: &TranslationMatrix,
    cfg: &MutualNnConfig,
) -> Result<BilingualDictionary> {
    check_dims(src, tgt)?;
    let retriever = Retriever::new(src, tgt, w, &cfg.retrieval)?;
    let pool = cfg.top_frequent.min(retriever.source_pool());
    let pairs: Vec<Option<(usize, usize)>> = (0..pool)
        .into_par_iter()
        .map(|i| {
            let (j, _) = retriever.best_target(src, i);
            (retriever.best_source(j).0 == i).then_some((i, j))
        })
        .collect();
    let mut dict = BilingualDictionary::new(Provenance::MutualNn);
    for (i, j) in pairs.into_iter().flatten() {
        dict.insert(src.words()[i].as_str(), tgt.words()[j].as_str())?;
    }
    if dict.is_empty() {
        return Err(Error::EmptyDictionary { iteration: None });
    }
    Ok(dict)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RefineConfig {
    pub iterations: usize,
    pub mutual: MutualNnConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            mutual: MutualNnConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Refinement {
    pub matrix: TranslationMatrix,
    /// Size of the induced dictionary at each iteration.
    pub dictionary_sizes: Vec<usize>,
}

/// Alternate mutual-NN dictionary induction and Procrustes, re-seeding from
/// scratch each iteration.
pub fn refine(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    w0: &TranslationMatrix,
    cfg: &RefineConfig,
) -> Result<Refinement> {
    let mut w = w0.clone();
    let mut dictionary_sizes = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let dict = match mutual_nn_dictionary(src, tgt, &w, &cfg.mutual) {
            Err(Error::EmptyDictionary { .. }) => {
                return Err(Error::EmptyDictionary {
                    iteration: Some(iteration),
                })
            }
            other => other?,
        };
        dictionary_sizes.push(dict.len());
        w = procrustes(src, tgt, &dict)?.matrix;
        log::debug!("refine iteration {iteration}: {} pairs", dict.len());
    }
    Ok(Refinement {
        matrix: w,
        dictionary_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random_orthogonal;
    use crate::retrieval::{translate, RetrievalMethod};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_space(n: usize, d: usize, rng: &mut ChaCha8Rng, prefix: &str) -> EmbeddingSpace {
        let data = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        let words = (0..n).map(|i| format!("{prefix}{i}")).collect();
        EmbeddingSpace::new(words, Matrix::from_vec(n, d, data).unwrap())
            .unwrap()
            .normalize()
            .unwrap()
    }

    /// Target row i = Q·source row i, relabelled with `prefix`.
    fn rotated(src: &EmbeddingSpace, q: &Matrix, prefix: &str) -> EmbeddingSpace {
        let w = TranslationMatrix::new(q.clone()).unwrap();
        let words = (0..src.len()).map(|i| format!("{prefix}{i}")).collect();
        EmbeddingSpace::new(words, w.map_rows(src.vectors()))
            .unwrap()
            .normalize()
            .unwrap()
    }

    fn index_dict(n: usize, provenance: Provenance) -> BilingualDictionary {
        BilingualDictionary::from_pairs((0..n).map(|i| (format!("s{i}"), format!("t{i}"))), provenance).unwrap()
    }

    #[test]
    fn identical_seed_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = |words: &[&str], rng: &mut ChaCha8Rng| {
            let data = (0..words.len() * 2).map(|_| rng.sample(StandardNormal)).collect();
            EmbeddingSpace::new(
                words.iter().map(|w| w.to_string()).collect(),
                Matrix::from_vec(words.len(), 2, data).unwrap(),
            )
            .unwrap()
        };
        let en = m(&["the", "madrid"], &mut rng);
        let es = m(&["madrid", "el"], &mut rng);
        let seed = identical_seed(&en, &es).unwrap();
        assert_eq!(seed.pairs(), [("madrid".to_string(), "madrid".to_string())]);
        assert_eq!(seed.provenance(), Provenance::IdenticalSeed);
        let other = m(&["x", "y"], &mut rng);
        assert!(matches!(identical_seed(&en, &other), Err(Error::EmptySeed(_))));
        assert_eq!(identical_seed(&en, &en).unwrap().len(), 2);
    }

    #[test]
    fn procrustes_identity_on_same_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_space(30, 5, &mut rng, "w");
        let dict = identical_seed(&s, &s).unwrap();
        let fit = procrustes(&s, &s, &dict).unwrap();
        assert!(fit.matrix.matrix().sub(&Matrix::identity(5)).unwrap().frobenius_norm() < 1e-9);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = random_space(50, 4, &mut rng, "s");
        let q = random_orthogonal(4, &mut rng);
        let tgt = rotated(&src, &q, "t");
        let fit = procrustes(&src, &tgt, &index_dict(50, Provenance::Gold)).unwrap();
        assert!(fit.matrix.matrix().sub(&q).unwrap().frobenius_norm() < 1e-6);
        assert!(fit.matrix.orthogonality_residual() < ORTHOGONALITY_TOL);
    }

    #[test]
    fn procrustes_single_pair_aligns_that_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = random_space(1, 3, &mut rng, "s");
        let tgt = random_space(1, 3, &mut rng, "t");
        let fit = procrustes(&src, &tgt, &index_dict(1, Provenance::Gold)).unwrap();
        assert!(fit.matrix.orthogonality_residual() < ORTHOGONALITY_TOL);
        let mapped = fit.matrix.map_row(src.vectors().row(0));
        assert!((dot(&mapped, tgt.vectors().row(0)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn procrustes_drops_oov_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = random_space(10, 3, &mut rng, "s");
        let tgt = random_space(10, 3, &mut rng, "t");
        let mut dict = index_dict(10, Provenance::Gold);
        dict.insert("s0", "missing").unwrap();
        dict.insert("missing", "t0").unwrap();
        let fit = procrustes(&src, &tgt, &dict).unwrap();
        assert_eq!((fit.pairs_used, fit.pairs_dropped), (10, 2));
        let oov = BilingualDictionary::from_pairs([("a", "b")], Provenance::Gold).unwrap();
        assert!(matches!(procrustes(&src, &tgt, &oov), Err(Error::EmptySeed(_))));
        let narrow = random_space(10, 2, &mut rng, "s");
        assert!(matches!(
            procrustes(&narrow, &tgt, &dict),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn procrustes_beats_random_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = random_space(12, 3, &mut rng, "s");
        let tgt = random_space(12, 3, &mut rng, "t");
        let dict = index_dict(12, Provenance::Gold);
        let fit = procrustes(&src, &tgt, &dict).unwrap();
        let loss = |w: &Matrix| {
            let mapped = src.vectors().matmul(&w.transpose()).unwrap();
            mapped.sub(tgt.vectors()).unwrap().frobenius_norm()
        };
        let best = loss(fit.matrix.matrix());
        assert!(best <= loss(&Matrix::identity(3)) + 1e-12);
        for _ in 0..1000 {
            let q = random_orthogonal(3, &mut rng);
            assert!(best <= loss(&q) + 1e-9);
        }
    }

    #[test]
    fn procrustes_ignores_pair_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let src = random_space(40, 6, &mut rng, "s");
        let tgt = random_space(40, 6, &mut rng, "t");
        let fwd = procrustes(&src, &tgt, &index_dict(40, Provenance::Gold)).unwrap();
        let rev = BilingualDictionary::from_pairs(
            (0..40).rev().map(|i| (format!("s{i}"), format!("t{i}"))),
            Provenance::Gold,
        )
        .unwrap();
        let back = procrustes(&src, &tgt, &rev).unwrap();
        assert!(fwd.matrix.matrix().sub(back.matrix.matrix()).unwrap().frobenius_norm() < 1e-9);
    }

    fn cosine_cfg() -> MutualNnConfig {
        MutualNnConfig {
            top_frequent: 10_000,
            retrieval: RetrievalConfig {
                method: RetrievalMethod::Cosine,
                ..Default::default()
            },
        }
    }

    #[test]
    fn mutual_nn_recovers_gold_under_true_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let src = random_space(200, 8, &mut rng, "s");
        let q = random_orthogonal(8, &mut rng);
        let tgt = rotated(&src, &q, "t");
        let w = TranslationMatrix::new(q).unwrap();
        for cfg in [cosine_cfg(), MutualNnConfig::default()] {
            let dict = mutual_nn_dictionary(&src, &tgt, &w, &cfg).unwrap();
            assert_eq!(dict.len(), 200);
            for (s, t) in dict.pairs() {
                assert_eq!(s[1..], t[1..]);
            }
            // reversed roles with W^T give the same pairs
            let back = mutual_nn_dictionary(&tgt, &src, &w.transpose(), &cfg).unwrap();
            for (s, t) in dict.pairs() {
                assert!(back.contains(t, s));
            }
        }
    }

    #[test]
    fn mutual_nn_caps_pool_and_reports_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let src = random_space(20, 4, &mut rng, "s");
        let dict = mutual_nn_dictionary(&src, &src, &TranslationMatrix::identity(4), &cosine_cfg()).unwrap();
        assert_eq!(dict.len(), 20);

        // x is a hub: both sources retrieve it, x retrieves b
        let s = EmbeddingSpace::new(
            vec!["a".into(), "b".into()],
            Matrix::from_rows(&[[1.0, 0.0], [0.8, 0.6]]).unwrap(),
        )
        .unwrap();
        let t = EmbeddingSpace::new(
            vec!["x".into(), "y".into()],
            Matrix::from_rows(&[[0.6, 0.8], [-1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let d = mutual_nn_dictionary(&s, &t, &TranslationMatrix::identity(2), &cosine_cfg()).unwrap();
        assert_eq!(d.pairs(), [("b".to_string(), "x".to_string())]);
        let cfg = MutualNnConfig {
            top_frequent: 1,
            ..cosine_cfg()
        };
        assert!(matches!(
            mutual_nn_dictionary(&s, &t, &TranslationMatrix::identity(2), &cfg),
            Err(Error::EmptyDictionary { iteration: None })
        ));
    }

    #[test]
    fn refine_fixed_point_and_zero_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let src = random_space(150, 6, &mut rng, "s");
        let q = random_orthogonal(6, &mut rng);
        let tgt = rotated(&src, &q, "t");
        let w0 = TranslationMatrix::new(q.clone()).unwrap();
        let r = refine(&src, &tgt, &w0, &RefineConfig::default()).unwrap();
        assert!(r.matrix.matrix().sub(&q).unwrap().frobenius_norm() < 1e-6);
        assert_eq!(r.dictionary_sizes, vec![150; 5]);
        let none = RefineConfig {
            iterations: 0,
            ..Default::default()
        };
        assert_eq!(refine(&src, &tgt, &w0, &none).unwrap().matrix, w0);
    }

    #[test]
    fn refine_reports_empty_iteration() {
        let s = EmbeddingSpace::new(
            vec!["a".into(), "b".into()],
            Matrix::from_rows(&[[1.0, 0.0], [0.8, 0.6]]).unwrap(),
        )
        .unwrap();
        let t = EmbeddingSpace::new(
            vec!["x".into(), "y".into()],
            Matrix::from_rows(&[[0.6, 0.8], [-1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let cfg = RefineConfig {
            iterations: 3,
            mutual: MutualNnConfig {
                top_frequent: 1,
                ..cosine_cfg()
            },
        };
        assert!(matches!(
            refine(&s, &t, &TranslationMatrix::identity(2), &cfg),
            Err(Error::EmptyDictionary { iteration: Some(0) })
        ));
    }

    #[test]
    fn refine_does_not_hurt_noisy_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 400;
        let d = 10;
        let src = random_space(n, d, &mut rng, "s");
        let q = random_orthogonal(d, &mut rng);
        let w = TranslationMatrix::new(q).unwrap();
        let mut noisy = w.map_rows(src.vectors()).as_slice().to_vec();
        noisy.iter_mut().for_each(|x| *x += 0.1 * rng.sample::<f64, _>(StandardNormal));
        let words = (0..n).map(|i| format!("t{i}")).collect();
        let tgt = EmbeddingSpace::new(words, Matrix::from_vec(n, d, noisy).unwrap())
            .unwrap()
            .normalize()
            .unwrap();
        let seed = index_dict(40, Provenance::Gold);
        let w0 = procrustes(&src, &tgt, &seed).unwrap().matrix;
        let gold = index_dict(n, Provenance::Gold);
        let queries: Vec<String> = (40..n).map(|i| format!("s{i}")).collect();
        let p1 = |w: &TranslationMatrix| {
            let t = translate(&queries, &src, &tgt, w, &RetrievalConfig::default()).unwrap();
            crate::retrieval::evaluate_p1(&t, &gold).unwrap().p_at_1
        };
        let before = p1(&w0);
        let after = p1(&refine(&src, &tgt, &w0, &RefineConfig::default()).unwrap().matrix);
        assert!(after >= before, "{after} < {before}");
    }

    #[test]
    fn matrix_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = TranslationMatrix::new(random_orthogonal(4, &mut rng)).unwrap();
        let mut buf = Vec::new();
        w.write(&mut buf).unwrap();
        assert!(buf.starts_with(b"4 4\n"));
        assert_eq!(TranslationMatrix::read(buf.as_slice()).unwrap(), w);
        assert!(TranslationMatrix::read("2 3\n".as_bytes()).is_err());
        assert!(TranslationMatrix::read("2 2\n1 0\n".as_bytes()).is_err());
        assert!(TranslationMatrix::read("".as_bytes()).is_err());
    }
}
