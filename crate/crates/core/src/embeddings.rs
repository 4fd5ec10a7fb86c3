//! Monolingual embedding spaces and the `.vec` text format.
//!
//! Row order is load order. fastText writes words most-frequent-first, so the
//! row index doubles as the frequency rank.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::numerics::{l2_norm, Matrix, UNIT_NORM_TOL};

#[derive(Clone, Debug)]
pub struct EmbeddingSpace {
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Matrix,
    normalized: bool,
}

impl EmbeddingSpace {
    pub fn new(words: Vec<String>, vectors: Matrix) -> Result<Self> {
        if words.len() != vectors.rows() {
            return Err(Error::DimensionMismatch {
                context: "embedding rows vs words".into(),
                expected: words.len(),
                found: vectors.rows(),
            });
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::InvalidConfig(format!("invalid word {w:?} at row {i}")));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate word {w:?}")));
            }
        }
        let normalized = vectors
            .row_iter()
            .all(|r| (l2_norm(r) - 1.0).abs() <= UNIT_NORM_TOL)
            && vectors.rows() > 0;
        Ok(Self {
            words,
            index,
            vectors,
            normalized,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.vectors.row(i))
    }

    /// 1-based frequency rank, `None` for out-of-vocabulary words.
    pub fn frequency_rank(&self, word: &str) -> Option<usize> {
        self.index_of(word).map(|i| i + 1)
    }

    /// Copy with every row scaled to unit L2 norm.
    pub fn normalize(&self) -> Result<Self> {
        let mut vectors = self.vectors.clone();
        for i in 0..vectors.rows() {
            let row = vectors.row_mut(i);
            let norm = l2_norm(row);
            if norm == 0.0 {
                return Err(Error::ZeroNorm {
                    word: self.words[i].clone(),
                });
            }
            row.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(Self {
            words: self.words.clone(),
            index: self.index.clone(),
            vectors,
            normalized: true,
        })
    }

    pub(crate) fn require_normalized(&self, what: &str) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("{what} requires a normalized embedding space")))
        }
    }

    /// Write as `.vec` text with a `<count> <dim>` header. Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn write_vec<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim())?;
        for (w, row) in self.words.iter().zip(self.vectors.row_iter()) {
            out.write_all(w.as_bytes())?;
            for x in row {
                write!(out, " {x}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeaderMode {
    /// First line must be `<count> <dim>`.
    Expect,
    /// Every line is a vector row.
    Absent,
    /// Treat the first line as a header when it holds exactly two integers.
    #[default]
    Detect,
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    pub max_vocab: Option<usize>,
    pub header: HeaderMode,
    pub fold_case: bool,
}

#[derive(Clone, Debug)]
pub struct LoadedSpace {
    pub space: EmbeddingSpace,
    /// Rows dropped because their word was already loaded.
    pub duplicates: usize,
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.trim_end_matches(['\n', '\r'])
        .split(' ')
        .filter(|t| !t.is_empty())
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = tokens(line);
    let count = it.next()?.parse().ok()?;
    let dim = it.next()?.parse().ok()?;
    it.next().is_none().then_some((count, dim))
}

pub fn load_vec<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<LoadedSpace> {
    let mut words = Vec::new();
    let mut seen: HashMap<String, ()> = HashMap::new();
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;
    let mut duplicates = 0;
    let cap = opts.max_vocab.unwrap_or(usize::MAX);

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            match (opts.header, parse_header(&line)) {
                (HeaderMode::Expect, None) => {
                    return Err(Error::Parse {
                        line: 1,
                        message: "expected header \"<count> <dim>\"".into(),
                    })
                }
                (HeaderMode::Expect | HeaderMode::Detect, Some((_, d))) => {
                    if d == 0 {
                        return Err(Error::Parse {
                            line: 1,
                            message: "header declares zero dimensions".into(),
                        });
                    }
                    dim = Some(d);
                    continue;
                }
                _ => {}
            }
        }
        if line.trim().is_empty() {
            continue;
        }
        if words.len() >= cap {
            break;
        }
        let mut it = tokens(&line);
        let word = it.next().expect("non-blank line has a token");
        let values: Vec<&str> = it.collect();
        let expected = *dim.get_or_insert(values.len());
        if values.len() != expected || expected == 0 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {expected} values, found {}", values.len()),
            });
        }
        let word = if opts.fold_case {
            word.to_lowercase()
        } else {
            word.to_owned()
        };
        if seen.contains_key(&word) {
            duplicates += 1;
            continue;
        }
        for v in values {
            let x: f64 = v.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid number {v:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite value {v:?}"),
                });
            }
            data.push(x);
        }
        seen.insert(word.clone(), ());
        words.push(word);
    }

    if words.is_empty() {
        return Err(Error::EmptyInput("embedding file has no vector rows".into()));
    }
    if duplicates > 0 {
        log::warn!("skipped {duplicates} duplicate embedding rows");
    }
    let vectors = Matrix::from_vec(words.len(), dim.unwrap_or(0), data)?;
    Ok(LoadedSpace {
        space: EmbeddingSpace::new(words, vectors)?,
        duplicates,
    })
}
