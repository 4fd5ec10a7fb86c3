use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Where a dictionary's pairs came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    IdenticalSeed,
    MutualNn,
    Gold,
    Induced,
}

/// Multi-valued source→target word pairs, deduplicated, in insertion order.
#[derive(Clone, Debug)]
pub struct BilingualDictionary {
    pairs: Vec<(String, String)>,
    by_source: HashMap<String, Vec<usize>>,
    sources: Vec<String>,
    provenance: Provenance,
}

impl BilingualDictionary {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            pairs: Vec::new(),
            by_source: HashMap::new(),
            sources: Vec::new(),
            provenance,
        }
    }

    pub fn from_pairs<I, S, T>(pairs: I, provenance: Provenance) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut dict = Self::new(provenance);
        for (s, t) in pairs {
            dict.insert(s, t)?;
        }
        Ok(dict)
    }

    /// Returns `false` when the pair was already present.
    pub fn insert(&mut self, source: impl Into<String>, target: impl Into<String>) -> Result<bool> {
        let (source, target) = (source.into(), target.into());
        if source.is_empty() || target.is_empty() {
            return Err(Error::InvalidConfig("dictionary words must be non-empty".into()));
        }
        if let Some(idx) = self.by_source.get(&source) {
            if idx.iter().any(|&i| self.pairs[i].1 == target) {
                return Ok(false);
            }
        } else {
            self.sources.push(source.clone());
        }
        self.by_source
            .entry(source.clone())
            .or_default()
            .push(self.pairs.len());
        self.pairs.push((source, target));
        Ok(true)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    /// Distinct source words in order of first appearance.
    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn translations<'a>(&'a self, source: &str) -> impl Iterator<Item = &'a str> + 'a {
        self.by_source
            .get(source)
            .into_iter()
            .flatten()
            .map(move |&i| self.pairs[i].1.as_str())
    }

    pub fn has_source(&self, source: &str) -> bool {
        self.by_source.contains_key(source)
    }

    pub fn contains(&self, source: &str, target: &str) -> bool {
        self.translations(source).any(|t| t == target)
    }

    /// Reads one whitespace-separated `source target` pair per line. Blank
    /// lines are skipped.
    pub fn read<R: BufRead>(reader: R, provenance: Provenance) -> Result<Self> {
        let mut dict = Self::new(provenance);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [] => continue,
                [s, t] => {
                    dict.insert(*s, *t)?;
                }
                _ => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("expected \"source target\", found {} fields", fields.len()),
                    })
                }
            }
        }
        Ok(dict)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (s, t) in &self.pairs {
            writeln!(out, "{s} {t}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedupes_and_groups() {
        let mut d = BilingualDictionary::new(Provenance::Gold);
        assert!(d.insert("a", "x").unwrap());
        assert!(d.insert("b", "y").unwrap());
        assert!(d.insert("a", "z").unwrap());
        assert!(!d.insert("a", "x").unwrap());
        assert_eq!(d.len(), 3);
        assert_eq!(d.sources(), ["a", "b"]);
        assert_eq!(d.translations("a").collect::<Vec<_>>(), ["x", "z"]);
        assert!(d.contains("a", "z"));
        assert!(!d.contains("b", "x"));
        assert_eq!(d.translations("q").count(), 0);
    }

    #[test]
    fn rejects_empty_words() {
        let mut d = BilingualDictionary::new(Provenance::Gold);
        assert!(d.insert("", "x").is_err());
    }

    #[test]
    fn reads_and_writes() {
        let d = BilingualDictionary::read("a x\n\nb\ty\n".as_bytes(), Provenance::Gold).unwrap();
        assert_eq!(d.len(), 2);
        let mut out = Vec::new();
        d.write(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a x\nb y\n");
        assert!(matches!(
            BilingualDictionary::read("a x\nb y z\n".as_bytes(), Provenance::Gold),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(BilingualDictionary::read("".as_bytes(), Provenance::Gold).unwrap().is_empty());
    }
}
