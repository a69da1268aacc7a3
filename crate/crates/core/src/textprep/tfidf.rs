use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Sparse vector of `(index, value)` pairs sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map_or(0.0, |k| self.entries[k].1)
    }
}

/// Vocabulary and smoothed inverse document frequencies of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfidfModel {
    /// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
    pub fn fit<D, S>(corpus: &[D]) -> Result<Self>
    where
        D: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let terms: BTreeSet<&str> = doc.as_ref().iter().map(AsRef::as_ref).collect();
            for t in terms {
                *df.entry(t.to_string()).or_insert(0) += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::Config("tf-idf corpus has an empty vocabulary".into()));
        }
        let n = corpus.len() as f64;
        let idf = df.values().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
        let vocabulary = df.into_keys().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(Self { vocabulary, idf })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index(term).map(|i| self.idf[i])
    }

    /// Raw term counts times idf; out-of-vocabulary terms are ignored.
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in doc {
            if let Some(i) = self.index(t.as_ref()) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        SparseVector {
            dim: self.dim(),
            entries: counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect(),
        }
    }
}

/// Fits on `corpus` and featurizes `doc` in one call.
pub fn tfidf_features<D, S>(corpus: &[D], doc: &[S]) -> Result<SparseVector>
where
    D: AsRef<[S]>,
    S: AsRef<str>,
{
    Ok(TfidfModel::fit(corpus)?.transform(doc))
}
