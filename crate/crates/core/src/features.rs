//! Character n-gram features.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::text::NormalizeOptions;
use crate::{Error, Result};

pub const MAX_N: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NGramConfig {
    /// Sorted, deduplicated n values.
    pub n_values: Vec<usize>,
    pub pad_boundaries: bool,
    pub start_marker: char,
    pub end_marker: char,
    /// Normalization applied to raw surnames before extraction.
    #[cfg_attr(feature = "serde", serde(default))]
    pub normalize: NormalizeOptions,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            n_values: alloc::vec![2, 3],
            pad_boundaries: true,
            start_marker: '^',
            end_marker: '$',
            normalize: NormalizeOptions::default(),
        }
    }
}

impl NGramConfig {
    pub fn with_n(mut self, n_values: &[usize]) -> Self {
        let set: BTreeSet<usize> = n_values.iter().copied().collect();
        self.n_values = set.into_iter().collect();
        self
    }

    pub fn padded(mut self, pad: bool) -> Self {
        self.pad_boundaries = pad;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::InvalidNGramConfig("n_values is empty"));
        }
        if self.n_values.iter().any(|&n| n == 0 || n > MAX_N) {
            return Err(Error::InvalidNGramConfig("every n must lie in 1..=8"));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidNGramConfig("n_values must be strictly increasing"));
        }
        if self.start_marker == self.end_marker {
            return Err(Error::InvalidNGramConfig("start and end markers must differ"));
        }
        if self.start_marker.is_whitespace() || self.end_marker.is_whitespace() {
            return Err(Error::InvalidNGramConfig("markers must not be whitespace"));
        }
        Ok(())
    }

    /// Calls `f` once per n-gram occurrence of a normalized surname.
    ///
    /// Words separated by spaces are treated independently, each padded with
    /// the boundary markers when `pad_boundaries` is set.
    pub fn for_each_ngram(&self, surname: &str, mut f: impl FnMut(&str)) {
        let mut chars: Vec<char> = Vec::new();
        let mut buf = String::new();
        for word in surname.split(' ').filter(|w| !w.is_empty()) {
            chars.clear();
            if self.pad_boundaries {
                chars.push(self.start_marker);
            }
            chars.extend(word.chars());
            if self.pad_boundaries {
                chars.push(self.end_marker);
            }
            for &n in &self.n_values {
                if chars.len() < n {
                    continue;
                }
                for window in chars.windows(n) {
                    buf.clear();
                    buf.extend(window.iter());
                    f(&buf);
                }
            }
        }
    }
}

/// Multiset of n-gram tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureVector {
    pub counts: BTreeMap<String, u32>,
}

impl FeatureVector {
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| u64::from(c)).sum()
    }
}

pub fn extract(surname: &str, config: &NGramConfig) -> FeatureVector {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    config.for_each_ngram(surname, |g| {
        if let Some(c) = counts.get_mut(g) {
            *c += 1;
        } else {
            counts.insert(String::from(g), 1);
        }
    });
    FeatureVector { counts }
}

/// Lexicographically ordered token list; position is the feature index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Builds from tokens in any order; duplicates are dropped.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Result<Self> {
        let set: BTreeSet<String> = tokens.into_iter().collect();
        if set.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// In-vocabulary feature counts of a surname as `(index, count)` pairs,
    /// sorted by index. Out-of-vocabulary n-grams are dropped.
    pub fn encode(&self, surname: &str, config: &NGramConfig) -> Vec<(usize, u32)> {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        config.for_each_ngram(surname, |g| {
            if let Some(i) = self.index_of(g) {
                *counts.entry(i).or_insert(0) += 1;
            }
        });
        counts.into_iter().collect()
    }
}

/// Tokens present in at least `min_df` distinct surnames.
pub fn build_vocabulary<'a>(
    corpus: impl IntoIterator<Item = &'a str>,
    config: &NGramConfig,
    min_df: usize,
) -> Result<Vocabulary> {
    config.validate()?;
    let names: BTreeSet<&str> = corpus.into_iter().collect();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for name in names {
        seen.clear();
        config.for_each_ngram(name, |g| {
            if !seen.contains(g) {
                seen.insert(String::from(g));
            }
        });
        for g in seen.iter() {
            *df.entry(g.clone()).or_insert(0) += 1;
        }
    }
    Vocabulary::from_tokens(df.into_iter().filter(|(_, d)| *d >= min_df.max(1)).map(|(g, _)| g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg(n: &[usize], pad: bool) -> NGramConfig {
        NGramConfig::default().with_n(n).padded(pad)
    }

    fn counts(fv: &FeatureVector) -> Vec<(&str, u32)> {
        fv.counts.iter().map(|(k, v)| (k.as_str(), *v)).collect()
    }

    #[test]
    fn padded_bigrams() {
        let fv = extract("ab", &cfg(&[2], true));
        assert_eq!(counts(&fv), vec![("^a", 1), ("ab", 1), ("b$", 1)]);
    }

    #[test]
    fn multiplicity_kept() {
        let fv = extract("aaa", &cfg(&[2], false));
        assert_eq!(counts(&fv), vec![("aa", 2)]);
    }

    #[test]
    fn sliding_trigrams() {
        let fv = extract("toriyama", &cfg(&[3], false));
        assert_eq!(fv.counts.len(), 6);
        for g in ["tor", "ori", "riy", "iya", "yam", "ama"] {
            assert_eq!(fv.counts[g], 1, "{g}");
        }
    }

    #[test]
    fn short_strings_yield_nothing() {
        assert!(extract("ab", &cfg(&[3], false)).counts.is_empty());
        assert_eq!(extract("ab", &cfg(&[3], true)).total(), 2);
    }

    #[test]
    fn words_are_padded_independently() {
        let fv = extract("de la", &cfg(&[2], true));
        assert_eq!(counts(&fv), vec![("^d", 1), ("^l", 1), ("a$", 1), ("de", 1), ("e$", 1), ("la", 1)]);
        assert!(!fv.counts.keys().any(|k| k.contains(' ')));
    }

    #[test]
    fn vocabulary_examples() {
        let v = build_vocabulary(["ab"], &cfg(&[2], true), 1).unwrap();
        assert_eq!(v.tokens(), ["^a", "ab", "b$"]);

        let v = build_vocabulary(["ab", "ba"], &cfg(&[2], false), 1).unwrap();
        assert_eq!(v.tokens(), ["ab", "ba"]);

        let v = build_vocabulary(["ab", "abb"], &cfg(&[2], false), 2).unwrap();
        assert_eq!(v.tokens(), ["ab"]);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        assert_eq!(build_vocabulary(["a"], &cfg(&[3], false), 1), Err(Error::EmptyVocabulary));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(&[], true).validate().is_err());
        assert!(cfg(&[9], true).validate().is_err());
        let c = NGramConfig { end_marker: '^', ..NGramConfig::default() };
        assert!(c.validate().is_err());
        assert!(NGramConfig::default().validate().is_ok());
    }

    #[test]
    fn encode_drops_out_of_vocabulary() {
        let c = cfg(&[2], false);
        let v = build_vocabulary(["ab"], &c, 1).unwrap();
        assert_eq!(v.encode("abab", &c), vec![(0, 2)]);
        assert!(v.encode("zz", &c).is_empty());
    }
}
