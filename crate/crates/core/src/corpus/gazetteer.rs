//! Whole-word country tagging of free-text affiliations.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use unicode_normalization::UnicodeNormalization;

use super::registry::{CountryRegistry, EXTRA_ALIASES};
use super::CountryCode;

/// Country-name aliases, each mapped to one canonical code.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    aliases: Vec<(Vec<String>, CountryCode)>,
}

fn words(text: &str) -> Vec<String> {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    lowered.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(ToString::to_string).collect()
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry display names plus common alternative spellings.
    pub fn natural_earth() -> Self {
        let registry = CountryRegistry::natural_earth();
        let mut g = Gazetteer::new();
        for (code, name) in registry.iter() {
            g.insert(name, code.clone());
        }
        for (alias, code) in EXTRA_ALIASES {
            g.insert(alias, CountryCode::new(code).expect("bundled code"));
        }
        g
    }

    pub fn insert(&mut self, alias: &str, code: CountryCode) {
        let w = words(alias);
        if !w.is_empty() {
            self.aliases.push((w, code));
        }
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }

    /// The country whose alias occurs as a whole-word, case-insensitive match.
    ///
    /// A hit nested inside a longer hit ("guinea" inside "papua new guinea")
    /// is discarded. Zero or several distinct countries yield `None`.
    pub fn tag(&self, affiliation: &str) -> Option<CountryCode> {
        let tokens = words(affiliation);
        let mut hits: Vec<(usize, usize, &CountryCode)> = Vec::new();
        for (alias, code) in &self.aliases {
            if alias.len() > tokens.len() {
                continue;
            }
            for start in 0..=tokens.len() - alias.len() {
                if tokens[start..start + alias.len()] == alias[..] {
                    hits.push((start, start + alias.len(), code));
                }
            }
        }
        let kept: BTreeSet<&CountryCode> = hits
            .iter()
            .filter(|(s, e, _)| !hits.iter().any(|(s2, e2, _)| s2 <= s && e <= e2 && (e2 - s2) > (e - s)))
            .map(|(_, _, c)| *c)
            .collect();
        if kept.len() == 1 {
            kept.into_iter().next().cloned()
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(s: &str) -> CountryCode {
        CountryCode::new(s).unwrap()
    }

    #[test]
    fn single_alias_hit() {
        let g = Gazetteer::natural_earth();
        assert_eq!(g.tag("Univ. of Tokyo, Japan"), Some(code("JP")));
    }

    #[test]
    fn no_alias() {
        let g = Gazetteer::natural_earth();
        assert_eq!(g.tag("Institute of Science"), None);
    }

    #[test]
    fn two_countries_are_ambiguous() {
        let g = Gazetteer::natural_earth();
        assert_eq!(g.tag("France–Germany joint lab"), None);
    }

    #[test]
    fn whole_words_only() {
        let mut g = Gazetteer::new();
        g.insert("Oman", code("OM"));
        assert_eq!(g.tag("Romanian Academy"), None);
        assert_eq!(g.tag("Muscat, OMAN"), Some(code("OM")));
    }

    #[test]
    fn longer_alias_shadows_nested_one() {
        let g = Gazetteer::natural_earth();
        assert_eq!(g.tag("Port Moresby, Papua New Guinea"), Some(code("PG")));
        assert_eq!(g.tag("Conakry, Guinea"), Some(code("GN")));
    }

    #[test]
    fn aliases_of_same_country_agree() {
        let g = Gazetteer::natural_earth();
        assert_eq!(g.tag("Harvard, Boston, MA, USA, United States"), Some(code("US")));
    }
}
