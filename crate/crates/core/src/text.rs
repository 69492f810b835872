//! Surname normalization.

use alloc::string::String;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::{Error, Result};

/// Characters reserved as n-gram boundary markers; they may not appear in a
/// normalized surname.
pub const RESERVED_CHARS: [char; 2] = ['^', '$'];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalizeOptions {
    /// Remove combining marks after canonical decomposition (`é` → `e`).
    #[cfg_attr(feature = "serde", serde(default))]
    pub strip_diacritics: bool,
}

/// Canonical form of a surname: NFC, lowercase, trimmed, internal whitespace
/// collapsed to one ASCII space. Hyphens and apostrophes are kept.
pub fn normalize_surname(raw: &str, opts: NormalizeOptions) -> Result<String> {
    let composed: String = if opts.strip_diacritics {
        raw.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect()
    } else {
        raw.nfc().collect()
    };
    let lowered = composed.to_lowercase();

    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    if out.is_empty() {
        return Err(Error::InvalidSurname(String::from(raw), "empty after normalization"));
    }
    if out.chars().any(|c| RESERVED_CHARS.contains(&c) || c.is_control()) {
        return Err(Error::InvalidSurname(String::from(raw), "contains a reserved or control character"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(s: &str) -> Result<String> {
        normalize_surname(s, NormalizeOptions::default())
    }

    #[test]
    fn lowercases_trims_and_collapses() {
        assert_eq!(norm("  De   La\tCRUZ ").unwrap(), "de la cruz");
    }

    #[test]
    fn keeps_hyphen_apostrophe_and_diacritics() {
        assert_eq!(norm("O'Brien-Müller").unwrap(), "o'brien-müller");
    }

    #[test]
    fn composes_decomposed_input() {
        // "e" + combining acute
        assert_eq!(norm("Jose\u{301}").unwrap(), "jos\u{e9}");
    }

    #[test]
    fn strips_diacritics_on_request() {
        let opts = NormalizeOptions { strip_diacritics: true };
        assert_eq!(normalize_surname("Łódź Müller", opts).unwrap(), "łodz muller");
    }

    #[test]
    fn rejects_empty_and_reserved() {
        assert!(norm("   ").is_err());
        assert!(norm("a^b").is_err());
        assert!(norm("a$").is_err());
    }
}
