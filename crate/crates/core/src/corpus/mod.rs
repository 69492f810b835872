//! Occurrence tables, concentration filtering and core-name extraction.

mod gazetteer;
mod registry;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use gazetteer::Gazetteer;
pub use registry::CountryRegistry;

use crate::text::{normalize_surname, NormalizeOptions};
use crate::{Error, Result};

/// Uppercase ASCII country token (ISO 3166-1 alpha-2 style, 2–3 characters).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub struct CountryCode(String);

impl CountryCode {
    pub fn new(raw: &str) -> Result<Self> {
        let t = raw.trim();
        if !(2..=3).contains(&t.len()) || !t.bytes().all(|b| b.is_ascii_alphanumeric()) {
            return Err(Error::InvalidCountryCode(raw.to_string()));
        }
        Ok(CountryCode(t.to_ascii_uppercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for CountryCode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        CountryCode::new(&s)
    }
}

impl From<CountryCode> for String {
    fn from(c: CountryCode) -> String {
        c.0
    }
}

/// One `(surname, country, count)` observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceRecord {
    pub surname: String,
    pub country: CountryCode,
    pub count: u64,
}

/// Merged surname × country counts with per-country totals.
///
/// Duplicate `(surname, country)` pairs are summed, so the table is
/// independent of insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OccurrenceTable {
    by_surname: BTreeMap<String, BTreeMap<CountryCode, u64>>,
    country_totals: BTreeMap<CountryCode, u64>,
    records: usize,
}

impl OccurrenceTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an already-normalized observation.
    pub fn add(&mut self, surname: &str, country: CountryCode, count: u64) -> Result<()> {
        if count == 0 {
            return Err(Error::NonPositiveCount);
        }
        if surname.is_empty() {
            return Err(Error::InvalidSurname(String::new(), "empty"));
        }
        *self.country_totals.entry(country.clone()).or_insert(0) += count;
        let row = self.by_surname.entry(surname.to_string()).or_default();
        let slot = row.entry(country).or_insert_with(|| {
            self.records += 1;
            0
        });
        *slot += count;
        Ok(())
    }

    /// Number of distinct `(surname, country)` pairs.
    pub fn len(&self) -> usize {
        self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records == 0
    }

    pub fn surname_count(&self) -> usize {
        self.by_surname.len()
    }

    pub fn country_totals(&self) -> &BTreeMap<CountryCode, u64> {
        &self.country_totals
    }

    pub fn count(&self, surname: &str, country: &CountryCode) -> u64 {
        self.by_surname.get(surname).and_then(|row| row.get(country)).copied().unwrap_or(0)
    }

    /// Countries in which `surname` occurs, with raw counts.
    pub fn countries_of(&self, surname: &str) -> Option<&BTreeMap<CountryCode, u64>> {
        self.by_surname.get(surname)
    }

    pub fn surnames(&self) -> impl Iterator<Item = &str> {
        self.by_surname.keys().map(String::as_str)
    }

    /// Records in `(surname, country)` order.
    pub fn records(&self) -> impl Iterator<Item = OccurrenceRecord> + '_ {
        self.by_surname.iter().flat_map(|(s, row)| {
            row.iter().map(move |(c, n)| OccurrenceRecord { surname: s.clone(), country: c.clone(), count: *n })
        })
    }

    /// `count(surname, country) / total(country)`; zero when the surname is
    /// absent from that country.
    pub fn frequency(&self, surname: &str, country: &CountryCode) -> Result<f64> {
        let total = self.country_totals.get(country).copied().unwrap_or(0);
        if total == 0 {
            return Err(Error::EmptyCountry(country.to_string()));
        }
        Ok(self.count(surname, country) as f64 / total as f64)
    }

    /// Per-country shares of a surname's normalized frequency, summing to 1.
    pub fn core_shares(&self, surname: &str) -> Result<Vec<(CountryCode, f64)>> {
        let row = self.by_surname.get(surname).ok_or_else(|| Error::UnknownSurname(surname.to_string()))?;
        Ok(self.shares(row, ConcentrationBasis::Frequency))
    }

    fn shares(&self, row: &BTreeMap<CountryCode, u64>, basis: ConcentrationBasis) -> Vec<(CountryCode, f64)> {
        let weights: Vec<(CountryCode, f64)> = row
            .iter()
            .map(|(c, &n)| {
                let w = match basis {
                    ConcentrationBasis::Frequency => n as f64 / self.country_totals[c] as f64,
                    ConcentrationBasis::Count => n as f64,
                };
                (c.clone(), w)
            })
            .collect();
        let sum: f64 = weights.iter().map(|(_, w)| w).sum();
        weights.into_iter().map(|(c, w)| (c, w / sum)).collect()
    }
}

/// Validates rows before they reach an [`OccurrenceTable`].
#[derive(Debug, Clone)]
pub struct Ingestor {
    registry: CountryRegistry,
    strict: bool,
    normalize: NormalizeOptions,
    table: OccurrenceTable,
    skipped: usize,
}

/// What happened to one ingested row.
#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Added,
    /// Non-strict mode only: the country is not in the registry.
    SkippedUnknownCountry(String),
}

impl Ingestor {
    pub fn new(registry: CountryRegistry, strict: bool, normalize: NormalizeOptions) -> Self {
        Ingestor { registry, strict, normalize, table: OccurrenceTable::new(), skipped: 0 }
    }

    pub fn push(&mut self, surname: &str, country: &str, count: u64) -> Result<RowOutcome> {
        if count == 0 {
            return Err(Error::NonPositiveCount);
        }
        let name = normalize_surname(surname, self.normalize)?;
        let code = CountryCode::new(country)?;
        if !self.registry.contains(&code) {
            if self.strict {
                return Err(Error::UnknownCountry(country.to_string()));
            }
            self.skipped += 1;
            return Ok(RowOutcome::SkippedUnknownCountry(country.to_string()));
        }
        self.table.add(&name, code, count)?;
        Ok(RowOutcome::Added)
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn finish(self) -> OccurrenceTable {
        self.table
    }
}

/// Sum of squared shares. Shares must be nonnegative and sum to 1 (±1e-9).
pub fn hhi(shares: &[f64]) -> Result<f64> {
    let sum: f64 = shares.iter().sum();
    if shares.iter().any(|s| !s.is_finite() || *s < 0.0) || crate::math::abs(sum - 1.0) > 1e-9 {
        return Err(Error::InvalidShares(sum));
    }
    Ok(shares.iter().map(|s| s * s).sum())
}

/// What the concentration index is computed over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConcentrationBasis {
    /// Per-country normalized frequencies, so heavily sampled countries do
    /// not dominate.
    #[default]
    Frequency,
    /// Raw occurrence counts.
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub hhi_min: f64,
    pub freq_min: f64,
    pub basis: ConcentrationBasis,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams { hhi_min: 0.8, freq_min: 1e-6, basis: ConcentrationBasis::Frequency }
    }
}

/// A surname concentrated enough to be attributed to one country.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreName {
    pub surname: String,
    pub assigned_country: CountryCode,
    pub hhi: f64,
    pub max_frequency: f64,
}

/// Surnames with concentration ≥ `hhi_min` and peak frequency ≥ `freq_min`,
/// each assigned to its maximal-frequency country (ties go to the
/// lexicographically smallest code). Output is sorted by surname.
pub fn filter_core_names(table: &OccurrenceTable, params: &FilterParams) -> Vec<CoreName> {
    let mut out = Vec::new();
    for (surname, row) in &table.by_surname {
        let mut best: Option<(&CountryCode, f64)> = None;
        let mut tied = false;
        for (c, &n) in row {
            let f = n as f64 / table.country_totals[c] as f64;
            match best {
                Some((_, bf)) if f > bf => {
                    best = Some((c, f));
                    tied = false;
                }
                Some((_, bf)) if f == bf => tied = true,
                None => best = Some((c, f)),
                _ => {}
            }
        }
        let Some((country, max_frequency)) = best else { continue };
        if max_frequency < params.freq_min {
            continue;
        }
        let hhi: f64 = table.shares(row, params.basis).iter().map(|(_, s)| s * s).sum();
        if hhi < params.hhi_min {
            continue;
        }
        if tied {
            log::info!("frequency tie for {surname:?}; assigned to {country}");
        }
        out.push(CoreName { surname: surname.clone(), assigned_country: country.clone(), hhi, max_frequency });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(s: &str) -> CountryCode {
        CountryCode::new(s).unwrap()
    }

    fn table(rows: &[(&str, &str, u64)]) -> OccurrenceTable {
        let mut t = OccurrenceTable::new();
        for (s, c, n) in rows {
            t.add(s, cc(c), *n).unwrap();
        }
        t
    }

    #[test]
    fn single_record_total() {
        let t = table(&[("toriyama", "JP", 5)]);
        assert_eq!(t.country_totals()[&cc("JP")], 5);
    }

    #[test]
    fn duplicates_merge() {
        let t = table(&[("li", "CN", 3), ("li", "CN", 2)]);
        assert_eq!(t.len(), 1);
        assert_eq!(t.count("li", &cc("CN")), 5);
    }

    #[test]
    fn totals_sum_by_country() {
        let t = table(&[("li", "CN", 3), ("li", "US", 1), ("smith", "US", 9)]);
        assert_eq!(t.country_totals()[&cc("CN")], 3);
        assert_eq!(t.country_totals()[&cc("US")], 10);
    }

    #[test]
    fn frequency_cases() {
        let t = table(&[("a", "FR", 5), ("b", "DE", 3), ("c", "DE", 7)]);
        assert_eq!(t.frequency("a", &cc("FR")).unwrap(), 1.0);
        assert_eq!(t.frequency("b", &cc("FR")).unwrap(), 0.0);
        assert_eq!(t.frequency("b", &cc("DE")).unwrap(), 0.3);
        assert!(matches!(t.frequency("a", &cc("IT")), Err(Error::EmptyCountry(_))));
    }

    #[test]
    fn hhi_examples() {
        assert_eq!(hhi(&[1.0]).unwrap(), 1.0);
        assert_eq!(hhi(&[0.5, 0.5]).unwrap(), 0.5);
        let h = hhi(&[0.9, 0.1]).unwrap();
        assert!((h - 0.82).abs() < 1e-12 && h >= 0.8);
        assert!(hhi(&[0.5, 0.4]).is_err());
        assert!(hhi(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn shares_use_frequencies() {
        // frequency 0.003 in A and 0.001 in B
        let t = table(&[("x", "AR", 3), ("pad", "AR", 997), ("x", "BR", 1), ("pad", "BR", 999)]);
        let s = t.core_shares("x").unwrap();
        assert!((s[0].1 - 0.75).abs() < 1e-12);
        assert!((s[1].1 - 0.25).abs() < 1e-12);

        let t = table(&[("x", "AR", 1), ("x", "BR", 1)]);
        let s = t.core_shares("x").unwrap();
        assert_eq!((s[0].1, s[1].1), (0.5, 0.5));
        assert_eq!(table(&[("x", "AR", 4)]).core_shares("x").unwrap()[0].1, 1.0);
        assert!(t.core_shares("nobody").is_err());
    }

    #[test]
    fn filter_examples() {
        // frequency 1e-5 in a single country
        let mut t = table(&[("rare", "JP", 1), ("filler", "JP", 99_999)]);
        t.add("split", cc("FR"), 1).unwrap();
        t.add("split", cc("DE"), 1).unwrap();
        t.add("fill", cc("FR"), 9).unwrap();
        t.add("fill", cc("DE"), 9).unwrap();
        let core = filter_core_names(&t, &FilterParams::default());
        let rare = core.iter().find(|c| c.surname == "rare").unwrap();
        assert_eq!(rare.hhi, 1.0);
        assert!((rare.max_frequency - 1e-5).abs() < 1e-15);
        assert!(core.iter().all(|c| c.surname != "split"));
    }

    #[test]
    fn frequency_floor_excludes() {
        let t = table(&[("rare", "JP", 1), ("filler", "JP", 9_999_999)]);
        let core = filter_core_names(&t, &FilterParams::default());
        assert!(core.iter().all(|c| c.surname != "rare"));
    }

    #[test]
    fn count_basis_differs_from_frequency_basis() {
        // US is heavily sampled: by counts "x" looks American, by frequency it is balanced.
        let t = table(&[("x", "US", 9), ("bulk", "US", 891), ("x", "IE", 1), ("other", "IE", 99)]);
        let freq = filter_core_names(&t, &FilterParams::default());
        assert!(freq.iter().all(|c| c.surname != "x"));
        let counts = FilterParams { basis: ConcentrationBasis::Count, ..Default::default() };
        let by_count = filter_core_names(&t, &counts);
        assert!(by_count.iter().any(|c| c.surname == "x"));
    }

    #[test]
    fn ties_go_to_smallest_code() {
        let t = table(&[("x", "FR", 1), ("x", "DE", 1)]);
        let p = FilterParams { hhi_min: 0.0, ..Default::default() };
        let core = filter_core_names(&t, &p);
        assert_eq!(core[0].assigned_country, cc("DE"));
    }

    #[test]
    fn ingestor_policies() {
        let mut lenient = Ingestor::new(CountryRegistry::natural_earth(), false, NormalizeOptions::default());
        assert_eq!(lenient.push("Li", "cn", 3).unwrap(), RowOutcome::Added);
        assert!(matches!(lenient.push("Li", "ZZ", 3).unwrap(), RowOutcome::SkippedUnknownCountry(_)));
        assert!(lenient.push("Li", "CN", 0).is_err());
        assert_eq!(lenient.skipped(), 1);
        assert_eq!(lenient.finish().count("li", &cc("CN")), 3);

        let mut strict = Ingestor::new(CountryRegistry::natural_earth(), true, NormalizeOptions::default());
        assert!(matches!(strict.push("Li", "ZZ", 3), Err(Error::UnknownCountry(_))));
    }
}
