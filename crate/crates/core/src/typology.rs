//! Data-driven region typology: cluster countries by the n-gram profile of
//! their core names, cut the dendrogram, apply manual overrides.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::cluster::{agglomerate, DistanceMatrix, Linkage, Tree};
use crate::corpus::{CoreName, CountryCode};
use crate::features::NGramConfig;
use crate::{Error, Result};

/// Region names used when seven clusters are requested and each anchor
/// country lands in a different cluster.
pub const DEFAULT_REGIONS: [(&str, &str); 7] = [
    ("African", "NG"),
    ("Arabian", "SA"),
    ("Asian", "CN"),
    ("CS-European", "IT"),
    ("Indian", "IN"),
    ("N-European", "GB"),
    ("Slavic", "RU"),
];

/// Row-normalized country × n-gram frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryFeatureMatrix {
    pub countries: Vec<CountryCode>,
    pub columns: Vec<String>,
    /// Row-major, `countries.len() × columns.len()`.
    pub cells: Vec<f64>,
    pub core_name_counts: Vec<usize>,
}

impl CountryFeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.cells[i * w..(i + 1) * w]
    }
}

pub fn build_country_matrix(
    core_names: &[CoreName],
    config: &NGramConfig,
    min_core_names: usize,
) -> Result<CountryFeatureMatrix> {
    config.validate()?;
    let mut by_country: BTreeMap<&CountryCode, Vec<&str>> = BTreeMap::new();
    for c in core_names {
        by_country.entry(&c.assigned_country).or_default().push(&c.surname);
    }

    let mut profiles: Vec<(&CountryCode, usize, BTreeMap<String, u64>)> = Vec::new();
    for (country, names) in by_country {
        if names.len() < min_core_names {
            continue;
        }
        let mut grams: BTreeMap<String, u64> = BTreeMap::new();
        for name in &names {
            config.for_each_ngram(name, |g| match grams.get_mut(g) {
                Some(n) => *n += 1,
                None => {
                    grams.insert(g.to_string(), 1);
                }
            });
        }
        if grams.is_empty() {
            log::warn!("country {country} has no n-grams and is left out of the matrix");
            continue;
        }
        profiles.push((country, names.len(), grams));
    }
    if profiles.len() < 2 {
        return Err(Error::TooFewCountries { needed: 2, found: profiles.len() });
    }

    let columns: Vec<String> =
        profiles.iter().flat_map(|(_, _, g)| g.keys().cloned()).collect::<BTreeSet<String>>().into_iter().collect();
    let col_index: BTreeMap<&str, usize> = columns.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let width = columns.len();
    let mut cells = alloc::vec![0.0; profiles.len() * width];
    for (r, (_, _, grams)) in profiles.iter().enumerate() {
        let total: u64 = grams.values().sum();
        for (g, n) in grams {
            cells[r * width + col_index[g.as_str()]] = *n as f64 / total as f64;
        }
    }
    Ok(CountryFeatureMatrix {
        countries: profiles.iter().map(|(c, _, _)| (*c).clone()).collect(),
        core_name_counts: profiles.iter().map(|(_, n, _)| *n).collect(),
        columns,
        cells,
    })
}

/// Country dendrogram; leaf `i` is `leaves[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: Vec<CountryCode>,
    pub weights: Vec<usize>,
    pub tree: Tree,
}

/// Ward clustering on Euclidean distances between matrix rows.
pub fn ward_cluster(matrix: &CountryFeatureMatrix) -> Result<Dendrogram> {
    let width = matrix.columns.len();
    if matrix.countries.len() < 2 {
        return Err(Error::TooFewCountries { needed: 2, found: matrix.countries.len() });
    }
    if let Some(pos) = matrix.cells.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: pos / width.max(1), col: pos % width.max(1) });
    }
    let tree = agglomerate(&DistanceMatrix::euclidean(&matrix.cells, width), Linkage::Ward)?;
    Ok(Dendrogram { leaves: matrix.countries.clone(), weights: matrix.core_name_counts.clone(), tree })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Override {
    Reassign { country: CountryCode, region: String },
    Delete { country: CountryCode },
}

/// Manual reassignments shown in the published world map: Philippines, Japan
/// and Indonesia to Asian, Ethiopia to African; five sparsely observed
/// countries dropped.
pub fn published_overrides() -> Vec<Override> {
    let cc = |s: &str| CountryCode::new(s).expect("static code");
    let mut v: Vec<Override> =
        ["PH", "JP", "ID"].iter().map(|c| Override::Reassign { country: cc(c), region: "Asian".to_string() }).collect();
    v.push(Override::Reassign { country: cc("ET"), region: "African".to_string() });
    for c in ["PG", "MG", "JM", "TD", "AM"] {
        v.push(Override::Delete { country: cc(c) });
    }
    v
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assignment {
    Region(String),
    Deleted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionTypology {
    /// Sorted region labels.
    pub regions: Vec<String>,
    pub assignment: BTreeMap<CountryCode, Assignment>,
    pub overrides: Vec<Override>,
}

impl RegionTypology {
    pub fn region_of(&self, country: &CountryCode) -> Option<&Assignment> {
        self.assignment.get(country)
    }

    pub fn covers(&self, country: &CountryCode) -> bool {
        self.assignment.contains_key(country)
    }
}

fn baseline_labels(dendrogram: &Dendrogram, clusters: &[usize], k: usize) -> Vec<String> {
    let position: BTreeMap<&str, usize> = dendrogram.leaves.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    if k == DEFAULT_REGIONS.len() {
        let anchored: Option<Vec<usize>> =
            DEFAULT_REGIONS.iter().map(|(_, a)| position.get(a).map(|&i| clusters[i])).collect();
        if let Some(ids) = anchored {
            let distinct: BTreeSet<usize> = ids.iter().copied().collect();
            if distinct.len() == k {
                let mut labels = alloc::vec![String::new(); k];
                for (id, (name, _)) in ids.iter().zip(DEFAULT_REGIONS.iter()) {
                    labels[*id] = name.to_string();
                }
                return labels;
            }
        }
    }
    // Named after the member country with the most core names.
    let mut best: Vec<Option<usize>> = alloc::vec![None; k];
    for (leaf, &cl) in clusters.iter().enumerate() {
        let better = match best[cl] {
            None => true,
            Some(b) => {
                let (wl, wb) = (dendrogram.weights[leaf], dendrogram.weights[b]);
                wl > wb || (wl == wb && dendrogram.leaves[leaf] < dendrogram.leaves[b])
            }
        };
        if better {
            best[cl] = Some(leaf);
        }
    }
    best.iter().map(|b| format!("region-{}", dendrogram.leaves[b.expect("non-empty cluster")])).collect()
}

/// Cuts the dendrogram into `k` regions and applies `overrides` in order.
pub fn cut_dendrogram(dendrogram: &Dendrogram, k: usize, overrides: &[Override]) -> Result<RegionTypology> {
    let clusters = dendrogram.tree.cut(k)?;
    let labels = baseline_labels(dendrogram, &clusters, k);
    let mut assignment: BTreeMap<CountryCode, Assignment> = dendrogram
        .leaves
        .iter()
        .zip(&clusters)
        .map(|(c, &cl)| (c.clone(), Assignment::Region(labels[cl].clone())))
        .collect();
    let known: BTreeSet<&String> = labels.iter().collect();

    for o in overrides {
        match o {
            Override::Reassign { country, region } => {
                if !known.contains(region) {
                    return Err(Error::OverrideUnknownRegion(region.clone()));
                }
                let slot =
                    assignment.get_mut(country).ok_or_else(|| Error::OverrideUnknownCountry(country.to_string()))?;
                *slot = Assignment::Region(region.clone());
            }
            Override::Delete { country } => {
                let slot =
                    assignment.get_mut(country).ok_or_else(|| Error::OverrideUnknownCountry(country.to_string()))?;
                *slot = Assignment::Deleted;
            }
        }
    }

    let used: BTreeSet<&String> = assignment
        .values()
        .filter_map(|a| match a {
            Assignment::Region(r) => Some(r),
            Assignment::Deleted => None,
        })
        .collect();
    if let Some(empty) = labels.iter().find(|l| !used.contains(l)) {
        return Err(Error::OverrideEmptiesRegion(empty.clone()));
    }
    let mut regions = labels;
    regions.sort();
    Ok(RegionTypology { regions, assignment, overrides: overrides.to_vec() })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabeledName {
    pub surname: String,
    pub region: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub names: Vec<LabeledName>,
    pub counts: BTreeMap<String, usize>,
}

/// Replaces each core name's country by its region; names of deleted
/// countries are dropped.
pub fn relabel(core_names: &[CoreName], typology: &RegionTypology) -> Result<LabeledSet> {
    let uncovered: BTreeSet<String> = core_names
        .iter()
        .filter(|c| !typology.covers(&c.assigned_country))
        .map(|c| c.assigned_country.to_string())
        .collect();
    if !uncovered.is_empty() {
        return Err(Error::UncoveredCountries(uncovered.into_iter().collect()));
    }
    let mut names = Vec::new();
    let mut counts: BTreeMap<String, usize> = typology.regions.iter().map(|r| (r.clone(), 0)).collect();
    for c in core_names {
        if let Some(Assignment::Region(r)) = typology.region_of(&c.assigned_country) {
            *counts.get_mut(r).expect("typology region") += 1;
            names.push(LabeledName { surname: c.surname.clone(), region: r.clone() });
        }
    }
    Ok(LabeledSet { names, counts })
}

/// Splits core names into those whose country is covered by the typology and
/// the count of the rest (countries too small to enter the matrix).
pub fn restrict_to_typology(core_names: &[CoreName], typology: &RegionTypology) -> (Vec<CoreName>, usize) {
    let kept: Vec<CoreName> = core_names.iter().filter(|c| typology.covers(&c.assigned_country)).cloned().collect();
    let dropped = core_names.len() - kept.len();
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cc(s: &str) -> CountryCode {
        CountryCode::new(s).unwrap()
    }

    fn core(surname: &str, country: &str) -> CoreName {
        CoreName { surname: surname.to_string(), assigned_country: cc(country), hhi: 1.0, max_frequency: 0.1 }
    }

    fn bigrams() -> NGramConfig {
        NGramConfig::default().with_n(&[2]).padded(false)
    }

    #[test]
    fn single_country_is_rejected() {
        let e = build_country_matrix(&[core("ab", "FR")], &bigrams(), 1).unwrap_err();
        assert_eq!(e, Error::TooFewCountries { needed: 2, found: 1 });
    }

    #[test]
    fn disjoint_countries_give_unit_rows() {
        let m = build_country_matrix(&[core("aa", "FR"), core("bb", "DE")], &bigrams(), 1).unwrap();
        assert_eq!(m.countries, [cc("DE"), cc("FR")]);
        assert_eq!(m.columns, ["aa", "bb"]);
        assert_eq!(m.row(0), [0.0, 1.0]);
        assert_eq!(m.row(1), [1.0, 0.0]);
    }

    #[test]
    fn rows_are_normalized() {
        // x-grams three times, y-gram once
        let names = [core("xxxx", "FR"), core("yy", "FR"), core("zz", "DE")];
        let m = build_country_matrix(&names, &bigrams(), 1).unwrap();
        let fr = m.countries.iter().position(|c| c == &cc("FR")).unwrap();
        let xx = m.columns.iter().position(|c| c == "xx").unwrap();
        let yy = m.columns.iter().position(|c| c == "yy").unwrap();
        assert_eq!(m.row(fr)[xx], 0.75);
        assert_eq!(m.row(fr)[yy], 0.25);
    }

    #[test]
    fn min_core_names_filters_rows() {
        let names = [core("aa", "FR"), core("ab", "FR"), core("bb", "DE"), core("ba", "DE"), core("cc", "IT")];
        let m = build_country_matrix(&names, &bigrams(), 2).unwrap();
        assert_eq!(m.countries, [cc("DE"), cc("FR")]);
    }

    fn four_country_dendrogram() -> Dendrogram {
        let matrix = CountryFeatureMatrix {
            countries: vec![cc("AA"), cc("BB"), cc("CC"), cc("DD")],
            columns: vec!["x".into(), "y".into()],
            cells: vec![1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 0.2, 0.8],
            core_name_counts: vec![10, 30, 20, 5],
        };
        ward_cluster(&matrix).unwrap()
    }

    #[test]
    fn degenerate_cuts() {
        let d = four_country_dendrogram();
        let all = cut_dendrogram(&d, 4, &[]).unwrap();
        assert_eq!(all.regions.len(), 4);
        let one = cut_dendrogram(&d, 1, &[]).unwrap();
        assert_eq!(one.regions, ["region-BB"]);
    }

    #[test]
    fn auto_names_use_largest_country() {
        let t = cut_dendrogram(&four_country_dendrogram(), 2, &[]).unwrap();
        assert_eq!(t.regions, ["region-BB", "region-CC"]);
        assert_eq!(t.region_of(&cc("AA")), Some(&Assignment::Region("region-BB".into())));
        assert_eq!(t.region_of(&cc("DD")), Some(&Assignment::Region("region-CC".into())));
    }

    #[test]
    fn overrides_apply_in_order() {
        let d = four_country_dendrogram();
        let ov = vec![
            Override::Reassign { country: cc("AA"), region: "region-CC".into() },
            Override::Delete { country: cc("DD") },
        ];
        let t = cut_dendrogram(&d, 2, &ov).unwrap();
        assert_eq!(t.region_of(&cc("AA")), Some(&Assignment::Region("region-CC".into())));
        assert_eq!(t.region_of(&cc("DD")), Some(&Assignment::Deleted));
        assert_eq!(t.overrides, ov);
    }

    #[test]
    fn bad_overrides() {
        let d = four_country_dendrogram();
        let unknown_country = [Override::Delete { country: cc("ZZ") }];
        assert!(matches!(cut_dendrogram(&d, 2, &unknown_country), Err(Error::OverrideUnknownCountry(_))));
        let unknown_region = [Override::Reassign { country: cc("AA"), region: "Atlantis".into() }];
        assert!(matches!(cut_dendrogram(&d, 2, &unknown_region), Err(Error::OverrideUnknownRegion(_))));
        let emptied = [Override::Delete { country: cc("CC") }, Override::Delete { country: cc("DD") }];
        assert!(matches!(cut_dendrogram(&d, 2, &emptied), Err(Error::OverrideEmptiesRegion(_))));
    }

    #[test]
    fn published_override_set() {
        let ov = published_overrides();
        assert_eq!(ov.len(), 9);
        assert_eq!(ov[1], Override::Reassign { country: cc("JP"), region: "Asian".into() });
        assert_eq!(ov[3], Override::Reassign { country: cc("ET"), region: "African".into() });
        assert_eq!(ov.iter().filter(|o| matches!(o, Override::Delete { .. })).count(), 5);
    }

    #[test]
    fn seven_anchored_clusters_get_default_names() {
        let anchors: Vec<&str> = DEFAULT_REGIONS.iter().map(|(_, a)| *a).collect();
        let mut countries: Vec<CountryCode> = anchors.iter().map(|a| cc(a)).collect();
        countries.sort();
        let n = countries.len();
        let mut cells = vec![0.0; n * n];
        for i in 0..n {
            cells[i * n + i] = 1.0;
        }
        let matrix = CountryFeatureMatrix {
            countries,
            columns: (0..n).map(|i| format!("g{i}")).collect(),
            cells,
            core_name_counts: vec![25; n],
        };
        let t = cut_dendrogram(&ward_cluster(&matrix).unwrap(), 7, &[]).unwrap();
        let expected: Vec<&str> = DEFAULT_REGIONS.iter().map(|(r, _)| *r).collect();
        assert_eq!(t.regions, expected);
        assert_eq!(t.region_of(&cc("IN")), Some(&Assignment::Region("Indian".into())));
    }

    #[test]
    fn relabel_maps_and_drops() {
        let d = four_country_dendrogram();
        let t = cut_dendrogram(&d, 2, &[Override::Delete { country: cc("AA") }]).unwrap();
        let names = [core("a1", "AA"), core("b1", "BB"), core("c1", "CC"), core("c2", "CC")];
        let set = relabel(&names, &t).unwrap();
        assert_eq!(set.names.len(), 3);
        assert_eq!(set.counts["region-BB"], 1);
        assert_eq!(set.counts["region-CC"], 2);
        assert!(set.names.iter().all(|n| n.surname != "a1"));

        let stray = [core("q", "QQ"), core("r", "RR"), core("s", "QQ")];
        assert_eq!(relabel(&stray, &t), Err(Error::UncoveredCountries(vec!["QQ".into(), "RR".into()])));
        let (kept, dropped) = restrict_to_typology(&stray, &t);
        assert!(kept.is_empty());
        assert_eq!(dropped, 3);
    }
}
