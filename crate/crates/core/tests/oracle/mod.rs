//! Brute-force reference implementations, written without reusing any
//! library internals.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

/// Contiguous n-grams of each space-separated word, padded with `^`/`$`.
pub fn ngrams(name: &str, ns: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    for word in name.split(' ').filter(|w| !w.is_empty()) {
        let padded: Vec<char> = format!("^{word}$").chars().collect();
        for &n in ns {
            for start in 0..padded.len() {
                if start + n <= padded.len() {
                    out.push(padded[start..start + n].iter().collect());
                }
            }
        }
    }
    out
}

/// Multinomial naive Bayes fitted by counting.
pub struct BruteNb {
    pub regions: Vec<String>,
    pub vocab: BTreeSet<String>,
    pub log_prior: BTreeMap<String, f64>,
    pub log_lik: BTreeMap<(String, String), f64>,
}

impl BruteNb {
    pub fn fit(train: &[(String, String)], alpha: f64, ns: &[usize]) -> Self {
        let regions: Vec<String> = train.iter().map(|(_, r)| r.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let vocab: BTreeSet<String> = train.iter().flat_map(|(s, _)| ngrams(s, ns)).collect();
        let mut log_prior = BTreeMap::new();
        let mut log_lik = BTreeMap::new();
        for r in &regions {
            let members: Vec<&String> = train.iter().filter(|(_, l)| l == r).map(|(s, _)| s).collect();
            log_prior.insert(r.clone(), (members.len() as f64 / train.len() as f64).ln());
            let grams: Vec<String> = members.iter().flat_map(|s| ngrams(s, ns)).collect();
            for g in &vocab {
                let count = grams.iter().filter(|x| *x == g).count() as f64;
                let p = (count + alpha) / (grams.len() as f64 + alpha * vocab.len() as f64);
                log_lik.insert((r.clone(), g.clone()), p.ln());
            }
        }
        BruteNb { regions, vocab, log_prior, log_lik }
    }

    /// Normalized log-posterior per region, in region order.
    pub fn log_posterior(&self, name: &str, ns: &[usize]) -> Vec<f64> {
        let joint: Vec<f64> = self
            .regions
            .iter()
            .map(|r| {
                let mut s = self.log_prior[r];
                for g in ngrams(name, ns) {
                    if self.vocab.contains(&g) {
                        s += self.log_lik[&(r.clone(), g)];
                    }
                }
                s
            })
            .collect();
        let max = joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z = max + joint.iter().map(|j| (j - max).exp()).sum::<f64>().ln();
        joint.iter().map(|j| j - z).collect()
    }
}

/// One Ward merge: child node ids (smaller first) and the merge height.
pub type BruteMerge = (usize, usize, f64);

/// Ward clustering that recomputes every inter-cluster distance from the
/// members' coordinates at each step:
/// `d(A, B) = sqrt(2|A||B| / (|A| + |B|)) · ‖centroid(A) − centroid(B)‖`.
pub fn brute_ward(points: &[Vec<f64>]) -> Vec<BruteMerge> {
    let n = points.len();
    let dim = points.first().map_or(0, |p| p.len());
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let centroid = |members: &[usize]| -> Vec<f64> {
        (0..dim).map(|d| members.iter().map(|&m| points[m][d]).sum::<f64>() / members.len() as f64).collect()
    };
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let (a, b) = (&clusters[i].1, &clusters[j].1);
                let (ca, cb) = (centroid(a), centroid(b));
                let sq: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum();
                let (na, nb) = (a.len() as f64, b.len() as f64);
                let d = (2.0 * na * nb / (na + nb) * sq).sqrt();
                let key = (clusters[i].0.min(clusters[j].0), clusters[i].0.max(clusters[j].0));
                if best.is_none_or(|(bd, bk, _, _)| d < bd || (d == bd && key < bk)) {
                    best = Some((d, key, i, j));
                }
            }
        }
        let (d, (a, b), i, j) = best.unwrap();
        let mut members = clusters[i].1.clone();
        members.extend(clusters[j].1.iter().copied());
        clusters.remove(j);
        clusters[i] = (n + step, members);
        merges.push((a, b, d));
    }
    merges
}

/// Core-name selection recomputed from raw records.
/// Returns `surname → (country, hhi, max frequency)`.
pub fn brute_core_names(
    records: &[(String, String, u64)],
    hhi_min: f64,
    freq_min: f64,
) -> BTreeMap<String, (String, f64, f64)> {
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    let mut cells: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for (s, c, n) in records {
        *totals.entry(c).or_insert(0) += n;
        *cells.entry((s, c)).or_insert(0) += n;
    }
    let surnames: BTreeSet<&str> = cells.keys().map(|(s, _)| *s).collect();
    let mut out = BTreeMap::new();
    for s in surnames {
        // countries in code order
        let freqs: Vec<(&str, f64)> =
            cells.iter().filter(|((x, _), _)| *x == s).map(|((_, c), n)| (*c, *n as f64 / totals[c] as f64)).collect();
        let sum: f64 = freqs.iter().map(|(_, f)| f).sum();
        let hhi: f64 = freqs.iter().map(|(_, f)| (f / sum) * (f / sum)).sum();
        let max = freqs.iter().map(|(_, f)| *f).fold(0.0, f64::max);
        let country = freqs.iter().find(|(_, f)| *f == max).unwrap().0;
        if hhi >= hhi_min && max >= freq_min {
            out.insert(s.to_string(), (country.to_string(), hhi, max));
        }
    }
    out
}

/// Canberra distance over all coordinates, 0/0 terms counting as 0.
pub fn brute_canberra(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| if a + b == 0.0 { 0.0 } else { (a - b).abs() / (a + b) }).sum()
}

// Random instances and library-vs-oracle checks.

use onoma_core::classifier::{train, TrainParams};
use onoma_core::corpus::{filter_core_names, CountryCode, FilterParams, OccurrenceTable};
use onoma_core::features::NGramConfig;
use onoma_core::typology::{ward_cluster, CountryFeatureMatrix, LabeledName};
use rand::seq::IndexedRandom;
use rand::Rng;

fn random_word(rng: &mut impl Rng, alphabet: &[char], max_len: usize) -> String {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

pub struct NbInstance {
    pub train: Vec<(String, String)>,
    pub test: Vec<String>,
    pub alpha: f64,
    pub ns: Vec<usize>,
}

/// At most 5 regions, 20 vocabulary tokens and 50 training names.
pub fn random_nb_instance(rng: &mut impl Rng) -> NbInstance {
    loop {
        let (alphabet, ns): (&[char], Vec<usize>) = match rng.random_range(0..3) {
            0 => (&['a', 'b'], vec![1, 2]),
            1 => (&['a', 'b', 'c'], vec![2]),
            _ => (&['a', 'b'], vec![3]),
        };
        let k = rng.random_range(1..=5);
        let n = rng.random_range(k..=50);
        let mut train: Vec<(String, String)> = (0..n)
            .map(|i| {
                let mut s = random_word(rng, alphabet, 5);
                if rng.random_bool(0.1) {
                    s = format!("{s} {}", random_word(rng, alphabet, 3));
                }
                (s, format!("r{}", i % k))
            })
            .collect();
        train.sort();
        let vocab: BTreeSet<String> = train.iter().flat_map(|(s, _)| ngrams(s, &ns)).collect();
        if vocab.len() > 20 {
            continue;
        }
        // test names may contain an unseen letter, exercising out-of-vocabulary tokens
        let test_alphabet = [alphabet, &['z']].concat();
        let test = (0..10).map(|_| random_word(rng, &test_alphabet, 6)).collect();
        let alpha = [0.1, 0.5, 1.0, 2.5][rng.random_range(0..4)];
        return NbInstance { train, test, alpha, ns };
    }
}

pub fn check_nb(inst: &NbInstance, tol: f64) -> Result<(), String> {
    let oracle = BruteNb::fit(&inst.train, inst.alpha, &inst.ns);
    let set: Vec<LabeledName> =
        inst.train.iter().map(|(s, r)| LabeledName { surname: s.clone(), region: r.clone() }).collect();
    let params = TrainParams { alpha: inst.alpha, features: NGramConfig::default().with_n(&inst.ns), min_df: 1 };
    let model = train(&set, &params).map_err(|e| e.to_string())?;
    if model.regions() != oracle.regions.as_slice() {
        return Err(format!("regions {:?} vs {:?}", model.regions(), oracle.regions));
    }
    for name in inst.train.iter().map(|(s, _)| s).chain(&inst.test) {
        let got = model.classify(name).map_err(|e| e.to_string())?;
        let z = got.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = z + got.scores.iter().map(|s| (s - z).exp()).sum::<f64>().ln();
        let want = oracle.log_posterior(name, &inst.ns);
        for (r, (g, w)) in got.scores.iter().zip(&want).enumerate() {
            if (g - lse - w).abs() > tol {
                return Err(format!("{name:?} region {r}: {} vs {w}", g - lse));
            }
            if (got.posterior[r].ln() - w).abs() > tol.max(1e-12 * w.abs()) && got.posterior[r] > 1e-300 {
                return Err(format!("{name:?} posterior {r}: {} vs {}", got.posterior[r], w.exp()));
            }
        }
    }
    Ok(())
}

/// Up to 10 points in up to 4 dimensions.
pub fn random_points(rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = rng.random_range(2..=10);
    let dim = rng.random_range(1..=4);
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

pub fn check_ward(points: &[Vec<f64>], tol: f64) -> Result<(), String> {
    let dim = points[0].len();
    let matrix = CountryFeatureMatrix {
        countries: (0..points.len()).map(|i| CountryCode::new(&format!("C{i:02}")).unwrap()).collect(),
        columns: (0..dim).map(|d| format!("g{d}")).collect(),
        cells: points.concat(),
        core_name_counts: vec![1; points.len()],
    };
    let tree = ward_cluster(&matrix).map_err(|e| e.to_string())?.tree;
    let want = brute_ward(points);
    if tree.merges.len() != want.len() {
        return Err(format!("{} merges vs {}", tree.merges.len(), want.len()));
    }
    for (s, (m, (a, b, h))) in tree.merges.iter().zip(&want).enumerate() {
        if (m.node_a, m.node_b) != (*a, *b) || (m.height - h).abs() > tol || m.new_node != points.len() + s {
            return Err(format!("step {s}: {m:?} vs ({a}, {b}, {h})"));
        }
    }
    Ok(())
}

/// At most 1,000 records over a few countries, with skewed counts.
pub fn random_records(rng: &mut impl Rng) -> Vec<(String, String, u64)> {
    let n = rng.random_range(1..=1000);
    let countries = rng.random_range(1..=8);
    let surnames = rng.random_range(1..=n.max(2));
    (0..n)
        .map(|_| {
            let s = format!("s{}", rng.random_range(0..surnames));
            let c = format!("C{}", rng.random_range(0..countries));
            let count = if rng.random_bool(0.2) { rng.random_range(1..=1000) } else { rng.random_range(1..=5) };
            (s, c, count)
        })
        .collect()
}

pub fn check_filter(records: &[(String, String, u64)], hhi_min: f64, freq_min: f64) -> Result<(), String> {
    let mut table = OccurrenceTable::new();
    for (s, c, n) in records {
        table.add(s, CountryCode::new(c).unwrap(), *n).map_err(|e| e.to_string())?;
    }
    let params = FilterParams { hhi_min, freq_min, ..FilterParams::default() };
    let got: BTreeMap<String, (String, f64, f64)> = filter_core_names(&table, &params)
        .into_iter()
        .map(|c| (c.surname, (c.assigned_country.to_string(), c.hhi, c.max_frequency)))
        .collect();
    let want = brute_core_names(records, hhi_min, freq_min);
    if got != want {
        let diff: Vec<_> =
            got.keys().collect::<BTreeSet<_>>().symmetric_difference(&want.keys().collect()).cloned().collect();
        return Err(format!("{} vs {} core names; differing {diff:?}", got.len(), want.len()));
    }
    Ok(())
}
