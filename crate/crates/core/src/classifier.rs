//! Multinomial naive Bayes over character n-grams.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::{build_vocabulary, NGramConfig, Vocabulary};
use crate::math::{abs, ceil, exp, ln, log_sum_exp};
use crate::text::normalize_surname;
use crate::typology::LabeledName;
use crate::{Error, Result};

/// Stratified train/evaluation split.
///
/// Within each region the names are sorted, shuffled with a ChaCha8 stream
/// seeded by `seed`, and the first `⌈fraction · n⌉` (capped at `n − 1`) go
/// to training. Regions are visited in label order.
pub fn split(set: &[LabeledName], train_fraction: f64, seed: u64) -> Result<(Vec<LabeledName>, Vec<LabeledName>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidTrainFraction(train_fraction));
    }
    let mut by_region: BTreeMap<&str, Vec<&LabeledName>> = BTreeMap::new();
    for n in set {
        by_region.entry(&n.region).or_default().push(n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for (region, mut names) in by_region {
        if names.len() < 2 {
            return Err(Error::RegionTooSmall { region: region.to_string(), count: names.len(), needed: 2 });
        }
        names.sort();
        names.shuffle(&mut rng);
        let n = names.len();
        // The epsilon keeps 0.85 · 100 from rounding up to 86.
        let n_train = (ceil(train_fraction * n as f64 - 1e-9) as usize).clamp(1, n - 1);
        train.extend(names[..n_train].iter().map(|x| (*x).clone()));
        eval.extend(names[n_train..].iter().map(|x| (*x).clone()));
    }
    Ok((train, eval))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub alpha: f64,
    pub features: NGramConfig,
    pub min_df: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { alpha: 0.1, features: NGramConfig::default(), min_df: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    regions: Vec<String>,
    vocabulary: Vocabulary,
    log_priors: Vec<f64>,
    /// Row-major `regions × vocabulary`.
    log_likelihoods: Vec<f64>,
    alpha: f64,
    features: NGramConfig,
}

/// Output of [`TrainedModel::classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Unnormalized log-posterior per region.
    pub scores: Vec<f64>,
    pub posterior: Vec<f64>,
    /// Index into the model's regions.
    pub label: usize,
    /// No n-gram of the surname is in the vocabulary.
    pub prior_only: bool,
}

/// Index of the largest value; the first one wins ties, so with sorted region
/// labels ties resolve lexicographically.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn check_normalized(logs: &[f64]) -> bool {
    let s: f64 = logs.iter().map(|&l| exp(l)).sum();
    abs(s - 1.0) <= 1e-9
}

/// Trains with regions taken from the labels present in `set`.
pub fn train(set: &[LabeledName], params: &TrainParams) -> Result<TrainedModel> {
    let regions: BTreeSet<&str> = set.iter().map(|n| n.region.as_str()).collect();
    let regions: Vec<String> = regions.into_iter().map(String::from).collect();
    train_with_regions(set, &regions, params)
}

/// Trains over an explicit region list; every region must have a name.
pub fn train_with_regions(set: &[LabeledName], regions: &[String], params: &TrainParams) -> Result<TrainedModel> {
    if !(params.alpha > 0.0 && params.alpha.is_finite()) {
        return Err(Error::InvalidAlpha(params.alpha));
    }
    params.features.validate()?;
    if set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut regions: Vec<String> = regions.to_vec();
    regions.sort();
    regions.dedup();
    let region_index: BTreeMap<&str, usize> = regions.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();

    let mut normalized = Vec::with_capacity(set.len());
    for n in set {
        let r = *region_index.get(n.region.as_str()).ok_or_else(|| Error::UnknownLabel(n.region.clone()))?;
        normalized.push((normalize_surname(&n.surname, params.features.normalize)?, r));
    }
    let vocabulary = build_vocabulary(normalized.iter().map(|(s, _)| s.as_str()), &params.features, params.min_df)?;

    let (k, v) = (regions.len(), vocabulary.len());
    let mut counts = vec![0u64; k * v];
    let mut totals = vec![0u64; k];
    let mut names = vec![0u64; k];
    for (surname, r) in &normalized {
        names[*r] += 1;
        for (g, c) in vocabulary.encode(surname, &params.features) {
            counts[r * v + g] += u64::from(c);
            totals[*r] += u64::from(c);
        }
    }
    if let Some(empty) = names.iter().position(|&n| n == 0) {
        return Err(Error::EmptyRegion(regions[empty].clone()));
    }

    let n_total = normalized.len() as f64;
    let log_priors = names.iter().map(|&n| ln(n as f64 / n_total)).collect();
    let mut log_likelihoods = vec![0.0; k * v];
    for r in 0..k {
        let denom = ln(totals[r] as f64 + params.alpha * v as f64);
        for g in 0..v {
            log_likelihoods[r * v + g] = ln(counts[r * v + g] as f64 + params.alpha) - denom;
        }
    }
    Ok(TrainedModel {
        regions,
        vocabulary,
        log_priors,
        log_likelihoods,
        alpha: params.alpha,
        features: params.features.clone(),
    })
}

impl TrainedModel {
    /// Reassembles a model from stored parts, checking shapes and that every
    /// distribution sums to 1 (±1e-9).
    pub fn from_parts(
        regions: Vec<String>,
        vocabulary: Vocabulary,
        log_priors: Vec<f64>,
        log_likelihoods: Vec<f64>,
        alpha: f64,
        features: NGramConfig,
    ) -> Result<Self> {
        features.validate()?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidAlpha(alpha));
        }
        let (k, v) = (regions.len(), vocabulary.len());
        if log_priors.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: log_priors.len() });
        }
        if log_likelihoods.len() != k * v {
            return Err(Error::DimensionMismatch { expected: k * v, got: log_likelihoods.len() });
        }
        if regions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::RegionMismatch);
        }
        if !check_normalized(&log_priors) {
            return Err(Error::InvalidPriors(log_priors.iter().map(|&l| exp(l)).sum()));
        }
        for r in 0..k {
            let row = &log_likelihoods[r * v..(r + 1) * v];
            if !check_normalized(row) {
                return Err(Error::InvalidShares(row.iter().map(|&l| exp(l)).sum()));
            }
        }
        Ok(TrainedModel { regions, vocabulary, log_priors, log_likelihoods, alpha, features })
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn region_index(&self, label: &str) -> Option<usize> {
        self.regions.binary_search_by(|r| r.as_str().cmp(label)).ok()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_likelihoods
    }

    pub fn log_likelihood(&self, region: usize, token: usize) -> f64 {
        self.log_likelihoods[region * self.vocabulary.len() + token]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn features(&self) -> &NGramConfig {
        &self.features
    }

    pub fn classify(&self, surname: &str) -> Result<Classification> {
        let name = normalize_surname(surname, self.features.normalize)?;
        Ok(self.classify_normalized(&name))
    }

    pub fn classify_normalized(&self, surname: &str) -> Classification {
        let encoded = self.vocabulary.encode(surname, &self.features);
        let v = self.vocabulary.len();
        let scores: Vec<f64> = (0..self.regions.len())
            .map(|r| {
                let row = &self.log_likelihoods[r * v..(r + 1) * v];
                self.log_priors[r] + encoded.iter().map(|&(g, c)| f64::from(c) * row[g]).sum::<f64>()
            })
            .collect();
        let z = log_sum_exp(&scores);
        let posterior = scores.iter().map(|s| exp(s - z)).collect();
        Classification { label: argmax(&scores), prior_only: encoded.is_empty(), scores, posterior }
    }
}

/// Confusion counts (rows guessed, columns actual) with per-region metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub regions: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Number of evaluation names per actual region.
    pub support: Vec<u64>,
}

impl EvalReport {
    pub fn from_confusion(regions: Vec<String>, confusion: Vec<Vec<u64>>) -> Result<Self> {
        let k = regions.len();
        if confusion.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: confusion.len() });
        }
        if let Some(row) = confusion.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch { expected: k, got: row.len() });
        }
        let row_sum: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
        let support: Vec<u64> = (0..k).map(|j| confusion.iter().map(|r| r[j]).sum()).collect();
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = (0..k).map(|i| ratio(confusion[i][i], row_sum[i])).collect();
        let recall = (0..k).map(|j| ratio(confusion[j][j], support[j])).collect();
        Ok(EvalReport { regions, confusion, precision, recall, support })
    }

    pub fn total(&self) -> u64 {
        self.support.iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.regions.len()).map(|i| self.confusion[i][i]).sum();
        if self.total() == 0 {
            0.0
        } else {
            diag as f64 / self.total() as f64
        }
    }
}

/// Tallies `(guessed, actual)` region indices into a report.
pub fn tally(regions: &[String], pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<EvalReport> {
    let k = regions.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (g, a) in pairs {
        confusion[g][a] += 1;
    }
    EvalReport::from_confusion(regions.to_vec(), confusion)
}

pub fn evaluate(model: &TrainedModel, eval: &[LabeledName]) -> Result<EvalReport> {
    let mut pairs = Vec::with_capacity(eval.len());
    for n in eval {
        let actual = model.region_index(&n.region).ok_or_else(|| Error::UnknownLabel(n.region.clone()))?;
        pairs.push((model.classify(&n.surname)?.label, actual));
    }
    tally(model.regions(), pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn ln_(s: &str, r: &str) -> LabeledName {
        LabeledName { surname: s.to_string(), region: r.to_string() }
    }

    fn unpadded_bigrams(alpha: f64) -> TrainParams {
        TrainParams { alpha, features: NGramConfig::default().with_n(&[2]).padded(false), min_df: 1 }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let set: Vec<LabeledName> = (0..100).map(|i| ln_(&format!("n{i:03}"), "R")).collect();
        let (tr, ev) = split(&set, 0.85, 7).unwrap();
        assert_eq!((tr.len(), ev.len()), (85, 15));
        let (tr2, ev2) = split(&set, 0.85, 7).unwrap();
        assert_eq!((tr, ev), (tr2, ev2));
    }

    #[test]
    fn split_is_input_order_independent_and_stratified() {
        let mut set: Vec<LabeledName> = (0..40).map(|i| ln_(&format!("a{i}"), "A")).collect();
        set.extend((0..20).map(|i| ln_(&format!("b{i}"), "B")));
        let a = split(&set, 0.5, 1).unwrap();
        set.reverse();
        let b = split(&set, 0.5, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.iter().filter(|n| n.region == "A").count(), 20);
        assert_eq!(a.0.iter().filter(|n| n.region == "B").count(), 10);
    }

    #[test]
    fn split_errors() {
        let set = [ln_("x", "A"), ln_("y", "A"), ln_("z", "B")];
        assert!(matches!(split(&set, 0.85, 0), Err(Error::RegionTooSmall { .. })));
        assert!(matches!(split(&set, 1.0, 0), Err(Error::InvalidTrainFraction(_))));
        let two = [ln_("x", "A"), ln_("y", "A")];
        let (tr, ev) = split(&two, 0.85, 0).unwrap();
        assert_eq!((tr.len(), ev.len()), (1, 1));
    }

    #[test]
    fn symmetric_priors() {
        let m = train(&[ln_("ab", "A"), ln_("cd", "B")], &unpadded_bigrams(0.1)).unwrap();
        assert_eq!(m.log_priors(), [ln(0.5), ln(0.5)]);
    }

    #[test]
    fn smoothing_only_likelihood() {
        // region B never emits "xx" or "yy": its likelihoods are pure smoothing
        let set = [ln_("xxxx", "A"), ln_("yy", "A"), ln_("q", "B")];
        let m = train(&set, &unpadded_bigrams(0.1)).unwrap();
        let b = m.region_index("B").unwrap();
        let x = m.vocabulary().index_of("xx").unwrap();
        assert!((exp(m.log_likelihood(b, x)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smoothed_likelihood_arithmetic() {
        // region A: xx three times, yy once; vocabulary {xx, yy}
        let set = [ln_("xxxx", "A"), ln_("yy", "A"), ln_("q", "B")];
        let m = train(&set, &unpadded_bigrams(0.1)).unwrap();
        let a = m.region_index("A").unwrap();
        let x = m.vocabulary().index_of("xx").unwrap();
        assert!((exp(m.log_likelihood(a, x)) - 3.1 / 4.2).abs() < 1e-12);
        assert!((exp(m.log_likelihood(a, x)) - 0.738095).abs() < 1e-6);
    }

    #[test]
    fn separable_case() {
        let set = [ln_("aa", "A"), ln_("bb", "B")];
        let m = train(&set, &unpadded_bigrams(0.1)).unwrap();
        let c = m.classify("aaa").unwrap();
        assert_eq!(m.regions()[c.label], "A");
        assert!(!c.prior_only);
        assert!((c.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prior_only_fallback() {
        let set = [ln_("aa", "A"), ln_("bb", "B"), ln_("bbb", "B")];
        let m = train(&set, &unpadded_bigrams(0.1)).unwrap();
        let c = m.classify("zz").unwrap();
        assert!(c.prior_only);
        assert_eq!(m.regions()[c.label], "B");
        assert!((c.posterior[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ties_resolve_to_first_label() {
        let set = [ln_("aa", "A"), ln_("bb", "B")];
        let m = train(&set, &unpadded_bigrams(0.1)).unwrap();
        assert_eq!(m.classify("zz").unwrap().label, 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn training_errors() {
        assert_eq!(train(&[], &unpadded_bigrams(0.1)), Err(Error::EmptyTrainingSet));
        assert!(matches!(train(&[ln_("ab", "A")], &unpadded_bigrams(0.0)), Err(Error::InvalidAlpha(_))));
        let regions = ["A".to_string(), "B".to_string()];
        assert_eq!(
            train_with_regions(&[ln_("ab", "A")], &regions, &unpadded_bigrams(0.1)),
            Err(Error::EmptyRegion("B".into()))
        );
    }

    #[test]
    fn perfect_classifier_report() {
        let set = [ln_("aaaa", "A"), ln_("bbbb", "B"), ln_("aa", "A")];
        let m = train(&set, &unpadded_bigrams(0.1)).unwrap();
        let r = evaluate(&m, &set).unwrap();
        assert_eq!(r.confusion, [[2, 0], [0, 1]]);
        assert_eq!(r.precision, [1.0, 1.0]);
        assert_eq!(r.recall, [1.0, 1.0]);
        assert_eq!(r.total(), 3);
        assert!(matches!(evaluate(&m, &[ln_("aa", "C")]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn empty_rows_give_zero_precision() {
        let r = EvalReport::from_confusion(vec!["A".into(), "B".into()], vec![vec![3, 1], vec![0, 0]]).unwrap();
        assert_eq!(r.precision, [0.75, 0.0]);
        assert_eq!(r.recall, [1.0, 0.0]);
    }

    #[test]
    fn from_parts_round_trip_and_validation() {
        let m = train(&[ln_("ab", "A"), ln_("cd", "B")], &unpadded_bigrams(0.1)).unwrap();
        let again = TrainedModel::from_parts(
            m.regions().to_vec(),
            m.vocabulary().clone(),
            m.log_priors().to_vec(),
            m.log_likelihoods().to_vec(),
            m.alpha(),
            m.features().clone(),
        )
        .unwrap();
        assert_eq!(again, m);
        let mut bad = m.log_priors().to_vec();
        bad[0] = 0.0;
        assert!(TrainedModel::from_parts(
            m.regions().to_vec(),
            m.vocabulary().clone(),
            bad,
            m.log_likelihoods().to_vec(),
            m.alpha(),
            m.features().clone()
        )
        .is_err());
    }
}
