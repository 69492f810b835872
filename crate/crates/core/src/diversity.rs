//! Origin distributions of populations and their representativeness against
//! a reference population.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::classifier::TrainedModel;
use crate::cluster::{agglomerate, DistanceMatrix, Linkage, Tree};
use crate::correction::{correct_counts, CorrectionOperator};
use crate::{Error, Result};

/// Expected counts below this make a ratio unreliable.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OriginDistribution {
    pub dataset_name: String,
    pub regions: Vec<String>,
    /// Tally of classifier labels.
    pub raw_counts: Vec<f64>,
    /// Raw counts passed through the correction operator.
    pub counts: Vec<f64>,
    pub proportions: Vec<f64>,
    pub raw_proportions: Vec<f64>,
    pub n_names: usize,
    pub n_prior_only: usize,
    /// Lines that failed surname normalization.
    pub n_skipped: usize,
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| if s > 0.0 { x / s } else { 0.0 }).collect()
}

impl OriginDistribution {
    /// Assembles a distribution from per-region label tallies.
    pub fn from_guesses(
        dataset_name: &str,
        guessed: Vec<f64>,
        n_prior_only: usize,
        n_skipped: usize,
        op: &CorrectionOperator,
    ) -> Result<Self> {
        let n_names = guessed.iter().sum::<f64>() as usize;
        if n_names == 0 {
            return Err(Error::EmptyPopulation);
        }
        let counts = correct_counts(&guessed, op)?;
        Ok(OriginDistribution {
            dataset_name: dataset_name.to_string(),
            regions: op.regions.clone(),
            proportions: normalize(&counts),
            raw_proportions: normalize(&guessed),
            raw_counts: guessed,
            counts,
            n_names,
            n_prior_only,
            n_skipped,
        })
    }

    pub fn proportions(&self, basis: Basis) -> &[f64] {
        match basis {
            Basis::Corrected => &self.proportions,
            Basis::Raw => &self.raw_proportions,
        }
    }
}

/// Classifies every surname and corrects the aggregate counts. Only the
/// group-level result is returned.
pub fn distribution<S: AsRef<str>>(
    dataset_name: &str,
    surnames: &[S],
    model: &TrainedModel,
    op: &CorrectionOperator,
) -> Result<OriginDistribution> {
    if op.regions != model.regions() {
        return Err(Error::RegionMismatch);
    }
    if surnames.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let mut guessed = alloc::vec![0.0; op.regions.len()];
    let (mut prior_only, mut skipped) = (0, 0);
    for s in surnames {
        match model.classify(s.as_ref()) {
            Ok(c) => {
                guessed[c.label] += 1.0;
                prior_only += usize::from(c.prior_only);
            }
            Err(_) => skipped += 1,
        }
    }
    OriginDistribution::from_guesses(dataset_name, guessed, prior_only, skipped, op)
}

/// Which proportions a comparison uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Basis {
    #[default]
    Corrected,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationProfile {
    pub dataset_name: String,
    pub regions: Vec<String>,
    /// `None` where the reference proportion is zero.
    pub ratios: Vec<Option<f64>>,
    /// Regions whose expected count in the target is below
    /// [`MIN_EXPECTED_COUNT`].
    pub low_confidence: Vec<String>,
}

pub fn representation_ratios(
    target: &OriginDistribution,
    reference: &OriginDistribution,
    basis: Basis,
) -> Result<RepresentationProfile> {
    if target.regions != reference.regions {
        return Err(Error::RegionMismatch);
    }
    let (t, r) = (target.proportions(basis), reference.proportions(basis));
    let ratios = t.iter().zip(r).map(|(&a, &b)| if b > 0.0 { Some(a / b) } else { None }).collect();
    let low_confidence = reference
        .regions
        .iter()
        .zip(r)
        .filter(|(_, &b)| (target.n_names as f64) * b < MIN_EXPECTED_COUNT)
        .map(|(name, _)| name.clone())
        .collect();
    Ok(RepresentationProfile {
        dataset_name: target.dataset_name.clone(),
        regions: target.regions.clone(),
        ratios,
        low_confidence,
    })
}

/// `Σ |pᵢ − qᵢ| / (pᵢ + qᵢ)`, with `0/0` terms contributing nothing.
pub fn canberra(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    if p.iter().chain(q).any(|x| x.is_nan() || *x < 0.0) {
        return Err(Error::NegativeEntry);
    }
    Ok(p.iter().zip(q).map(|(a, b)| if a + b > 0.0 { crate::math::abs(a - b) / (a + b) } else { 0.0 }).sum())
}

/// Canberra distance over coordinates defined in both vectors.
fn canberra_defined(p: &[Option<f64>], q: &[Option<f64>]) -> f64 {
    p.iter()
        .zip(q)
        .filter_map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) if a + b > 0.0 => Some(crate::math::abs(a - b) / (a + b)),
            _ => None,
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOrdering {
    /// Dataset names in dendrogram leaf order.
    pub datasets: Vec<String>,
    /// Region labels in dendrogram leaf order.
    pub regions: Vec<String>,
    /// Leaf `i` is `leaf_names[i]`.
    pub leaf_names: Vec<String>,
    pub dataset_tree: Tree,
    pub region_tree: Tree,
}

fn cmp_profiles(a: &RepresentationProfile, b: &RepresentationProfile) -> Ordering {
    a.dataset_name.cmp(&b.dataset_name).then_with(|| {
        let key = |p: &RepresentationProfile| -> Vec<u64> {
            p.ratios.iter().map(|r| r.map_or(u64::MAX, f64::to_bits)).collect()
        };
        key(a).cmp(&key(b))
    })
}

/// Average-linkage clustering of profiles (and, transposed, of regions) under
/// the Canberra distance. Input order does not affect the result.
pub fn order_profiles(profiles: &[RepresentationProfile]) -> Result<ProfileOrdering> {
    let regions: Vec<String> = profiles.first().map(|p| p.regions.clone()).unwrap_or_default();
    if profiles.iter().any(|p| p.regions != regions) {
        return Err(Error::RegionMismatch);
    }
    if profiles.len() < 2 {
        let names: Vec<String> = profiles.iter().map(|p| p.dataset_name.clone()).collect();
        return Ok(ProfileOrdering {
            datasets: names.clone(),
            regions,
            leaf_names: names,
            dataset_tree: Tree { leaves: profiles.len(), merges: Vec::new() },
            region_tree: Tree { leaves: 0, merges: Vec::new() },
        });
    }
    let mut sorted: Vec<&RepresentationProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| cmp_profiles(a, b));

    let d = DistanceMatrix::from_fn(sorted.len(), |i, j| canberra_defined(&sorted[i].ratios, &sorted[j].ratios));
    let dataset_tree = agglomerate(&d, Linkage::Average)?;
    let leaf_names: Vec<String> = sorted.iter().map(|p| p.dataset_name.clone()).collect();
    let datasets = dataset_tree.leaf_order().into_iter().map(|i| leaf_names[i].clone()).collect();

    let columns: Vec<Vec<Option<f64>>> =
        (0..regions.len()).map(|r| sorted.iter().map(|p| p.ratios[r]).collect()).collect();
    let dr = DistanceMatrix::from_fn(regions.len(), |i, j| canberra_defined(&columns[i], &columns[j]));
    let region_tree = agglomerate(&dr, Linkage::Average)?;
    let region_order = region_tree.leaf_order().into_iter().map(|i| regions[i].clone()).collect();

    Ok(ProfileOrdering { datasets, regions: region_order, leaf_names, dataset_tree, region_tree })
}
