//! Confusion-matrix correction of guessed origin counts.
//!
//! Rows of a confusion matrix are guessed regions and columns actual regions.
//! Normalizing each row gives `P(actual = j | guessed = i)`; multiplying a
//! vector of guessed counts by that matrix estimates the actual counts. The
//! columns can first be rescaled so that the class mix matches a target
//! population rather than the training corpus.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math::abs;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionCounts {
    regions: Vec<String>,
    /// `matrix[guessed][actual]`
    matrix: Vec<Vec<f64>>,
}

impl ConfusionCounts {
    pub fn new(regions: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let k = regions.len();
        if matrix.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: matrix.len() });
        }
        for row in &matrix {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::NegativeCount);
            }
        }
        Ok(ConfusionCounts { regions, matrix })
    }

    pub fn from_counts(regions: Vec<String>, counts: &[Vec<u64>]) -> Result<Self> {
        Self::new(regions, counts.iter().map(|r| r.iter().map(|&c| c as f64).collect()).collect())
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn total(&self) -> f64 {
        self.matrix.iter().flatten().sum()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.regions.len()).map(|j| self.matrix.iter().map(|r| r[j]).sum()).collect()
    }

    /// Column sums divided by the grand total.
    pub fn column_shares(&self) -> Vec<f64> {
        let t = self.total();
        self.column_sums().into_iter().map(|c| c / t).collect()
    }
}

fn check_distribution(p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: p.len() });
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|x| !x.is_finite() || *x <= 0.0) || abs(sum - 1.0) > 1e-9 {
        return Err(Error::InvalidPriors(sum));
    }
    Ok(())
}

/// Rescales column `j` by `target[j] · T / colsum(j)`, keeping the grand
/// total `T` and making column shares equal `target`.
pub fn reweight_priors(c: &ConfusionCounts, target: &[f64]) -> Result<ConfusionCounts> {
    let k = c.regions.len();
    check_distribution(target, k)?;
    let sums = c.column_sums();
    if let Some(j) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroColumn(c.regions[j].clone()));
    }
    let total = c.total();
    // `target / share` is exactly 1 when `target` equals `column_shares()`.
    let factors: Vec<f64> = (0..k).map(|j| target[j] / (sums[j] / total)).collect();
    let matrix = c.matrix.iter().map(|row| row.iter().zip(&factors).map(|(v, f)| v * f).collect()).collect();
    Ok(ConfusionCounts { regions: c.regions.clone(), matrix })
}

/// Row-stochastic `P[guessed][actual]` with the inputs it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOperator {
    pub regions: Vec<String>,
    pub p: Vec<Vec<f64>>,
    pub source: ConfusionCounts,
    pub target_priors: Option<Vec<f64>>,
}

pub fn correction_operator(c: &ConfusionCounts) -> Result<CorrectionOperator> {
    let mut p = Vec::with_capacity(c.regions.len());
    for (i, row) in c.matrix.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if s <= 0.0 {
            return Err(Error::ZeroRow(c.regions[i].clone()));
        }
        p.push(row.iter().map(|v| v / s).collect());
    }
    Ok(CorrectionOperator { regions: c.regions.clone(), p, source: c.clone(), target_priors: None })
}

/// Reweights `c` to `target` priors, then row-normalizes.
pub fn calibrated_operator(c: &ConfusionCounts, target: &[f64]) -> Result<CorrectionOperator> {
    let mut op = correction_operator(&reweight_priors(c, target)?)?;
    op.source = c.clone();
    op.target_priors = Some(target.to_vec());
    Ok(op)
}

impl CorrectionOperator {
    pub fn identity(regions: Vec<String>) -> Self {
        let k = regions.len();
        let p: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let source = ConfusionCounts { regions: regions.clone(), matrix: p.clone() };
        CorrectionOperator { regions, p, source, target_priors: None }
    }

    /// Restores an operator from stored rows, checking each is a probability
    /// vector (±1e-9).
    pub fn from_rows(regions: Vec<String>, p: Vec<Vec<f64>>, target_priors: Option<Vec<f64>>) -> Result<Self> {
        let source = ConfusionCounts::new(regions.clone(), p.clone())?;
        for (i, row) in p.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if abs(s - 1.0) > 1e-9 || row.iter().any(|v| *v > 1.0) {
                return Err(Error::NotStochastic(regions[i].clone()));
            }
        }
        Ok(CorrectionOperator { regions, p, source, target_priors })
    }
}

/// `corrected[j] = Σᵢ guessed[i] · P[i][j]`.
pub fn correct_counts(guessed: &[f64], op: &CorrectionOperator) -> Result<Vec<f64>> {
    let k = op.regions.len();
    if guessed.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: guessed.len() });
    }
    if guessed.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::NegativeGuess);
    }
    Ok((0..k).map(|j| (0..k).map(|i| guessed[i] * op.p[i][j]).sum()).collect())
}

/// Guessed counts turned into a probability vector, for use as target priors.
pub fn priors_from_guesses(guessed: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = guessed.iter().sum();
    if guessed.iter().any(|g| !g.is_finite() || *g < 0.0) || total <= 0.0 {
        return Err(Error::NegativeGuess);
    }
    Ok(guessed.iter().map(|g| g / total).collect())
}
