//! Run configuration. Precedence: command-line flag, then config file, then
//! the defaults below.
//!
//! Randomness derives from the single `seed`: stage `s` draws from
//! `derive_seed(seed, s)` with the stage numbers in [`Stage`].

use std::path::{Path, PathBuf};

use onoma_core::corpus::{ConcentrationBasis, FilterParams};
use onoma_core::diversity::Basis;
use onoma_core::features::NGramConfig;
use onoma_core::synth::derive_seed;
use onoma_core::text::NormalizeOptions;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Occurrence TSV.
    pub corpus: Option<PathBuf>,
    /// Synthetic spec JSON, used instead of `corpus`.
    pub synth_spec: Option<PathBuf>,
    pub corpus_header: bool,
    pub strict: bool,
    pub strip_diacritics: bool,
    pub overrides: Option<PathBuf>,
    pub published_overrides: bool,
    /// Population the targets are compared against; also the source of the
    /// calibration priors.
    pub reference: Option<PathBuf>,
    pub targets: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,

    pub hhi_min: f64,
    pub freq_min: f64,
    pub concentration_basis: ConcentrationBasis,
    pub min_core_names: usize,
    pub min_df: usize,
    pub n_values: Vec<usize>,
    pub alpha: f64,
    pub train_fraction: f64,
    pub seed: Option<u64>,
    pub k_regions: usize,
    pub ratio_basis: Basis,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: None,
            synth_spec: None,
            corpus_header: false,
            strict: false,
            strip_diacritics: false,
            overrides: None,
            published_overrides: false,
            reference: None,
            targets: Vec::new(),
            out_dir: None,
            hhi_min: 0.8,
            freq_min: 1e-6,
            concentration_basis: ConcentrationBasis::Frequency,
            min_core_names: 20,
            min_df: 1,
            n_values: vec![2, 3],
            alpha: 0.1,
            train_fraction: 0.85,
            seed: None,
            k_regions: 7,
            ratio_basis: Basis::Corrected,
        }
    }
}

/// Pipeline stages that consume randomness.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stage {
    Synth = 1,
    Split = 2,
}

impl PipelineConfig {
    /// Loads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.corpus, &mut cfg.synth_spec, &mut cfg.overrides, &mut cfg.reference, &mut cfg.out_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        cfg.targets.iter_mut().for_each(fix);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(0.0..=1.0).contains(&self.hhi_min) {
            return bad(format!("hhi_min must lie in [0, 1], got {}", self.hhi_min));
        }
        if !(0.0..=1.0).contains(&self.freq_min) {
            return bad(format!("freq_min must lie in [0, 1], got {}", self.freq_min));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.k_regions == 0 {
            return bad("k_regions must be at least 1".into());
        }
        if self.min_df == 0 {
            return bad("min_df must be at least 1".into());
        }
        if self.min_core_names == 0 {
            return bad("min_core_names must be at least 1".into());
        }
        self.ngram_config().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn normalize(&self) -> NormalizeOptions {
        NormalizeOptions { strip_diacritics: self.strip_diacritics }
    }

    pub fn ngram_config(&self) -> NGramConfig {
        let mut c = NGramConfig::default().with_n(&self.n_values);
        c.normalize = self.normalize();
        c
    }

    pub fn filter_params(&self) -> FilterParams {
        FilterParams { hhi_min: self.hhi_min, freq_min: self.freq_min, basis: self.concentration_basis }
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| CliError::Config("a seed is required (--seed or \"seed\" in the config)".into()))
    }

    pub fn stage_seed(&self, stage: Stage) -> Result<u64> {
        Ok(derive_seed(self.require_seed()?, stage as u64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"hhi_minimum": 0.5}"#).unwrap();
        assert!(matches!(PipelineConfig::load(&p), Err(CliError::Config(_))));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"corpus": "data/c.tsv", "targets": ["t.txt"], "seed": 4}"#).unwrap();
        let c = PipelineConfig::load(&p).unwrap();
        assert_eq!(c.corpus.unwrap(), dir.path().join("data/c.tsv"));
        assert_eq!(c.targets, [dir.path().join("t.txt")]);
        assert_eq!(c.hhi_min, 0.8);
    }

    #[test]
    fn out_of_range_values_fail() {
        let c = PipelineConfig { train_fraction: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = PipelineConfig { n_values: vec![], ..Default::default() };
        assert!(c.validate().is_err());
        assert!(PipelineConfig::default().require_seed().is_err());
    }
}
