//! All stages from one config: corpus (or synthetic spec) → core names →
//! typology → model → operator → distributions and comparison report.

use std::path::Path;

use onoma_core::corpus::filter_core_names;
use onoma_core::correction::{
    calibrated_operator, correction_operator, priors_from_guesses, ConfusionCounts, CorrectionOperator,
};
use onoma_core::synth::{derive_seed, SynthSpec};

use crate::commands::{load_overrides, synth_outputs, train_stage};
use crate::config::{PipelineConfig, Stage};
use crate::error::{CliError, Context, Result};
use crate::formats;
use crate::stages::{self, origin, Outputs, Population};

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Config as recorded in reports: input paths reduced to file names and the
/// output directory left out, so reports do not depend on where the run
/// happened.
pub fn provenance_config(cfg: &PipelineConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    let obj = v.as_object_mut().expect("config is an object");
    obj.remove("out_dir");
    for key in ["corpus", "synth_spec", "overrides", "reference"] {
        if let Some(s) = obj.get(key).and_then(|x| x.as_str()).map(|s| file_name(Path::new(s))) {
            obj.insert(key.to_string(), s.into());
        }
    }
    if let Some(t) = obj.get_mut("targets").and_then(|t| t.as_array_mut()) {
        for x in t.iter_mut() {
            if let Some(s) = x.as_str() {
                *x = file_name(Path::new(s)).into();
            }
        }
    }
    v
}

pub fn run(cfg: &PipelineConfig) -> Result<Outputs> {
    let dir =
        cfg.out_dir.clone().ok_or_else(|| CliError::Config("out_dir is required (--out-dir or config)".into()))?;
    let seed = cfg.require_seed()?;
    let mut out = Outputs::default();

    let (table, mut populations, corpus_origin) = match (&cfg.corpus, &cfg.synth_spec) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either corpus or synth_spec, not both".into())),
        (None, None) => return Err(CliError::Config("a corpus or synth_spec is required".into())),
        (Some(c), None) => {
            (stages::load_corpus(c, cfg.corpus_header, cfg.strict, cfg.normalize())?, Vec::new(), origin(c))
        }
        (None, Some(s)) => {
            let o = origin(s);
            let mut spec: SynthSpec =
                serde_json::from_str(&formats::read_text(s)?).map_err(|e| CliError::format(&o, e.line(), e))?;
            spec.seed = derive_seed(seed, Stage::Synth as u64);
            spec.validate().map_err(|e| CliError::Config(format!("{o}: {e}")))?;
            let corpus = synth_outputs(&spec, &dir.join("synthetic"), &mut out)?;
            let pops: Vec<Population> = spec
                .populations
                .iter()
                .map(|p| {
                    let names = onoma_core::synth::generate_population(&spec, p).context(&o)?;
                    Ok(Population {
                        name: p.name.clone(),
                        origin: format!("{o}#{}", p.name),
                        names: names.into_iter().map(|x| x.0).collect(),
                    })
                })
                .collect::<Result<_>>()?;
            (corpus.table, pops, o)
        }
    };

    let core = filter_core_names(&table, &cfg.filter_params());
    log::info!("{} core names from {} surnames", core.len(), table.surname_count());
    out.add(dir.join("core_names.tsv"), formats::render_core_names(&core));

    let overrides = load_overrides(cfg.overrides.as_deref())?;
    let typ = stages::run_typology(
        &core,
        &cfg.ngram_config(),
        cfg.min_core_names,
        cfg.k_regions,
        &overrides,
        cfg.published_overrides,
        &corpus_origin,
    )?;
    out.add(dir.join("dendrogram.txt"), formats::render_dendrogram(&typ.dendrogram));
    out.add(dir.join("typology.tsv"), formats::render_typology(&typ.typology));
    out.add(dir.join("labeled.tsv"), formats::render_labeled(&typ.labeled.names));

    let (model, report) = train_stage(cfg, &typ.labeled.names, &corpus_origin, &dir, &mut out)?;
    let model_text = formats::render_model(&model);
    let counts = ConfusionCounts::from_counts(report.regions.clone(), &report.confusion).context("evaluation")?;

    // Explicit population files take precedence over synthetic ones.
    let reference = match &cfg.reference {
        Some(r) => Some(stages::load_population(r)?),
        None if !populations.is_empty() => Some(populations.remove(0)),
        None => None,
    };
    let mut targets: Vec<Population> = cfg.targets.iter().map(|t| stages::load_population(t)).collect::<Result<_>>()?;
    if cfg.reference.is_none() {
        targets.extend(populations);
    }

    let op: CorrectionOperator = match &reference {
        Some(r) => {
            let identity = CorrectionOperator::identity(model.regions().to_vec());
            let d = stages::population_distribution(&r.name, &r.names, &model, &identity, &r.origin)?;
            let priors = priors_from_guesses(&d.raw_counts).context(&r.origin)?;
            calibrated_operator(&counts, &priors).context(&r.origin)?
        }
        None => correction_operator(&counts).context("evaluation")?,
    };
    out.add(dir.join("operator.csv"), formats::render_operator(&op, "eval_report.json"));

    if let Some(reference) = &reference {
        let provenance = serde_json::json!({
            "model": "model.json",
            "model_sha256": stages::sha256_hex(model_text.as_bytes()),
            "operator": "operator.csv",
            "reference": reference.name,
            "seed": seed,
            "config": provenance_config(cfg),
        });
        if targets.is_empty() {
            let d = stages::population_distribution(&reference.name, &reference.names, &model, &op, &reference.origin)?;
            out.add(dir.join("distributions.csv"), formats::render_distributions(model.regions(), &[d]));
        } else {
            let cmp = stages::compare(reference, &targets, &model, &op, cfg.ratio_basis)?;
            let (ratios, dists, json) = stages::render_comparison(&cmp, provenance);
            out.add(dir.join("ratios.csv"), ratios);
            out.add(dir.join("distributions.csv"), dists);
            out.add(dir.join("report.json"), json);
        }
    }
    Ok(out)
}
