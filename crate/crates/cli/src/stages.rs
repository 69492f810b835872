//! Pipeline stages shared by the subcommands and `pipeline`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use onoma_core::classifier::{tally, Classification, EvalReport, TrainedModel};
use onoma_core::corpus::{CoreName, CountryRegistry, Gazetteer, Ingestor, OccurrenceTable, RowOutcome};
use onoma_core::correction::CorrectionOperator;
use onoma_core::diversity::{
    order_profiles, representation_ratios, Basis, OriginDistribution, ProfileOrdering, RepresentationProfile,
};
use onoma_core::features::NGramConfig;
use onoma_core::text::NormalizeOptions;
use onoma_core::typology::{
    build_country_matrix, cut_dendrogram, published_overrides, relabel, restrict_to_typology, ward_cluster, Dendrogram,
    LabeledName, LabeledSet, Override, RegionTypology,
};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Context, Result};
use crate::formats::{self, CorpusRow};

pub fn origin(path: &Path) -> String {
    path.display().to_string()
}

/// Files to write once every input has been read and validated.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, contents: String) {
        self.files.push((path.into(), contents));
    }

    pub fn commit(self) -> Result<()> {
        for (path, contents) in self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
            }
            std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        }
        Ok(())
    }
}

/// Writes to `path`, or to standard output when absent.
pub fn emit(path: Option<&Path>, contents: String) -> Result<()> {
    match path {
        Some(p) => {
            let mut out = Outputs::default();
            out.add(p, contents);
            out.commit()
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(contents.as_bytes())
                .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })
        }
    }
}

pub fn ingest_rows(
    rows: &[CorpusRow],
    origin: &str,
    strict: bool,
    normalize: NormalizeOptions,
) -> Result<OccurrenceTable> {
    let mut ing = Ingestor::new(CountryRegistry::natural_earth(), strict, normalize);
    for r in rows {
        match ing.push(&r.surname, &r.country, r.count) {
            Ok(RowOutcome::Added) => {}
            Ok(RowOutcome::SkippedUnknownCountry(c)) => {
                log::warn!("{origin}:{}: unknown country {c:?}, row skipped", r.line)
            }
            Err(e) => return Err(CliError::format(origin, r.line, e)),
        }
    }
    if ing.skipped() > 0 {
        log::warn!("{origin}: {} rows with unknown countries skipped", ing.skipped());
    }
    Ok(ing.finish())
}

pub fn load_corpus(path: &Path, header: bool, strict: bool, normalize: NormalizeOptions) -> Result<OccurrenceTable> {
    let o = origin(path);
    let rows = formats::parse_corpus(&formats::read_text(path)?, &o, header)?;
    ingest_rows(&rows, &o, strict, normalize)
}

/// Tags each `surname<TAB>affiliation` row with a country; untagged rows
/// are dropped and counted.
pub fn ingest_affiliations(
    path: &Path,
    gazetteer: &Gazetteer,
    header: bool,
    strict: bool,
    normalize: NormalizeOptions,
) -> Result<(OccurrenceTable, usize)> {
    let o = origin(path);
    let mut rows = Vec::new();
    let mut untagged = 0;
    for (line, surname, affiliation) in formats::parse_affiliations(&formats::read_text(path)?, &o, header)? {
        match gazetteer.tag(&affiliation) {
            Some(code) => rows.push(CorpusRow { line, surname, country: code.to_string(), count: 1 }),
            None => untagged += 1,
        }
    }
    if untagged > 0 {
        log::info!("{o}: {untagged} affiliations matched no single country");
    }
    Ok((ingest_rows(&rows, &o, strict, normalize)?, untagged))
}

pub fn render_table(table: &OccurrenceTable) -> String {
    let records: Vec<_> = table.records().collect();
    formats::render_corpus(records.iter().map(|r| (r.surname.as_str(), &r.country, r.count)))
}

#[derive(Debug, Clone)]
pub struct TypologyRun {
    pub dendrogram: Dendrogram,
    pub typology: RegionTypology,
    pub labeled: LabeledSet,
    /// Core names of countries too small to enter the matrix.
    pub dropped: usize,
}

/// The published world-map overrides restricted to countries present in the
/// dendrogram.
pub fn applicable_published_overrides(dendrogram: &Dendrogram) -> Vec<Override> {
    let present: BTreeSet<_> = dendrogram.leaves.iter().collect();
    published_overrides()
        .into_iter()
        .filter(|o| {
            let c = match o {
                Override::Reassign { country, .. } | Override::Delete { country } => country,
            };
            let keep = present.contains(c);
            if !keep {
                log::info!("published override for {c} skipped: country not in the dendrogram");
            }
            keep
        })
        .collect()
}

pub fn run_typology(
    core: &[CoreName],
    features: &NGramConfig,
    min_core_names: usize,
    k: usize,
    overrides: &[Override],
    published: bool,
    origin: &str,
) -> Result<TypologyRun> {
    let matrix = build_country_matrix(core, features, min_core_names).context(origin)?;
    let dendrogram = ward_cluster(&matrix).context(origin)?;
    let mut all = if published { applicable_published_overrides(&dendrogram) } else { Vec::new() };
    all.extend(overrides.iter().cloned());
    let typology = cut_dendrogram(&dendrogram, k, &all).context(origin)?;
    let (kept, dropped) = restrict_to_typology(core, &typology);
    if dropped > 0 {
        log::info!("{dropped} core names belong to countries below {min_core_names} core names and are left out");
    }
    let labeled = relabel(&kept, &typology).context(origin)?;
    Ok(TypologyRun { dendrogram, typology, labeled, dropped })
}

/// Classifies in parallel; results come back in input order.
pub fn classify_all(model: &TrainedModel, names: &[String]) -> Vec<Option<Classification>> {
    names.par_iter().map(|n| model.classify(n).ok()).collect()
}

pub fn evaluate(model: &TrainedModel, eval: &[LabeledName], origin: &str) -> Result<EvalReport> {
    let actual: Vec<usize> = eval
        .iter()
        .map(|n| {
            model
                .region_index(&n.region)
                .ok_or_else(|| CliError::input(origin, format!("label {:?} is not a model region", n.region)))
        })
        .collect::<Result<_>>()?;
    let guessed: Vec<usize> = eval
        .par_iter()
        .map(|n| model.classify(&n.surname).map(|c| c.label))
        .collect::<onoma_core::Result<_>>()
        .context(origin)?;
    tally(model.regions(), guessed.into_iter().zip(actual)).context(origin)
}

/// Group-level origin distribution of one population.
pub fn population_distribution(
    name: &str,
    names: &[String],
    model: &TrainedModel,
    op: &CorrectionOperator,
    origin: &str,
) -> Result<OriginDistribution> {
    if op.regions != model.regions() {
        return Err(CliError::input(origin, "operator and model regions differ"));
    }
    let mut guessed = vec![0.0; model.regions().len()];
    let (mut prior_only, mut skipped) = (0, 0);
    for c in classify_all(model, names) {
        match c {
            Some(c) => {
                guessed[c.label] += 1.0;
                prior_only += usize::from(c.prior_only);
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{origin}: {skipped} lines are not valid surnames and were skipped");
    }
    OriginDistribution::from_guesses(name, guessed, prior_only, skipped, op).context(origin)
}

pub struct Population {
    pub name: String,
    pub origin: String,
    pub names: Vec<String>,
}

pub fn load_population(path: &Path) -> Result<Population> {
    let name = path.file_stem().map_or_else(|| origin(path), |s| s.to_string_lossy().into_owned());
    Ok(Population { name, origin: origin(path), names: formats::parse_population(&formats::read_text(path)?) })
}

pub struct Comparison {
    pub reference: OriginDistribution,
    pub targets: Vec<OriginDistribution>,
    pub profiles: Vec<RepresentationProfile>,
    pub ordering: ProfileOrdering,
    pub basis: Basis,
}

pub fn compare(
    reference: &Population,
    targets: &[Population],
    model: &TrainedModel,
    op: &CorrectionOperator,
    basis: Basis,
) -> Result<Comparison> {
    let mut seen = BTreeSet::new();
    for t in targets {
        if !seen.insert(&t.name) {
            return Err(CliError::input(&t.origin, format!("dataset name {:?} is used twice", t.name)));
        }
    }
    let reference_dist = population_distribution(&reference.name, &reference.names, model, op, &reference.origin)?;
    let dists: Vec<OriginDistribution> = targets
        .iter()
        .map(|t| population_distribution(&t.name, &t.names, model, op, &t.origin))
        .collect::<Result<_>>()?;
    let profiles: Vec<RepresentationProfile> = dists
        .iter()
        .map(|d| representation_ratios(d, &reference_dist, basis).context(&reference.origin))
        .collect::<Result<_>>()?;
    let ordering = order_profiles(&profiles).context("profiles")?;
    Ok(Comparison { reference: reference_dist, targets: dists, profiles, ordering, basis })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(serde::Serialize)]
struct DistributionJson<'a> {
    dataset: &'a str,
    n_names: usize,
    n_prior_only: usize,
    n_skipped: usize,
    raw_shares: BTreeMap<&'a str, f64>,
    corrected_shares: BTreeMap<&'a str, f64>,
}

impl<'a> DistributionJson<'a> {
    fn new(d: &'a OriginDistribution) -> Self {
        let shares = |v: &'a [f64]| d.regions.iter().map(String::as_str).zip(v.iter().copied()).collect();
        DistributionJson {
            dataset: &d.dataset_name,
            n_names: d.n_names,
            n_prior_only: d.n_prior_only,
            n_skipped: d.n_skipped,
            raw_shares: shares(&d.raw_proportions),
            corrected_shares: shares(&d.proportions),
        }
    }
}

#[derive(serde::Serialize)]
struct ProfileJson<'a> {
    dataset: &'a str,
    ratios: BTreeMap<&'a str, Option<f64>>,
    low_confidence: &'a [String],
}

#[derive(serde::Serialize)]
struct ReportJson<'a> {
    provenance: serde_json::Value,
    distance: &'static str,
    linkage: &'static str,
    basis: Basis,
    reference: DistributionJson<'a>,
    targets: Vec<DistributionJson<'a>>,
    dataset_order: &'a [String],
    region_order: &'a [String],
    profiles: Vec<ProfileJson<'a>>,
}

/// `ratios.csv`, `distributions.csv` and `report.json` contents.
pub fn render_comparison(c: &Comparison, provenance: serde_json::Value) -> (String, String, String) {
    let ratios = formats::render_ratios(&c.ordering, &c.profiles);
    let all: Vec<OriginDistribution> = std::iter::once(c.reference.clone()).chain(c.targets.iter().cloned()).collect();
    let distributions = formats::render_distributions(&c.reference.regions, &all);
    let report = ReportJson {
        provenance,
        distance: "canberra",
        linkage: "average",
        basis: c.basis,
        reference: DistributionJson::new(&c.reference),
        targets: c.targets.iter().map(DistributionJson::new).collect(),
        dataset_order: &c.ordering.datasets,
        region_order: &c.ordering.regions,
        profiles: c
            .profiles
            .iter()
            .map(|p| ProfileJson {
                dataset: &p.dataset_name,
                ratios: p.regions.iter().map(String::as_str).zip(p.ratios.iter().copied()).collect(),
                low_confidence: &p.low_confidence,
            })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    (ratios, distributions, json)
}
