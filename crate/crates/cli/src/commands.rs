//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use onoma_core::classifier::{split, train_with_regions, EvalReport, TrainParams};
use onoma_core::corpus::{filter_core_names, ConcentrationBasis, Gazetteer};
use onoma_core::correction::{
    calibrated_operator, correction_operator, priors_from_guesses, ConfusionCounts, CorrectionOperator,
};
use onoma_core::diversity::Basis;
use onoma_core::synth::{generate, generate_population, score_pipeline, PipelineParams, SynthSpec};
use onoma_core::typology::LabeledName;

use crate::config::{PipelineConfig, Stage};
use crate::error::{CliError, Context, Result};
use crate::formats;
use crate::pipeline;
use crate::stages::{self, emit, origin, Outputs};

const FORMATS: &str = "\
File formats (UTF-8, LF line endings):
  corpus TSV        surname<TAB>country<TAB>count, no header unless --header
  affiliations TSV  surname<TAB>affiliation free text
  gazetteer TSV     alias<TAB>country_code
  core names TSV    surname<TAB>assigned_country<TAB>hhi<TAB>max_frequency (6 significant digits)
  overrides TSV     REASSIGN<TAB>country<TAB>region | DELETE<TAB>country
  dendrogram        '# leaf<TAB>index<TAB>country<TAB>core_names' lines, then
                    node_a<TAB>node_b<TAB>height<TAB>new_node per merge (leaves are 0..n-1,
                    merge s creates node n+s)
  typology TSV      country<TAB>region ('-' marks a deleted country)
  labeled TSV       surname<TAB>region
  vocabulary        one n-gram per line; line order is the feature index
  model JSON        version, regions, vocabulary, log_priors, log_likelihoods
                    (row-major regions x vocabulary), alpha, feature_config;
                    numbers carry 17 significant digits
  confusion CSV     header 'guessed\\actual,<regions>', one row per guessed region
  operator CSV      '#' provenance lines (source, priors), then the row-stochastic
                    P(actual | guessed) in the confusion layout
  population        one surname per line
  synth spec JSON   regions[{label, countries[{code, volume}], alphabet?}], overlap,
                    names_per_country, seed, sharpness?, spillover?, populations[{name, size, mix}]
  config JSON       any PipelineConfig field; flags take precedence over the file

Exit codes: 1 usage, 2 input, format or I/O, 3 config, 4 internal invariant.
ONOMA_THREADS caps worker threads (0 = one per core).";

#[derive(Debug, Parser)]
#[command(name = "onoma", version, about = "Surname-origin inference and population representativeness analysis", after_long_help = FORMATS)]
pub struct Cli {
    /// JSON config file; command-line flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize, validate and merge an occurrence corpus
    Ingest(IngestArgs),
    /// Select core names by concentration (HHI) and peak frequency
    FilterCore(FilterCoreArgs),
    /// Cluster countries by n-gram profile and relabel core names by region
    Typology(TypologyArgs),
    /// Split labeled names and train the naive Bayes model
    Train(TrainArgs),
    /// Confusion matrix, precision and recall
    Evaluate(EvaluateArgs),
    /// Build the correction operator, optionally reweighted to reference priors
    Calibrate(CalibrateArgs),
    /// Corrected origin distribution of one surname list
    ClassifyPopulation(ClassifyArgs),
    /// Representativeness ratios of target populations against a reference
    Compare(CompareArgs),
    /// Generate a synthetic corpus with known regions, optionally scoring the pipeline
    Synth(SynthArgs),
    /// Run every stage from one config file
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct CorpusFlags {
    /// Skip the first line of the input
    #[arg(long)]
    header: bool,
    /// Fail on unknown country codes instead of skipping the row
    #[arg(long)]
    strict: bool,
    /// Remove diacritics during surname normalization
    #[arg(long)]
    strip_diacritics: bool,
}

impl CorpusFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        cfg.corpus_header |= self.header;
        cfg.strict |= self.strict;
        cfg.strip_diacritics |= self.strip_diacritics;
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BasisArg {
    Frequency,
    Count,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    input: PathBuf,
    #[command(flatten)]
    corpus: CorpusFlags,
    /// Input rows are surname<TAB>affiliation, tagged with countries via the gazetteer
    #[arg(long)]
    affiliations: bool,
    /// Alias table for --affiliations (default: bundled country names)
    #[arg(long, value_name = "FILE")]
    gazetteer: Option<PathBuf>,
    /// Output corpus TSV (default: stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterCoreArgs {
    /// Corpus TSV
    input: PathBuf,
    #[command(flatten)]
    corpus: CorpusFlags,
    /// Minimum HHI [default: 0.8]
    #[arg(long)]
    hhi_min: Option<f64>,
    /// Minimum peak per-country frequency, as a fraction [default: 1e-6]
    #[arg(long)]
    freq_min: Option<f64>,
    /// Quantity the HHI is computed over [default: frequency]
    #[arg(long, value_enum)]
    basis: Option<BasisArg>,
    /// Output core-name TSV (default: stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureFlags {
    /// Comma-separated n-gram lengths [default: 2,3]
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
}

impl FeatureFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(n) = &self.n_values {
            cfg.n_values = n.clone();
        }
    }
}

#[derive(Debug, Args)]
pub struct TypologyArgs {
    /// Core-name TSV
    core_names: PathBuf,
    /// Directory for dendrogram.txt, typology.tsv and labeled.tsv
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of regions [default: 7]
    #[arg(long)]
    k: Option<usize>,
    /// Countries with fewer core names stay out of the matrix [default: 20]
    #[arg(long)]
    min_core_names: Option<usize>,
    #[command(flatten)]
    features: FeatureFlags,
    /// Override file applied after the cut
    #[arg(long, value_name = "FILE")]
    overrides: Option<PathBuf>,
    /// Apply the published world-map overrides before any override file
    #[arg(long)]
    published_overrides: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled TSV
    labeled: PathBuf,
    /// Directory for model.json, vocab.txt, train.tsv and eval.tsv
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Share of each region used for training [default: 0.85]
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Additive smoothing [default: 0.1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Minimum number of training surnames containing a token [default: 1]
    #[arg(long)]
    min_df: Option<usize>,
    #[command(flatten)]
    features: FeatureFlags,
    /// Remove diacritics during surname normalization
    #[arg(long)]
    strip_diacritics: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model JSON (with --eval)
    #[arg(long, requires = "eval", conflicts_with = "confusion")]
    model: Option<PathBuf>,
    /// Labeled TSV of held-out names
    #[arg(long, requires = "model")]
    eval: Option<PathBuf>,
    /// Existing confusion CSV instead of model + eval
    #[arg(long, required_unless_present = "model")]
    confusion: Option<PathBuf>,
    /// Report JSON output (stdout when neither --json nor --csv is given)
    #[arg(long)]
    json: Option<PathBuf>,
    /// Confusion CSV output
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Confusion CSV
    #[arg(long, required_unless_present = "report", conflicts_with = "report")]
    confusion: Option<PathBuf>,
    /// Evaluation report JSON
    #[arg(long)]
    report: Option<PathBuf>,
    /// Model used to classify the reference population
    #[arg(long, requires = "reference")]
    model: Option<PathBuf>,
    /// Reference population whose guessed distribution becomes the target priors
    #[arg(long, requires = "model", conflicts_with = "priors")]
    reference: Option<PathBuf>,
    /// Explicit comma-separated target priors in region order
    #[arg(long, value_delimiter = ',')]
    priors: Option<Vec<f64>>,
    /// Operator CSV output (default: stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Population file
    population: PathBuf,
    /// Trained model JSON
    #[arg(long)]
    model: PathBuf,
    /// Correction operator (default: no correction)
    #[arg(long)]
    operator: Option<PathBuf>,
    /// Dataset name (default: file stem)
    #[arg(long)]
    name: Option<String>,
    /// Distribution CSV output (default: stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RatioBasis {
    Corrected,
    Raw,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Target population files
    #[arg(required = true)]
    targets: Vec<PathBuf>,
    /// Reference population file
    #[arg(long)]
    reference: PathBuf,
    /// Trained model JSON
    #[arg(long)]
    model: PathBuf,
    /// Correction operator (default: no correction)
    #[arg(long)]
    operator: Option<PathBuf>,
    /// Directory for ratios.csv, distributions.csv and report.json
    #[arg(long)]
    out_dir: PathBuf,
    /// Proportions used for the ratios [default: corrected]
    #[arg(long, value_enum)]
    basis: Option<RatioBasis>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synth spec JSON
    spec: PathBuf,
    /// Directory for corpus.tsv, truth.tsv, countries.tsv and populations/
    #[arg(long)]
    out_dir: PathBuf,
    /// Replace the spec seed
    #[arg(long)]
    seed: Option<u64>,
    /// Also run the full pipeline against the ground truth and write scorecard.json
    #[arg(long)]
    score: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Output directory (overrides out_dir in the config)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Ingest(a) => ingest(a, cfg),
        Command::FilterCore(a) => {
            a.corpus.apply(&mut cfg);
            cfg.hhi_min = a.hhi_min.unwrap_or(cfg.hhi_min);
            cfg.freq_min = a.freq_min.unwrap_or(cfg.freq_min);
            if let Some(b) = a.basis {
                cfg.concentration_basis = match b {
                    BasisArg::Frequency => ConcentrationBasis::Frequency,
                    BasisArg::Count => ConcentrationBasis::Count,
                };
            }
            cfg.validate()?;
            let table = stages::load_corpus(&a.input, cfg.corpus_header, cfg.strict, cfg.normalize())?;
            let core = filter_core_names(&table, &cfg.filter_params());
            log::info!("{} of {} surnames are core names", core.len(), table.surname_count());
            emit(a.output.as_deref(), formats::render_core_names(&core))
        }
        Command::Typology(a) => {
            cfg.k_regions = a.k.unwrap_or(cfg.k_regions);
            cfg.min_core_names = a.min_core_names.unwrap_or(cfg.min_core_names);
            a.features.apply(&mut cfg);
            cfg.published_overrides |= a.published_overrides;
            if a.overrides.is_some() {
                cfg.overrides = a.overrides;
            }
            cfg.validate()?;
            let o = origin(&a.core_names);
            let core = formats::parse_core_names(&formats::read_text(&a.core_names)?, &o)?;
            let overrides = load_overrides(cfg.overrides.as_deref())?;
            let run = stages::run_typology(
                &core,
                &cfg.ngram_config(),
                cfg.min_core_names,
                cfg.k_regions,
                &overrides,
                cfg.published_overrides,
                &o,
            )?;
            let mut out = Outputs::default();
            out.add(a.out_dir.join("dendrogram.txt"), formats::render_dendrogram(&run.dendrogram));
            out.add(a.out_dir.join("typology.tsv"), formats::render_typology(&run.typology));
            out.add(a.out_dir.join("labeled.tsv"), formats::render_labeled(&run.labeled.names));
            out.commit()
        }
        Command::Train(a) => {
            cfg.seed = a.seed.or(cfg.seed);
            cfg.train_fraction = a.train_fraction.unwrap_or(cfg.train_fraction);
            cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
            cfg.min_df = a.min_df.unwrap_or(cfg.min_df);
            cfg.strip_diacritics |= a.strip_diacritics;
            a.features.apply(&mut cfg);
            cfg.validate()?;
            let o = origin(&a.labeled);
            let labeled = formats::parse_labeled(&formats::read_text(&a.labeled)?, &o)?;
            let mut out = Outputs::default();
            train_stage(&cfg, &labeled, &o, &a.out_dir, &mut out)?;
            out.commit()
        }
        Command::Evaluate(a) => evaluate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::ClassifyPopulation(a) => {
            let model = load_model(&a.model)?;
            let op = load_operator(a.operator.as_deref(), &model)?;
            let mut pop = stages::load_population(&a.population)?;
            if let Some(n) = a.name {
                pop.name = n;
            }
            let d = stages::population_distribution(&pop.name, &pop.names, &model, &op, &pop.origin)?;
            emit(a.output.as_deref(), formats::render_distributions(model.regions(), &[d]))
        }
        Command::Compare(a) => {
            if let Some(b) = a.basis {
                cfg.ratio_basis = match b {
                    RatioBasis::Corrected => Basis::Corrected,
                    RatioBasis::Raw => Basis::Raw,
                };
            }
            let model_text = formats::read_text(&a.model)?;
            let model = formats::parse_model(&model_text, &origin(&a.model))?;
            let op = load_operator(a.operator.as_deref(), &model)?;
            let reference = stages::load_population(&a.reference)?;
            let targets: Vec<_> = a.targets.iter().map(|t| stages::load_population(t)).collect::<Result<_>>()?;
            let cmp = stages::compare(&reference, &targets, &model, &op, cfg.ratio_basis)?;
            let provenance = serde_json::json!({
                "model": a.model.display().to_string(),
                "model_sha256": stages::sha256_hex(model_text.as_bytes()),
                "operator": a.operator.as_ref().map(|p| p.display().to_string()),
                "reference": a.reference.display().to_string(),
                "config": pipeline::provenance_config(&cfg),
            });
            let (ratios, dists, report) = stages::render_comparison(&cmp, provenance);
            let mut out = Outputs::default();
            out.add(a.out_dir.join("ratios.csv"), ratios);
            out.add(a.out_dir.join("distributions.csv"), dists);
            out.add(a.out_dir.join("report.json"), report);
            out.commit()
        }
        Command::Synth(a) => synth(a, cfg),
        Command::Pipeline(a) => {
            if a.out_dir.is_some() {
                cfg.out_dir = a.out_dir;
            }
            cfg.seed = a.seed.or(cfg.seed);
            cfg.validate()?;
            pipeline::run(&cfg)?.commit()
        }
    }
}

fn ingest(a: IngestArgs, mut cfg: PipelineConfig) -> Result<()> {
    a.corpus.apply(&mut cfg);
    cfg.validate()?;
    let table = if a.affiliations {
        let gazetteer = match &a.gazetteer {
            Some(p) => formats::parse_gazetteer(&formats::read_text(p)?, &origin(p))?,
            None => Gazetteer::natural_earth(),
        };
        stages::ingest_affiliations(&a.input, &gazetteer, cfg.corpus_header, cfg.strict, cfg.normalize())?.0
    } else {
        stages::load_corpus(&a.input, cfg.corpus_header, cfg.strict, cfg.normalize())?
    };
    emit(a.output.as_deref(), stages::render_table(&table))
}

pub fn load_overrides(path: Option<&Path>) -> Result<Vec<onoma_core::typology::Override>> {
    match path {
        Some(p) => formats::parse_overrides(&formats::read_text(p)?, &origin(p)),
        None => Ok(Vec::new()),
    }
}

pub fn load_model(path: &Path) -> Result<onoma_core::classifier::TrainedModel> {
    formats::parse_model(&formats::read_text(path)?, &origin(path))
}

fn load_operator(path: Option<&Path>, model: &onoma_core::classifier::TrainedModel) -> Result<CorrectionOperator> {
    match path {
        Some(p) => {
            let op = formats::parse_operator(&formats::read_text(p)?, &origin(p))?;
            if op.regions != model.regions() {
                return Err(CliError::input(&origin(p), "operator regions differ from the model regions"));
            }
            Ok(op)
        }
        None => Ok(CorrectionOperator::identity(model.regions().to_vec())),
    }
}

/// Splits, trains and evaluates; queues model, vocabulary, split files and
/// evaluation outputs under `dir`.
pub fn train_stage(
    cfg: &PipelineConfig,
    labeled: &[LabeledName],
    origin: &str,
    dir: &Path,
    out: &mut Outputs,
) -> Result<(onoma_core::classifier::TrainedModel, EvalReport)> {
    let (train_set, eval_set) = split(labeled, cfg.train_fraction, cfg.stage_seed(Stage::Split)?).context(origin)?;
    let regions: Vec<String> = {
        let mut r: Vec<String> = labeled.iter().map(|n| n.region.clone()).collect();
        r.sort();
        r.dedup();
        r
    };
    let params = TrainParams { alpha: cfg.alpha, features: cfg.ngram_config(), min_df: cfg.min_df };
    let model = train_with_regions(&train_set, &regions, &params).context(origin)?;
    let report = stages::evaluate(&model, &eval_set, origin)?;
    out.add(dir.join("model.json"), formats::render_model(&model));
    out.add(dir.join("vocab.txt"), formats::render_vocabulary(model.vocabulary()));
    out.add(dir.join("train.tsv"), formats::render_labeled(&train_set));
    out.add(dir.join("eval.tsv"), formats::render_labeled(&eval_set));
    out.add(dir.join("eval_report.json"), formats::render_eval_json(&report));
    out.add(dir.join("confusion.csv"), formats::render_confusion_csv(&report.regions, &report.confusion));
    Ok((model, report))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let report = match (&a.model, &a.eval, &a.confusion) {
        (Some(m), Some(e), _) => {
            let model = load_model(m)?;
            let o = origin(e);
            let eval = formats::parse_labeled(&formats::read_text(e)?, &o)?;
            stages::evaluate(&model, &eval, &o)?
        }
        (_, _, Some(c)) => {
            let o = origin(c);
            let (regions, counts) = formats::parse_confusion_csv(&formats::read_text(c)?, &o)?;
            EvalReport::from_confusion(regions, counts).context(&o)?
        }
        _ => return Err(CliError::Usage("give --model with --eval, or --confusion".into())),
    };
    let json = formats::render_eval_json(&report);
    if a.json.is_none() && a.csv.is_none() {
        return emit(None, json);
    }
    let mut out = Outputs::default();
    if let Some(p) = a.json {
        out.add(p, json);
    }
    if let Some(p) = a.csv {
        out.add(p, formats::render_confusion_csv(&report.regions, &report.confusion));
    }
    out.commit()
}

pub fn load_confusion(path: &Path) -> Result<ConfusionCounts> {
    let o = origin(path);
    let text = formats::read_text(path)?;
    let (regions, counts) = if path.extension().is_some_and(|e| e == "json") {
        formats::parse_eval_json(&text, &o)?
    } else {
        formats::parse_confusion_csv(&text, &o)?
    };
    ConfusionCounts::from_counts(regions, &counts).context(&o)
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let source = a.confusion.as_ref().or(a.report.as_ref()).expect("clap requires one source");
    let counts = load_confusion(source)?;
    let priors = match (&a.model, &a.reference, a.priors) {
        (Some(m), Some(r), _) => {
            let model = load_model(m)?;
            if model.regions() != counts.regions() {
                return Err(CliError::input(&origin(m), "model regions differ from the confusion matrix regions"));
            }
            let pop = stages::load_population(r)?;
            let identity = CorrectionOperator::identity(model.regions().to_vec());
            let d = stages::population_distribution(&pop.name, &pop.names, &model, &identity, &pop.origin)?;
            Some(priors_from_guesses(&d.raw_counts).context(&pop.origin)?)
        }
        (_, _, Some(p)) => Some(p),
        _ => None,
    };
    let o = origin(source);
    let op = match &priors {
        Some(p) => calibrated_operator(&counts, p).context(&o)?,
        None => correction_operator(&counts).context(&o)?,
    };
    emit(a.output.as_deref(), formats::render_operator(&op, &o))
}

fn load_spec(path: &Path) -> Result<SynthSpec> {
    let o = origin(path);
    let spec: SynthSpec =
        serde_json::from_str(&formats::read_text(path)?).map_err(|e| CliError::format(&o, e.line(), e))?;
    spec.validate().map_err(|e| CliError::Config(format!("{o}: {e}")))?;
    Ok(spec)
}

/// Corpus, truth tables and populations of a synthetic spec, queued under `dir`.
pub fn synth_outputs(spec: &SynthSpec, dir: &Path, out: &mut Outputs) -> Result<onoma_core::synth::SynthCorpus> {
    let corpus = generate(spec).context("synth spec")?;
    out.add(dir.join("corpus.tsv"), stages::render_table(&corpus.table));
    let truth: Vec<LabeledName> =
        corpus.truth.iter().map(|(s, r)| LabeledName { surname: s.clone(), region: r.clone() }).collect();
    out.add(dir.join("truth.tsv"), formats::render_labeled(&truth));
    let countries: String = corpus.country_region.iter().map(|(c, r)| format!("{c}\t{r}\n")).collect();
    out.add(dir.join("countries.tsv"), countries);
    for p in &spec.populations {
        let names: String =
            generate_population(spec, p).context("synth spec")?.into_iter().map(|(s, _)| s + "\n").collect();
        out.add(dir.join("populations").join(format!("{}.txt", p.name)), names);
    }
    Ok(corpus)
}

fn synth(a: SynthArgs, cfg: PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let mut spec = load_spec(&a.spec)?;
    spec.seed = a.seed.unwrap_or(spec.seed);
    let mut out = Outputs::default();
    synth_outputs(&spec, &a.out_dir, &mut out)?;
    if a.score {
        let params = PipelineParams {
            filter: cfg.filter_params(),
            features: cfg.ngram_config(),
            min_core_names: cfg.min_core_names,
            min_df: cfg.min_df,
            alpha: cfg.alpha,
            train_fraction: cfg.train_fraction,
            split_seed: onoma_core::synth::derive_seed(spec.seed, Stage::Split as u64),
            ..PipelineParams::default()
        };
        let card = score_pipeline(&spec, &params).context(&origin(&a.spec))?;
        let json = serde_json::json!({
            "regions": card.report.regions,
            "precision": card.report.precision,
            "recall": card.report.recall,
            "accuracy": card.report.accuracy(),
            "confusion": card.report.confusion,
            "region_map": card.region_map,
            "partition_recovered": card.partition_recovered,
            "core_names": card.core_names,
            "truth_shares": card.truth_shares,
            "raw_shares": card.raw_shares,
            "corrected_shares": card.corrected_shares,
            "raw_l1": card.raw_l1,
            "corrected_l1": card.corrected_l1,
        });
        out.add(a.out_dir.join("scorecard.json"), serde_json::to_string_pretty(&json).expect("json") + "\n");
    }
    out.commit()
}
