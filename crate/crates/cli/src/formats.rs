//! Readers and writers for the on-disk formats.
//!
//! Readers take file contents plus an origin label used in error messages;
//! writers return the full file contents so nothing touches the disk until
//! every input has been validated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use onoma_core::classifier::{EvalReport, TrainedModel};
use onoma_core::corpus::{CoreName, CountryCode, Gazetteer};
use onoma_core::correction::CorrectionOperator;
use onoma_core::diversity::{OriginDistribution, ProfileOrdering, RepresentationProfile};
use onoma_core::features::{NGramConfig, Vocabulary};
use onoma_core::typology::{Assignment, Dendrogram, LabeledName, Override, RegionTypology};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{CliError, Context, Result};

pub const MODEL_VERSION: u32 = 1;
/// Marker written in the typology file for deleted countries.
pub const DELETED: &str = "-";

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    String::from_utf8(bytes).map_err(|e| {
        let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        CliError::format(&path.display().to_string(), line, "invalid UTF-8")
    })
}

/// Shortest of fixed or scientific notation with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("scientific notation");
        format!("{}e{e}", trim_zeros(mantissa))
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Non-empty lines with their 1-based numbers; `#` lines are comments.
fn data_lines(text: &str, skip_header: bool) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .skip(usize::from(skip_header))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn fields<'a>(origin: &str, line: usize, l: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = l.split('\t').collect();
    if f.len() != n {
        return Err(CliError::format(origin, line, format!("expected {n} tab-separated fields, found {}", f.len())));
    }
    Ok(f)
}

fn parse_f64(origin: &str, line: usize, s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::format(origin, line, format!("{what} {s:?} is not a finite number")))
}

fn country(origin: &str, line: usize, s: &str) -> Result<CountryCode> {
    CountryCode::new(s.trim()).map_err(|e| CliError::format(origin, line, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRow {
    pub line: usize,
    pub surname: String,
    pub country: String,
    pub count: u64,
}

/// `surname<TAB>country<TAB>count`.
pub fn parse_corpus(text: &str, origin: &str, header: bool) -> Result<Vec<CorpusRow>> {
    data_lines(text, header)
        .map(|(line, l)| {
            let f = fields(origin, line, l, 3)?;
            let count =
                f[2].trim().parse::<u64>().ok().filter(|&c| c > 0).ok_or_else(|| {
                    CliError::format(origin, line, format!("count {:?} is not a positive integer", f[2]))
                })?;
            Ok(CorpusRow { line, surname: f[0].to_string(), country: f[1].trim().to_string(), count })
        })
        .collect()
}

pub fn render_corpus<'a>(rows: impl IntoIterator<Item = (&'a str, &'a CountryCode, u64)>) -> String {
    let mut out = String::new();
    for (s, c, n) in rows {
        writeln!(out, "{s}\t{c}\t{n}").unwrap();
    }
    out
}

/// `surname<TAB>affiliation`, one authorship per row.
pub fn parse_affiliations(text: &str, origin: &str, header: bool) -> Result<Vec<(usize, String, String)>> {
    data_lines(text, header)
        .map(|(line, l)| {
            let f = fields(origin, line, l, 2)?;
            Ok((line, f[0].to_string(), f[1].to_string()))
        })
        .collect()
}

/// `alias<TAB>country_code`.
pub fn parse_gazetteer(text: &str, origin: &str) -> Result<Gazetteer> {
    let mut g = Gazetteer::new();
    for (line, l) in data_lines(text, false) {
        let f = fields(origin, line, l, 2)?;
        if f[0].trim().is_empty() {
            return Err(CliError::format(origin, line, "empty alias"));
        }
        g.insert(f[0], country(origin, line, f[1])?);
    }
    Ok(g)
}

/// `surname<TAB>assigned_country<TAB>hhi<TAB>max_frequency`.
pub fn render_core_names(core: &[CoreName]) -> String {
    let mut out = String::new();
    for c in core {
        writeln!(out, "{}\t{}\t{}\t{}", c.surname, c.assigned_country, sig6(c.hhi), sig6(c.max_frequency)).unwrap();
    }
    out
}

pub fn parse_core_names(text: &str, origin: &str) -> Result<Vec<CoreName>> {
    data_lines(text, false)
        .map(|(line, l)| {
            let f = fields(origin, line, l, 4)?;
            let hhi = parse_f64(origin, line, f[2], "hhi")?;
            let max_frequency = parse_f64(origin, line, f[3], "frequency")?;
            if !(0.0..=1.0).contains(&hhi) || !(0.0..=1.0).contains(&max_frequency) {
                return Err(CliError::format(origin, line, "hhi and frequency must lie in [0, 1]"));
            }
            Ok(CoreName {
                surname: f[0].to_string(),
                assigned_country: country(origin, line, f[1])?,
                hhi,
                max_frequency,
            })
        })
        .collect()
}

/// `REASSIGN<TAB>country<TAB>region` or `DELETE<TAB>country`.
pub fn parse_overrides(text: &str, origin: &str) -> Result<Vec<Override>> {
    data_lines(text, false)
        .map(|(line, l)| {
            let f: Vec<&str> = l.split('\t').collect();
            match f.as_slice() {
                ["REASSIGN", c, r] if !r.trim().is_empty() => {
                    Ok(Override::Reassign { country: country(origin, line, c)?, region: r.trim().to_string() })
                }
                ["DELETE", c] => Ok(Override::Delete { country: country(origin, line, c)? }),
                _ => Err(CliError::format(
                    origin,
                    line,
                    "expected REASSIGN<TAB>country<TAB>region or DELETE<TAB>country",
                )),
            }
        })
        .collect()
}

pub fn render_overrides(overrides: &[Override]) -> String {
    let mut out = String::new();
    for o in overrides {
        match o {
            Override::Reassign { country, region } => writeln!(out, "REASSIGN\t{country}\t{region}"),
            Override::Delete { country } => writeln!(out, "DELETE\t{country}"),
        }
        .unwrap();
    }
    out
}

/// Leaf legend as comments, then `node_a<TAB>node_b<TAB>height<TAB>new_node`.
pub fn render_dendrogram(d: &Dendrogram) -> String {
    let mut out = String::new();
    for (i, (c, w)) in d.leaves.iter().zip(&d.weights).enumerate() {
        writeln!(out, "# leaf\t{i}\t{c}\t{w}").unwrap();
    }
    for m in &d.tree.merges {
        writeln!(out, "{}\t{}\t{}\t{}", m.node_a, m.node_b, sig17(m.height), m.new_node).unwrap();
    }
    out
}

/// `country<TAB>region`, with [`DELETED`] for dropped countries.
pub fn render_typology(t: &RegionTypology) -> String {
    let mut out = String::new();
    for (c, a) in &t.assignment {
        let r = match a {
            Assignment::Region(r) => r.as_str(),
            Assignment::Deleted => DELETED,
        };
        writeln!(out, "{c}\t{r}").unwrap();
    }
    out
}

pub fn parse_typology(text: &str, origin: &str) -> Result<RegionTypology> {
    let mut assignment = BTreeMap::new();
    for (line, l) in data_lines(text, false) {
        let f = fields(origin, line, l, 2)?;
        let a = match f[1].trim() {
            DELETED => Assignment::Deleted,
            "" => return Err(CliError::format(origin, line, "empty region")),
            r => Assignment::Region(r.to_string()),
        };
        if assignment.insert(country(origin, line, f[0])?, a).is_some() {
            return Err(CliError::format(origin, line, "country listed twice"));
        }
    }
    let mut regions: Vec<String> = assignment
        .values()
        .filter_map(|a| match a {
            Assignment::Region(r) => Some(r.clone()),
            Assignment::Deleted => None,
        })
        .collect();
    regions.sort();
    regions.dedup();
    Ok(RegionTypology { regions, assignment, overrides: Vec::new() })
}

/// `surname<TAB>region`.
pub fn render_labeled(names: &[LabeledName]) -> String {
    let mut out = String::new();
    for n in names {
        writeln!(out, "{}\t{}", n.surname, n.region).unwrap();
    }
    out
}

pub fn parse_labeled(text: &str, origin: &str) -> Result<Vec<LabeledName>> {
    data_lines(text, false)
        .map(|(line, l)| {
            let f = fields(origin, line, l, 2)?;
            if f[1].trim().is_empty() {
                return Err(CliError::format(origin, line, "empty region"));
            }
            Ok(LabeledName { surname: f[0].to_string(), region: f[1].trim().to_string() })
        })
        .collect()
}

pub fn render_vocabulary(v: &Vocabulary) -> String {
    let mut out = String::new();
    for t in v.tokens() {
        writeln!(out, "{t}").unwrap();
    }
    out
}

/// One surname per line; blank lines are ignored.
pub fn parse_population(text: &str) -> Vec<String> {
    text.lines().map(|l| l.trim()).filter(|l| !l.is_empty()).map(String::from).collect()
}

#[derive(Serialize)]
struct ModelOut<'a> {
    version: u32,
    regions: &'a [String],
    vocabulary: &'a [String],
    log_priors: Vec<Box<RawValue>>,
    log_likelihoods: Vec<Box<RawValue>>,
    alpha: Box<RawValue>,
    feature_config: &'a NGramConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelIn {
    version: u32,
    regions: Vec<String>,
    vocabulary: Vec<String>,
    log_priors: Vec<f64>,
    log_likelihoods: Vec<f64>,
    alpha: f64,
    feature_config: NGramConfig,
}

fn raw(x: f64) -> Box<RawValue> {
    RawValue::from_string(sig17(x)).expect("finite numbers are valid JSON")
}

pub fn render_model(m: &TrainedModel) -> String {
    let doc = ModelOut {
        version: MODEL_VERSION,
        regions: m.regions(),
        vocabulary: m.vocabulary().tokens(),
        log_priors: m.log_priors().iter().map(|&x| raw(x)).collect(),
        log_likelihoods: m.log_likelihoods().iter().map(|&x| raw(x)).collect(),
        alpha: raw(m.alpha()),
        feature_config: m.features(),
    };
    let mut s = serde_json::to_string(&doc).expect("model serializes");
    s.push('\n');
    s
}

pub fn parse_model(text: &str, origin: &str) -> Result<TrainedModel> {
    let m: ModelIn = serde_json::from_str(text).map_err(|e| CliError::format(origin, e.line(), e))?;
    if m.version != MODEL_VERSION {
        return Err(CliError::input(origin, format!("unsupported model version {}", m.version)));
    }
    let vocabulary = Vocabulary::from_tokens(m.vocabulary.iter().cloned()).context(origin)?;
    if vocabulary.tokens() != m.vocabulary.as_slice() {
        return Err(CliError::input(origin, "vocabulary must be sorted and free of duplicates"));
    }
    TrainedModel::from_parts(m.regions, vocabulary, m.log_priors, m.log_likelihoods, m.alpha, m.feature_config)
        .context(origin)
}

#[derive(Serialize, Deserialize)]
pub struct EvalReportJson {
    pub regions: Vec<String>,
    /// `confusion[guessed][actual]`
    pub confusion: Vec<Vec<u64>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub support: Vec<u64>,
    pub accuracy: f64,
    pub total: u64,
}

pub fn render_eval_json(r: &EvalReport) -> String {
    let doc = EvalReportJson {
        regions: r.regions.clone(),
        confusion: r.confusion.clone(),
        precision: r.precision.clone(),
        recall: r.recall.clone(),
        support: r.support.clone(),
        accuracy: r.accuracy(),
        total: r.total(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

/// Confusion counts from an evaluation report JSON.
pub fn parse_eval_json(text: &str, origin: &str) -> Result<(Vec<String>, Vec<Vec<u64>>)> {
    let r: EvalReportJson = serde_json::from_str(text).map_err(|e| CliError::format(origin, e.line(), e))?;
    Ok((r.regions, r.confusion))
}

const CORNER: &str = "guessed\\actual";

fn csv_string(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

fn csv_records(text: &str, origin: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CliError::format(origin, line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec.iter().map(String::from).collect()));
    }
    Ok(out)
}

/// Line number and cells of one matrix row.
type LabeledRow = (usize, Vec<String>);

/// Square matrix with region labels on the header row and first column.
fn parse_labeled_matrix(text: &str, origin: &str) -> Result<(Vec<String>, Vec<LabeledRow>)> {
    let mut records = csv_records(text, origin)?.into_iter();
    let (hline, header) = records.next().ok_or_else(|| CliError::input(origin, "empty matrix file"))?;
    let regions: Vec<String> = header.into_iter().skip(1).collect();
    if regions.is_empty() {
        return Err(CliError::format(origin, hline, "header lists no regions"));
    }
    let rows: Vec<(usize, Vec<String>)> = records.collect();
    if rows.len() != regions.len() {
        return Err(CliError::input(origin, format!("{} regions but {} rows", regions.len(), rows.len())));
    }
    for (i, (line, row)) in rows.iter().enumerate() {
        if row.len() != regions.len() + 1 {
            return Err(CliError::format(origin, *line, format!("expected {} fields", regions.len() + 1)));
        }
        if row[0] != regions[i] {
            return Err(CliError::format(origin, *line, format!("row label {:?} should be {:?}", row[0], regions[i])));
        }
    }
    Ok((regions, rows))
}

/// Rows are guessed regions, columns actual regions.
pub fn render_confusion_csv(regions: &[String], counts: &[Vec<u64>]) -> String {
    let header = std::iter::once(CORNER.to_string()).chain(regions.iter().cloned()).collect();
    let rows = regions
        .iter()
        .zip(counts)
        .map(|(r, row)| std::iter::once(r.clone()).chain(row.iter().map(u64::to_string)).collect());
    csv_string(std::iter::once(header).chain(rows))
}

pub fn parse_confusion_csv(text: &str, origin: &str) -> Result<(Vec<String>, Vec<Vec<u64>>)> {
    let (regions, rows) = parse_labeled_matrix(text, origin)?;
    let counts = rows
        .iter()
        .map(|(line, row)| {
            row[1..]
                .iter()
                .map(|c| {
                    c.parse::<u64>().map_err(|_| {
                        CliError::format(origin, *line, format!("{c:?} is not a nonnegative integer count"))
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((regions, counts))
}

/// Row-stochastic `P(actual | guessed)` behind a `#` provenance header.
pub fn render_operator(op: &CorrectionOperator, source: &str) -> String {
    let priors = op
        .target_priors
        .as_ref()
        .map_or_else(|| "none".to_string(), |p| p.iter().map(|x| sig17(*x)).collect::<Vec<_>>().join(" "));
    let mut out = format!("# correction operator P(actual | guessed)\n# source: {source}\n# priors: {priors}\n");
    let header = std::iter::once(CORNER.to_string()).chain(op.regions.iter().cloned()).collect();
    let rows = op
        .regions
        .iter()
        .zip(&op.p)
        .map(|(r, row)| std::iter::once(r.clone()).chain(row.iter().map(|x| sig17(*x))).collect());
    out.push_str(&csv_string(std::iter::once(header).chain(rows)));
    out
}

pub fn parse_operator(text: &str, origin: &str) -> Result<CorrectionOperator> {
    let priors = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# priors:"))
        .map(str::trim)
        .filter(|p| *p != "none")
        .map(|p| p.split_whitespace().map(|x| parse_f64(origin, 0, x, "prior")).collect::<Result<Vec<f64>>>())
        .transpose()?;
    let (regions, rows) = parse_labeled_matrix(text, origin)?;
    let p = rows
        .iter()
        .map(|(line, row)| row[1..].iter().map(|x| parse_f64(origin, *line, x, "probability")).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    if priors.as_ref().is_some_and(|v| v.len() != regions.len()) {
        return Err(CliError::input(origin, "priors do not match the region count"));
    }
    CorrectionOperator::from_rows(regions, p, priors).context(origin)
}

/// One row per dataset and measure, region shares and counts in columns.
pub fn render_distributions(regions: &[String], dists: &[OriginDistribution]) -> String {
    let header = ["dataset", "measure"].iter().map(|s| s.to_string()).chain(regions.iter().cloned()).collect();
    let mut rows: Vec<Vec<String>> = vec![header];
    for d in dists {
        let measures: [(&str, &[f64]); 4] = [
            ("raw_count", &d.raw_counts),
            ("corrected_count", &d.counts),
            ("raw_share", &d.raw_proportions),
            ("corrected_share", &d.proportions),
        ];
        for (m, v) in measures {
            rows.push([d.dataset_name.clone(), m.to_string()].into_iter().chain(v.iter().map(|x| sig17(*x))).collect());
        }
    }
    csv_string(rows)
}

/// Ratios with datasets and regions in clustered order; empty where the
/// reference share is zero.
pub fn render_ratios(order: &ProfileOrdering, profiles: &[RepresentationProfile]) -> String {
    let by_name: BTreeMap<&str, &RepresentationProfile> =
        profiles.iter().map(|p| (p.dataset_name.as_str(), p)).collect();
    let header = std::iter::once("dataset".to_string()).chain(order.regions.iter().cloned()).collect();
    let mut rows: Vec<Vec<String>> = vec![header];
    for name in &order.datasets {
        let p = by_name[name.as_str()];
        let cells = order.regions.iter().map(|r| {
            let i = p.regions.iter().position(|x| x == r).expect("shared regions");
            p.ratios[i].map_or_else(String::new, sig17)
        });
        rows.push(std::iter::once(name.clone()).chain(cells).collect());
    }
    csv_string(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.82), "0.82");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(1e-6), "1e-6");
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(2.5e-5), "2.5e-5");
        assert_eq!(sig6(0.000123456), "0.000123456");
        assert_eq!(sig6(1234567.0), "1.23457e6");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, -2.718281828459045e-7, 1e-300, 6.02214076e23] {
            assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn corpus_rows_report_line_numbers() {
        let rows = parse_corpus("li\tCN\t3\n\nsmith\tUS\t9\n", "c.tsv", false).unwrap();
        assert_eq!(rows[1].line, 3);
        let err = parse_corpus("li\tCN\t3\nsmith\tUS\n", "c.tsv", false).unwrap_err();
        assert_eq!(err.to_string(), "c.tsv:2: expected 3 tab-separated fields, found 2");
        assert!(parse_corpus("li\tCN\t0\n", "c.tsv", false).is_err());
        assert!(parse_corpus("li\tCN\t-2\n", "c.tsv", false).is_err());
        assert_eq!(parse_corpus("surname\tcountry\tcount\nli\tCN\t3\n", "c", true).unwrap().len(), 1);
    }

    #[test]
    fn overrides_round_trip() {
        let text = "REASSIGN\tPH\tAsian\nDELETE\tPG\n";
        let o = parse_overrides(text, "o").unwrap();
        assert_eq!(render_overrides(&o), text);
        assert!(parse_overrides("MOVE\tPH\tAsian\n", "o").is_err());
    }

    #[test]
    fn confusion_round_trip() {
        let regions = vec!["A".to_string(), "B".to_string()];
        let counts = vec![vec![3, 1], vec![0, 7]];
        let text = render_confusion_csv(&regions, &counts);
        assert_eq!(parse_confusion_csv(&text, "c").unwrap(), (regions, counts));
        assert!(parse_confusion_csv("x,A,B\nA,1,2\nC,3,4\n", "c").is_err());
        assert!(parse_confusion_csv("x,A,B\nA,1,2\nB,3,-4\n", "c").is_err());
    }

    #[test]
    fn operator_round_trip() {
        let regions = vec!["A".to_string(), "B".to_string()];
        let op = CorrectionOperator::from_rows(regions, vec![vec![0.75, 0.25], vec![0.1, 0.9]], Some(vec![0.3, 0.7]))
            .unwrap();
        let back = parse_operator(&render_operator(&op, "conf.csv"), "op").unwrap();
        assert_eq!(back.p, op.p);
        assert_eq!(back.target_priors, op.target_priors);
    }

    #[test]
    fn typology_round_trip() {
        let text = "AM\t-\nCN\tAsian\nJP\tAsian\n";
        let t = parse_typology(text, "t").unwrap();
        assert_eq!(t.regions, ["Asian"]);
        assert_eq!(render_typology(&t), text);
    }
}
