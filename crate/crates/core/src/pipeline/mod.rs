//! Config-driven orchestration: each command reads the artifacts of the
//! previous one from the output directory and writes its own.
//!
//! ```text
//! synth → ingest → measures → trends → regress → match → report
//! ```

pub mod catalog;
mod config;
pub mod io;

pub use config::{Analysis, Inputs, Overrides, RunConfig, TaxonomyPaths, Windows, SCHEMA_VERSION};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glm::{build_design, fit_logistic, fit_negbin, fit_ols, Family, RegressionRow};
use crate::ingest::{self, AssignedEvent, EventKind, IngestError};
use crate::measures::{
    self, build_measure_table, correlation_matrix, CrimeCategory, CrimeTaxonomy, EventCategory, EventTaxonomy, MeasureError,
};
use crate::psm::{mean_abs_smd, run_experiment, OutcomeKind};
use crate::synth::{self, SynthError};
use crate::table::Table;
use crate::trends::{self, classify_all, TrendClass, TrendResult, TrendSummary};
use catalog::{Experiment, TREND_MEASURES};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("input file not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{} not found; run `vibrancy {command}` first", artifact.display())]
    MissingArtifact { artifact: PathBuf, command: &'static str },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }

    /// 2 for configuration, file-system and missing-file problems, 1 for
    /// anything wrong inside the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Io { .. }
            | PipelineError::MissingInput(_)
            | PipelineError::MissingArtifact { .. }
            | PipelineError::Ingest(IngestError::Io { .. })
            | PipelineError::Synth(SynthError::Io { .. }) => 2,
            _ => 1,
        }
    }
}

pub const ASSIGNED: &str = "assigned.csv";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const MEASURES: &str = "measures.csv";
pub const SERIES: &str = "series.csv";
pub const CITY_SERIES: &str = "city_series.csv";
pub const MONTHLY_SERIES: &str = "monthly_series.csv";
pub const CORRELATIONS: &str = "correlations.csv";
pub const MEASURES_REPORT: &str = "measures_report.json";
pub const TRENDS: &str = "trends.csv";
pub const TREND_SUMMARY: &str = "trend_summary.csv";
pub const REGRESSION_REPORT: &str = "regression_report.csv";
pub const REGRESSION_DROPPED: &str = "regression_dropped.csv";
pub const EXPERIMENTS: &str = "experiments.csv";
pub const BALANCE_DIR: &str = "balance";
pub const REPORT_DIR: &str = "report";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Ingest,
    Measures,
    Trends,
    Regress,
    Match,
    Report,
    All,
}

/// Runs one command; returns one progress line per completed step.
pub fn run(cfg: &RunConfig, command: Command) -> Result<Vec<String>, PipelineError> {
    let p = Pipeline { cfg };
    let one = |r: Result<String, PipelineError>| r.map(|m| vec![m]);
    match command {
        Command::Synth => one(p.synth()),
        Command::Ingest => one(p.ingest()),
        Command::Measures => one(p.measures()),
        Command::Trends => one(p.trends()),
        Command::Regress => one(p.regress()),
        Command::Match => one(p.matching()),
        Command::Report => one(p.report()),
        Command::All => {
            let mut log = Vec::new();
            if cfg.is_synthetic() {
                log.push(p.synth()?);
            }
            log.push(p.ingest()?);
            log.push(p.measures()?);
            log.push(p.trends()?);
            log.push(p.regress()?);
            log.push(p.matching()?);
            log.push(p.report()?);
            Ok(log)
        }
    }
}

struct Pipeline<'a> {
    cfg: &'a RunConfig,
}

#[derive(Debug, Serialize)]
struct KindReport {
    rows: usize,
    skipped_out_of_window: usize,
    assigned: usize,
    unassigned: usize,
}

#[derive(Debug, Serialize)]
struct IngestReport {
    blockgroups: usize,
    profiles: usize,
    permits: KindReport,
    crimes: KindReport,
}

#[derive(Debug, Serialize)]
struct MeasuresReport {
    blockgroups: usize,
    profiles_missing: usize,
    unassigned_events: usize,
    unassigned_crimes: usize,
    /// Spontaneous proportion undefined; excluded from spontaneity analyses.
    without_events: usize,
    /// Log crime undefined; excluded from log-outcome models.
    without_crimes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SeriesRow {
    blockgroup_id: String,
    year: i32,
    events: u64,
    spontaneous: u64,
    regular: u64,
    crime_total: u64,
    crime_violent: u64,
    crime_nonviolent: u64,
    crime_vice: u64,
    crime_other: u64,
}

#[derive(Debug, Serialize)]
struct TrendSummaryRow {
    measure: String,
    positive: usize,
    negative: usize,
    none: usize,
    unclassified: usize,
}

#[derive(Debug, Serialize)]
struct DroppedRowOut<'a> {
    model: &'a str,
    blockgroup_id: &'a str,
    reason: &'a str,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub treatment: String,
    pub outcome: String,
    pub outcome_kind: String,
    pub status: String,
    pub n_units: Option<usize>,
    pub n_treated: Option<usize>,
    pub n_control: Option<usize>,
    pub mode: Option<String>,
    pub n_pairs: Option<usize>,
    pub dropped_treated: Option<usize>,
    pub mean_diff: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub t_stat: Option<f64>,
    pub t_p: Option<f64>,
    pub wilcoxon_p: Option<f64>,
    pub wilcoxon_exact: Option<bool>,
    pub naive_diff: Option<f64>,
    pub discordant_b: Option<usize>,
    pub discordant_c: Option<usize>,
    pub odds_ratio: Option<f64>,
    pub or_ci_low: Option<f64>,
    pub or_ci_high: Option<f64>,
    pub mean_abs_smd_before: Option<f64>,
    pub mean_abs_smd_after: Option<f64>,
}

fn kind_str(k: OutcomeKind) -> &'static str {
    match k {
        OutcomeKind::Continuous => "continuous",
        OutcomeKind::Binary => "binary",
    }
}

impl Pipeline<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn require(&self, name: &str, command: &'static str) -> Result<PathBuf, PipelineError> {
        let p = self.out(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(PipelineError::MissingArtifact { artifact: p, command })
        }
    }

    /// Validates config and inputs; a missing synthetic bundle points at
    /// `synth`.
    fn inputs(&self) -> Result<Inputs, PipelineError> {
        match self.cfg.validate(true) {
            Err(PipelineError::MissingInput(p)) if self.cfg.is_synthetic() => Err(PipelineError::MissingArtifact { artifact: p, command: "synth" }),
            r => r.map(|_| self.cfg.inputs()),
        }
    }

    fn taxonomies(&self) -> Result<(EventTaxonomy, CrimeTaxonomy), PipelineError> {
        let open = |p: &PathBuf| std::fs::File::open(p).map_err(|e| PipelineError::io(p, e));
        let events = match &self.cfg.taxonomy.event_types {
            Some(p) => EventTaxonomy::from_csv(open(p)?)?,
            None => EventTaxonomy::standard().clone(),
        };
        let crimes = match &self.cfg.taxonomy.crime_types {
            Some(p) => CrimeTaxonomy::from_csv(open(p)?)?,
            None => CrimeTaxonomy::standard().clone(),
        };
        Ok((events, crimes))
    }

    fn synth(&self) -> Result<String, PipelineError> {
        self.cfg.validate(false)?;
        let cfg = self.cfg.synth_config();
        let dir = self.cfg.input_dir();
        let truth = synth::generate_city(&cfg, &dir)?;
        Ok(format!("synth: {} block groups (seed {}) written to {}", truth.units.len(), cfg.seed, dir.display()))
    }

    fn ingest(&self) -> Result<String, PipelineError> {
        let inputs = self.inputs()?;
        let w = &self.cfg.windows;
        let bgs = ingest::parse_blockgroups(&inputs.blockgroups)?;
        let permits = ingest::parse_permits(&inputs.permits, w.permits())?;
        let crimes = ingest::parse_crimes(&inputs.crimes, w.crimes())?;
        let profiles = ingest::parse_profiles(&inputs.acs, &inputs.landuse)?;

        let mut assigned = ingest::assign(&permits.records, &bgs);
        let n_permits = assigned.len();
        assigned.extend(ingest::assign(&crimes.records, &bgs));
        io::write_rows(&self.out(ASSIGNED), &assigned)?;

        let kind = |parsed: &ingest::Parsed<ingest::PointEvent>, a: &[AssignedEvent]| {
            let hit = a.iter().filter(|e| e.blockgroup_id.is_some()).count();
            KindReport { rows: parsed.rows, skipped_out_of_window: parsed.skipped_out_of_window, assigned: hit, unassigned: a.len() - hit }
        };
        let report = IngestReport {
            blockgroups: bgs.len(),
            profiles: profiles.len(),
            permits: kind(&permits, &assigned[..n_permits]),
            crimes: kind(&crimes, &assigned[n_permits..]),
        };
        io::write_json(&self.out(INGEST_REPORT), &report)?;
        Ok(format!(
            "ingest: {} permits ({} unassigned), {} crimes ({} unassigned), {} block groups",
            n_permits,
            report.permits.unassigned,
            assigned.len() - n_permits,
            report.crimes.unassigned,
            bgs.len()
        ))
    }

    fn measures(&self) -> Result<String, PipelineError> {
        let assigned_path = self.require(ASSIGNED, "ingest")?;
        let inputs = self.inputs()?;
        let assigned: Vec<AssignedEvent> = io::read_rows(&assigned_path)?;
        let mut ids: Vec<String> = ingest::parse_blockgroups(&inputs.blockgroups)?.into_iter().map(|b| b.id).collect();
        ids.sort();
        let profiles = ingest::parse_profiles(&inputs.acs, &inputs.landuse)?;
        let (et, ct) = self.taxonomies()?;
        let years = self.cfg.analysis.years();

        let (permits, crimes): (Vec<AssignedEvent>, Vec<AssignedEvent>) = assigned.into_iter().partition(|e| e.kind == EventKind::Permit);
        let mt = build_measure_table(&ids, &permits, &crimes, &et, &ct, years)?;
        let table = mt.to_table(&profiles);
        io::write_table(&self.out(MEASURES), &table)?;

        let mut series = Vec::new();
        for r in &mt.rows {
            for y in years.years() {
                let cat = |c: CrimeCategory| r.yearly_crimes_by_category[&c][&y];
                series.push(SeriesRow {
                    blockgroup_id: r.blockgroup_id.clone(),
                    year: y,
                    events: r.yearly_events[&y],
                    spontaneous: r.yearly_spontaneous[&y],
                    regular: r.yearly_events[&y] - r.yearly_spontaneous[&y],
                    crime_total: r.yearly_crimes[&y],
                    crime_violent: cat(CrimeCategory::Violent),
                    crime_nonviolent: cat(CrimeCategory::NonViolent),
                    crime_vice: cat(CrimeCategory::Vice),
                    crime_other: cat(CrimeCategory::Other),
                });
            }
        }
        io::write_rows(&self.out(SERIES), &series)?;

        let spont = |e: &AssignedEvent| et.classify(&e.raw_type).is_ok_and(|c| c == EventCategory::Spontaneous);
        let ev = measures::yearly_series(&permits, years, |_| true);
        let sp = measures::yearly_series(&permits, years, spont);
        let cr = measures::yearly_series(&crimes, years, |_| true);
        let by_cat: Vec<BTreeMap<i32, u64>> = CrimeCategory::ALL
            .iter()
            .map(|&c| measures::yearly_series(&crimes, years, |e| ct.classify(&e.raw_type).is_ok_and(|k| k == c)))
            .collect();
        let mut header = vec!["year", "events", "spontaneous", "regular", "crime_total"];
        let cat_cols: Vec<String> = CrimeCategory::ALL.iter().map(|c| measures::crime_column(Some(*c))).collect();
        header.extend(cat_cols.iter().map(String::as_str));
        let rows = years.years().map(|y| {
            let mut r = vec![y.to_string(), ev[&y].to_string(), sp[&y].to_string(), (ev[&y] - sp[&y]).to_string(), cr[&y].to_string()];
            r.extend(by_cat.iter().map(|m| m[&y].to_string()));
            r
        });
        io::write_records(&self.out(CITY_SERIES), &header, rows)?;

        let mev = measures::monthly_series(&permits, years, |_| true);
        let msp = measures::monthly_series(&permits, years, spont);
        let mcr = measures::monthly_series(&crimes, years, |_| true);
        let rows = mev.keys().map(|k| vec![k.0.to_string(), k.1.to_string(), mev[k].to_string(), msp[k].to_string(), mcr[k].to_string()]);
        io::write_records(&self.out(MONTHLY_SERIES), &["year", "month", "events", "spontaneous", "crime_total"], rows)?;

        let corr_cols: Vec<String> = [
            measures::PERMITS,
            measures::SPONTANEOUS,
            "crime_total",
            "crime_violent",
            "crime_nonviolent",
            "crime_vice",
            "population",
            "mean_income",
            "poverty_index",
            "prop_white",
            "prop_black",
            "prop_hispanic",
            "prop_asian",
            "total_area",
            "prop_commercial",
            "prop_residential",
            "prop_vacant",
            "prop_transportation",
            "prop_industrial",
            "prop_park",
            "prop_civic",
        ]
        .iter()
        .filter(|c| table.has_column(c))
        .map(|c| c.to_string())
        .collect();
        let corr = correlation_matrix(&table, &corr_cols);
        let mut header = vec!["measure"];
        header.extend(corr.names.iter().map(String::as_str));
        let rows = corr.names.iter().zip(&corr.values).map(|(n, vals)| {
            let mut r = vec![n.clone()];
            r.extend(vals.iter().map(|v| io::fmt_opt(*v)));
            r
        });
        io::write_records(&self.out(CORRELATIONS), &header, rows)?;

        let have: std::collections::HashSet<&str> = profiles.iter().map(|p| p.blockgroup_id.as_str()).collect();
        let report = MeasuresReport {
            blockgroups: ids.len(),
            profiles_missing: ids.iter().filter(|id| !have.contains(id.as_str())).count(),
            unassigned_events: mt.unassigned_events,
            unassigned_crimes: mt.unassigned_crimes,
            without_events: mt.rows.iter().filter(|r| r.n_events == 0).count(),
            without_crimes: mt.rows.iter().filter(|r| r.crime_total == 0).count(),
        };
        io::write_json(&self.out(MEASURES_REPORT), &report)?;
        Ok(format!(
            "measures: {} block groups, {} without events, {} without crimes",
            report.blockgroups, report.without_events, report.without_crimes
        ))
    }

    fn trends(&self) -> Result<String, PipelineError> {
        let series: Vec<SeriesRow> = io::read_rows(&self.require(SERIES, "measures")?)?;
        let mut by_measure: BTreeMap<&str, BTreeMap<String, BTreeMap<i32, f64>>> = BTreeMap::new();
        for r in &series {
            let mut put = |m: &'static str, v: f64| {
                by_measure.entry(m).or_default().entry(r.blockgroup_id.clone()).or_default().insert(r.year, v);
            };
            put(measures::PERMITS, r.events as f64);
            put(measures::CRIME_TOTAL, r.crime_total as f64);
            if r.events > 0 {
                put(measures::SPONTANEOUS, r.spontaneous as f64 / r.events as f64);
            } else {
                by_measure.entry(measures::SPONTANEOUS).or_default().entry(r.blockgroup_id.clone()).or_default();
            }
        }
        let alpha = self.cfg.analysis.alpha;
        let fitted: Vec<(Vec<TrendResult>, TrendSummary)> = TREND_MEASURES
            .par_iter()
            .map(|m| classify_all(m, by_measure.get(m).unwrap_or(&BTreeMap::new()), alpha))
            .collect();
        let rows: Vec<&TrendResult> = fitted.iter().flat_map(|f| &f.0).collect();
        io::write_rows(&self.out(TRENDS), &rows)?;
        let summary: Vec<TrendSummaryRow> =
            TREND_MEASURES
            .iter()
            .zip(&fitted)
            .map(|(m, (_, s))| TrendSummaryRow { measure: m.to_string(), positive: s.positive, negative: s.negative, none: s.none, unclassified: s.unclassified })
            .collect();
        io::write_rows(&self.out(TREND_SUMMARY), &summary)?;
        let line: Vec<String> = summary
            .iter()
            .map(|s| format!("{} +{}/-{}/{} ({} unclassified)", s.measure, s.positive, s.negative, s.none, s.unclassified))
            .collect();
        Ok(format!("trends: {}", line.join("; ")))
    }

    /// Measures joined with trend class, slope and indicator columns.
    fn analysis_table(&self) -> Result<Table, PipelineError> {
        let mut table = io::read_table(&self.require(MEASURES, "measures")?)?;
        let trend_rows: Vec<TrendResult> = io::read_rows(&self.require(TRENDS, "trends")?)?;
        add_trend_columns(&mut table, &trend_rows);
        Ok(table)
    }

    fn regress(&self) -> Result<String, PipelineError> {
        let table = self.analysis_table()?;
        let models = catalog::select(catalog::regression_models(), &self.cfg.analysis.models, |m| &m.name).map_err(PipelineError::Config)?;
        let results: Vec<(Vec<RegressionRow>, Vec<(String, String)>)> = models
            .par_iter()
            .map(|spec| {
                let design = match build_design::<f64>(&table, spec) {
                    Ok(d) => d,
                    Err(e) => return (vec![RegressionRow::failed(&spec.name, spec.family.as_str(), &format!("failed: {e}"))], Vec::new()),
                };
                let dropped = design.dropped.iter().map(|d| (d.id.clone(), d.reason.clone())).collect();
                let fit = match spec.family {
                    Family::Ols => fit_ols(&design.x, &design.y),
                    Family::NegativeBinomial => fit_negbin(&design.x, &design.y),
                    Family::Logistic => fit_logistic(&design.x, &design.y),
                    Family::Poisson => crate::glm::fit_poisson(&design.x, &design.y),
                };
                let positives = (spec.family == Family::Logistic).then(|| design.y.iter().filter(|&&v| v == 1.0).count());
                match fit {
                    Ok(f) => (RegressionRow::from_fit(&spec.name, &f.with_names(design.names.clone()), positives), dropped),
                    Err(e) => (vec![RegressionRow::failed(&spec.name, spec.family.as_str(), &format!("failed: {e}"))], dropped),
                }
            })
            .collect();
        let rows: Vec<&RegressionRow> = results.iter().flat_map(|r| &r.0).collect();
        io::write_rows(&self.out(REGRESSION_REPORT), &rows)?;
        let dropped: Vec<DroppedRowOut> = models
            .iter()
            .zip(&results)
            .flat_map(|(m, r)| r.1.iter().map(move |(id, reason)| DroppedRowOut { model: &m.name, blockgroup_id: id, reason }))
            .collect();
        io::write_rows(&self.out(REGRESSION_DROPPED), &dropped)?;
        let failed = rows.iter().filter(|r| r.term == "(model)" && r.status != "ok").count();
        Ok(format!("regress: {} models, {} failed", models.len(), failed))
    }

    fn matching(&self) -> Result<String, PipelineError> {
        let table = self.analysis_table()?;
        let exps = catalog::select(catalog::experiments(), &self.cfg.analysis.experiments, |e| &e.name).map_err(PipelineError::Config)?;
        let opts = self.cfg.analysis.match_options();
        let covariates = crate::glm::standard_covariates();
        let results: Vec<(ExperimentRow, Option<Vec<crate::psm::BalanceRow>>)> = exps
            .par_iter()
            .map(|x| experiment_row(&table, x, &covariates, &opts))
            .collect();

        let balance_dir = self.out(BALANCE_DIR);
        if balance_dir.is_dir() {
            std::fs::remove_dir_all(&balance_dir).map_err(|e| PipelineError::io(&balance_dir, e))?;
        }
        for (row, bal) in &results {
            if let Some(b) = bal {
                io::write_rows(&balance_dir.join(format!("{}.csv", row.experiment)), b)?;
            }
        }
        let rows: Vec<&ExperimentRow> = results.iter().map(|r| &r.0).collect();
        io::write_rows(&self.out(EXPERIMENTS), &rows)?;
        let failed = rows.iter().filter(|r| r.status != "ok").count();
        Ok(format!("match: {} experiments, {} failed", rows.len(), failed))
    }

    fn report(&self) -> Result<String, PipelineError> {
        let table = self.analysis_table()?;
        for (name, cmd) in [(REGRESSION_REPORT, "regress"), (EXPERIMENTS, "match"), (CITY_SERIES, "measures")] {
            self.require(name, cmd)?;
        }
        let inputs = self.inputs()?;
        let dir = self.out(REPORT_DIR);
        if dir.is_dir() {
            std::fs::remove_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        for name in [MEASURES, SERIES, MONTHLY_SERIES, CORRELATIONS, TRENDS, TREND_SUMMARY, REGRESSION_REPORT, REGRESSION_DROPPED, EXPERIMENTS] {
            let src = self.out(name);
            if src.is_file() {
                std::fs::copy(&src, dir.join(name)).map_err(|e| PipelineError::io(&src, e))?;
            }
        }
        let src = self.out(CITY_SERIES);
        std::fs::copy(&src, dir.join("yearly_series.csv")).map_err(|e| PipelineError::io(&src, e))?;
        let bal = self.out(BALANCE_DIR);
        if bal.is_dir() {
            let mut names: Vec<PathBuf> = std::fs::read_dir(&bal)
                .map_err(|e| PipelineError::io(&bal, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            names.sort();
            for p in names {
                let to = dir.join(BALANCE_DIR).join(p.file_name().expect("file entry"));
                std::fs::create_dir_all(to.parent().expect("has parent")).map_err(|e| PipelineError::io(&to, e))?;
                std::fs::copy(&p, &to).map_err(|e| PipelineError::io(&p, e))?;
            }
        }

        let text = std::fs::read_to_string(&inputs.blockgroups).map_err(|e| PipelineError::io(&inputs.blockgroups, e))?;
        let mut doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", inputs.blockgroups.display())))?;
        let names: Vec<&str> = table.column_names().collect();
        let mut n_features = 0;
        if let Some(features) = doc.get_mut("features").and_then(|f| f.as_array_mut()) {
            for f in features {
                n_features += 1;
                let id = match f.pointer("/properties/id") {
                    Some(serde_json::Value::String(s)) => s.clone(),
                    Some(serde_json::Value::Number(n)) => n.to_string(),
                    _ => continue,
                };
                let Some(props) = f.get_mut("properties").and_then(|p| p.as_object_mut()) else { continue };
                for n in &names {
                    let v = table.get(&id, n).and_then(serde_json::Number::from_f64).map_or(serde_json::Value::Null, serde_json::Value::Number);
                    props.insert(n.to_string(), v);
                }
            }
        }
        io::write_json(&dir.join("blockgroups.geojson"), &doc)?;
        Ok(format!("report: {} features written to {}", n_features, dir.display()))
    }
}

/// Adds `<m>_trend_class`, `_slope`, `_pos` and `_neg` columns; units
/// without a classified trend stay undefined.
pub fn add_trend_columns(table: &mut Table, rows: &[TrendResult]) {
    let mut grouped: BTreeMap<&str, Vec<&TrendResult>> = BTreeMap::new();
    for r in rows {
        grouped.entry(r.measure.as_str()).or_default().push(r);
    }
    for (m, rs) in grouped {
        let map = |f: &dyn Fn(&TrendResult) -> f64| rs.iter().map(|r| (r.blockgroup_id.clone(), f(r))).collect::<BTreeMap<String, f64>>();
        table.insert_map(trends::class_column(m), &map(&|r| r.classification.code()));
        table.insert_map(trends::slope_column(m), &map(&|r| r.slope));
        table.insert_map(trends::positive_column(m), &map(&|r| f64::from(r.classification == TrendClass::Positive)));
        table.insert_map(trends::negative_column(m), &map(&|r| f64::from(r.classification == TrendClass::Negative)));
    }
}

pub fn experiment_row(
    table: &Table,
    x: &Experiment,
    covariates: &[crate::glm::Term],
    opts: &crate::psm::MatchOptions,
) -> (ExperimentRow, Option<Vec<crate::psm::BalanceRow>>) {
    let base = ExperimentRow {
        experiment: x.name.clone(),
        treatment: x.rule.label(),
        outcome: x.outcome.column.clone(),
        outcome_kind: kind_str(x.outcome.kind).to_string(),
        ..ExperimentRow::default()
    };
    match run_experiment(table, &x.rule, &x.outcome, covariates, opts) {
        Err(e) => (ExperimentRow { status: format!("failed: {e}"), ..base }, None),
        Ok(m) => {
            let inf = &m.inference;
            let or = m.odds_ratio.as_ref();
            let before: Vec<Option<f64>> = m.balance.iter().map(|b| b.smd_before).collect();
            let after: Vec<Option<f64>> = m.balance.iter().map(|b| b.smd_after).collect();
            let row = ExperimentRow {
                status: "ok".into(),
                n_units: Some(m.ids.len()),
                n_treated: Some(m.n_treated()),
                n_control: Some(m.n_control()),
                mode: Some(m.matching.mode.as_str().to_string()),
                n_pairs: Some(inf.n_pairs),
                dropped_treated: Some(m.matching.dropped_treated.len()),
                mean_diff: Some(inf.mean_diff),
                ci_low: Some(inf.ci_low),
                ci_high: Some(inf.ci_high),
                t_stat: Some(inf.t_stat),
                t_p: Some(inf.t_p),
                wilcoxon_p: Some(inf.wilcoxon_p),
                wilcoxon_exact: Some(inf.wilcoxon_exact),
                naive_diff: Some(m.naive_diff),
                discordant_b: or.map(|o| o.b),
                discordant_c: or.map(|o| o.c),
                odds_ratio: or.and_then(|o| o.odds_ratio),
                or_ci_low: or.and_then(|o| o.ci_low),
                or_ci_high: or.and_then(|o| o.ci_high),
                mean_abs_smd_before: mean_abs_smd(&before),
                mean_abs_smd_after: mean_abs_smd(&after),
                ..base
            };
            (row, Some(m.balance))
        }
    }
}
