//! Vibrancy and crime measures per block group, their yearly and monthly
//! series, and cross-measure correlations.

mod taxonomy;

pub use taxonomy::{classify_crime, classify_event, CrimeCategory, CrimeTaxonomy, EventCategory, EventGroup, EventTaxonomy};

use std::collections::{BTreeMap, HashMap};

use chrono::Datelike;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{AssignedEvent, NeighborhoodProfile};
use crate::table::Table;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("unknown event type `{0}`")]
    UnknownEventType(String),
    #[error("unknown crime type `{0}`")]
    UnknownCrimeType(String),
    #[error("taxonomy config: {0}")]
    Config(String),
}

/// Measure names shared by tables, trends and experiments.
pub const PERMITS: &str = "n_events";
pub const SPONTANEOUS: &str = "spontaneous_proportion";
pub const CRIME_TOTAL: &str = "crime_total";

pub fn crime_column(category: Option<CrimeCategory>) -> String {
    match category {
        None => CRIME_TOTAL.to_string(),
        Some(c) => format!("crime_{}", c.as_str()),
    }
}

pub fn log_crime_column(category: Option<CrimeCategory>) -> String {
    format!("log_{}", crime_column(category))
}

/// Calendar years covered by the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl Default for YearRange {
    fn default() -> Self {
        Self { first: 2006, last: 2015 }
    }
}

impl YearRange {
    pub fn years(self) -> impl Iterator<Item = i32> {
        self.first..=self.last
    }

    pub fn contains(self, y: i32) -> bool {
        y >= self.first && y <= self.last
    }

    fn zeros<K: Ord>(self, key: impl Fn(i32) -> K) -> BTreeMap<K, u64> {
        self.years().map(|y| (key(y), 0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureRow {
    pub blockgroup_id: String,
    pub n_events: u64,
    pub n_spontaneous: u64,
    pub n_regular: u64,
    pub crime_total: u64,
    pub crime_violent: u64,
    pub crime_nonviolent: u64,
    pub crime_vice: u64,
    #[serde(skip)]
    pub yearly_events: BTreeMap<i32, u64>,
    #[serde(skip)]
    pub yearly_spontaneous: BTreeMap<i32, u64>,
    #[serde(skip)]
    pub yearly_crimes: BTreeMap<i32, u64>,
    #[serde(skip)]
    pub yearly_crimes_by_category: BTreeMap<CrimeCategory, BTreeMap<i32, u64>>,
    #[serde(skip)]
    pub monthly_events: BTreeMap<(i32, u32), u64>,
    #[serde(skip)]
    pub monthly_spontaneous: BTreeMap<(i32, u32), u64>,
}

impl MeasureRow {
    pub(crate) fn empty(id: &str, years: YearRange) -> Self {
        Self {
            blockgroup_id: id.to_string(),
            n_events: 0,
            n_spontaneous: 0,
            n_regular: 0,
            crime_total: 0,
            crime_violent: 0,
            crime_nonviolent: 0,
            crime_vice: 0,
            yearly_events: years.zeros(|y| y),
            yearly_spontaneous: years.zeros(|y| y),
            yearly_crimes: years.zeros(|y| y),
            yearly_crimes_by_category: CrimeCategory::ALL.iter().map(|&c| (c, years.zeros(|y| y))).collect(),
            monthly_events: BTreeMap::new(),
            monthly_spontaneous: BTreeMap::new(),
        }
    }

    /// Spontaneous share of all events; `None` without events.
    pub fn spontaneous_proportion(&self) -> Option<f64> {
        (self.n_events > 0).then(|| self.n_spontaneous as f64 / self.n_events as f64)
    }

    pub fn crime_count(&self, category: Option<CrimeCategory>) -> u64 {
        match category {
            None => self.crime_total,
            Some(CrimeCategory::Violent) => self.crime_violent,
            Some(CrimeCategory::NonViolent) => self.crime_nonviolent,
            Some(CrimeCategory::Vice) => self.crime_vice,
            Some(CrimeCategory::Other) => self.crime_total - self.crime_violent - self.crime_nonviolent - self.crime_vice,
        }
    }

    /// `ln(count)`; `None` for zero counts.
    pub fn log_crime(&self, category: Option<CrimeCategory>) -> Option<f64> {
        let c = self.crime_count(category);
        (c > 0).then(|| (c as f64).ln())
    }

    /// Yearly spontaneous proportion over years with at least one event.
    pub fn yearly_proportion(&self) -> BTreeMap<i32, f64> {
        self.yearly_events
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(y, &n)| (*y, self.yearly_spontaneous[y] as f64 / n as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTable {
    pub years: YearRange,
    pub rows: Vec<MeasureRow>,
    /// Events without a block group (or with one not in the table).
    pub unassigned_events: usize,
    pub unassigned_crimes: usize,
}

/// Aggregates assigned permits and crimes for the block groups in `ids`.
/// Counts span the whole input; yearly and monthly series cover `years`.
pub fn build_measure_table(
    ids: &[String],
    events: &[AssignedEvent],
    crimes: &[AssignedEvent],
    event_taxonomy: &EventTaxonomy,
    crime_taxonomy: &CrimeTaxonomy,
    years: YearRange,
) -> Result<MeasureTable, MeasureError> {
    let mut rows: Vec<MeasureRow> = ids.iter().map(|id| MeasureRow::empty(id, years)).collect();
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let find = |e: &AssignedEvent| e.blockgroup_id.as_deref().and_then(|id| pos.get(id).copied());

    let mut unassigned_events = 0;
    for e in events {
        let cat = event_taxonomy.classify(&e.raw_type)?;
        let Some(i) = find(e) else {
            unassigned_events += 1;
            continue;
        };
        let r = &mut rows[i];
        r.n_events += 1;
        let spont = cat == EventCategory::Spontaneous;
        if spont {
            r.n_spontaneous += 1;
        } else {
            r.n_regular += 1;
        }
        let (y, m) = (e.date.year(), e.date.month());
        if years.contains(y) {
            *r.yearly_events.get_mut(&y).expect("year in range") += 1;
            *r.monthly_events.entry((y, m)).or_default() += 1;
            if spont {
                *r.yearly_spontaneous.get_mut(&y).expect("year in range") += 1;
                *r.monthly_spontaneous.entry((y, m)).or_default() += 1;
            }
        }
    }

    let mut unassigned_crimes = 0;
    for c in crimes {
        let cat = crime_taxonomy.classify(&c.raw_type)?;
        let Some(i) = find(c) else {
            unassigned_crimes += 1;
            continue;
        };
        let r = &mut rows[i];
        r.crime_total += 1;
        match cat {
            CrimeCategory::Violent => r.crime_violent += 1,
            CrimeCategory::NonViolent => r.crime_nonviolent += 1,
            CrimeCategory::Vice => r.crime_vice += 1,
            CrimeCategory::Other => {}
        }
        let y = c.date.year();
        if years.contains(y) {
            *r.yearly_crimes.get_mut(&y).expect("year in range") += 1;
            *r.yearly_crimes_by_category.get_mut(&cat).and_then(|m| m.get_mut(&y)).expect("year in range") += 1;
        }
    }
    Ok(MeasureTable { years, rows, unassigned_events, unassigned_crimes })
}

impl MeasureTable {
    /// Per-block-group yearly series of a trend measure: [`PERMITS`],
    /// [`SPONTANEOUS`] (years without events omitted), [`CRIME_TOTAL`] or a
    /// per-category crime column.
    pub fn yearly(&self, measure: &str) -> Option<BTreeMap<String, BTreeMap<i32, f64>>> {
        let conv = |m: &BTreeMap<i32, u64>| m.iter().map(|(&y, &v)| (y, v as f64)).collect::<BTreeMap<i32, f64>>();
        let pick = |r: &MeasureRow| -> Option<BTreeMap<i32, f64>> {
            match measure {
                PERMITS => Some(conv(&r.yearly_events)),
                SPONTANEOUS => Some(r.yearly_proportion()),
                CRIME_TOTAL => Some(conv(&r.yearly_crimes)),
                other => CrimeCategory::ALL
                    .iter()
                    .find(|&&c| crime_column(Some(c)) == other)
                    .map(|c| conv(&r.yearly_crimes_by_category[c])),
            }
        };
        self.rows.iter().map(|r| pick(r).map(|s| (r.blockgroup_id.clone(), s))).collect()
    }

    /// Measures joined with profile covariates, one row per block group.
    /// Profiles without a measure row are ignored; measure rows without a
    /// profile get undefined covariates.
    pub fn to_table(&self, profiles: &[NeighborhoodProfile]) -> Table {
        let ids: Vec<String> = self.rows.iter().map(|r| r.blockgroup_id.clone()).collect();
        let mut t = Table::new(ids);
        let col = |f: &dyn Fn(&MeasureRow) -> Option<f64>| self.rows.iter().map(f).collect::<Vec<_>>();
        t.insert(PERMITS, col(&|r| Some(r.n_events as f64)));
        t.insert("n_spontaneous", col(&|r| Some(r.n_spontaneous as f64)));
        t.insert("n_regular", col(&|r| Some(r.n_regular as f64)));
        t.insert(SPONTANEOUS, col(&|r| r.spontaneous_proportion()));
        for cat in [None, Some(CrimeCategory::Violent), Some(CrimeCategory::NonViolent), Some(CrimeCategory::Vice)] {
            t.insert(crime_column(cat), col(&|r| Some(r.crime_count(cat) as f64)));
            t.insert(log_crime_column(cat), col(&|r| r.log_crime(cat)));
        }
        let by_id: HashMap<&str, &NeighborhoodProfile> = profiles.iter().map(|p| (p.blockgroup_id.as_str(), p)).collect();
        let names: Vec<&'static str> = profiles.first().map_or_else(Vec::new, |p| p.fields().iter().map(|f| f.0).collect());
        for (k, name) in names.iter().enumerate() {
            t.insert(*name, col(&|r| by_id.get(r.blockgroup_id.as_str()).map(|p| p.fields()[k].1)));
        }
        t
    }
}

/// City-wide count per calendar year of assigned events passing `filter`;
/// every year in range is present.
pub fn yearly_series(events: &[AssignedEvent], years: YearRange, filter: impl Fn(&AssignedEvent) -> bool) -> BTreeMap<i32, u64> {
    let mut out = years.zeros(|y| y);
    for e in events.iter().filter(|e| e.blockgroup_id.is_some() && filter(e)) {
        if let Some(v) = out.get_mut(&e.date.year()) {
            *v += 1;
        }
    }
    out
}

/// City-wide count per (year, month); every month in range is present.
pub fn monthly_series(events: &[AssignedEvent], years: YearRange, filter: impl Fn(&AssignedEvent) -> bool) -> BTreeMap<(i32, u32), u64> {
    let mut out: BTreeMap<(i32, u32), u64> = years.years().flat_map(|y| (1..=12).map(move |m| ((y, m), 0))).collect();
    for e in events.iter().filter(|e| e.blockgroup_id.is_some() && filter(e)) {
        if let Some(v) = out.get_mut(&(e.date.year(), e.date.month())) {
            *v += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// `None` where a column is constant or absent, or fewer than two rows
    /// have both values.
    pub values: Vec<Vec<Option<f64>>>,
}

/// Pearson correlation over rows where both values are defined.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Symmetric pairwise-complete correlation matrix of the named columns.
pub fn correlation_matrix(table: &Table, columns: &[String]) -> CorrelationMatrix {
    let k = columns.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let (Some(a), Some(b)) = (table.column(&columns[i]), table.column(&columns[j])) else {
                continue;
            };
            let (x, y): (Vec<f64>, Vec<f64>) = a.iter().zip(b).filter_map(|(p, q)| Some(((*p)?, (*q)?))).unzip();
            let r = pearson(&x, &y).map(|r| if i == j { 1.0 } else { r });
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    CorrelationMatrix { names: columns.to_vec(), values }
}
